use thiserror::Error;

/// Errors raised by mesh handling, discretization and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cell {cell} references vertex {index}, but the mesh has {n_vertices} vertices")]
    IndexOutOfRange {
        cell: usize,
        index: usize,
        n_vertices: usize,
    },
    #[error("cell {cell} is degenerate: {reason}")]
    DegenerateCell { cell: usize, reason: String },
    #[error("edge ({0}, {1}) is shared by more than two cells or inconsistently oriented")]
    NonManifoldEdge(usize, usize),
    #[error("malformed mesh file: {0}")]
    MeshFormat(String),
    #[error("unsupported quadrature: {0}")]
    UnsupportedQuadrature(String),
    #[error("element {cell}: {reason}")]
    Element { cell: usize, reason: String },
    #[error("refinement produced cell of area {area:e} (limit {limit:e})")]
    RefinementDegenerate { area: f64, limit: f64 },
    #[error("incompatible Dirichlet data: net boundary flux {flux:e} exceeds {limit:e}")]
    IncompatibleBoundary { flux: f64, limit: f64 },
    #[error("linear solver failure: {0}")]
    Solver(String),
    #[error("non-finite {0} (data outside the floating-point range?)")]
    NonFinite(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown case '{0}'")]
    UnknownCase(String),
    #[error("kappa raster: {0}")]
    Raster(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
