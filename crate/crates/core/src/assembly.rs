//! Global numbering, saddle-point assembly, Dirichlet data and the solve.
//!
//! Global unknowns: two velocity components per mesh vertex (`2v`, `2v + 1`),
//! one normal flux per mesh edge (`2 N_v + e`, measured along the edge's
//! global normal, see [`crate::mesh::Edge`]), one pressure per cell and one
//! multiplier for the zero-mean pressure constraint.
//!
//! The system is solved in viscosity-scaled form
//!
//! ```text
//!   [ A   Bᵀ  0 ] [ u   ]   [ F / nu ]
//!   [ B   0   m ] [ p/nu] = [ 0      ]
//!   [ 0   mᵀ  0 ] [ λ   ]   [ 0      ]
//! ```
//!
//! with `A` the viscosity-free form, so the matrix does not depend on `nu`.

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Point2, PolygonalMesh};
use crate::quadrature::{integrate_segment, IntegrationOptions};
use crate::reconstruction::{build_reconstruction, standard_load_vector, RtReconstruction};
use crate::solver::{self, CsrMatrix};
use crate::vem::{local_forms, LocalForms, ProjectorPack};

pub type VectorField = Arc<dyn Fn(Point2) -> Point2 + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(Point2) -> f64 + Send + Sync>;

/// Element-wise constant inverse permeability `κ⁻¹` (0 for pure Stokes).
#[derive(Clone)]
pub enum InversePermeability {
    Constant(f64),
    PerCell(Vec<f64>),
    /// Sampled at the cell centroid.
    Function(ScalarField),
}

impl InversePermeability {
    /// From a permeability `κ > 0`; `κ = ∞` gives `κ⁻¹ = 0`.
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "permeability must be positive, got {kappa}"
            )));
        }
        Ok(Self::Constant(1.0 / kappa))
    }

    pub fn cell_value(&self, cell: usize, centroid: Point2) -> f64 {
        match self {
            Self::Constant(k) => *k,
            Self::PerCell(v) => v[cell],
            Self::Function(f) => f(centroid),
        }
    }
}

impl std::fmt::Debug for InversePermeability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(k) => write!(f, "Constant({k})"),
            Self::PerCell(v) => write!(f, "PerCell({} cells)", v.len()),
            Self::Function(_) => write!(f, "Function"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RhsMode {
    /// Load tested against the Raviart–Thomas reconstruction.
    #[default]
    Robust,
    /// Load tested against the element L² projection.
    Standard,
}

#[derive(Clone)]
pub struct ProblemData {
    pub nu: f64,
    pub kappa_inv: InversePermeability,
    pub force: VectorField,
    /// Dirichlet velocity on the whole boundary.
    pub boundary: VectorField,
    pub rhs_mode: RhsMode,
    pub quadrature: IntegrationOptions,
}

impl ProblemData {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "viscosity must be positive, got {}",
                self.nu
            )));
        }
        IntegrationOptions::new(self.quadrature.degree, self.quadrature.adaptive)?;
        Ok(())
    }
}

/// Global numbering of the unknowns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalDofMap {
    pub n_vertices: usize,
    pub n_edges: usize,
    pub n_cells: usize,
}

impl GlobalDofMap {
    pub fn new(mesh: &PolygonalMesh) -> Self {
        Self {
            n_vertices: mesh.n_vertices(),
            n_edges: mesh.n_edges(),
            n_cells: mesh.n_cells(),
        }
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.n_vertices + self.n_edges
    }

    pub fn vertex(&self, v: usize, component: usize) -> usize {
        2 * v + component
    }

    pub fn edge(&self, e: usize) -> usize {
        2 * self.n_vertices + e
    }

    pub fn pressure(&self, c: usize) -> usize {
        self.n_velocity() + c
    }

    pub fn multiplier(&self) -> usize {
        self.n_velocity() + self.n_cells
    }

    pub fn n_total(&self) -> usize {
        self.n_velocity() + self.n_cells + 1
    }

    /// Global indices of the local degrees of freedom of `cell` and the
    /// factors (±1) converting global values to element-outward ones.
    pub fn local_to_global(&self, mesh: &PolygonalMesh, cell: usize) -> (Vec<usize>, Vec<f64>) {
        let verts = mesh.cell(cell);
        let n = verts.len();
        let mut idx = Vec::with_capacity(3 * n);
        let mut sign = Vec::with_capacity(3 * n);
        for &v in verts {
            idx.extend([self.vertex(v, 0), self.vertex(v, 1)]);
            sign.extend([1.0, 1.0]);
        }
        for oe in mesh.cell_edges(cell) {
            idx.push(self.edge(oe.edge));
            sign.push(oe.sign);
        }
        (idx, sign)
    }

    /// Velocity unknowns on the boundary, sorted.
    pub fn boundary_dofs(&self, mesh: &PolygonalMesh) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.n_vertices)
            .filter(|&v| mesh.is_boundary_vertex(v))
            .flat_map(|v| [self.vertex(v, 0), self.vertex(v, 1)])
            .chain(mesh.boundary_edges().map(|e| self.edge(e)))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Everything element-local that depends only on the mesh and `κ`.
#[derive(Clone, Debug)]
pub struct ElementData {
    pub pack: ProjectorPack,
    pub forms: LocalForms,
    pub recon: RtReconstruction,
    pub kappa_inv: f64,
    pub global: Vec<usize>,
    pub signs: Vec<f64>,
}

impl ElementData {
    /// Local (element-outward) degrees of freedom from a global velocity vector.
    pub fn local_dofs(&self, velocity: &[f64]) -> Vec<f64> {
        self.global
            .iter()
            .zip(&self.signs)
            .map(|(&g, s)| s * velocity[g])
            .collect()
    }
}

/// A mesh with its element matrices.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub mesh: PolygonalMesh,
    pub dof_map: GlobalDofMap,
    pub elements: Vec<ElementData>,
}

impl Discretization {
    pub fn new(mesh: PolygonalMesh, kappa_inv: &InversePermeability) -> Result<Self> {
        let dof_map = GlobalDofMap::new(&mesh);
        let elements = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let tag = |e: Error| match e {
                    Error::Element { reason, .. } => Error::Element { cell: c, reason },
                    other => other,
                };
                let geometry = mesh.element_geometry(c);
                let kinv = kappa_inv.cell_value(c, geometry.centroid);
                let sub = geometry.fan().map_err(tag)?;
                let pack = ProjectorPack::new(geometry).map_err(tag)?;
                let forms = local_forms(&pack, kinv).map_err(tag)?;
                let recon = build_reconstruction(&pack, sub).map_err(tag)?;
                let (global, signs) = dof_map.local_to_global(&mesh, c);
                Ok(ElementData {
                    pack,
                    forms,
                    recon,
                    kappa_inv: kinv,
                    global,
                    signs,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mesh,
            dof_map,
            elements,
        })
    }

    /// Element load vector for the given mode.
    pub fn element_load(
        &self,
        c: usize,
        mode: RhsMode,
        opts: IntegrationOptions,
        f: &(dyn Fn(Point2) -> Point2 + Sync),
    ) -> DVector<f64> {
        let el = &self.elements[c];
        match mode {
            RhsMode::Robust => el.recon.load_vector(opts, f),
            RhsMode::Standard => standard_load_vector(&el.pack, &el.recon.sub, opts, f),
        }
    }

    /// Global load vector `(f, R_h φ)` or `(f, Π0 φ)` over the velocity unknowns.
    pub fn load_vector(
        &self,
        mode: RhsMode,
        opts: IntegrationOptions,
        f: &(dyn Fn(Point2) -> Point2 + Sync),
    ) -> Vec<f64> {
        let locals: Vec<DVector<f64>> = (0..self.elements.len())
            .into_par_iter()
            .map(|c| self.element_load(c, mode, opts, f))
            .collect();
        let mut out = vec![0.0; self.dof_map.n_velocity()];
        for (el, l) in self.elements.iter().zip(locals) {
            for (k, (&g, s)) in el.global.iter().zip(&el.signs).enumerate() {
                out[g] += s * l[k];
            }
        }
        out
    }

    /// Constant divergence of the discrete velocity on every cell.
    pub fn divergence_field(&self, velocity: &[f64]) -> Vec<f64> {
        self.elements
            .iter()
            .map(|el| el.pack.divergence(&el.local_dofs(velocity)))
            .collect()
    }

    /// Degrees of freedom of a given field (vertex values and mean fluxes
    /// along the global edge normals).
    pub fn interpolate(
        &self,
        opts: IntegrationOptions,
        u: &(dyn Fn(Point2) -> Point2 + Sync),
    ) -> Vec<f64> {
        let m = &self.mesh;
        let mut out = vec![0.0; self.dof_map.n_velocity()];
        for v in 0..m.n_vertices() {
            let val = u(m.vertex(v));
            out[self.dof_map.vertex(v, 0)] = val.x;
            out[self.dof_map.vertex(v, 1)] = val.y;
        }
        let fluxes: Vec<f64> = (0..m.n_edges())
            .into_par_iter()
            .map(|e| edge_mean_flux(m, e, opts, u))
            .collect();
        for (e, f) in fluxes.into_iter().enumerate() {
            out[self.dof_map.edge(e)] = f;
        }
        out
    }
}

fn edge_mean_flux(
    m: &PolygonalMesh,
    e: usize,
    opts: IntegrationOptions,
    u: &(dyn Fn(Point2) -> Point2 + Sync),
) -> f64 {
    let [a, b] = m.edges()[e].vertices;
    let n = m.edge_normal(e);
    integrate_segment(m.vertex(a), m.vertex(b), opts, |p| [u(p).dot(n)])[0] / m.edge_length(e)
}

/// Assembled, not yet constrained, system.
pub struct SparseSystem {
    pub dof_map: GlobalDofMap,
    /// Viscosity-free velocity block as `(row, col, value)` triplets.
    pub a: Vec<(usize, usize, f64)>,
    /// Divergence block as `(cell, velocity dof, value)` triplets.
    pub b: Vec<(usize, usize, f64)>,
    /// Cell areas (zero-mean constraint).
    pub m: Vec<f64>,
    /// Load vector over the velocity unknowns.
    pub load: Vec<f64>,
    pub nu: f64,
}

impl SparseSystem {
    /// `‖A - Aᵀ‖∞ / ‖A‖∞` of the velocity block.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dof_map.n_velocity();
        let a = CsrMatrix::from_triplets(n, self.a.clone());
        let transposed = self.a.iter().map(|&(i, j, v)| (j, i, -v));
        let diff = CsrMatrix::from_triplets(n, self.a.iter().copied().chain(transposed).collect());
        diff.max_abs() / a.max_abs()
    }
}

pub fn assemble(disc: &Discretization, data: &ProblemData) -> Result<SparseSystem> {
    data.validate()?;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (c, el) in disc.elements.iter().enumerate() {
        let nd = el.global.len();
        for k in 0..nd {
            for l in 0..nd {
                let v = el.forms.a[(k, l)];
                if v != 0.0 {
                    a.push((el.global[k], el.global[l], el.signs[k] * el.signs[l] * v));
                }
            }
            let v = el.forms.b[k];
            if v != 0.0 {
                b.push((c, el.global[k], el.signs[k] * v));
            }
        }
    }
    let load = disc.load_vector(data.rhs_mode, data.quadrature, data.force.as_ref());
    Ok(SparseSystem {
        dof_map: disc.dof_map.clone(),
        a,
        b,
        m: disc
            .elements
            .iter()
            .map(|el| el.pack.geometry.area)
            .collect(),
        load,
        nu: data.nu,
    })
}

/// Boundary values of the velocity unknowns.
#[derive(Clone, Debug)]
pub struct DirichletData {
    /// Sorted boundary unknowns.
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
    /// `∮ g·n` before correction.
    pub net_flux: f64,
}

/// Boundary unknowns from `g`: vertex values and Gauss-integrated mean
/// normal fluxes. The small net outflow left by quadrature is removed
/// uniformly per unit length; data whose net flux exceeds
/// `1e-8 · |∂Ω| · ‖g‖∞` is rejected.
pub fn dirichlet_data(
    mesh: &PolygonalMesh,
    dof_map: &GlobalDofMap,
    g: &(dyn Fn(Point2) -> Point2 + Sync),
    opts: IntegrationOptions,
) -> Result<DirichletData> {
    let mut values = vec![0.0; dof_map.n_velocity()];
    let mut gmax: f64 = 0.0;
    for v in (0..mesh.n_vertices()).filter(|&v| mesh.is_boundary_vertex(v)) {
        let val = g(mesh.vertex(v));
        values[dof_map.vertex(v, 0)] = val.x;
        values[dof_map.vertex(v, 1)] = val.y;
        gmax = gmax.max(val.x.abs()).max(val.y.abs());
    }
    let boundary: Vec<usize> = mesh.boundary_edges().collect();
    let mut perimeter = 0.0;
    let mut net = 0.0;
    // outward orientation of each boundary edge
    let outward: Vec<f64> = boundary
        .iter()
        .map(|&e| {
            if mesh.edges()[e].left.is_some() {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    for (&e, s) in boundary.iter().zip(&outward) {
        let mean = edge_mean_flux(mesh, e, opts, g);
        let [p, q] = mesh.edges()[e].vertices;
        let mid = g((mesh.vertex(p) + mesh.vertex(q)) * 0.5);
        gmax = gmax.max(mid.x.abs()).max(mid.y.abs());
        values[dof_map.edge(e)] = mean;
        let len = mesh.edge_length(e);
        perimeter += len;
        net += s * mean * len;
    }
    let limit = 1e-8 * perimeter * gmax;
    if net.abs() > limit {
        return Err(Error::IncompatibleBoundary { flux: net, limit });
    }
    let delta = net / perimeter;
    for (&e, s) in boundary.iter().zip(&outward) {
        values[dof_map.edge(e)] -= s * delta;
    }
    let dofs = dof_map.boundary_dofs(mesh);
    let values = dofs.iter().map(|&d| values[d]).collect();
    Ok(DirichletData {
        dofs,
        values,
        net_flux: net,
    })
}

/// Dirichlet-constrained, viscosity-scaled system over the free unknowns.
pub struct ReducedSystem {
    matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Global velocity unknown of each free velocity row.
    pub free: Vec<usize>,
    pub dirichlet: DirichletData,
    pub dof_map: GlobalDofMap,
    pub nu: f64,
    areas: Vec<f64>,
}

impl ReducedSystem {
    pub fn size(&self) -> usize {
        self.matrix.n
    }
}

pub fn apply_dirichlet(system: &SparseSystem, dirichlet: DirichletData) -> Result<ReducedSystem> {
    let dm = &system.dof_map;
    let nv = dm.n_velocity();
    let nc = dm.n_cells;
    let mut fixed = vec![None; nv];
    for (&d, &v) in dirichlet.dofs.iter().zip(&dirichlet.values) {
        fixed[d] = Some(v);
    }
    let mut reduced = vec![usize::MAX; nv];
    let mut free = Vec::new();
    for d in 0..nv {
        if fixed[d].is_none() {
            reduced[d] = free.len();
            free.push(d);
        }
    }
    let nf = free.len();
    let inv_nu = 1.0 / system.nu;
    let mut rhs = vec![0.0; nf + nc + 1];
    for (r, &d) in free.iter().enumerate() {
        rhs[r] = system.load[d] * inv_nu;
    }
    let mut t = Vec::with_capacity(system.a.len() + 2 * system.b.len() + 2 * nc);
    for &(i, j, v) in &system.a {
        let ri = reduced[i];
        if ri == usize::MAX {
            continue;
        }
        match fixed[j] {
            Some(gv) => rhs[ri] -= v * gv,
            None => t.push((ri, reduced[j], v)),
        }
    }
    for &(c, j, v) in &system.b {
        let rc = nf + c;
        match fixed[j] {
            Some(gv) => rhs[rc] -= v * gv,
            None => {
                t.push((rc, reduced[j], v));
                t.push((reduced[j], rc, v));
            }
        }
    }
    let mult = nf + nc;
    for (c, &m) in system.m.iter().enumerate() {
        t.push((nf + c, mult, m));
        t.push((mult, nf + c, m));
    }
    Ok(ReducedSystem {
        matrix: CsrMatrix::from_triplets(nf + nc + 1, t),
        rhs,
        free,
        dirichlet,
        dof_map: dm.clone(),
        nu: system.nu,
        areas: system.m.clone(),
    })
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    /// All velocity unknowns, boundary values included.
    pub velocity: Vec<f64>,
    /// Cell pressures with zero mean.
    pub pressure: Vec<f64>,
    pub multiplier: f64,
    /// Relative residual of the scaled system.
    pub residual: f64,
}

pub fn solve(system: &ReducedSystem) -> Result<SolveResult> {
    let sol = solver::solve(&system.matrix, &system.rhs)?;
    if !(sol.relative_residual <= 1e-10) {
        return Err(Error::Solver(format!(
            "relative residual {:.3e} above tolerance",
            sol.relative_residual
        )));
    }
    let dm = &system.dof_map;
    let nf = system.free.len();
    let mut velocity = vec![0.0; dm.n_velocity()];
    for (r, &d) in system.free.iter().enumerate() {
        velocity[d] = sol.x[r];
    }
    for (&d, &v) in system.dirichlet.dofs.iter().zip(&system.dirichlet.values) {
        velocity[d] = v;
    }
    let mut pressure: Vec<f64> = sol.x[nf..nf + dm.n_cells]
        .iter()
        .map(|q| q * system.nu)
        .collect();
    if !velocity.iter().chain(&pressure).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("discrete solution".into()));
    }
    let total: f64 = system.areas.iter().sum();
    let mean = pressure
        .iter()
        .zip(&system.areas)
        .map(|(p, a)| p * a)
        .sum::<f64>()
        / total;
    for p in &mut pressure {
        *p -= mean;
    }
    Ok(SolveResult {
        velocity,
        pressure,
        multiplier: sol.x[nf + dm.n_cells],
        residual: sol.relative_residual,
    })
}

/// Assembles, constrains and solves on the given discretization.
pub fn solve_problem(disc: &Discretization, data: &ProblemData) -> Result<SolveResult> {
    let system = assemble(disc, data)?;
    let dir = dirichlet_data(
        &disc.mesh,
        &disc.dof_map,
        data.boundary.as_ref(),
        data.quadrature,
    )?;
    solve(&apply_dirichlet(&system, dir)?)
}
