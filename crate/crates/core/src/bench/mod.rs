//! Manufactured solutions, error norms, convergence studies and exports.

mod cases;
mod export;
mod raster;
mod study;

use std::sync::Arc;

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::assembly::{Discretization, ScalarField, SolveResult, VectorField};
use crate::error::Result;
use crate::mesh::Point2;
use crate::quadrature::{integrate_polygon, IntegrationOptions};
use crate::vem::Projection;

pub use cases::{case_registry, CaseParams, ManufacturedCase, MeshFamily, CASE_NAMES};
pub use export::{export_vtk, read_csv, table_to_csv, trace_to_csv, write_csv, CsvTable};
pub use raster::KappaRaster;
pub use study::{
    adaptive_study, fit_slope, solve_row, uniform_study, AdaptiveStudy, ConvergenceRow,
    ConvergenceTable, StudyOptions,
};

/// Closed-form velocity, velocity gradient and pressure.
#[derive(Clone)]
pub struct ExactSolution {
    pub velocity: VectorField,
    /// `[[∂x u_x, ∂y u_x], [∂x u_y, ∂y u_y]]`.
    pub gradient: Arc<dyn Fn(Point2) -> Matrix2<f64> + Send + Sync>,
    pub pressure: ScalarField,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorReport {
    /// `(Σ_E ‖∇u - ∇Π∇u_h‖² + ‖κ^{-1/2}(u - Π0u_h)‖²)^{1/2}`.
    pub err_u: f64,
    /// `‖p - p_h‖`.
    pub err_p: f64,
    /// Largest element diameter.
    pub h: f64,
    pub dofs: usize,
}

impl ErrorReport {
    /// `(ν² err_u² + err_p²)^{1/2}`.
    pub fn total(&self, nu: f64) -> f64 {
        (nu * self.err_u).hypot(self.err_p)
    }
}

/// Errors of the projected discrete velocity and of the pressure, by degree 6
/// quadrature on every sub-triangle (subdivided when `quadrature.adaptive`).
pub fn compute_errors(
    disc: &Discretization,
    result: &SolveResult,
    exact: &ExactSolution,
    quadrature: IntegrationOptions,
) -> Result<ErrorReport> {
    let opts = IntegrationOptions::new(6, quadrature.adaptive)?;
    let parts: Vec<[f64; 2]> = disc
        .elements
        .par_iter()
        .enumerate()
        .map(|(c, el)| {
            let d = el.local_dofs(&result.velocity);
            let g = el
                .pack
                .gradient(&el.pack.coefficients(Projection::Nabla, &d));
            let c0 = el.pack.coefficients(Projection::Zero, &d);
            let ph = result.pressure[c];
            integrate_polygon(&el.recon.sub, opts, |x| {
                let dg = (exact.gradient)(x) - g;
                let du = (exact.velocity)(x) - el.pack.eval(&c0, x);
                let dp = (exact.pressure)(x) - ph;
                [dg.norm_squared() + el.kappa_inv * du.dot(du), dp * dp]
            })
        })
        .collect();
    let (u2, p2) = parts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + p[0], a.1 + p[1]));
    if !(u2.is_finite() && p2.is_finite()) {
        return Err(crate::Error::NonFinite("error norms".into()));
    }
    let m = &disc.mesh;
    Ok(ErrorReport {
        err_u: u2.sqrt(),
        err_p: p2.sqrt(),
        h: m.max_diameter(),
        dofs: 2 * m.n_vertices() + m.n_edges() + m.n_cells(),
    })
}
