//! Residual error estimator, Dörfler marking and the adaptive loop.
//!
//! Per element the squared estimator is the sum of
//!
//! ```text
//!   η_f² = h_E² ‖f‖²_E
//!   η_S² = ν² (S∇((I - Π∇)u_h) + S0((I - Π0)u_h))
//!   η_r² = ν² h_E² ‖κ⁻¹ Π0 u_h‖²_E + ½ Σ_e h_e ‖[ν ∇Π∇u_h - p_h I] n_e‖²_e
//! ```
//!
//! where the sum runs over the interior edges of `E`. Hanging nodes are
//! ordinary polygon vertices, so every mesh edge is already the finest
//! common piece of the two cells it separates.

use std::time::Instant;

use nalgebra::{DVector, Matrix2};
use rayon::prelude::*;

use crate::assembly::{
    solve_problem, Discretization, InversePermeability, ProblemData, SolveResult,
};
use crate::bench::{compute_errors, ErrorReport, ExactSolution};
use crate::error::{Error, Result};
use crate::mesh::{refine_cells, Point2, PolygonalMesh};
use crate::quadrature::integrate_polygon_scalar;
use crate::vem::Projection;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElementEstimate {
    pub eta_f_sq: f64,
    pub eta_s_sq: f64,
    pub eta_r_sq: f64,
    pub eta_sq: f64,
}

/// Traction jump across one interior edge, measured along the edge's global
/// normal (pointing out of the left cell).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeJump {
    pub edge: usize,
    pub length: f64,
    pub jump: Point2,
}

impl EdgeJump {
    /// `h_e ‖J_e‖²_e = h_e² |J_e|²`, since the jump is constant on the edge.
    pub fn weighted_sq(&self) -> f64 {
        self.length * self.length * self.jump.dot(self.jump)
    }
}

#[derive(Clone, Debug)]
pub struct Estimate {
    pub elements: Vec<ElementEstimate>,
    pub jumps: Vec<EdgeJump>,
}

impl Estimate {
    /// Global `η = (Σ_E η_E²)^{1/2}`.
    pub fn eta(&self) -> f64 {
        self.eta_sq().sqrt()
    }

    pub fn eta_sq(&self) -> f64 {
        self.elements.iter().map(|e| e.eta_sq).sum()
    }

    /// Sums of the three squared components over all elements.
    pub fn component_sums(&self) -> [f64; 3] {
        self.elements.iter().fold([0.0; 3], |acc, e| {
            [
                acc[0] + e.eta_f_sq,
                acc[1] + e.eta_s_sq,
                acc[2] + e.eta_r_sq,
            ]
        })
    }

    pub fn eta_sq_per_cell(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.eta_sq).collect()
    }
}

/// `(ν G_L - p_L I) n - (ν G_R - p_R I) n`.
pub fn jump_vector(
    nu: f64,
    left: (&Matrix2<f64>, f64),
    right: (&Matrix2<f64>, f64),
    normal: Point2,
) -> Point2 {
    let traction = |g: &Matrix2<f64>, p: f64| {
        Point2::new(
            nu * (g[(0, 0)] * normal.x + g[(0, 1)] * normal.y) - p * normal.x,
            nu * (g[(1, 0)] * normal.x + g[(1, 1)] * normal.y) - p * normal.y,
        )
    };
    traction(left.0, left.1) - traction(right.0, right.1)
}

fn nabla_gradients(disc: &Discretization, result: &SolveResult) -> Vec<Matrix2<f64>> {
    disc.elements
        .par_iter()
        .map(|el| {
            let d = el.local_dofs(&result.velocity);
            el.pack
                .gradient(&el.pack.coefficients(Projection::Nabla, &d))
        })
        .collect()
}

fn jumps_from(
    disc: &Discretization,
    result: &SolveResult,
    nu: f64,
    grads: &[Matrix2<f64>],
) -> Vec<EdgeJump> {
    let m = &disc.mesh;
    (0..m.n_edges())
        .into_par_iter()
        .filter_map(|e| {
            let edge = &m.edges()[e];
            let (l, r) = (edge.left?, edge.right?);
            Some(EdgeJump {
                edge: e,
                length: m.edge_length(e),
                jump: jump_vector(
                    nu,
                    (&grads[l], result.pressure[l]),
                    (&grads[r], result.pressure[r]),
                    m.edge_normal(e),
                ),
            })
        })
        .collect()
}

/// Jumps of the discrete traction on all interior edges.
pub fn edge_jumps(disc: &Discretization, result: &SolveResult, nu: f64) -> Vec<EdgeJump> {
    jumps_from(disc, result, nu, &nabla_gradients(disc, result))
}

pub fn estimate(
    disc: &Discretization,
    result: &SolveResult,
    data: &ProblemData,
) -> Result<Estimate> {
    data.validate()?;
    let nu = data.nu;
    let grads = nabla_gradients(disc, result);
    let jumps = jumps_from(disc, result, nu, &grads);
    let mut jump_sum = vec![0.0; disc.mesh.n_cells()];
    for j in &jumps {
        for c in disc.mesh.edges()[j.edge].cells() {
            jump_sum[c] += 0.5 * j.weighted_sq();
        }
    }
    let opts = data.quadrature;
    let elements = disc
        .elements
        .par_iter()
        .zip(jump_sum)
        .map(|(el, jump)| {
            let h = el.pack.geometry.diameter;
            let sub = &el.recon.sub;
            let f_sq = integrate_polygon_scalar(sub, opts, |p| {
                let f = (data.force)(p);
                f.dot(f)
            });
            let d = el.local_dofs(&result.velocity);
            // dofi-dofi stabilization of d = dofs(u_h) - dofs(Π u_h); forming
            // dᵀ S d from the residual vectors avoids cancellation in the
            // assembled stabilization matrices
            let dv = DVector::from_column_slice(&d);
            let cn = DVector::from_row_slice(&el.pack.coefficients(Projection::Nabla, &d));
            let c0 = el.pack.coefficients(Projection::Zero, &d);
            let rn = &dv - &el.pack.basis_dofs * cn;
            let r0 = &dv - &el.pack.basis_dofs * DVector::from_row_slice(&c0);
            let eta_s_sq = nu
                * nu
                * (rn.norm_squared() + el.pack.geometry.area * el.kappa_inv * r0.norm_squared());
            // P1 squared: the degree-2 content is integrated exactly
            let mass = integrate_polygon_scalar(sub, Default::default(), |p| {
                let v = el.pack.eval(&c0, p);
                v.dot(v)
            });
            let eta_f_sq = h * h * f_sq;
            let eta_r_sq = nu * nu * h * h * el.kappa_inv * el.kappa_inv * mass + jump;
            ElementEstimate {
                eta_f_sq,
                eta_s_sq,
                eta_r_sq,
                eta_sq: eta_f_sq + eta_s_sq + eta_r_sq,
            }
        })
        .collect::<Vec<ElementEstimate>>();
    if !elements.iter().all(|e| e.eta_sq.is_finite()) {
        return Err(Error::NonFinite("error estimator".into()));
    }
    Ok(Estimate { elements, jumps })
}

/// Smallest set of cells carrying at least `delta` of the total squared
/// estimator. Cells are taken by decreasing `η_E²`, ties by index.
pub fn dorfler_mark(eta_sq: &[f64], delta: f64) -> Result<Vec<usize>> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "marking parameter must lie in (0, 1), got {delta}"
        )));
    }
    if let Some(bad) = eta_sq.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "estimator value {bad} is not a finite non-negative number"
        )));
    }
    let total: f64 = eta_sq.iter().sum();
    if total == 0.0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..eta_sq.len()).collect();
    order.sort_by(|&a, &b| eta_sq[b].total_cmp(&eta_sq[a]).then(a.cmp(&b)));
    let target = delta * total;
    let (mut sum, mut before_last) = (0.0, 0.0);
    let mut marked = Vec::new();
    for c in order {
        if sum >= target {
            break;
        }
        before_last = sum;
        sum += eta_sq[c];
        marked.push(c);
    }
    // any smaller set has a smaller sum than the prefix without the last cell
    assert!(
        before_last < target && sum >= target,
        "Dörfler set is not minimal: {before_last} without the last cell, target {target}"
    );
    Ok(marked)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveConfig {
    pub delta: f64,
    pub max_iterations: usize,
    /// Stop once the mesh has at least this many vertices.
    pub dof_tolerance: usize,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            delta: 0.4,
            max_iterations: 20,
            dof_tolerance: 10_000,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "marking parameter must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "at least one iteration is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub iteration: usize,
    pub n_cells: usize,
    pub n_vertices: usize,
    /// Largest element diameter.
    pub h: f64,
    /// Velocity plus pressure unknowns, `2 N_v + N_e + N_c`.
    pub dofs: usize,
    pub eta: f64,
    pub eta_f: f64,
    pub eta_s: f64,
    pub eta_r: f64,
    pub errors: Option<ErrorReport>,
    pub effectivity: Option<f64>,
    pub marked: usize,
    pub marked_centroids: Vec<Point2>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct AdaptiveTrace {
    pub records: Vec<TraceRecord>,
    /// Set when a later iteration failed; the records before it are kept.
    pub failure: Option<String>,
    pub final_mesh: Option<PolygonalMesh>,
}

/// `(η² / (Err_u² + Err_p²))^{1/2}` with `Err_u = ν ⦀u - u_h⦀`.
pub fn effectivity(eta: f64, nu: f64, errors: &ErrorReport) -> Result<f64> {
    let denom = errors.total(nu);
    if !(denom > 0.0) {
        return Err(Error::InvalidParameter(
            "effectivity undefined for zero error".into(),
        ));
    }
    Ok(eta / denom)
}

/// Solve, estimate, mark and refine until `max_iterations` records exist,
/// the mesh reaches `dof_tolerance` vertices or the estimator vanishes.
/// Every iteration marks, so the last record also lists its marked cells.
pub fn adaptive_loop(
    mesh0: PolygonalMesh,
    data: &ProblemData,
    config: &AdaptiveConfig,
    exact: Option<&ExactSolution>,
) -> Result<AdaptiveTrace> {
    data.validate()?;
    config.validate()?;
    if matches!(data.kappa_inv, InversePermeability::PerCell(_)) {
        return Err(Error::InvalidParameter(
            "per-cell permeability cannot follow refinement; use a constant or a field".into(),
        ));
    }
    let mut trace = AdaptiveTrace::default();
    let mut mesh = mesh0;
    for iteration in 0..config.max_iterations {
        let start = Instant::now();
        let step = (|| -> Result<_> {
            let disc = Discretization::new(mesh.clone(), &data.kappa_inv)?;
            let result = solve_problem(&disc, data)?;
            let est = estimate(&disc, &result, data)?;
            let errors = exact
                .map(|x| compute_errors(&disc, &result, x, data.quadrature))
                .transpose()?;
            Ok((est, errors))
        })();
        let (est, errors) = match step {
            Ok(s) => s,
            Err(e) if !trace.records.is_empty() => {
                log::warn!("adaptive loop stopped at iteration {iteration}: {e}");
                trace.failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let eta = est.eta();
        let marked = dorfler_mark(&est.eta_sq_per_cell(), config.delta)?;
        let [f, s, r] = est.component_sums();
        let effectivity = errors
            .as_ref()
            .and_then(|e| effectivity(eta, data.nu, e).ok());
        let stop = iteration + 1 == config.max_iterations
            || mesh.n_vertices() >= config.dof_tolerance
            || marked.is_empty();
        trace.records.push(TraceRecord {
            iteration,
            n_cells: mesh.n_cells(),
            n_vertices: mesh.n_vertices(),
            h: mesh.max_diameter(),
            dofs: 2 * mesh.n_vertices() + mesh.n_edges() + mesh.n_cells(),
            eta,
            eta_f: f.sqrt(),
            eta_s: s.sqrt(),
            eta_r: r.sqrt(),
            errors,
            effectivity,
            marked: marked.len(),
            marked_centroids: marked
                .iter()
                .map(|&c| mesh.element_geometry(c).centroid)
                .collect(),
            seconds: start.elapsed().as_secs_f64(),
        });
        log::info!(
            "iteration {iteration}: {} cells, eta = {eta:.4e}, {} marked",
            mesh.n_cells(),
            marked.len()
        );
        if stop {
            break;
        }
        match refine_cells(&mesh, &marked) {
            Ok(m) => mesh = m,
            Err(e) => {
                trace.failure = Some(e.to_string());
                break;
            }
        }
    }
    trace.final_mesh = Some(mesh);
    Ok(trace)
}
