use std::time::Instant;

use super::{compute_errors, ManufacturedCase, MeshFamily};
use crate::assembly::{solve_problem, Discretization, RhsMode};
use crate::error::{Error, Result};
use crate::estimate::{adaptive_loop, estimate, AdaptiveConfig, AdaptiveTrace};
use crate::mesh::PolygonalMesh;
use crate::quadrature::IntegrationOptions;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StudyOptions {
    pub rhs_mode: RhsMode,
    pub quadrature: IntegrationOptions,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dofs: usize,
    pub n_cells: usize,
    pub err_u: Option<f64>,
    pub err_p: Option<f64>,
    /// `(ν² err_u² + err_p²)^{1/2}`.
    pub err_total: Option<f64>,
    pub rate_u: Option<f64>,
    pub rate_p: Option<f64>,
    pub eta: f64,
    pub rate_eta: Option<f64>,
    pub effectivity: Option<f64>,
    /// `max_E |∇·u_h|` scaled by `max |u_h| / h_E`.
    pub max_divergence: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub case: String,
    pub nu: f64,
    pub rhs_mode: RhsMode,
    /// Rates against `h` (uniform) or against the DOF count (adaptive).
    pub adaptive: bool,
    pub rows: Vec<ConvergenceRow>,
}

fn rate(e0: Option<f64>, e1: Option<f64>, x0: f64, x1: f64) -> Option<f64> {
    match (e0, e1) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((b / a).ln() / (x1 / x0).ln()),
        _ => None,
    }
}

impl ConvergenceTable {
    fn fill_rates(&mut self) {
        for i in 1..self.rows.len() {
            let (prev, row) = (self.rows[i - 1].clone(), &mut self.rows[i]);
            let (x0, x1) = if self.adaptive {
                (prev.dofs as f64, row.dofs as f64)
            } else {
                (prev.h, row.h)
            };
            row.rate_u = rate(prev.err_u, row.err_u, x0, x1);
            row.rate_p = rate(prev.err_p, row.err_p, x0, x1);
            row.rate_eta = rate(Some(prev.eta), Some(row.eta), x0, x1);
        }
    }

    /// Pretty text table.
    pub fn render(&self) -> String {
        let fmt = |v: Option<f64>, w: usize| match v {
            Some(v) => format!("{v:>w$.3e}"),
            None => format!("{:>w$}", "-"),
        };
        let fr = |v: Option<f64>| match v {
            Some(v) => format!("{v:>7.2}"),
            None => format!("{:>7}", "-"),
        };
        let mut s = format!(
            "case {}  nu = {:e}  rhs = {:?}\n{:>10} {:>8} {:>11} {:>7} {:>11} {:>7} {:>11} {:>7} {:>8}\n",
            self.case, self.nu, self.rhs_mode, "h", "dofs", "err_u", "rate", "err_p", "rate", "eta", "rate", "eff"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:>10.3e} {:>8} {} {} {} {} {} {} {:>8}\n",
                r.h,
                r.dofs,
                fmt(r.err_u, 11),
                fr(r.rate_u),
                fmt(r.err_p, 11),
                fr(r.rate_p),
                fmt(Some(r.eta), 11),
                fr(r.rate_eta),
                r.effectivity.map_or("-".to_string(), |e| format!("{e:.4}")),
            ));
        }
        s
    }
}

fn max_scaled_divergence(disc: &Discretization, velocity: &[f64]) -> f64 {
    let scale = velocity
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    disc.divergence_field(velocity)
        .iter()
        .zip(&disc.elements)
        .map(|(d, el)| d.abs() * el.pack.geometry.diameter / scale)
        .fold(0.0, f64::max)
}

/// Solves one case on a given mesh and fills a table row (without rates).
pub fn solve_row(
    case: &ManufacturedCase,
    mesh: PolygonalMesh,
    opts: StudyOptions,
) -> Result<ConvergenceRow> {
    let start = Instant::now();
    let data = case.problem(opts.rhs_mode, opts.quadrature);
    let disc = Discretization::new(mesh, &data.kappa_inv)?;
    let result = solve_problem(&disc, &data)?;
    let est = estimate(&disc, &result, &data)?;
    let errors = case
        .exact
        .as_ref()
        .map(|x| compute_errors(&disc, &result, x, data.quadrature))
        .transpose()?;
    let m = &disc.mesh;
    Ok(ConvergenceRow {
        h: m.max_diameter(),
        dofs: 2 * m.n_vertices() + m.n_edges() + m.n_cells(),
        n_cells: m.n_cells(),
        err_u: errors.map(|e| e.err_u),
        err_p: errors.map(|e| e.err_p),
        err_total: errors.map(|e| e.total(case.nu)),
        eta: est.eta(),
        effectivity: errors.and_then(|e| crate::estimate::effectivity(est.eta(), case.nu, &e).ok()),
        max_divergence: max_scaled_divergence(&disc, &result.velocity),
        seconds: start.elapsed().as_secs_f64(),
        ..Default::default()
    })
}

/// Solves on meshes with `n0, 2 n0, 4 n0, ...` subdivisions per side.
pub fn uniform_study(
    case: &ManufacturedCase,
    family: &MeshFamily,
    n0: usize,
    levels: usize,
    opts: StudyOptions,
) -> Result<ConvergenceTable> {
    if levels == 0 {
        return Err(Error::InvalidParameter(
            "a study needs at least one level".into(),
        ));
    }
    if matches!(family, MeshFamily::File(_)) && levels > 1 {
        return Err(Error::InvalidParameter(
            "a mesh file supports a single level only".into(),
        ));
    }
    let mut table = ConvergenceTable {
        case: case.name.clone(),
        nu: case.nu,
        rhs_mode: opts.rhs_mode,
        adaptive: false,
        rows: Vec::with_capacity(levels),
    };
    for level in 0..levels {
        let n = n0 << level;
        table.rows.push(solve_row(case, family.build(n)?, opts)?);
        log::info!("level {level} (n = {n}) done");
    }
    table.fill_rates();
    Ok(table)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return None;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug)]
pub struct AdaptiveStudy {
    pub table: ConvergenceTable,
    pub trace: AdaptiveTrace,
    /// Slopes against the DOF count over the last three iterations.
    pub eta_slope: Option<f64>,
    pub error_slope: Option<f64>,
}

pub fn adaptive_study(
    case: &ManufacturedCase,
    mesh0: PolygonalMesh,
    config: &AdaptiveConfig,
    opts: StudyOptions,
) -> Result<AdaptiveStudy> {
    let data = case.problem(opts.rhs_mode, opts.quadrature);
    let trace = adaptive_loop(mesh0, &data, config, case.exact.as_ref())?;
    let rows: Vec<ConvergenceRow> = trace
        .records
        .iter()
        .map(|r| ConvergenceRow {
            h: r.h,
            dofs: r.dofs,
            n_cells: r.n_cells,
            err_u: r.errors.map(|e| e.err_u),
            err_p: r.errors.map(|e| e.err_p),
            err_total: r.errors.map(|e| e.total(case.nu)),
            eta: r.eta,
            effectivity: r.effectivity,
            seconds: r.seconds,
            ..Default::default()
        })
        .collect();
    let mut table = ConvergenceTable {
        case: case.name.clone(),
        nu: case.nu,
        rhs_mode: opts.rhs_mode,
        adaptive: true,
        rows,
    };
    table.fill_rates();
    let tail = &table.rows[table.rows.len().saturating_sub(3)..];
    let eta_slope = fit_slope(
        &tail
            .iter()
            .map(|r| (r.dofs as f64, r.eta))
            .collect::<Vec<_>>(),
    );
    let error_slope = tail
        .iter()
        .map(|r| r.err_total.map(|e| (r.dofs as f64, e)))
        .collect::<Option<Vec<_>>>()
        .and_then(|p| fit_slope(&p));
    Ok(AdaptiveStudy {
        table,
        trace,
        eta_slope,
        error_slope,
    })
}
