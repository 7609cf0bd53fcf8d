//! CSV tables and legacy VTK output.

use std::fmt::Write as _;
use std::path::Path;

use super::ConvergenceTable;
use crate::assembly::{Discretization, SolveResult};
use crate::error::{Error, Result};
use crate::estimate::AdaptiveTrace;
use crate::mesh::Point2;
use crate::vem::Projection;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn table_to_csv(table: &ConvergenceTable) -> String {
    let mut s = String::from(
        "h,dofs,n_cells,err_u,rate_u,err_p,rate_p,err_total,eta,rate_eta,effectivity,max_divergence,seconds\n",
    );
    for r in &table.rows {
        let fields = [
            num(r.h),
            r.dofs.to_string(),
            r.n_cells.to_string(),
            opt(r.err_u),
            opt(r.rate_u),
            opt(r.err_p),
            opt(r.rate_p),
            opt(r.err_total),
            num(r.eta),
            opt(r.rate_eta),
            opt(r.effectivity),
            num(r.max_divergence),
            num(r.seconds),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

pub fn trace_to_csv(trace: &AdaptiveTrace) -> String {
    let mut s = String::from(
        "iteration,n_cells,n_vertices,dofs,eta,eta_f,eta_s,eta_r,err_u,err_p,effectivity,marked,seconds\n",
    );
    for r in &trace.records {
        let fields = [
            r.iteration.to_string(),
            r.n_cells.to_string(),
            r.n_vertices.to_string(),
            r.dofs.to_string(),
            num(r.eta),
            num(r.eta_f),
            num(r.eta_s),
            num(r.eta_r),
            opt(r.errors.map(|e| e.err_u)),
            opt(r.errors.map(|e| e.err_p)),
            opt(r.effectivity),
            r.marked.to_string(),
            num(r.seconds),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv(path: impl AsRef<Path>, text: &str) -> Result<()> {
    Ok(std::fs::write(path, text)?)
}

/// Header names and numeric rows, empty fields as `None`.
pub type CsvTable = (Vec<String>, Vec<Vec<Option<f64>>>);

/// Parses a CSV produced by this module.
pub fn read_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let row: Vec<Option<f64>> = l
                .split(',')
                .map(|f| {
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse()
                            .map(Some)
                            .map_err(|_| Error::InvalidParameter(format!("bad CSV number '{f}'")))
                    }
                })
                .collect::<Result<_>>()?;
            if row.len() != header.len() {
                return Err(Error::InvalidParameter(format!(
                    "CSV row has {} fields, header {}",
                    row.len(),
                    header.len()
                )));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

/// Legacy VTK unstructured grid: one polygon per cell with the pressure,
/// the discrete divergence and `κ⁻¹` as cell data, and `Π∇u_h` averaged
/// over the cells around each vertex as point data.
pub fn export_vtk(
    disc: &Discretization,
    result: &SolveResult,
    path: impl AsRef<Path>,
) -> Result<()> {
    let m = &disc.mesh;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# vtk DataFile Version 3.0\nprvem solution\nASCII\nDATASET UNSTRUCTURED_GRID"
    );
    let _ = writeln!(s, "POINTS {} double", m.n_vertices());
    for p in m.vertices() {
        let _ = writeln!(s, "{} {} 0", num(p.x), num(p.y));
    }
    let size: usize = m.cells().iter().map(|c| c.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {size}", m.n_cells());
    for c in m.cells() {
        let ids: Vec<String> = c.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "{} {}", c.len(), ids.join(" "));
    }
    let _ = writeln!(s, "CELL_TYPES {}", m.n_cells());
    for _ in 0..m.n_cells() {
        let _ = writeln!(s, "7");
    }
    let _ = writeln!(s, "CELL_DATA {}", m.n_cells());
    let div = disc.divergence_field(&result.velocity);
    let kinv: Vec<f64> = disc.elements.iter().map(|e| e.kappa_inv).collect();
    for (name, values) in [
        ("pressure", &result.pressure),
        ("divergence", &div),
        ("kappa_inv", &kinv),
    ] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in values.iter() {
            let _ = writeln!(s, "{}", num(*v));
        }
    }
    let mut sum = vec![Point2::default(); m.n_vertices()];
    let mut count = vec![0usize; m.n_vertices()];
    for (c, el) in disc.elements.iter().enumerate() {
        let d = el.local_dofs(&result.velocity);
        let coef = el.pack.coefficients(Projection::Nabla, &d);
        for &v in m.cell(c) {
            sum[v] += el.pack.eval(&coef, m.vertex(v));
            count[v] += 1;
        }
    }
    let _ = writeln!(s, "POINT_DATA {}\nVECTORS velocity double", m.n_vertices());
    for (v, k) in sum.iter().zip(&count) {
        let a = *v / (*k).max(1) as f64;
        let _ = writeln!(s, "{} {} 0", num(a.x), num(a.y));
    }
    Ok(std::fs::write(path, s)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{solve_problem, InversePermeability, ProblemData, RhsMode};
    use crate::bench::ConvergenceRow;
    use crate::mesh::generate_nonconvex_mesh;
    use crate::quadrature::IntegrationOptions;
    use std::sync::Arc;

    #[test]
    fn csv_round_trip() {
        let t = ConvergenceTable {
            case: "x".into(),
            nu: 1.0,
            rhs_mode: RhsMode::Robust,
            adaptive: false,
            rows: vec![
                ConvergenceRow {
                    h: 0.1,
                    err_u: Some(1.0 / 3.0),
                    eta: 2.0,
                    ..Default::default()
                },
                ConvergenceRow {
                    h: 0.05,
                    err_u: Some(0.17),
                    rate_u: Some(0.9744977017186751),
                    eta: 1.1,
                    ..Default::default()
                },
            ],
        };
        let (head, rows) = read_csv(&table_to_csv(&t)).unwrap();
        assert_eq!(head[4], "rate_u");
        assert_eq!(rows[0][3], Some(1.0 / 3.0));
        assert_eq!(rows[1][4], Some(0.9744977017186751));
        assert_eq!(rows[0][4], None);
    }

    #[test]
    fn vtk_has_one_polygon_per_cell() {
        let data = ProblemData {
            nu: 1.0,
            kappa_inv: InversePermeability::Constant(1.0),
            force: Arc::new(|p: Point2| Point2::new(p.y, 0.0)),
            boundary: Arc::new(|_| Point2::default()),
            rhs_mode: RhsMode::Robust,
            quadrature: IntegrationOptions::default(),
        };
        let disc =
            Discretization::new(generate_nonconvex_mesh(2).unwrap(), &data.kappa_inv).unwrap();
        let r = solve_problem(&disc, &data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.vtk");
        export_vtk(&disc, &r, &path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(text.contains(&format!("CELLS {} ", disc.mesh.n_cells())));
        assert!(text.contains(&format!("CELL_TYPES {}", disc.mesh.n_cells())));
        assert!(text.contains(&format!("POINT_DATA {}", disc.mesh.n_vertices())));
    }
}
