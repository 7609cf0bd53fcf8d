//! Registry of manufactured solutions and permeability benchmarks.
//!
//! Every force is the hand-derived `f = -ν Δu + ν κ⁻¹ u - ∇p`; the unit tests
//! compare each one with finite differences of the exact fields.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Matrix2;

use super::raster::KappaRaster;
use super::ExactSolution;
use crate::assembly::{InversePermeability, ProblemData, RhsMode, VectorField};
use crate::error::{Error, Result};
use crate::mesh::{
    generate_nonconvex_mesh, generate_square_mesh, load_mesh, Point2, PolygonalMesh, Rect,
};
use crate::quadrature::IntegrationOptions;

pub const CASE_NAMES: [&str; 6] = ["ex61", "ex64", "ex65", "ex66", "fibrous", "foam"];

/// Mesh families used by the studies.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshFamily {
    Square,
    Nonconvex,
    /// A fixed mesh read from a JSON file; only usable for a single level.
    File(std::path::PathBuf),
}

impl MeshFamily {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "square" => Ok(Self::Square),
            "nonconvex" => Ok(Self::Nonconvex),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(p.into())),
                _ => Err(Error::InvalidParameter(format!(
                    "unknown mesh '{s}' (expected square, nonconvex or file:<path>)"
                ))),
            },
        }
    }

    /// Mesh with `n` subdivisions per side of the unit square.
    pub fn build(&self, n: usize) -> Result<PolygonalMesh> {
        match self {
            Self::Square => generate_square_mesh(n, Rect::unit()),
            Self::Nonconvex => generate_nonconvex_mesh(n),
            Self::File(p) => load_mesh(p),
        }
    }
}

/// Overrides for the registry defaults.
#[derive(Clone, Debug, Default)]
pub struct CaseParams {
    pub nu: Option<f64>,
    /// Constant `κ`; ignored by the raster cases.
    pub kappa: Option<f64>,
    pub raster: Option<KappaRaster>,
}

#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub nu: f64,
    pub kappa_inv: InversePermeability,
    pub force: VectorField,
    pub boundary: VectorField,
    pub exact: Option<ExactSolution>,
    pub domain: Rect,
    pub mesh_hint: MeshFamily,
    /// Steep layers: integrate data with adaptive subdivision regardless of
    /// the requested options.
    pub adaptive_quadrature: bool,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("nu", &self.nu)
            .field("kappa_inv", &self.kappa_inv)
            .field("has_exact", &self.exact.is_some())
            .finish()
    }
}

impl ManufacturedCase {
    pub fn problem(&self, rhs_mode: RhsMode, quadrature: IntegrationOptions) -> ProblemData {
        ProblemData {
            nu: self.nu,
            kappa_inv: self.kappa_inv.clone(),
            force: self.force.clone(),
            boundary: self.boundary.clone(),
            rhs_mode,
            quadrature: IntegrationOptions {
                adaptive: quadrature.adaptive || self.adaptive_quadrature,
                ..quadrature
            },
        }
    }
}

fn constant_kappa_inv(params: &CaseParams, default: f64) -> Result<f64> {
    match params.kappa {
        None => Ok(default),
        Some(k) if k > 0.0 && k.is_finite() => Ok(1.0 / k),
        Some(k) if k == f64::INFINITY => Ok(0.0),
        Some(k) => Err(Error::InvalidParameter(format!(
            "permeability must be positive, got {k}"
        ))),
    }
}

fn viscosity(params: &CaseParams, default: f64) -> Result<f64> {
    let nu = params.nu.unwrap_or(default);
    if nu > 0.0 && nu.is_finite() {
        Ok(nu)
    } else {
        Err(Error::InvalidParameter(format!(
            "viscosity must be positive, got {nu}"
        )))
    }
}

type MatrixField = Arc<dyn Fn(Point2) -> Matrix2<f64> + Send + Sync>;

fn smooth_case(
    name: &str,
    nu: f64,
    kinv: f64,
    u: VectorField,
    grad: MatrixField,
    p: Arc<dyn Fn(Point2) -> f64 + Send + Sync>,
    force: VectorField,
) -> ManufacturedCase {
    ManufacturedCase {
        name: name.into(),
        nu,
        kappa_inv: InversePermeability::Constant(kinv),
        force,
        boundary: u.clone(),
        exact: Some(ExactSolution {
            velocity: u,
            gradient: grad,
            pressure: p,
        }),
        domain: Rect::unit(),
        mesh_hint: MeshFamily::Nonconvex,
        adaptive_quadrature: false,
    }
}

fn ex61(nu: f64, kinv: f64) -> ManufacturedCase {
    let w = 2.0 * PI;
    let u = move |p: Point2| {
        Point2::new(
            (w * p.x).sin() * (w * p.y).cos(),
            -(w * p.x).cos() * (w * p.y).sin(),
        )
    };
    let grad = move |p: Point2| {
        let (sx, cx, sy, cy) = (
            (w * p.x).sin(),
            (w * p.x).cos(),
            (w * p.y).sin(),
            (w * p.y).cos(),
        );
        Matrix2::new(w * cx * cy, -w * sx * sy, w * sx * sy, -w * cx * cy)
    };
    // Δu = -2w² u
    let force = move |p: Point2| {
        let v = u(p);
        let grad_p = Point2::new(2.0 * p.x * p.y * p.y, 2.0 * p.x * p.x * p.y);
        v * (nu * (2.0 * w * w + kinv)) - grad_p
    };
    smooth_case(
        "ex61",
        nu,
        kinv,
        Arc::new(u),
        Arc::new(grad),
        Arc::new(|p: Point2| p.x * p.x * p.y * p.y - 1.0 / 9.0),
        Arc::new(force),
    )
}

// a(t) = t²(1-t)², b(t) = t(1-t)(1-2t) = a'(t) / 2
fn quartic(t: f64) -> [f64; 3] {
    [
        t * t * (1.0 - t).powi(2),
        2.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
        2.0 - 12.0 * t + 12.0 * t * t,
    ]
}

fn cubic(t: f64) -> [f64; 3] {
    [
        t * (1.0 - t) * (1.0 - 2.0 * t),
        1.0 - 6.0 * t + 6.0 * t * t,
        12.0 * t - 6.0,
    ]
}

fn ex64(nu: f64, kinv: f64) -> ManufacturedCase {
    let u = |p: Point2| {
        Point2::new(
            10.0 * quartic(p.x)[0] * cubic(p.y)[0],
            -10.0 * cubic(p.x)[0] * quartic(p.y)[0],
        )
    };
    let grad = |p: Point2| {
        let (ax, bx, ay, by) = (quartic(p.x), cubic(p.x), quartic(p.y), cubic(p.y));
        Matrix2::new(
            10.0 * ax[1] * by[0],
            10.0 * ax[0] * by[1],
            -10.0 * bx[1] * ay[0],
            -10.0 * bx[0] * ay[1],
        )
    };
    let force = move |p: Point2| {
        let (ax, bx, ay, by) = (quartic(p.x), cubic(p.x), quartic(p.y), cubic(p.y));
        let lap = Point2::new(
            10.0 * (ax[2] * by[0] + ax[0] * by[2]),
            -10.0 * (bx[2] * ay[0] + bx[0] * ay[2]),
        );
        let grad_p = Point2::new(-20.0 * (2.0 * p.y - 1.0), -20.0 * (2.0 * p.x - 1.0));
        -lap * nu + u(p) * (nu * kinv) - grad_p
    };
    smooth_case(
        "ex64",
        nu,
        kinv,
        Arc::new(u),
        Arc::new(grad),
        Arc::new(|p: Point2| -10.0 * (2.0 * p.x - 1.0) * (2.0 * p.y - 1.0)),
        Arc::new(force),
    )
}

/// `E(t) = (1 - e^{t/ν}) / (1 - e^{1/ν})` and its first two derivatives,
/// written with non-positive exponents only.
fn layer(t: f64, nu: f64) -> [f64; 3] {
    let a = (-1.0 / nu).exp();
    let b = ((t - 1.0) / nu).exp();
    let d1 = b / (nu * (1.0 - a));
    [(a - b) / (a - 1.0), d1, d1 / nu]
}

fn ex65(nu: f64, kinv: f64) -> ManufacturedCase {
    let u = move |p: Point2| Point2::new(p.y - layer(p.y, nu)[0], p.x - layer(p.x, nu)[0]);
    let grad =
        move |p: Point2| Matrix2::new(0.0, 1.0 - layer(p.y, nu)[1], 1.0 - layer(p.x, nu)[1], 0.0);
    let force = move |p: Point2| {
        // Δu = (-E''(y), -E''(x)), ∇p = (-1, 1)
        let lap = Point2::new(-layer(p.y, nu)[2], -layer(p.x, nu)[2]);
        -lap * nu + u(p) * (nu * kinv) - Point2::new(-1.0, 1.0)
    };
    let mut c = smooth_case(
        "ex65",
        nu,
        kinv,
        Arc::new(u),
        Arc::new(grad),
        Arc::new(|p: Point2| p.y - p.x),
        Arc::new(force),
    );
    c.adaptive_quadrature = true;
    c
}

const EX66_A: f64 = 1e3;

// φ(s) = -A e^{-A s²} with s = 1.5 - x - y, and φ', φ''
fn ridge(p: Point2) -> [f64; 3] {
    let s = 1.5 - p.x - p.y;
    let e = (-EX66_A * s * s).exp();
    [
        -EX66_A * e,
        2.0 * EX66_A * EX66_A * s * e,
        2.0 * EX66_A * EX66_A * (1.0 - 2.0 * EX66_A * s * s) * e,
    ]
}

fn ex66(nu: f64, kinv: f64) -> ManufacturedCase {
    let u = |p: Point2| {
        let f = ridge(p)[0];
        Point2::new(f, -f)
    };
    // ∂/∂x = ∂/∂y = -d/ds
    let grad = |p: Point2| {
        let d = ridge(p)[1];
        Matrix2::new(-d, -d, d, d)
    };
    let mean = 2.0 * (1f64.exp() - 1.0) * (1.0 - 1f64.cos());
    let force = move |p: Point2| {
        // Δφ(s) = 2 φ''(s)
        let [f, _, d2] = ridge(p);
        let lap = Point2::new(2.0 * d2, -2.0 * d2);
        let grad_p = Point2::new(2.0 * p.x.exp() * p.y.sin(), 2.0 * p.x.exp() * p.y.cos());
        -lap * nu + Point2::new(f, -f) * (nu * kinv) - grad_p
    };
    let mut c = smooth_case(
        "ex66",
        nu,
        kinv,
        Arc::new(u),
        Arc::new(grad),
        Arc::new(move |p: Point2| 2.0 * p.x.exp() * p.y.sin() - mean),
        Arc::new(force),
    );
    c.adaptive_quadrature = true;
    c
}

fn raster_case(name: &str, nu: f64, params: &CaseParams) -> Result<ManufacturedCase> {
    let raster = params
        .raster
        .clone()
        .ok_or_else(|| Error::InvalidParameter(format!("case '{name}' needs a κ⁻¹ raster")))?;
    Ok(ManufacturedCase {
        name: name.into(),
        nu,
        kappa_inv: raster.kappa_field(),
        force: Arc::new(|_| Point2::default()),
        boundary: Arc::new(|_| Point2::new(1.0, 0.0)),
        exact: None,
        domain: Rect::unit(),
        mesh_hint: MeshFamily::Square,
        adaptive_quadrature: false,
    })
}

/// Looks up a registered case; `params` override its default `ν` and `κ`.
pub fn case_registry(name: &str, params: &CaseParams) -> Result<ManufacturedCase> {
    match name {
        "ex61" => Ok(ex61(
            viscosity(params, 1.0)?,
            constant_kappa_inv(params, 1.0)?,
        )),
        "ex64" => Ok(ex64(
            viscosity(params, 1e-2)?,
            constant_kappa_inv(params, 1.0)?,
        )),
        "ex65" => Ok(ex65(
            viscosity(params, 1e-2)?,
            constant_kappa_inv(params, 1.0)?,
        )),
        "ex66" => Ok(ex66(
            viscosity(params, 0.5)?,
            constant_kappa_inv(params, 0.01)?,
        )),
        "fibrous" | "foam" => raster_case(name, viscosity(params, 1e-2)?, params),
        _ => Err(Error::UnknownCase(name.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fan_triangulate;
    use crate::quadrature::integrate_polygon_scalar;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth(name: &str, nu: f64) -> ManufacturedCase {
        case_registry(
            name,
            &CaseParams {
                nu: Some(nu),
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn kinv(c: &ManufacturedCase) -> f64 {
        match c.kappa_inv {
            InversePermeability::Constant(k) => k,
            _ => unreachable!(),
        }
    }

    #[test]
    fn forces_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        for (name, nu) in [
            ("ex61", 1.0),
            ("ex61", 0.37),
            ("ex64", 1e-2),
            ("ex64", 2.0),
            ("ex65", 1e-2),
            ("ex65", 0.3),
            ("ex66", 0.5),
        ] {
            let c = smooth(name, nu);
            let ex = c.exact.as_ref().unwrap();
            let (u, p) = (&ex.velocity, &ex.pressure);
            for _ in 0..50 {
                let x = Point2::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
                let (dx, dy) = (Point2::new(h, 0.0), Point2::new(0.0, h));
                // fourth-order stencils keep the truncation error below the
                // tolerance for the steep ex66 ridge
                let d2 = |d: Point2| {
                    (-u(x + d * 2.0) + u(x + d) * 16.0 - u(x) * 30.0 + u(x - d) * 16.0
                        - u(x - d * 2.0))
                        / (12.0 * h * h)
                };
                let lap = d2(dx) + d2(dy);
                let gp = Point2::new(p(x + dx) - p(x - dx), p(x + dy) - p(x - dy)) / (2.0 * h);
                let expect = -lap * nu + u(x) * (nu * kinv(&c)) - gp;
                let got = (c.force)(x);
                assert!(
                    (got - expect).norm() <= 1e-6 * (1.0 + got.norm()),
                    "{name} at {x:?}: {got:?} vs {expect:?}"
                );
                // gradient
                let g = (ex.gradient)(x);
                let cx = (u(x + dx) - u(x - dx)) / (2.0 * h);
                let cy = (u(x + dy) - u(x - dy)) / (2.0 * h);
                let scale = 1.0 + g.norm();
                assert!((g[(0, 0)] - cx.x).abs() <= 1e-6 * scale);
                assert!((g[(1, 0)] - cx.y).abs() <= 1e-6 * scale);
                assert!((g[(0, 1)] - cy.x).abs() <= 1e-6 * scale);
                assert!((g[(1, 1)] - cy.y).abs() <= 1e-6 * scale);
                assert!(
                    (g[(0, 0)] + g[(1, 1)]).abs() <= 1e-12 * scale,
                    "{name}: divergence"
                );
            }
        }
    }

    #[test]
    fn pressures_have_zero_mean() {
        let opts = IntegrationOptions::new(6, true).unwrap();
        let sub = fan_triangulate(&[
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ])
        .unwrap();
        for name in ["ex61", "ex64", "ex65", "ex66"] {
            let c = smooth(name, 0.5);
            let p = c.exact.unwrap().pressure;
            let mean = integrate_polygon_scalar(&sub, opts, |x| p(x));
            assert!(mean.abs() <= 1e-10, "{name}: {mean}");
        }
    }

    #[test]
    fn ex65_boundary_trace() {
        let c = smooth("ex65", 0.01);
        let g = (c.boundary)(Point2::new(1.0, 0.3));
        let direct = 0.3 - (1.0 - (0.3f64 / 0.01).exp()) / (1.0 - (1.0f64 / 0.01).exp());
        assert!((g.x - direct).abs() < 1e-14);
        // u_x(x, 1) = 1 - 1 = 0 at the layer
        assert!((c.boundary)(Point2::new(0.5, 1.0)).x.abs() < 1e-14);
        assert!(layer(0.5, 1e-3)[0].is_finite());
    }

    #[test]
    fn registry_errors() {
        assert!(matches!(
            case_registry("ex99", &CaseParams::default()),
            Err(Error::UnknownCase(_))
        ));
        assert!(case_registry("fibrous", &CaseParams::default()).is_err());
        assert!(case_registry(
            "ex61",
            &CaseParams {
                nu: Some(-1.0),
                ..Default::default()
            }
        )
        .is_err());
        let c = case_registry(
            "ex61",
            &CaseParams {
                kappa: Some(4.0),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(kinv(&c), 0.25);
        assert_eq!(
            MeshFamily::parse("file:a.json").unwrap(),
            MeshFamily::File("a.json".into())
        );
        assert!(MeshFamily::parse("hex").is_err());
    }
}
