//! Quadrature on triangles, edges and polygons, and scaled monomials.
//!
//! Triangle rules live on the reference triangle `(0,0), (1,0), (0,1)` with
//! weights summing to 1/2; edge rules live on `[0, 1]` with weights summing
//! to 1. The symmetric triangle rules are tabulated to 15 digits and then
//! polished by a few Gauss–Newton steps on the exact monomial moments
//! `∫ x^a y^b = a! b! / (a + b + 2)!`, so they are exact to round-off.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{ElementGeometry, Point2, SubTriangulation};

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Reference coordinates; the second component is unused for edge rules.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `∫ x^a y^b` over the reference triangle.
pub fn reference_moment(a: usize, b: usize) -> f64 {
    factorial(a) * factorial(b) / factorial(a + b + 2)
}

// Orbit of barycentric coordinates mapped to reference (x, y) = (l2, l3).
fn s21(a: f64) -> Vec<[f64; 2]> {
    let c = 1.0 - 2.0 * a;
    vec![[a, a], [c, a], [a, c]]
}

fn s111(a: f64, b: f64) -> Vec<[f64; 2]> {
    let c = 1.0 - a - b;
    vec![[a, b], [b, a], [b, c], [c, b], [a, c], [c, a]]
}

/// Symmetric rule layout: each orbit is either `S21(a)` or `S111(a, b)` with
/// one weight.
#[derive(Clone, Copy)]
enum Orbit {
    S21,
    S111,
}

fn expand(layout: &[Orbit], params: &[f64]) -> (Vec<[f64; 2]>, Vec<f64>) {
    let (mut pts, mut wts) = (Vec::new(), Vec::new());
    let mut k = 0;
    for o in layout {
        let (p, used) = match o {
            Orbit::S21 => (s21(params[k + 1]), 2),
            Orbit::S111 => (s111(params[k + 1], params[k + 2]), 3),
        };
        wts.extend(std::iter::repeat_n(params[k], p.len()));
        pts.extend(p);
        k += used;
    }
    (pts, wts)
}

fn moment_residual(layout: &[Orbit], params: &[f64], degree: usize) -> DVector<f64> {
    let (pts, wts) = expand(layout, params);
    let mut r = Vec::new();
    for total in 0..=degree {
        for a in 0..=total {
            let b = total - a;
            let q: f64 = pts
                .iter()
                .zip(&wts)
                .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                .sum();
            r.push(q - reference_moment(a, b));
        }
    }
    DVector::from_vec(r)
}

fn polished(layout: &[Orbit], mut params: Vec<f64>, degree: usize) -> QuadratureRule {
    for _ in 0..4 {
        let r = moment_residual(layout, &params, degree);
        let mut jac = DMatrix::zeros(r.len(), params.len());
        for j in 0..params.len() {
            let h = 1e-7;
            let mut p = params.clone();
            p[j] += h;
            let rp = moment_residual(layout, &p, degree);
            p[j] -= 2.0 * h;
            let rm = moment_residual(layout, &p, degree);
            jac.set_column(j, &((rp - rm) / (2.0 * h)));
        }
        let step = jac
            .svd(true, true)
            .solve(&r, 1e-14)
            .expect("SVD of quadrature Jacobian");
        for (p, s) in params.iter_mut().zip(step.iter()) {
            *p -= s;
        }
    }
    let (points, weights) = expand(layout, &params);
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// Symmetric triangle rule exact for polynomials of total degree 2, 4 or 6.
pub fn triangle_rule(degree: usize) -> Result<&'static QuadratureRule> {
    static D2: OnceLock<QuadratureRule> = OnceLock::new();
    static D4: OnceLock<QuadratureRule> = OnceLock::new();
    static D6: OnceLock<QuadratureRule> = OnceLock::new();
    match degree {
        2 => Ok(D2.get_or_init(|| QuadratureRule {
            points: s21(1.0 / 6.0),
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
        })),
        4 => Ok(D4.get_or_init(|| {
            polished(
                &[Orbit::S21, Orbit::S21],
                vec![
                    0.5 * 0.223381589678011,
                    0.445948490915965,
                    0.5 * 0.109951743655322,
                    0.091576213509771,
                ],
                4,
            )
        })),
        6 => Ok(D6.get_or_init(|| {
            polished(
                &[Orbit::S21, Orbit::S21, Orbit::S111],
                vec![
                    0.5 * 0.116786275726379,
                    0.249286745170910,
                    0.5 * 0.050844906370207,
                    0.063089014491502,
                    0.5 * 0.082851075618374,
                    0.053145049844817,
                    0.310352451033784,
                ],
                6,
            )
        })),
        _ => Err(Error::UnsupportedQuadrature(format!(
            "triangle rule of degree {degree} (supported: 2, 4, 6)"
        ))),
    }
}

/// Gauss–Legendre rule on `[0, 1]` with 2 or 3 points.
pub fn edge_gauss(npoints: usize) -> Result<&'static QuadratureRule> {
    static G2: OnceLock<QuadratureRule> = OnceLock::new();
    static G3: OnceLock<QuadratureRule> = OnceLock::new();
    match npoints {
        2 => Ok(G2.get_or_init(|| {
            let d = 0.5 / 3f64.sqrt();
            QuadratureRule {
                points: vec![[0.5 - d, 0.0], [0.5 + d, 0.0]],
                weights: vec![0.5, 0.5],
                degree: 3,
            }
        })),
        3 => Ok(G3.get_or_init(|| {
            let d = 0.5 * 0.6f64.sqrt();
            QuadratureRule {
                points: vec![[0.5 - d, 0.0], [0.5, 0.0], [0.5 + d, 0.0]],
                weights: vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
                degree: 5,
            }
        })),
        _ => Err(Error::UnsupportedQuadrature(format!(
            "{npoints}-point Gauss rule (supported: 2, 3)"
        ))),
    }
}

fn rule(degree: usize) -> &'static QuadratureRule {
    triangle_rule(degree).expect("degree validated by IntegrationOptions")
}

/// Quadrature settings for element integrals of non-polynomial data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationOptions {
    /// Triangle rule degree, 4 or 6.
    pub degree: usize,
    /// Subdivide triangles (and edges) until a uniform split no longer
    /// changes the result; meant for steep layers.
    pub adaptive: bool,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            degree: 4,
            adaptive: false,
        }
    }
}

impl IntegrationOptions {
    pub fn new(degree: usize, adaptive: bool) -> Result<Self> {
        if degree != 4 && degree != 6 {
            return Err(Error::UnsupportedQuadrature(format!(
                "integration degree {degree} (supported: 4, 6)"
            )));
        }
        Ok(Self { degree, adaptive })
    }
}

const ADAPTIVE_RTOL: f64 = 1e-10;
const ADAPTIVE_MAX_DEPTH: usize = 7;

fn add<const N: usize>(a: [f64; N], b: [f64; N]) -> [f64; N] {
    std::array::from_fn(|i| a[i] + b[i])
}

/// Returns the integral and the integral of the absolute values.
fn triangle_sums<const N: usize>(
    rule: &QuadratureRule,
    t: [Point2; 3],
    f: &impl Fn(Point2) -> [f64; N],
) -> ([f64; N], f64) {
    let (e1, e2) = (t[1] - t[0], t[2] - t[0]);
    let jac = e1.cross(e2).abs();
    let mut acc = [0.0; N];
    let mut abs = 0.0;
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let v = f(t[0] + e1 * p[0] + e2 * p[1]);
        let w = w * jac;
        for i in 0..N {
            acc[i] += w * v[i];
            abs += w * v[i].abs();
        }
    }
    (acc, abs)
}

fn split4(t: [Point2; 3]) -> [[Point2; 3]; 4] {
    let m01 = (t[0] + t[1]) * 0.5;
    let m12 = (t[1] + t[2]) * 0.5;
    let m20 = (t[2] + t[0]) * 0.5;
    [
        [t[0], m01, m20],
        [m01, t[1], m12],
        [m20, m12, t[2]],
        [m01, m12, m20],
    ]
}

fn adaptive_triangle<const N: usize>(
    rule: &QuadratureRule,
    t: [Point2; 3],
    whole: ([f64; N], f64),
    f: &impl Fn(Point2) -> [f64; N],
    depth: usize,
) -> [f64; N] {
    let kids = split4(t);
    let parts: Vec<([f64; N], f64)> = kids.iter().map(|k| triangle_sums(rule, *k, f)).collect();
    let fine = parts.iter().fold([0.0; N], |acc, p| add(acc, p.0));
    let scale = parts.iter().map(|p| p.1).sum::<f64>();
    let diff = (0..N)
        .map(|i| (fine[i] - whole.0[i]).abs())
        .fold(0.0, f64::max);
    if depth >= ADAPTIVE_MAX_DEPTH || diff <= ADAPTIVE_RTOL * scale {
        return fine;
    }
    kids.iter().zip(parts).fold([0.0; N], |acc, (k, p)| {
        add(acc, adaptive_triangle(rule, *k, p, f, depth + 1))
    })
}

/// Integral of a vector-valued function over the triangle `t`.
pub fn integrate_triangle<const N: usize>(
    t: [Point2; 3],
    opts: IntegrationOptions,
    f: impl Fn(Point2) -> [f64; N],
) -> [f64; N] {
    let r = rule(opts.degree);
    let whole = triangle_sums(r, t, &f);
    if opts.adaptive {
        adaptive_triangle(r, t, whole, &f, 1)
    } else {
        whole.0
    }
}

/// Integral over a polygon through its sub-triangulation.
pub fn integrate_polygon<const N: usize>(
    sub: &SubTriangulation,
    opts: IntegrationOptions,
    f: impl Fn(Point2) -> [f64; N],
) -> [f64; N] {
    sub.triangles.iter().fold([0.0; N], |acc, t| {
        add(acc, integrate_triangle(t.vertices, opts, &f))
    })
}

/// Scalar convenience wrapper of [`integrate_polygon`].
pub fn integrate_polygon_scalar(
    sub: &SubTriangulation,
    opts: IntegrationOptions,
    f: impl Fn(Point2) -> f64,
) -> f64 {
    integrate_polygon(sub, opts, |p| [f(p)])[0]
}

fn segment_sums<const N: usize>(
    a: Point2,
    b: Point2,
    f: &impl Fn(Point2) -> [f64; N],
) -> ([f64; N], f64) {
    let g = edge_gauss(3).expect("3-point rule");
    let len = a.dist(b);
    let mut acc = [0.0; N];
    let mut abs = 0.0;
    for (p, w) in g.points.iter().zip(&g.weights) {
        let v = f(a + (b - a) * p[0]);
        for i in 0..N {
            acc[i] += w * len * v[i];
            abs += w * len * v[i].abs();
        }
    }
    (acc, abs)
}

fn adaptive_segment<const N: usize>(
    a: Point2,
    b: Point2,
    whole: ([f64; N], f64),
    f: &impl Fn(Point2) -> [f64; N],
    depth: usize,
) -> [f64; N] {
    let m = (a + b) * 0.5;
    let (l, r) = (segment_sums(a, m, f), segment_sums(m, b, f));
    let fine = add(l.0, r.0);
    let diff = (0..N)
        .map(|i| (fine[i] - whole.0[i]).abs())
        .fold(0.0, f64::max);
    if depth >= 4 * ADAPTIVE_MAX_DEPTH || diff <= ADAPTIVE_RTOL * (l.1 + r.1) {
        return fine;
    }
    add(
        adaptive_segment(a, m, l, f, depth + 1),
        adaptive_segment(m, b, r, f, depth + 1),
    )
}

/// Integral over the segment `a -> b` with the 3-point Gauss rule, split
/// adaptively when `opts.adaptive` is set.
pub fn integrate_segment<const N: usize>(
    a: Point2,
    b: Point2,
    opts: IntegrationOptions,
    f: impl Fn(Point2) -> [f64; N],
) -> [f64; N] {
    let whole = segment_sums(a, b, &f);
    if opts.adaptive {
        adaptive_segment(a, b, whole, &f, 1)
    } else {
        whole.0
    }
}

/// Scaled monomials `((x - x_D) / h_D)^α` of total degree at most 2, ordered
/// `1, ξ, η, ξ², ξη, η²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaledMonomials {
    pub center: Point2,
    pub h: f64,
    pub degree: usize,
}

impl ScaledMonomials {
    pub const EXPONENTS: [(u32, u32); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

    pub fn new(center: Point2, h: f64, degree: usize) -> Self {
        assert!(degree <= 2, "scaled monomials are provided up to degree 2");
        Self { center, h, degree }
    }

    pub fn for_element(g: &ElementGeometry, degree: usize) -> Self {
        Self::new(g.centroid, g.diameter, degree)
    }

    pub fn len(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// All six values; only the first [`len`](Self::len) belong to the basis.
    pub fn values(&self, p: Point2) -> [f64; 6] {
        let s = (p - self.center) / self.h;
        [1.0, s.x, s.y, s.x * s.x, s.x * s.y, s.y * s.y]
    }

    pub fn gradients(&self, p: Point2) -> [Point2; 6] {
        let s = (p - self.center) / self.h;
        let k = 1.0 / self.h;
        [
            Point2::default(),
            Point2::new(k, 0.0),
            Point2::new(0.0, k),
            Point2::new(2.0 * s.x * k, 0.0),
            Point2::new(s.y * k, s.x * k),
            Point2::new(0.0, 2.0 * s.y * k),
        ]
    }
}
