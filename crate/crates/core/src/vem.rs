//! Local virtual element machinery on one polygon.
//!
//! Degrees of freedom of an element with `N` vertices (`3N` in total):
//!
//! * `2i`, `2i + 1`: the velocity components at vertex `i`;
//! * `2N + i`: the mean outward normal flux `(1/|e_i|) ∫_{e_i} v·n` over edge `i`
//!   (from vertex `i` to vertex `i + 1`).
//!
//! Projections are expressed in the vector linear basis
//! `(1,0), (ξ,0), (η,0), (0,1), (0,ξ), (0,η)` with scaled coordinates
//! `ξ = (x - x_E)/h_E`, `η = (y - y_E)/h_E`.

use nalgebra::{DMatrix, DVector, Matrix2, SMatrix, SVector};

use crate::error::{Error, Result};
use crate::mesh::{EdgeGeometry, ElementGeometry, Point2};
use crate::quadrature::{edge_gauss, integrate_segment, IntegrationOptions, ScaledMonomials};

type Mat6 = SMatrix<f64, 6, 6>;

/// Number of vector linear basis functions.
pub const P1_DIM: usize = 6;

/// Index arithmetic of the local degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalDofMap {
    pub n_vertices: usize,
}

impl LocalDofMap {
    pub fn new(n_vertices: usize) -> Self {
        Self { n_vertices }
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.n_vertices
    }

    pub fn vertex(&self, i: usize, component: usize) -> usize {
        2 * i + component
    }

    pub fn edge(&self, i: usize) -> usize {
        2 * self.n_vertices + i
    }
}

/// Value of basis function `alpha` at scaled coordinates `s`.
pub fn p1_basis(alpha: usize, s: Point2) -> Point2 {
    match alpha {
        0 => Point2::new(1.0, 0.0),
        1 => Point2::new(s.x, 0.0),
        2 => Point2::new(s.y, 0.0),
        3 => Point2::new(0.0, 1.0),
        4 => Point2::new(0.0, s.x),
        5 => Point2::new(0.0, s.y),
        _ => unreachable!("vector P1 basis has six members"),
    }
}

/// Boundary trace of a virtual function on one edge, parametrized by
/// `t ∈ [0, 1]` from the edge's start vertex.
///
/// The normal component is the quadratic
/// `a (1 - t) + b t + 6 c t (1 - t)` whose mean is the edge degree of freedom;
/// the tangential component is linear.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeTrace {
    pub normal: [f64; 3],
    pub tangential: [f64; 2],
}

impl EdgeTrace {
    pub fn normal_at(&self, t: f64) -> f64 {
        let [a, b, c] = self.normal;
        a * (1.0 - t) + b * t + 6.0 * c * t * (1.0 - t)
    }

    pub fn tangential_at(&self, t: f64) -> f64 {
        self.tangential[0] * (1.0 - t) + self.tangential[1] * t
    }

    pub fn value_at(&self, e: &EdgeGeometry, t: f64) -> Point2 {
        e.normal * self.normal_at(t) + e.tangent * self.tangential_at(t)
    }

    pub fn mean_normal(&self) -> f64 {
        0.5 * (self.normal[0] + self.normal[1]) + self.normal[2]
    }
}

pub fn edge_trace(g: &ElementGeometry, dofs: &[f64], edge: usize) -> EdgeTrace {
    let n = g.n_vertices();
    let (i, j) = (edge, (edge + 1) % n);
    let e = &g.edges[edge];
    let vi = Point2::new(dofs[2 * i], dofs[2 * i + 1]);
    let vj = Point2::new(dofs[2 * j], dofs[2 * j + 1]);
    let (a, b) = (vi.dot(e.normal), vj.dot(e.normal));
    EdgeTrace {
        normal: [a, b, dofs[2 * n + edge] - 0.5 * (a + b)],
        tangential: [vi.dot(e.tangent), vj.dot(e.tangent)],
    }
}

/// Trace value at `t` on `edge` as a linear combination of the local degrees
/// of freedom: returns `(dof, vector coefficient)` pairs.
fn trace_weights(g: &ElementGeometry, edge: usize, t: f64) -> [(usize, Point2); 5] {
    let n = g.n_vertices();
    let (i, j) = (edge, (edge + 1) % n);
    let e = &g.edges[edge];
    let bubble = 6.0 * t * (1.0 - t);
    let (ca, cb) = (1.0 - t - 0.5 * bubble, t - 0.5 * bubble);
    let (nn, tt) = (e.normal, e.tangent);
    let comp = |c: f64, lin: f64, k: usize| {
        let (nk, tk) = if k == 0 { (nn.x, tt.x) } else { (nn.y, tt.y) };
        nn * (c * nk) + tt * (lin * tk)
    };
    [
        (2 * i, comp(ca, 1.0 - t, 0)),
        (2 * i + 1, comp(ca, 1.0 - t, 1)),
        (2 * j, comp(cb, t, 0)),
        (2 * j + 1, comp(cb, t, 1)),
        (2 * n + edge, nn * bubble),
    ]
}

/// Integrals of `1, ξ, η, ξ², ξη, η²` over the element, by the divergence
/// theorem on its edges (valid for non-convex polygons).
pub fn monomial_integrals(g: &ElementGeometry) -> [f64; 6] {
    let gauss = edge_gauss(3).expect("3-point rule");
    let mut out = [0.0; 6];
    for e in &g.edges {
        for (p, w) in gauss.points.iter().zip(&gauss.weights) {
            let s = g.scaled(e.at(p[0]));
            let wn = w * e.length * e.normal.x * g.diameter;
            // ∂/∂x of ξ^{a+1} η^b h/(a+1) is ξ^a η^b
            out[0] += wn * s.x;
            out[1] += wn * s.x * s.x / 2.0;
            out[2] += wn * s.x * s.y;
            out[3] += wn * s.x.powi(3) / 3.0;
            out[4] += wn * s.x * s.x * s.y / 2.0;
            out[5] += wn * s.x * s.y * s.y;
        }
    }
    out
}

/// Element matrices of the projections and the divergence.
#[derive(Clone, Debug)]
pub struct ProjectorPack {
    pub geometry: ElementGeometry,
    pub dofs: LocalDofMap,
    /// `6 x 3N`: coefficients of `Π∇ v` in the vector P1 basis.
    pub pi_nabla: DMatrix<f64>,
    /// `6 x 3N`: coefficients of `Π0 v`.
    pub pi_zero: DMatrix<f64>,
    /// Constant divergence of `v` from its degrees of freedom.
    pub div_row: DVector<f64>,
    /// `2 x 3N`: vertex average of each velocity component.
    pub vertex_average: DMatrix<f64>,
    /// `3N x 6`: degrees of freedom of each basis function.
    pub basis_dofs: DMatrix<f64>,
    /// `(φ_α, φ_β)_E`.
    pub mass: DMatrix<f64>,
    /// `(∇φ_α, ∇φ_β)_E`.
    pub grad_gram: DMatrix<f64>,
}

impl ProjectorPack {
    pub fn new(geometry: ElementGeometry) -> Result<Self> {
        let g = &geometry;
        let n = g.n_vertices();
        let map = LocalDofMap::new(n);
        let nd = map.n_dofs();
        let h = g.diameter;
        let area = g.area;
        if !(area > 0.0) {
            return Err(Error::Element {
                cell: usize::MAX,
                reason: format!("non-positive area {area:e}"),
            });
        }
        let mono = monomial_integrals(g);

        let mut div_row = DVector::zeros(nd);
        for (i, e) in g.edges.iter().enumerate() {
            div_row[map.edge(i)] = e.length / area;
        }

        let mut vertex_average = DMatrix::zeros(2, nd);
        for i in 0..n {
            vertex_average[(0, map.vertex(i, 0))] = 1.0 / n as f64;
            vertex_average[(1, map.vertex(i, 1))] = 1.0 / n as f64;
        }

        let mut basis_dofs = DMatrix::zeros(nd, P1_DIM);
        for alpha in 0..P1_DIM {
            for (i, v) in g.vertices.iter().enumerate() {
                let p = p1_basis(alpha, g.scaled(*v));
                basis_dofs[(map.vertex(i, 0), alpha)] = p.x;
                basis_dofs[(map.vertex(i, 1), alpha)] = p.y;
            }
            for (i, e) in g.edges.iter().enumerate() {
                basis_dofs[(map.edge(i), alpha)] =
                    p1_basis(alpha, g.scaled(e.midpoint)).dot(e.normal);
            }
        }

        // scalar mass matrix of (1, ξ, η), duplicated per component
        let m3 = [
            [mono[0], mono[1], mono[2]],
            [mono[1], mono[3], mono[4]],
            [mono[2], mono[4], mono[5]],
        ];
        let mut mass = DMatrix::zeros(P1_DIM, P1_DIM);
        for a in 0..3 {
            for b in 0..3 {
                mass[(a, b)] = m3[a][b];
                mass[(a + 3, b + 3)] = m3[a][b];
            }
        }
        let mut grad_gram = DMatrix::zeros(P1_DIM, P1_DIM);
        for a in [1, 2, 4, 5] {
            grad_gram[(a, a)] = area / (h * h);
        }

        // Π∇: gradient moments from boundary traces, constants from vertex averages
        let gauss = edge_gauss(3).expect("3-point rule");
        let mut lhs = Mat6::zeros();
        let mut rhs = DMatrix::zeros(P1_DIM, nd);
        for a in [1, 2, 4, 5] {
            lhs[(a, a)] = area / (h * h);
        }
        for (row, comp) in [(0, 0), (3, 1)] {
            lhs[(row, row)] = 1.0;
            for v in &g.vertices {
                let s = g.scaled(*v);
                lhs[(row, row + 1)] += s.x / n as f64;
                lhs[(row, row + 2)] += s.y / n as f64;
            }
            rhs.row_mut(row).copy_from(&vertex_average.row(comp));
        }
        for (ei, e) in g.edges.iter().enumerate() {
            // ∇φ_α n for α = 1, 2, 4, 5
            let flux = [
                (1, Point2::new(e.normal.x / h, 0.0)),
                (2, Point2::new(e.normal.y / h, 0.0)),
                (4, Point2::new(0.0, e.normal.x / h)),
                (5, Point2::new(0.0, e.normal.y / h)),
            ];
            for (p, w) in gauss.points.iter().zip(&gauss.weights) {
                let wl = w * e.length;
                for (k, coef) in trace_weights(g, ei, p[0]) {
                    for (a, gn) in flux {
                        rhs[(a, k)] += wl * gn.dot(coef);
                    }
                }
            }
        }
        let lu = lhs.lu();
        let pi_nabla = lu.solve(&rhs).ok_or_else(|| Error::Element {
            cell: usize::MAX,
            reason: "singular energy-projection system".into(),
        })?;

        // Π0: φ_α = ∇s_α + c_α (η, -ξ), s_α in scaled P2 coefficients
        let half = 0.5 * h;
        let decomposition: [([f64; 6], f64); 6] = [
            ([0.0, h, 0.0, 0.0, 0.0, 0.0], 0.0),
            ([0.0, 0.0, 0.0, half, 0.0, 0.0], 0.0),
            ([0.0, 0.0, 0.0, 0.0, half, 0.0], 0.5),
            ([0.0, 0.0, h, 0.0, 0.0, 0.0], 0.0),
            ([0.0, 0.0, 0.0, 0.0, half, 0.0], -0.5),
            ([0.0, 0.0, 0.0, 0.0, 0.0, half], 0.0),
        ];
        // (Π∇ v, (η, -ξ)) = Σ_β Π∇_β (H_{β,2} - H_{β,4})
        let rot_moments: DVector<f64> =
            DVector::from_fn(P1_DIM, |b, _| mass[(b, 2)] - mass[(b, 4)]);
        let rot_row = pi_nabla.transpose() * &rot_moments;
        let monomials = ScaledMonomials::for_element(g, 2);
        let mut c = DMatrix::zeros(P1_DIM, nd);
        for (a, (s, cg)) in decomposition.iter().enumerate() {
            let int_s: f64 = s.iter().zip(&mono).map(|(x, y)| x * y).sum();
            for k in 0..nd {
                c[(a, k)] = -div_row[k] * int_s + cg * rot_row[k];
            }
            for (ei, e) in g.edges.iter().enumerate() {
                for (p, w) in gauss.points.iter().zip(&gauss.weights) {
                    let m = monomials.values(e.at(p[0]));
                    let sv: f64 = s.iter().zip(&m).map(|(x, y)| x * y).sum();
                    let wl = w * e.length * sv;
                    for (k, coef) in trace_weights(g, ei, p[0]) {
                        c[(a, k)] += wl * coef.dot(e.normal);
                    }
                }
            }
        }
        let mass6 = Mat6::from_iterator(mass.iter().copied());
        let chol = mass6.cholesky().ok_or_else(|| Error::Element {
            cell: usize::MAX,
            reason: "singular mass matrix".into(),
        })?;
        let eig = mass6.symmetric_eigenvalues();
        let cond = eig.max() / eig.min();
        if cond > 1e12 {
            log::warn!("ill-conditioned element mass matrix (condition {cond:.2e})");
        }
        let mut pi_zero = DMatrix::zeros(P1_DIM, nd);
        for k in 0..nd {
            let col: SVector<f64, 6> = SVector::from_iterator(c.column(k).iter().copied());
            pi_zero.set_column(k, &chol.solve(&col));
        }

        Ok(Self {
            geometry,
            dofs: map,
            pi_nabla,
            pi_zero,
            div_row,
            vertex_average,
            basis_dofs,
            mass,
            grad_gram,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    /// Coefficients of `Π∇ v` or `Π0 v`.
    pub fn coefficients(&self, which: Projection, dofs: &[f64]) -> [f64; 6] {
        let m = match which {
            Projection::Nabla => &self.pi_nabla,
            Projection::Zero => &self.pi_zero,
        };
        std::array::from_fn(|a| (0..dofs.len()).map(|k| m[(a, k)] * dofs[k]).sum())
    }

    /// Value at `p` of the vector linear field with coefficients `c`.
    pub fn eval(&self, c: &[f64; 6], p: Point2) -> Point2 {
        let s = self.geometry.scaled(p);
        Point2::new(
            c[0] + c[1] * s.x + c[2] * s.y,
            c[3] + c[4] * s.x + c[5] * s.y,
        )
    }

    /// Constant gradient `[[∂x u_x, ∂y u_x], [∂x u_y, ∂y u_y]]` of the field
    /// with coefficients `c`.
    pub fn gradient(&self, c: &[f64; 6]) -> Matrix2<f64> {
        let h = self.geometry.diameter;
        Matrix2::new(c[1] / h, c[2] / h, c[4] / h, c[5] / h)
    }

    pub fn divergence(&self, dofs: &[f64]) -> f64 {
        (0..dofs.len()).map(|k| self.div_row[k] * dofs[k]).sum()
    }

    /// Evaluates `Π∇ v` or `Π0 v` at the given points.
    pub fn evaluate_projection(
        &self,
        which: Projection,
        dofs: &[f64],
        points: &[Point2],
    ) -> Vec<Point2> {
        let c = self.coefficients(which, dofs);
        points.iter().map(|&p| self.eval(&c, p)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    Nabla,
    Zero,
}

/// Degrees of freedom of a given field: vertex values and mean normal
/// fluxes along each edge.
pub fn dof_interpolate(
    g: &ElementGeometry,
    opts: IntegrationOptions,
    u: impl Fn(Point2) -> Point2,
) -> Vec<f64> {
    let n = g.n_vertices();
    let mut d = vec![0.0; 3 * n];
    for (i, v) in g.vertices.iter().enumerate() {
        let val = u(*v);
        d[2 * i] = val.x;
        d[2 * i + 1] = val.y;
    }
    for (i, e) in g.edges.iter().enumerate() {
        d[2 * n + i] =
            integrate_segment(e.start, e.end, opts, |p| [u(p).dot(e.normal)])[0] / e.length;
    }
    d
}

/// The dofi–dofi stabilizations before projection: the identity for the
/// gradient part and `|E| κ⁻¹` times the identity for the reaction part.
pub fn stabilization_matrices(
    n_dofs: usize,
    area: f64,
    kappa_inv: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_kappa_inv(kappa_inv)?;
    Ok((
        DMatrix::identity(n_dofs, n_dofs),
        DMatrix::identity(n_dofs, n_dofs) * (area * kappa_inv),
    ))
}

fn check_kappa_inv(kappa_inv: f64) -> Result<()> {
    if kappa_inv.is_finite() && kappa_inv >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "inverse permeability must be finite and non-negative, got {kappa_inv}"
        )))
    }
}

/// Local matrices of the viscosity-free bilinear form
/// `a_h(u, v) = (∇Π∇u, ∇Π∇v) + S∇ + κ⁻¹ (Π0u, Π0v) + S0` and of the
/// divergence pairing. The viscosity is applied at assembly.
#[derive(Clone, Debug)]
pub struct LocalForms {
    pub a: DMatrix<f64>,
    /// `B_E v = ∫_E ∇·v`.
    pub b: DVector<f64>,
    /// `(I - DΠ∇)ᵀ S (I - DΠ∇)` with the identity stabilization.
    pub s_nabla: DMatrix<f64>,
    /// `(I - DΠ0)ᵀ S (I - DΠ0)` with `S = |E| κ⁻¹ I`.
    pub s_zero: DMatrix<f64>,
}

pub fn local_forms(pack: &ProjectorPack, kappa_inv: f64) -> Result<LocalForms> {
    let nd = pack.n_dofs();
    let area = pack.geometry.area;
    let (s_grad, s_mass) = stabilization_matrices(nd, area, kappa_inv)?;
    let id = DMatrix::<f64>::identity(nd, nd);
    let rn = &id - &pack.basis_dofs * &pack.pi_nabla;
    let r0 = &id - &pack.basis_dofs * &pack.pi_zero;
    let s_nabla = rn.transpose() * s_grad * &rn;
    let s_zero = r0.transpose() * s_mass * &r0;
    let consistency = pack.pi_nabla.transpose() * &pack.grad_gram * &pack.pi_nabla;
    let reaction = (pack.pi_zero.transpose() * &pack.mass * &pack.pi_zero) * kappa_inv;
    let mut a = consistency + &s_nabla + reaction + &s_zero;
    // symmetrize round-off
    let at = a.transpose();
    a = (a + at) * 0.5;
    Ok(LocalForms {
        a,
        b: &pack.div_row * area,
        s_nabla,
        s_zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{fan_triangulate, ElementGeometry};
    use crate::quadrature::integrate_polygon;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn geom(c: &[(f64, f64)]) -> ElementGeometry {
        ElementGeometry::from_points(c.iter().map(|&(x, y)| Point2::new(x, y)).collect())
    }

    fn square() -> ElementGeometry {
        geom(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    }

    fn pentagon() -> ElementGeometry {
        geom(&[(0.0, 0.0), (1.2, 0.1), (1.5, 0.9), (0.6, 1.4), (-0.2, 0.8)])
    }

    fn l_hexagon() -> ElementGeometry {
        geom(&[
            (0.0, 0.0),
            (0.25, 0.0),
            (0.25, 0.5),
            (0.75, 0.5),
            (0.75, 1.0),
            (0.0, 1.0),
        ])
    }

    fn hanging() -> ElementGeometry {
        geom(&[
            (0.0, 0.0),
            (0.5, 0.0),
            (1.0, 0.0),
            (1.0, 0.5),
            (1.0, 1.0),
            (0.0, 1.0),
        ])
    }

    fn opts() -> IntegrationOptions {
        IntegrationOptions::default()
    }

    // affine field with coefficients c in the basis of the element
    fn field(g: &ElementGeometry, c: [f64; 6]) -> impl Fn(Point2) -> Point2 + '_ {
        move |p| {
            let s = g.scaled(p);
            Point2::new(
                c[0] + c[1] * s.x + c[2] * s.y,
                c[3] + c[4] * s.x + c[5] * s.y,
            )
        }
    }

    #[test]
    fn dof_layout() {
        let m = LocalDofMap::new(5);
        assert_eq!(m.n_dofs(), 15);
        assert_eq!(m.vertex(2, 1), 5);
        assert_eq!(m.edge(0), 10);
    }

    #[test]
    fn traces() {
        let g = square();
        let d = dof_interpolate(&g, opts(), |_| Point2::new(1.0, 0.0));
        for e in 0..4 {
            let t = edge_trace(&g, &d, e);
            for s in [0.0, 0.3, 1.0] {
                let v = t.value_at(&g.edges[e], s);
                assert!((v - Point2::new(1.0, 0.0)).norm() < 1e-15);
            }
        }
        let d = dof_interpolate(&g, opts(), |p| p);
        let top = edge_trace(&g, &d, 2);
        assert_eq!(d[8 + 2], 1.0);
        for s in [0.0, 0.5, 0.9] {
            assert_relative_eq!(top.normal_at(s), 1.0, epsilon = 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = pentagon();
        let d: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gauss = edge_gauss(3).unwrap();
        for e in 0..5 {
            let t = edge_trace(&g, &d, e);
            let integral: f64 = gauss
                .points
                .iter()
                .zip(&gauss.weights)
                .map(|(p, w)| w * t.normal_at(p[0]))
                .sum();
            assert!((integral - d[10 + e]).abs() < 1e-14);
            assert!((t.mean_normal() - d[10 + e]).abs() < 1e-15);
        }
    }

    #[test]
    fn projectors_reproduce_linear_fields() {
        for g in [square(), pentagon(), l_hexagon(), hanging()] {
            let pack = ProjectorPack::new(g.clone()).unwrap();
            for alpha in 0..6 {
                let mut c = [0.0; 6];
                c[alpha] = 1.0;
                let d = dof_interpolate(&g, opts(), field(&g, c));
                for which in [Projection::Nabla, Projection::Zero] {
                    let got = pack.coefficients(which, &d);
                    for k in 0..6 {
                        assert!(
                            (got[k] - c[k]).abs() < 1e-13,
                            "{which:?} α={alpha}: {got:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn interpolant_of_identity_has_identity_gradient() {
        let g = pentagon();
        let pack = ProjectorPack::new(g.clone()).unwrap();
        let d = dof_interpolate(&g, opts(), |p| p);
        let grad = pack.gradient(&pack.coefficients(Projection::Nabla, &d));
        assert!((grad - Matrix2::identity()).abs().max() < 1e-13);
        let c = pack.coefficients(
            Projection::Zero,
            &dof_interpolate(&g, opts(), |_| Point2::new(0.3, -2.0)),
        );
        let v = pack.eval(&c, Point2::new(0.7, 0.2));
        assert!((v - Point2::new(0.3, -2.0)).norm() < 1e-14);
    }

    // Gradient moments (∇v, ∇p_α) through the boundary formula, evaluated
    // directly from the edge traces.
    fn boundary_gradient_moments(g: &ElementGeometry, d: &[f64]) -> [f64; 6] {
        let h = g.diameter;
        let gauss = edge_gauss(3).unwrap();
        let mut out = [0.0; 6];
        for (i, e) in g.edges.iter().enumerate() {
            let t = edge_trace(g, d, i);
            for (p, w) in gauss.points.iter().zip(&gauss.weights) {
                let v = t.value_at(e, p[0]);
                let wl = w * e.length / h;
                out[1] += wl * v.x * e.normal.x;
                out[2] += wl * v.x * e.normal.y;
                out[4] += wl * v.y * e.normal.x;
                out[5] += wl * v.y * e.normal.y;
            }
        }
        out
    }

    #[test]
    fn energy_projection_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for g in [pentagon(), l_hexagon()] {
            let pack = ProjectorPack::new(g.clone()).unwrap();
            let nd = pack.n_dofs();
            for _ in 0..10 {
                let d: Vec<f64> = (0..nd).map(|_| rng.random_range(-1.0..1.0)).collect();
                let c = pack.coefficients(Projection::Nabla, &d);
                let lhs: Vec<f64> = (0..6)
                    .map(|a| (0..6).map(|b| pack.grad_gram[(a, b)] * c[b]).sum())
                    .collect();
                let rhs = boundary_gradient_moments(&g, &d);
                for a in [1, 2, 4, 5] {
                    assert!((lhs[a] - rhs[a]).abs() < 1e-12);
                }
                let avg = &pack.vertex_average * DVector::from_vec(d.clone());
                let pv: Vec<Point2> = g.vertices.iter().map(|&v| pack.eval(&c, v)).collect();
                let mean = pv.iter().fold(Point2::default(), |a, &b| a + b) / g.n_vertices() as f64;
                assert!((mean.x - avg[0]).abs() < 1e-13 && (mean.y - avg[1]).abs() < 1e-13);
            }
        }
    }

    // (v, p_α) through the three-term formula, assembled independently with
    // explicit potentials.
    #[test]
    fn l2_projection_matches_three_term_formula() {
        let g = square();
        let pack = ProjectorPack::new(g.clone()).unwrap();
        let mut d = vec![0.0; 12];
        d[8] = 1.0;
        let h = g.diameter;
        let c0 = pack.coefficients(Projection::Zero, &d);
        let cn = pack.coefficients(Projection::Nabla, &d);
        let sub = fan_triangulate(&g.vertices).unwrap();
        let div = pack.divergence(&d);
        let gauss = edge_gauss(3).unwrap();
        // potentials s with ∇s: p_0 = ∇(x - x_E), p_1 = ∇((x-x_E)²/(2h)), ...
        let pots: [Box<dyn Fn(Point2) -> f64>; 4] = [
            Box::new(|p| p.x - 0.5),
            Box::new(move |p| (p.x - 0.5).powi(2) / (2.0 * h)),
            Box::new(|p| p.y - 0.5),
            Box::new(move |p| (p.y - 0.5).powi(2) / (2.0 * h)),
        ];
        for (alpha, s) in [0usize, 1, 3, 5].into_iter().zip(pots.iter()) {
            let vol = integrate_polygon(&sub, opts(), |p| [s(p)])[0];
            let mut bnd = 0.0;
            for (i, e) in g.edges.iter().enumerate() {
                let t = edge_trace(&g, &d, i);
                for (p, w) in gauss.points.iter().zip(&gauss.weights) {
                    bnd += w * e.length * t.normal_at(p[0]) * s(e.at(p[0]));
                }
            }
            let expected = -div * vol + bnd;
            let got: f64 = (0..6).map(|b| pack.mass[(alpha, b)] * c0[b]).sum();
            assert!((got - expected).abs() < 1e-14, "α={alpha}");
        }
        // rotational part uses Π∇ v
        let g_moment = |c: &[f64; 6]| -> f64 {
            (0..6)
                .map(|b| (pack.mass[(2, b)] - pack.mass[(4, b)]) * c[b])
                .sum()
        };
        assert!((g_moment(&c0) - g_moment(&cn)).abs() < 1e-14);
    }

    #[test]
    fn divergence_row() {
        let g = square();
        let pack = ProjectorPack::new(g.clone()).unwrap();
        let d = dof_interpolate(&g, opts(), |p| p);
        assert_relative_eq!(pack.divergence(&d), 2.0, epsilon = 1e-14);
        let d = dof_interpolate(&g, opts(), |p| Point2::new(-p.y, p.x));
        assert!(pack.divergence(&d).abs() < 1e-15);
        let forms = local_forms(&pack, 1.0).unwrap();
        let b: f64 = forms
            .b
            .iter()
            .zip(dof_interpolate(&g, opts(), |p| p))
            .map(|(x, y)| x * y)
            .sum();
        assert_relative_eq!(b, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn consistency_on_linear_fields() {
        let kinv = 2.5;
        for g in [pentagon(), l_hexagon(), hanging()] {
            let pack = ProjectorPack::new(g.clone()).unwrap();
            let forms = local_forms(&pack, kinv).unwrap();
            let sub = fan_triangulate(&g.vertices).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..5 {
                let cp: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let cq: [f64; 6] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let dp = DVector::from_vec(dof_interpolate(&g, opts(), field(&g, cp)));
                let dq = DVector::from_vec(dof_interpolate(&g, opts(), field(&g, cq)));
                let discrete = dq.dot(&(&forms.a * &dp));
                let gp = pack.gradient(&cp);
                let gq = pack.gradient(&cq);
                let (fp, fq) = (field(&g, cp), field(&g, cq));
                let mass = integrate_polygon(&sub, opts(), |x| [fp(x).dot(fq(x))])[0];
                let exact = g.area * gp.component_mul(&gq).sum() + kinv * mass;
                assert!((discrete - exact).abs() < 1e-12 * exact.abs().max(1.0));
            }
        }
    }

    #[test]
    fn local_matrix_symmetric_psd_with_expected_kernel() {
        for g in [pentagon(), l_hexagon(), hanging()] {
            let pack = ProjectorPack::new(g.clone()).unwrap();
            for (kinv, kernel) in [(1.0, 0), (0.0, 2)] {
                let a = local_forms(&pack, kinv).unwrap().a;
                let norm = a.abs().max();
                assert!((&a - a.transpose()).abs().max() <= 1e-13 * norm);
                let eig = a.clone().symmetric_eigenvalues();
                assert!(eig.min() >= -1e-12 * norm);
                let zero = eig.iter().filter(|&&l| l.abs() < 1e-10 * norm).count();
                assert_eq!(zero, kernel);
            }
        }
    }

    #[test]
    fn stabilization_scaling() {
        let g = pentagon();
        let big = ElementGeometry::from_points(g.vertices.iter().map(|&p| p * 2.0).collect());
        let s1 = local_forms(&ProjectorPack::new(g.clone()).unwrap(), 1.0).unwrap();
        let s2 = local_forms(&ProjectorPack::new(big.clone()).unwrap(), 1.0).unwrap();
        assert!((&s1.s_nabla - &s2.s_nabla).abs().max() < 1e-12);
        assert!((&s1.s_zero * 4.0 - &s2.s_zero).abs().max() < 1e-12);
        let (_, sz) = stabilization_matrices(3, big.area, 1.0).unwrap();
        assert_relative_eq!(sz[(0, 0)], 4.0 * g.area, epsilon = 1e-12);
        assert!(stabilization_matrices(3, 1.0, -1.0).is_err());
        // constants are invisible to both stabilizations
        let d = DVector::from_vec(dof_interpolate(&g, opts(), |_| Point2::new(0.4, 1.0)));
        assert!((&s1.s_zero * &d).norm() < 1e-13);
        assert!((&s1.s_nabla * &d).norm() < 1e-13);
    }

    #[test]
    fn edge_dof_of_vortex_on_bottom_edge_vanishes() {
        use std::f64::consts::PI;
        let g = square();
        let u = |p: Point2| {
            Point2::new(
                (2.0 * PI * p.x).sin() * (2.0 * PI * p.y).cos(),
                -(2.0 * PI * p.x).cos() * (2.0 * PI * p.y).sin(),
            )
        };
        let d = dof_interpolate(&g, opts(), u);
        assert!(d[8].abs() < 1e-15);
    }

    #[test]
    fn monomial_integrals_match_fan_quadrature() {
        for g in [pentagon(), l_hexagon()] {
            let sub = fan_triangulate(&g.vertices).unwrap();
            let m = ScaledMonomials::for_element(&g, 2);
            let q = integrate_polygon(&sub, opts(), |p| m.values(p));
            let exact = monomial_integrals(&g);
            for k in 0..6 {
                assert!((q[k] - exact[k]).abs() < 1e-15);
            }
            assert!(exact[1].abs() < 1e-15 && exact[2].abs() < 1e-15);
        }
    }
}
