//! Divergence-preserving reconstruction of virtual velocities into the
//! lowest-order Raviart–Thomas space on the fan sub-triangulation.
//!
//! The reconstructed field has one flux unknown per sub-edge. Fluxes through
//! the polygon edges are fixed by the edge degrees of freedom; the interior
//! fluxes are chosen so that every sub-triangle has the same (constant)
//! divergence. Hence `∇·R_h v` equals the virtual divergence, and a gradient
//! force `∇q` tested against `R_h v` only sees `∮ q R_h v·n`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{FanAnchor, Point2, SubTriangulation};
use crate::quadrature::{integrate_polygon, integrate_triangle, IntegrationOptions};
use crate::vem::ProjectorPack;

/// Lowest-order Raviart–Thomas basis function of a triangle for the edge
/// opposite `vertices[k]`, normalized to unit outward flux.
pub fn rt0_basis(vertices: &[Point2; 3], area: f64, k: usize, x: Point2) -> Point2 {
    (x - vertices[k]) / (2.0 * area)
}

/// Reconstruction operator of one element.
#[derive(Clone, Debug)]
pub struct RtReconstruction {
    pub sub: SubTriangulation,
    /// `#sub-edges x 3N`: sub-edge fluxes (along the fixed sub-edge normals)
    /// of `R_h v` in terms of the element degrees of freedom.
    pub r: DMatrix<f64>,
}

pub fn build_reconstruction(
    pack: &ProjectorPack,
    sub: SubTriangulation,
) -> Result<RtReconstruction> {
    let g = &pack.geometry;
    let n = g.n_vertices();
    let nd = pack.n_dofs();
    let ns = sub.edges.len();
    let ni = sub.n_interior();
    let mut r = DMatrix::zeros(ns, nd);
    for (i, e) in g.edges.iter().enumerate() {
        r[(i, pack.dofs.edge(i))] = e.length;
    }
    if ni > 0 {
        // rows: d_t - d_0 = 0 for t >= 1, plus a zero-circulation gauge for
        // the interior fan
        let mut m = DMatrix::zeros(ni, ni);
        let mut k = DMatrix::zeros(ni, n);
        let t0 = &sub.triangles[0];
        for (row, t) in sub.triangles.iter().enumerate().skip(1) {
            for (tri, scale) in [(t, 1.0 / t.area), (t0, -1.0 / t0.area)] {
                for j in 0..3 {
                    let e = tri.edges[j];
                    let c = scale * tri.signs[j];
                    if e < n {
                        k[(row - 1, e)] += c;
                    } else {
                        m[(row - 1, e - n)] += c;
                    }
                }
            }
        }
        if matches!(sub.anchor, FanAnchor::Interior(_)) {
            for j in 0..ni {
                m[(ni - 1, j)] = 1.0;
            }
        }
        let rhs = -(k * r.rows(0, n));
        let x = m.lu().solve(&rhs).ok_or_else(|| Error::Element {
            cell: usize::MAX,
            reason: "singular reconstruction system".into(),
        })?;
        r.rows_mut(n, ni).copy_from(&x);
    }
    Ok(RtReconstruction { sub, r })
}

impl RtReconstruction {
    /// Sub-edge fluxes of `R_h v`.
    pub fn fluxes(&self, dofs: &[f64]) -> DVector<f64> {
        &self.r * DVector::from_column_slice(dofs)
    }

    /// Constant divergence of `R_h v` on each sub-triangle.
    pub fn triangle_divergences(&self, fluxes: &DVector<f64>) -> Vec<f64> {
        self.sub
            .triangles
            .iter()
            .map(|t| (0..3).map(|k| t.signs[k] * fluxes[t.edges[k]]).sum::<f64>() / t.area)
            .collect()
    }

    /// Value of the field with the given sub-edge fluxes.
    pub fn eval(&self, fluxes: &DVector<f64>, p: Point2) -> Result<Point2> {
        let t = self.sub.locate(p).ok_or_else(|| {
            Error::InvalidParameter(format!("point ({}, {}) lies outside the element", p.x, p.y))
        })?;
        Ok(self.eval_on(t, fluxes, p))
    }

    /// Value on sub-triangle `t` (extended linearly outside it).
    pub fn eval_on(&self, t: usize, fluxes: &DVector<f64>, p: Point2) -> Point2 {
        let tri = &self.sub.triangles[t];
        (0..3).fold(Point2::default(), |acc, k| {
            acc + rt0_basis(&tri.vertices, tri.area, k, p) * (tri.signs[k] * fluxes[tri.edges[k]])
        })
    }

    /// `(f, R_h φ_j)_E` for every local basis function `φ_j`.
    pub fn load_vector(
        &self,
        opts: IntegrationOptions,
        f: impl Fn(Point2) -> Point2,
    ) -> DVector<f64> {
        let mut edge_moments = DVector::zeros(self.sub.edges.len());
        for tri in &self.sub.triangles {
            let m = integrate_triangle(tri.vertices, opts, |x| {
                let v = f(x);
                std::array::from_fn::<f64, 3, _>(|k| {
                    v.dot(rt0_basis(&tri.vertices, tri.area, k, x))
                })
            });
            for k in 0..3 {
                edge_moments[tri.edges[k]] += tri.signs[k] * m[k];
            }
        }
        self.r.transpose() * edge_moments
    }

    pub fn diagnostics(&self, pack: &ProjectorPack, dofs: &[f64]) -> ReconstructionDiagnostics {
        let fl = self.fluxes(dofs);
        let g = &pack.geometry;
        let flux_mismatch = g
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| (fl[i] - e.length * dofs[pack.dofs.edge(i)]).abs())
            .fold(0.0, f64::max);
        let div = self.triangle_divergences(&fl);
        let total: f64 = div
            .iter()
            .zip(&self.sub.triangles)
            .map(|(d, t)| d * t.area)
            .sum();
        let virtual_div = pack.divergence(dofs) * g.area;
        let (lo, hi) = div
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &d| {
                (a.min(d), b.max(d))
            });
        ReconstructionDiagnostics {
            flux_mismatch,
            divergence_mismatch: (total - virtual_div).abs(),
            divergence_spread: hi - lo,
        }
    }
}

/// Exactness audit of one reconstruction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReconstructionDiagnostics {
    /// `max_e |∫_e R_h v·n - ∫_e v·n|` over the polygon edges.
    pub flux_mismatch: f64,
    /// `|∫_E ∇·R_h v - ∫_E ∇·v|`.
    pub divergence_mismatch: f64,
    /// Largest difference between sub-triangle divergences.
    pub divergence_spread: f64,
}

/// `(f, Π0 φ_j)_E`: the load of the non-robust scheme.
pub fn standard_load_vector(
    pack: &ProjectorPack,
    sub: &SubTriangulation,
    opts: IntegrationOptions,
    f: impl Fn(Point2) -> Point2,
) -> DVector<f64> {
    let g = &pack.geometry;
    let moments = integrate_polygon(sub, opts, |x| {
        let v = f(x);
        let s = g.scaled(x);
        [v.x, v.x * s.x, v.x * s.y, v.y, v.y * s.x, v.y * s.y]
    });
    pack.pi_zero.transpose() * DVector::from_row_slice(&moments)
}
