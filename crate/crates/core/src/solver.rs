//! Sparse direct solve with iterative refinement.
//!
//! The factorization is a general sparse LU. Residuals for refinement are
//! accumulated in double-double arithmetic, which recovers the velocity of
//! the saddle-point system to full precision even when the right-hand side
//! is dominated by a large gradient component (tiny viscosity).

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with summed duplicates.
pub(crate) struct CsrMatrix {
    pub n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *vals.last_mut().expect("previous entry") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    #[cfg(test)]
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    #[cfg(test)]
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `b - A x`, each entry accumulated in double-double arithmetic.
    pub fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut acc = DoubleDouble::new(b[i]);
                for (j, v) in self.row(i) {
                    acc.add_product(-v, x[j]);
                }
                acc.value()
            })
            .collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn triplets(&self) -> Vec<Triplet<usize, usize, f64>> {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| Triplet::new(i, j, v)))
            .collect()
    }
}

#[derive(Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn new(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    fn add(&mut self, v: f64) {
        // TwoSum
        let s = self.hi + v;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (v - bb);
        self.hi = s;
        self.lo += err;
    }

    fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        self.add(p);
        self.lo += e;
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) struct LinearSolution {
    pub x: Vec<f64>,
    /// `‖b - A x‖∞ / ‖b‖∞` (absolute when `b = 0`).
    pub relative_residual: f64,
}

pub(crate) fn solve(a: &CsrMatrix, b: &[f64]) -> Result<LinearSolution> {
    let n = a.n;
    let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &a.triplets())
        .map_err(|e| Error::Solver(format!("matrix construction: {e:?}")))?;
    let lu = m
        .sp_lu()
        .map_err(|e| Error::Solver(format!("LU factorization: {e:?}")))?;
    let apply = |r: &[f64]| -> Vec<f64> {
        let col = Col::from_fn(n, |i| r[i]);
        let y = lu.solve(&col);
        (0..n).map(|i| y[i]).collect()
    };
    let bnorm = norm_inf(b);
    let mut x = apply(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver(
            "factorization produced non-finite values (singular matrix?)".into(),
        ));
    }
    let mut r = a.residual(b, &x);
    let mut rnorm = norm_inf(&r);
    for _ in 0..6 {
        if rnorm <= 1e-15 * bnorm || rnorm == 0.0 {
            break;
        }
        let d = apply(&r);
        let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        let tr = a.residual(b, &trial);
        let tn = norm_inf(&tr);
        if !(tn < rnorm) {
            break;
        }
        x = trial;
        r = tr;
        rnorm = tn;
    }
    let relative_residual = if bnorm > 0.0 { rnorm / bnorm } else { rnorm };
    Ok(LinearSolution {
        x,
        relative_residual,
    })
}
