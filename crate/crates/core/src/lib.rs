//! Lowest-order, divergence-free virtual element method for the incompressible
//! Brinkman equations
//!
//! ```text
//!   -nu Δu + nu κ⁻¹ u - ∇p = f,   ∇·u = 0   in Ω,   u = g on ∂Ω
//! ```
//!
//! on general polygonal meshes. The load is tested against a Raviart–Thomas
//! reconstruction of the test functions on a sub-triangulation of every
//! element, which makes the discrete velocity independent of the pressure and
//! of the viscosity ("pressure robustness"). A residual error estimator with
//! Dörfler marking drives local refinement with hanging nodes.
//!
//! Module map:
//!
//! * [`mesh`]: polygonal meshes, element geometry, fan sub-triangulations,
//!   generators, refinement and JSON I/O.
//! * [`quadrature`]: triangle/edge rules and scaled monomials.
//! * [`vem`]: local degrees of freedom, projectors, stabilization and local forms.
//! * [`reconstruction`]: the RT0 reconstruction operator and load vectors.
//! * [`assembly`]: global numbering, saddle-point assembly, Dirichlet data, solve.
//! * [`estimate`]: residual estimator, marking and the adaptive loop.
//! * [`bench`]: manufactured solutions, error norms, studies and exports.

// NaN must fail parameter checks, so they are written as negated comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bench;
pub mod error;
pub mod estimate;
pub mod mesh;
pub mod quadrature;
pub mod reconstruction;
mod solver;
pub mod vem;

pub use error::{Error, Result};
pub use mesh::{Point2, PolygonalMesh};
