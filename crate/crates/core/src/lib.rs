//! Numerical solver and verification harness for the exterior Dirichlet
//! problem of the homogeneous k-Hessian equation S_k(D²u) = 0.
//!
//! The equation is regularized to S_k(D²u) = f^ε on truncated annuli
//! B_R \ Ω, solved by damped Newton iteration that keeps the Hessian
//! spectrum in the cone Γ_k, and continued along ε ↓ 0, R ↑ ∞. Level-set
//! curvature integrals of the converged fields verify the monotonicity and
//! boundary inequalities that the limit solution satisfies.
//!
//! Modules:
//! - [`symfun`]: elementary symmetric functions, S_k^{ij}, Γ_k tests.
//! - [`closedforms`]: radial profiles, right-hand sides, barriers, weights.
//! - [`subsolution`]: convex inner domains and glued subsolutions.
//! - [`solver`]: grids, Newton iteration, continuation, diagnostics.
//! - [`levelset`]: level sets, curvature integrals, inequality reports.
//! - [`decay`]: log–log decay fits of converged fields.

pub mod closedforms;
pub mod decay;
pub mod error;
pub mod levelset;
pub mod solver;
pub mod subsolution;
pub mod symfun;

pub use error::{Error, Result};
