//! Finite-difference solvers for S_k(D²u) = f on annuli.
//!
//! Radial problems use a graded 1D collocation in r for any n; Cartesian
//! problems (n = 2, 3) use a masked lattice with ghost layers on ∂Ω and
//! ∂B_R. Both are solved by damped Newton iteration that keeps every
//! iterate in Γ_k, and continued along ε ↓ 0 / R ↑ ∞ schedules.

pub mod checkpoint;
pub mod continuation;
pub mod diagnostics;
pub mod discrete;
pub mod fd;
pub mod field;
pub mod grid;
pub mod jets;
pub mod linalg;
pub mod newton;
pub mod problem;

pub use continuation::{continue_from, continue_to_limit, probe_points, ContinuationFailure, ContinuationReport, StageRecord};
pub use diagnostics::{diagnostics, far_field_fit, renormalized, DiagnosticsReport, FarFieldFit};
pub use discrete::{gamma_violations, jacobian, residual, scaled_residual_norm};
pub use field::{Field, Jet};
pub use grid::{AnnularGrid, CartesianGrid, NodeKind, RadialGrid};
pub use newton::{newton_step, solve, solve_from, SolveReport, StepInfo};
pub use problem::{Problem, ProblemKind, SolveConfig};
