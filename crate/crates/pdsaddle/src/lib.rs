//! Primal-dual saddle-point solvers with acceleration on strongly convex
//! subspaces.
//!
//! The crate solves `min_x max_y G(x) + <Kx, y> - F*(y)` by proximal
//! primal-dual iterations whose primal step operator splits as
//! `T = tau P + tau_perp P_perp` along a projector `P` onto the subspace
//! where `G` is strongly convex. Step-length schedules that accelerate only
//! the `P`-component give mixed `O(1/N^2) + O(1/N)` behaviour on problems
//! that are not strongly convex as a whole.
//!
//! Modules:
//! - [`grid`]: field containers, FFTs, synthetic data, PGM I/O
//! - [`linop`]: gradients, blur operators, projectors, norm estimation
//! - [`prox`]: resolvent (proximal) maps for the bundled functionals
//! - [`schedules`]: scalar step-length recurrences and their runtime ledger
//! - [`solver`]: the generic iteration loop
//! - [`problems`]: builders for the bundled imaging/regression problems
//! - [`metrics`]: pseudo duality gap, decibel reporting, rate fitting
//! - [`check`]: randomized operator/projector contract checks

pub mod check;
pub mod error;
pub mod grid;
pub mod linop;
pub mod metrics;
pub mod problems;
pub mod prox;
pub mod schedules;
pub mod solver;

pub use error::{PdError, PdResult};
pub use grid::{FieldKind, FieldShape, GridField, StackedVar};
