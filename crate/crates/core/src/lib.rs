//! Closed-form optimal tracking control for control-affine systems with
//! time-varying equality and inequality constraints.
//!
//! The controller drives the state toward the instant-wise constrained
//! minimizer `χ*(t)` of a cost `σ(t, x)` subject to `h(t, x) = ȳ(t)` and
//! `g(t, x) ≤ 0`:
//!
//! ```text
//! u = B(x)⁻¹ (−f_A(x) + K_x η(t, x, ȳ))
//! η = H^#_R (ȳ − h) − (I − H^#_R H) R⁻¹ r
//! ```
//!
//! where `r`, `R` are the gradient and Hessian of the cost augmented with a
//! barrier on active inequality rows.

pub mod barrier;
pub mod bench;
pub mod controller;
pub mod error;
pub mod examples;
pub mod ipiter;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod rng;
pub mod sclqr;
pub mod sim;
pub mod verify;

pub use barrier::{BarrierConfig, P2Mode};
pub use error::{Error, Result};
pub use problem::{Dims, EvalBundle, ProblemDef};
pub use sim::{ControlLaw, SimConfig, Trajectory, VLaw};
