//! Numerical laboratory for the radially symmetric parabolic-elliptic
//! Keller-Segel system with space-dependent logistic source on a disk.
//!
//! Two solvers integrate the same dynamics: [`stepper_u`] works with the
//! density `u(r)`, [`stepper_w`] with the cumulative mass `w(s)`, `s = r^2`.
//! [`certificate`] evaluates the moment-functional blow-up criterion and
//! [`monitors`] checks a-priori bounds along computed trajectories.

// `!(x > 0.0)` is used on purpose so that NaN lands in the error branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificate;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod harness;
pub mod initdata;
pub mod model;
pub mod monitors;
pub mod stepper_u;
pub mod stepper_w;
pub mod stepping;
pub mod transform;

mod stencil;
mod tridiag;

pub use certificate::{Certificate, MomentConfig, OdiCoefficients};
pub use elliptic::FieldV;
pub use error::{Error, Result};
pub use grid::{FieldU, FieldW, GridSpec, RadialGrid};
pub use initdata::{BumpSpec, Profile};
pub use model::{CoefficientFn, CoefficientSpec, ModelParams};
pub use monitors::{MonitorReport, Supersolution};
pub use stepper_u::SimStateU;
pub use stepper_w::SimStateW;
pub use stepping::{Outcome, Snapshot, SolverKind, StepperConfig, Trajectory};
