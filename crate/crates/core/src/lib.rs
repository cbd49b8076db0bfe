//! Trajectory encoding and generalization benchmark.
//!
//! Three encoders are provided: dynamic movement primitives ([`dmp`]),
//! time-based Gaussian mixture regression with its task-parameterized
//! extension ([`gmm`]), and stable estimators of dynamical systems
//! ([`seds`]). [`eval`] holds the metrics and [`experiment`] the
//! reconstruction and generalization studies built on top of them.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dmp;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gmm;
pub mod seds;
pub mod traj;

pub use error::{Error, Result};
pub use traj::{Action, DemoRecord, DemoSet, FrameTransform, GridPos, Trajectory};
