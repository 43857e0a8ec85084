//! Sampled-data loops with a constant input delay.
//!
//! * [`discretize`]: zero-order-hold discretization with delay, one-step
//!   updates, a two-segment reference step and trajectory simulation.
//! * [`inversion`]: closed-form delay recovery from a state-to-input ratio
//!   and its admissibility bounds.
//! * [`profile`]: delay-versus-sampling-period tables, irregular-point
//!   detection and correction, CSV storage.
//! * [`optimizer`]: least-squares parabola and the delay-minimizing period.
//! * [`scenario`]: end-to-end runs driven by TOML scenario files, with
//!   golden checks and a structured report.

pub mod discretize;
pub mod error;
pub mod expm;
pub mod inversion;
pub mod optimizer;
pub mod plant;
pub mod plot;
pub mod profile;
pub mod scenario;

pub use error::{Error, Result, Warning};
pub use plant::{ScalarLoopGains, StateSpacePlant};
