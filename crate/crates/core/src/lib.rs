//! Finite-dimensional linear control: controllability and observability
//! analysis, stability certificates, feedback and observer synthesis,
//! finite- and infinite-horizon LQR, Gramian stabilization with a prescribed
//! decay rate, and local steering of nonlinear systems through their
//! linearization.

pub mod cli;
pub mod error;
pub mod lqr;
pub mod lti;
pub mod nonlinear;
pub mod numkernel;
pub mod observability;
pub mod reachability;
pub mod stability;
pub mod synthesis;

pub use error::{ControlError, ErrorClass, Result};
pub use lti::{simulate, ControlSignal, LinearDynamics, LtiSystem, LtvSystem, Trajectory};
pub use numkernel::{Matrix, ToleranceConfig, Vector};
