//! Simulation and control library for tactile-feedback insertion of grasped
//! objects into tight gaps.
//!
//! An object with a planar footprint is lowered into the gap between two
//! blocks under a translation/yaw error. A blocked attempt pivots the object
//! about the block edge, which is rendered as a sequence of marker-shear and
//! pressure fields on two gel pads. From those fields an estimator recovers
//! the error region and magnitude, and the probe-correct controller moves the
//! gripper for the next attempt.

pub mod contact;
pub mod controller;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod sign;
pub mod tactile;

mod cli;

pub use cli::run as cli;
pub use error::{Error, Result};
pub use exec::Execution;
pub use sign::Sign;
