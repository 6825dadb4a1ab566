//! Simulator and design search for a latch-mediated bistable fin actuator.
//!
//! A crank–slider slowly compresses a buckled silicone strip. A latch
//! near top dead center tilts the loaded well until it vanishes, and the
//! strip snaps through, flipping a fin that pushes the robot upward.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuator;
pub mod beam;
pub mod body;
pub mod config;
pub mod error;
pub mod geometry;
pub mod hydro;
pub mod optimize;
pub mod output;
pub mod units;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
