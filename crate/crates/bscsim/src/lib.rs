//! Analysis and simulation toolkit for Backward-Shifted Coding (BSC) video
//! streaming: closed-form QoE metrics (starvation probability and count
//! distribution, quality-level time split, delays, QoE cost), a discrete-event
//! simulator, an exact small-instance oracle, and a bitrate-ladder planner.

pub mod ballot_analysis;
pub mod cli;
pub mod des_simulator;
pub mod error;
pub mod qoe_planner;
pub mod quality_markov;
pub mod stream_model;

pub use error::{Error, Result};
pub use stream_model::SessionParams;

/// Toolkit version embedded in every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
