//! Converts dashcam videos into SCENIC scenario scripts through a
//! vision-language model and refines them until a simulation of the script
//! matches the video on a fixed set of driving features.
//!
//! The dialect, feature metric and frame sampling live in `dashsim-core`;
//! this crate adds frame extraction, model gateways, simulator adapters, the
//! refinement engine, configuration and the `dashsim` command.

pub mod cli;
pub mod config;
pub mod engine;
pub mod frames;
mod fsutil;
pub mod gateway;
pub mod mockvid;
pub mod setup;
pub mod sim;

pub use config::PipelineConfig;
pub use engine::{Engine, Outcome, RunState};
pub use fsutil::{write_atomic, write_json};
