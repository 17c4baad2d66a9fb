//! Scenario runs, detector analysis and the `qtraj` command line.

pub mod analysis;
pub mod config;
pub mod detector;
pub mod error;
pub mod finsler_check;
pub mod fringe;
pub mod pipeline;
pub mod presets;

pub use config::{Scenario, ScenarioConfig};
pub use error::{LabError, Result};
pub use pipeline::{run_scenario, RunOptions, RunSummary};
