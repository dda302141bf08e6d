//! Experiment harness around `satvnf-core`: JSON configuration, batch / online / Taguchi
//! drivers, CSV and JSON output, and the property suites behind `satvnf check`.

pub mod checks;
pub mod config;
pub mod emit;
mod error;
pub mod harness;

pub use config::{Algorithm, Mode, SimulationConfig};
pub use emit::Format;
pub use error::{HarnessError, Result};
pub use harness::{run_batch, run_online, run_taguchi, BatchRun, OnlineRun, SlotMetrics, TaguchiTable};
