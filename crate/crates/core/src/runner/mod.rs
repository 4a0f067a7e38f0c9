//! Configuration, presets, the simulation driver and the command line.

pub mod cli;
pub mod config;
pub mod presets;
pub mod sim;

pub use cli::cli;
pub use config::{ExperimentKind, InitField, ModelKind, PhaseRule, SimConfig};
pub use presets::{preset, PRESET_NAMES};
pub use sim::{RunRecord, Simulation};
