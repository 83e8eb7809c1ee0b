//! Analytical performance model of the IEEE 802.11e EDCA MAC with a
//! slot-level simulator for cross-checking.

pub mod arrival;
pub mod config;
pub mod durations;
pub mod dtmc;
pub mod error;
pub mod metrics;
pub mod zones;
pub mod sim;
pub mod solver;

pub use arrival::ArrivalKernel;
pub use config::{parse_scenario, AcConfig, AccessMode, PhyTiming, Scenario, ScenarioDocument, StationMode};
pub use durations::DurationSet;
pub use error::{ConfigError, ModelError, SimError, SolveError};
pub use metrics::{AcMetrics, Metrics};
pub use solver::{solve, SolveOptions, SolvedModel};
