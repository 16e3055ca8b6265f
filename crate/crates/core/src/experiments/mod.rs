//! Configured experiment scenarios and their on-disk outputs.

pub mod config;
pub mod convergence;
pub mod output;
pub mod scenarios;

pub use config::{ScenarioConfig, ScenarioKind};
pub use output::{emit_results, verify_manifest, Emitted, Manifest, ResultRow, ScenarioOutput, Snapshot};
pub use scenarios::run_scenario;

/// Environment variable that overrides the default output directory.
pub const OUTPUT_DIR_ENV: &str = "RADIAL_BLOWUP_OUTPUT_DIR";
