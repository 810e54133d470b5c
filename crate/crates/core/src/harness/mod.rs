//! Subcommand implementations behind the `gelfusion` binary.

pub mod commands;
pub mod config;
pub mod plot;

pub use commands::{arm_label, eval, eval_path, gen_demos, inspect, suite, train, AblationReport, ArmReport, EvalSummary, InspectOutput, SUITE_ARMS};
pub use config::RunConfig;
pub use plot::{bar_pixels, plot, tally, VariantStats};
