//! Command-line front end for `gemss`: configuration files, the fit / extract /
//! evaluate pipeline, and a desk-scale benchmark harness over synthetic data.

pub mod commands;
pub mod plan;
pub mod report;
pub mod settings;

pub use commands::{cmd_benchmark, cmd_evaluate, cmd_extract, cmd_fit, cmd_generate};
pub use plan::{BenchmarkPlan, PlanEntry};
pub use report::ResultRow;
pub use settings::{RunConfig, Settings};
