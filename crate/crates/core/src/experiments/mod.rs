//! Simulation harness, diagnostic estimators and experiment suites.

pub mod config;
pub mod harness;
pub mod importance;
pub mod io;
pub mod rstar;
pub mod stats;
pub mod suites;

pub use config::{DataSpec, ModelSpec, NormSpec, ResolvedScenario, ScenarioConfig};
pub use harness::{run_replication, run_scenario, summarize, write_outcome, Replication, ScenarioOutcome, SummaryRow};
pub use importance::{importance_type1, ImportanceEstimate};
pub use rstar::{estimate_r_star, r_star_from_moments, stopping_bound_check, RStarEstimate, StoppingBoundRow};
pub use suites::{run_suite, SuiteOptions, SUITES};
