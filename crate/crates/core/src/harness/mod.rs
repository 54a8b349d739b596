//! Scenario files, seeded batch runs, CSV metrics and SVG rendering.

pub mod render;
pub mod report;
pub mod run;
pub mod scenario;

pub use render::{render_svg, Scene};
pub use report::{compare_table, csv_string, parse_csv, write_csv, ReportError, COLUMNS};
pub use run::{
    aggregate, median, run_once, run_scenario, run_scenario_with, Aggregate, RunMetrics, RunOutput, Summary,
};
pub use scenario::{load_scenario, load_scenario_file, PlannerKind, RobotSpec, Scenario, ScenarioError};

/// Environment variable that replaces a scenario's base seed.
pub const SEED_ENV: &str = "PLANNER_SEED";
