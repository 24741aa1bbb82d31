//! Experiment harness: scenarios, the two-site tick loop, metrics and
//! result export.
//!
//! Each tick runs in a fixed order: physical sense, feedback publish,
//! delivery to the cyber site, twin mapping/planning, twin arbitration and
//! step, command publish, delivery to the physical site, physical
//! arbitration and step.

mod report;
mod run;
mod scenario;
mod sweep;
mod trace;

pub use report::{
    export_results, goal_error, metrics_csv, report_json, tracking_error, trajectories_csv, CaseReport, CaseRun,
    ExportError, GoalResult, SiteAccounting, TrajectoryRow, METRICS_CSV_HEADER, TRAJECTORY_CSV_HEADER,
};
pub use run::{run_case, run_case_with, HarnessError, RunObserver, RunOptions, TickSnapshot};
pub use scenario::{
    bundled_names, load_scenario, load_scenario_value, set_path, CaseId, ChannelOverride, FeedbackBlock, MapSource,
    MappingBlock, MuxBlock, NetBlock, NoiseBlock, Scenario, ScenarioError, SCHEMA_VERSION, TOPICS,
};
pub use sweep::{sweep, sweep_csv, sweep_to_dir, SweepError, SweepPoint, SWEEP_CSV_HEADER};
pub use trace::{TeleopTrace, TraceCursor, TraceError, TraceRow};
