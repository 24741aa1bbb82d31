use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scenario::{CaseId, Scenario};
use crate::grid::OccupancyGrid;
use crate::netsim::MetricsSummary;
use crate::world::Pose2D;

pub const METRICS_CSV_HEADER: &str = "goal_index,goal_x,goal_y,goal_yaw,goal_error_m,completion_time_s,success";
pub const TRAJECTORY_CSV_HEADER: &str = "tick,t,twin_x,twin_y,twin_theta,physical_x,physical_y,physical_theta";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("map export failed: {0}")]
    Map(#[from] crate::grid::GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalResult {
    pub index: usize,
    pub goal: [f64; 3],
    /// The twin (or remote planner) declared the goal reached.
    pub reached: bool,
    pub goal_error: f64,
    /// Seconds from the start of the goal segment to the physical robot's
    /// last motion in it; absent when the segment never started.
    pub completion_time: Option<f64>,
    pub success: bool,
}

/// Work done at one site.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteAccounting {
    pub planner_invocations: u64,
    pub mapping_updates: u64,
    pub force_computations: u64,
    pub messages_sent: u64,
    pub bytes_sent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: CaseId,
    pub seed: u64,
    pub ticks: u64,
    pub duration: f64,
    pub goals: Vec<GoalResult>,
    pub success_rate: f64,
    /// Mean twin-to-physical distance; absent in RO, which has no twin.
    pub mean_tracking_error: Option<f64>,
    pub collision_count: u64,
    pub twin_collision_count: u64,
    /// Ticks on which the twin multiplexer selected the force channel.
    pub force_activations: u64,
    /// Ticks on which the physical multiplexer selected the safety channel.
    pub safety_activations: u64,
    pub estop_activations: u64,
    pub network: BTreeMap<String, MetricsSummary>,
    pub accounting: BTreeMap<String, SiteAccounting>,
    pub scenario: Scenario,
}

impl CaseReport {
    pub fn mean_goal_error(&self) -> f64 {
        if self.goals.is_empty() {
            0.0
        } else {
            self.goals.iter().map(|g| g.goal_error).sum::<f64>() / self.goals.len() as f64
        }
    }

    pub fn site(&self, name: &str) -> SiteAccounting {
        self.accounting.get(name).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub tick: u64,
    pub t: f64,
    pub twin: Option<Pose2D>,
    pub physical: Pose2D,
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub report: CaseReport,
    pub trajectory: Vec<TrajectoryRow>,
    pub map: OccupancyGrid,
}

pub fn goal_error(final_position: [f64; 2], goal: [f64; 2]) -> f64 {
    (final_position[0] - goal[0]).hypot(final_position[1] - goal[1])
}

/// Mean distance between two timestamped position logs, pairing each sample
/// of `a` with the sample of `b` nearest in time. `None` when either log is
/// empty.
pub fn tracking_error(a: &[(f64, [f64; 2])], b: &[(f64, [f64; 2])]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let mut sum = 0.0;
    for &(t, p) in a {
        let i = b.partition_point(|(tb, _)| *tb < t);
        let j = match (i.checked_sub(1), b.get(i)) {
            (Some(lo), Some((thi, _))) if (t - b[lo].0) <= (thi - t) => lo,
            (Some(lo), None) => lo,
            _ => i,
        };
        let q = b[j].1;
        sum += (p[0] - q[0]).hypot(p[1] - q[1]);
    }
    Some(sum / a.len() as f64)
}

pub fn metrics_csv(report: &CaseReport) -> String {
    let mut s = format!("{METRICS_CSV_HEADER}\n");
    for g in &report.goals {
        let completion = g.completion_time.map(|c| format!("{c:.3}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{},{}",
            g.index, g.goal[0], g.goal[1], g.goal[2], g.goal_error, completion, g.success
        );
    }
    s
}

pub fn trajectories_csv(rows: &[TrajectoryRow]) -> String {
    let mut s = format!("{TRAJECTORY_CSV_HEADER}\n");
    for r in rows {
        let twin = r
            .twin
            .map(|p| format!("{:.6},{:.6},{:.6}", p.x, p.y, p.theta))
            .unwrap_or_else(|| ",,".to_string());
        let p = r.physical;
        let _ = writeln!(s, "{},{:.6},{},{:.6},{:.6},{:.6}", r.tick, r.t, twin, p.x, p.y, p.theta);
    }
    s
}

pub fn report_json(report: &CaseReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), ExportError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| ExportError::Io { path, source })
}

/// Writes `report.json`, `metrics.csv`, `trajectories.csv`, `map.pgm` and
/// `map.yaml` into `out_dir`, creating it if needed.
pub fn export_results(run: &CaseRun, out_dir: &Path) -> Result<(), ExportError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ExportError::Io { path: out_dir.to_path_buf(), source })?;
    write(out_dir, "report.json", &report_json(&run.report))?;
    write(out_dir, "metrics.csv", &metrics_csv(&run.report))?;
    write(out_dir, "trajectories.csv", &trajectories_csv(&run.trajectory))?;
    run.map.export_pgm(out_dir, "map")?;
    Ok(())
}
