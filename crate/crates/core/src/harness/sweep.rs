use std::fmt::Write as _;
use std::path::Path;

use serde_yaml::Value;

use super::report::{export_results, CaseReport, ExportError};
use super::run::{run_case, HarnessError};
use super::scenario::{set_path, Scenario};

pub const SWEEP_CSV_HEADER: &str =
    "param,value,mean_tracking_error_m,mean_goal_error_m,success_rate,collision_count,latency_mean_s,throughput_loss_Bps";

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub report: CaseReport,
}

/// Runs the scenario once per value of the dotted parameter `param`.
pub fn sweep(base: &Value, param: &str, values: &[f64]) -> Result<Vec<SweepPoint>, HarnessError> {
    values
        .iter()
        .map(|&value| {
            let mut doc = base.clone();
            set_path(&mut doc, param, Value::from(value))?;
            let scenario = Scenario::from_value(doc)?;
            Ok(SweepPoint { value, report: run_case(&scenario)?.report })
        })
        .collect()
}

pub fn sweep_csv(param: &str, points: &[SweepPoint]) -> String {
    let mut s = format!("{SWEEP_CSV_HEADER}\n");
    for p in points {
        let r = &p.report;
        let all = r.network.get("all").copied().unwrap_or_default();
        let tracking = r.mean_tracking_error.map(|e| format!("{e:.6}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{param},{},{tracking},{:.6},{:.4},{},{:.6},{:.3}",
            p.value,
            r.mean_goal_error(),
            r.success_rate,
            r.collision_count,
            all.latency_mean,
            all.throughput_loss
        );
    }
    s
}

/// Sweep with full per-value outputs under `out_dir/<param>=<value>/`
/// plus a summary `sweep.csv`.
pub fn sweep_to_dir(base: &Value, param: &str, values: &[f64], out_dir: &Path) -> Result<Vec<SweepPoint>, SweepError> {
    let mut points = Vec::new();
    for &value in values {
        let mut doc = base.clone();
        set_path(&mut doc, param, Value::from(value)).map_err(HarnessError::from)?;
        let scenario = Scenario::from_value(doc).map_err(HarnessError::from)?;
        let run = run_case(&scenario)?;
        export_results(&run, &out_dir.join(format!("{param}={value}")))?;
        points.push(SweepPoint { value, report: run.report });
    }
    let path = out_dir.join("sweep.csv");
    std::fs::write(&path, sweep_csv(param, &points)).map_err(|source| SweepError::Io { path: path.display().to_string(), source })?;
    Ok(points)
}
