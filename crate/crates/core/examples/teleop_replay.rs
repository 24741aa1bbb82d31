//! Replays the bundled operator trace as a manual-teleoperation run.
//!
//! `cargo run --example teleop_replay -- [trace.csv]`

use std::path::PathBuf;

use twinsim::harness::{run_case_with, RunOptions, Scenario, TeleopTrace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/mt_demo_trace.csv"));
    let trace = TeleopTrace::load(&path)?;
    println!("{} commands over {:.2} s", trace.rows.len(), trace.end_time().unwrap_or(0.0));
    let scenario = Scenario::bundled("mt_trace")?;
    let run = run_case_with(&scenario, RunOptions { trace: Some(trace), observer: None })?;
    let r = &run.report;
    for g in &r.goals {
        println!("goal {}: error {:.3} m, success {}", g.index, g.goal_error, g.success);
    }
    println!("tracking {:?}, collisions {}, {:.1} s", r.mean_tracking_error, r.collision_count, r.duration);
    Ok(())
}
