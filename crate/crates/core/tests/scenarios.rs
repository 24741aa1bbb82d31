use std::path::PathBuf;

use twinsim::harness::{run_case, run_case_with, CaseId, MapSource, RunOptions, Scenario, TeleopTrace};

fn demo_trace() -> TeleopTrace {
    TeleopTrace::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/mt_demo_trace.csv")).unwrap()
}

#[test]
fn simulation_twin_reaches_every_goal_without_contact() {
    let r = run_case(&Scenario::bundled("st_obstructed").unwrap()).unwrap().report;
    assert_eq!(r.success_rate, 1.0);
    assert_eq!(r.collision_count, 0);
    assert!(r.force_activations > 0);
    assert!(r.network["force"].sent_count > 0);
}

#[test]
fn feedback_topic_is_silent_outside_st() {
    let sc = Scenario::bundled("st_obstructed").unwrap().with_case(CaseId::DT).unwrap();
    let r = run_case(&sc).unwrap().report;
    assert_eq!(r.force_activations, 0);
    assert_eq!(r.network.get("force").map_or(0, |m| m.sent_count), 0);
}

#[test]
fn remote_offloading_plans_at_the_remote_site() {
    let run = run_case(&Scenario::bundled("ro_obstructed").unwrap()).unwrap();
    let r = &run.report;
    assert_eq!(r.mean_tracking_error, None);
    assert!(run.trajectory.iter().all(|row| row.twin.is_none()));
    assert!(r.site("remote").mapping_updates > 0);
    assert_eq!(r.site("physical").planner_invocations, 0);
    assert!(r.goals.iter().any(|g| g.success));
}

#[test]
fn manual_teleoperation_follows_the_trace() {
    let sc = Scenario::bundled("mt_trace").unwrap();
    let run = run_case_with(&sc, RunOptions { trace: Some(demo_trace()), observer: None }).unwrap();
    assert_eq!(run.report.success_rate, 1.0);
    assert_eq!(run.report.site("twin").planner_invocations, 0);

    // with no operator input nothing moves
    let idle = run_case_with(&Scenario { time_budget: 3.0, ..sc }, RunOptions::default()).unwrap();
    let last = idle.trajectory.last().unwrap();
    assert_eq!(last.physical.position(), [0.0, 0.0]);
    assert_eq!(idle.report.success_rate, 0.0);
}

#[test]
fn exact_and_scanned_maps_both_navigate() {
    let mut sc = Scenario::bundled("dt_ideal").unwrap();
    sc.mapping.source = MapSource::Exact;
    let r = run_case(&sc).unwrap().report;
    assert_eq!(r.success_rate, 1.0);
    assert_eq!(r.site("twin").mapping_updates, 0);
    let scanned = run_case(&Scenario::bundled("dt_ideal").unwrap()).unwrap().report;
    assert!(scanned.site("twin").mapping_updates > 0);
}

#[test]
fn different_seeds_change_noisy_runs() {
    let a = Scenario::bundled("dt_wifi").unwrap();
    let b = Scenario { seed: a.seed + 1, ..a.clone() };
    let ra = run_case(&a).unwrap();
    let rb = run_case(&b).unwrap();
    assert_ne!(ra.trajectory, rb.trajectory);
}
