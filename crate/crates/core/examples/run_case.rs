//! Runs a bundled scenario and prints its headline metrics.
//!
//! `cargo run --example run_case -- st_obstructed [CASE]`

use twinsim::harness::{run_case, CaseId, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "dt_ideal".into());
    let mut scenario = Scenario::bundled(&name)?;
    if let Some(case) = args.next() {
        scenario = scenario.with_case(case.parse::<CaseId>()?)?;
    }
    let start = std::time::Instant::now();
    let run = run_case(&scenario)?;
    let r = &run.report;
    println!("{} as {}: {} ticks ({:.1} s simulated, {:.2?} wall)", name, r.case_id, r.ticks, r.duration, start.elapsed());
    for g in &r.goals {
        println!(
            "  goal {} ({:.2}, {:.2}): error {:.3} m, time {:?} s, reached {}, success {}",
            g.index, g.goal[0], g.goal[1], g.goal_error, g.completion_time, g.reached, g.success
        );
    }
    println!("  tracking error {:?}", r.mean_tracking_error);
    println!(
        "  collisions {} (twin {}), force activations {}, safety {}, estop {}",
        r.collision_count, r.twin_collision_count, r.force_activations, r.safety_activations, r.estop_activations
    );
    for (site, a) in &r.accounting {
        println!("  {site}: {a:?}");
    }
    Ok(())
}
