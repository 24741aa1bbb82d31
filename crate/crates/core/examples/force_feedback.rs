//! Computes the repulsive force for a scan near a wall and the velocity
//! override it produces.
//!
//! `cargo run --example force_feedback`

use twinsim::feedback::{compute_feedback_force, force_to_correction, override_command, FeedbackParams};
use twinsim::world::{raycast_scan, Pose2D, ScanSpec, Twist, WorldModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = WorldModel::square_room(3.0);
    let params = FeedbackParams::default();
    let nominal = Twist::new(0.4, 0.0);
    for x in [0.0, 0.8, 1.0, 1.1, 1.2] {
        let pose = Pose2D::new(x, 0.3, 0.2);
        let scan = raycast_scan(&world, pose, &ScanSpec::default(), 0.0)?;
        let f = compute_feedback_force(&scan, &params);
        let cmd = if params.should_publish(&f) {
            override_command(nominal, force_to_correction(&f, &params, 0.5, 1.0))
        } else {
            nominal
        };
        println!(
            "x = {x:.1}: force ({:+.3}, {:+.3}) |F| {:.3} -> command v {:.3} omega {:+.3}",
            f.fx,
            f.fy,
            f.magnitude(),
            cmd.v,
            cmd.omega
        );
    }
    Ok(())
}
