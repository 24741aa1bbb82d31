//! Casts a 360-beam scan in an obstructed room and prints a few beams.
//!
//! `cargo run --example raycast_world`

use twinsim::world::{check_collision, raycast_scan, step_kinematics, Pose2D, ScanSpec, Shape, Twist, WorldModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = WorldModel::square_room(3.0).with_obstacles(vec![
        Shape::Disk { center: [0.9, 0.0], radius: 0.25 },
        Shape::Rect { min: [-1.0, 0.6], max: [-0.4, 0.9] },
    ]);
    let mut pose = Pose2D::new(0.0, 0.0, 0.0);
    let spec = ScanSpec::default();
    let scan = raycast_scan(&world, pose, &spec, 0.0)?;
    for i in (0..spec.beams).step_by(45) {
        let tag = if scan.is_no_return(i) { " (no return)" } else { "" };
        println!("bearing {:+.3} rad: {:.3} m{tag}", scan.bearing(i), scan.ranges[i]);
    }
    // drive toward the disk until the next step would touch it
    let cmd = Twist::new(0.5, 0.0);
    let mut steps = 0;
    loop {
        let next = step_kinematics(pose, cmd, 0.05)?;
        if check_collision(&world, next) {
            break;
        }
        pose = next;
        steps += 1;
    }
    println!("stopped after {steps} steps at x = {:.3}, clearance {:.3} m", pose.x, world.clearance(pose.position()));
    Ok(())
}
