//! Scores one dynamic-window decision next to an obstacle, then runs a full
//! waypoint mission on the exact map.
//!
//! `cargo run --example dwa_step`

use twinsim::grid::OccupancyGrid;
use twinsim::nav::{dynamic_window, select_velocity_detailed, ClearanceMap, DwaParams, Goal, Mission, MissionConfig, MissionStatus};
use twinsim::world::{step_kinematics, Pose2D, Shape, Twist, WorldModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = WorldModel::square_room(3.0).with_obstacles(vec![Shape::Disk { center: [0.5, 0.0], radius: 0.2 }]);
    let grid = OccupancyGrid::rasterize(&world, 0.05, 2, 5.0)?;
    let params = DwaParams::default();
    let map = ClearanceMap::from_grid(&grid, 0.65, world.robot_radius);

    let pose = Pose2D::new(-0.5, 0.0, 0.0);
    let current = Twist::new(0.3, 0.0);
    let window = dynamic_window(current, &params);
    println!("window v [{:.2}, {:.2}] omega [{:.2}, {:.2}]", window.v.0, window.v.1, window.omega.0, window.omega.1);
    let sel = select_velocity_detailed(pose, current, [1.2, 0.0], &map, &params);
    println!("chosen {:?} score {:?}", sel.cmd, sel.score);

    let goals = vec![Goal::new(1.1, 0.0, 0.0), Goal::new(-1.0, 1.0, 1.57)];
    let mut mission = Mission::new(goals, params, MissionConfig::default(), world.robot_radius);
    let (mut p, mut cmd, dt) = (Pose2D::new(-1.0, 0.0, 0.0), Twist::ZERO, 0.05);
    let mut t = 0.0;
    while t < 120.0 {
        let out = mission.step(p, cmd, &grid, dt);
        if out.status != MissionStatus::Running {
            println!("mission {:?} at t = {t:.2} s, pose ({:.3}, {:.3}, {:.3})", out.status, p.x, p.y, p.theta);
            break;
        }
        cmd = out.cmd;
        p = step_kinematics(p, cmd, dt)?;
        t += dt;
    }
    println!("{} global plans", mission.planner_invocations());
    Ok(())
}
