//! Plans an 8-connected path around an inflated obstacle and draws it.
//!
//! `cargo run --example global_planning`

use twinsim::grid::{GridIndex, OccupancyGrid};
use twinsim::nav::plan_global;
use twinsim::world::{Shape, WorldModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let world = WorldModel::square_room(3.0).with_obstacles(vec![Shape::Rect { min: [-0.2, -1.5], max: [0.2, 0.8] }]);
    let grid = OccupancyGrid::rasterize(&world, 0.1, 2, 5.0)?;
    let blocked = grid.inflate(0.65, world.robot_radius);
    let path = plan_global(&blocked, [-1.0, -1.0], [1.0, -1.0])?;
    println!(
        "{} cells, {} straight + {} diagonal moves, cost {:.3} cells",
        path.cells.len(),
        path.cost.straight,
        path.cost.diagonal,
        path.cost.value()
    );
    for row in (0..blocked.height).rev() {
        let line: String = (0..blocked.width)
            .map(|col| {
                let idx = GridIndex::new(col, row);
                if path.cells.contains(&idx) {
                    '*'
                } else if blocked.is_blocked(idx) {
                    '#'
                } else {
                    '.'
                }
            })
            .collect();
        println!("{line}");
    }
    Ok(())
}
