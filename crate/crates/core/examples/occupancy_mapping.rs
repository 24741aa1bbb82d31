//! Builds a log-odds map from scans along a short path and writes it as a
//! PGM/YAML pair.
//!
//! `cargo run --example occupancy_mapping -- [out_dir]`

use std::path::PathBuf;

use twinsim::grid::{InverseSensorModel, OccupancyGrid};
use twinsim::world::{raycast_scan, Pose2D, ScanSpec, Shape, WorldModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "target/occupancy_mapping".into()).into();
    let world = WorldModel::square_room(3.0).with_obstacles(vec![
        Shape::Disk { center: [0.8, 0.8], radius: 0.3 },
        Shape::Rect { min: [-1.0, -0.9], max: [-0.2, -0.6] },
    ]);
    let mut grid = OccupancyGrid::covering(&world.bounds, 0.05, 2)?;
    let model = InverseSensorModel::default();
    let spec = ScanSpec::default();
    for k in 0..8 {
        let pose = Pose2D::new(-0.8 + 0.2 * k as f64, 0.0, 0.3 * k as f64);
        let scan = raycast_scan(&world, pose, &spec, k as f64)?;
        grid.update_with_scan(pose, &scan, &model);
    }
    let occupied = grid.occupied_mask(0.65).iter().filter(|&&o| o).count();
    let free = grid.logodds.iter().filter(|&&l| l < 0.0).count();
    println!("{}x{} grid: {occupied} occupied, {free} free, {} unknown", grid.width, grid.height, grid.logodds.len() - occupied - free);
    std::fs::create_dir_all(&out)?;
    grid.export_pgm(&out, "map")?;
    println!("wrote {}", out.join("map.pgm").display());
    Ok(())
}
