//! Sweeps the command-channel delay on the digital-twin scenario and prints
//! the sweep table.
//!
//! `cargo run --example delay_sweep`

use serde_yaml::Value;
use twinsim::harness::{sweep, sweep_csv, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let doc: Value = serde_yaml::from_str(Scenario::bundled_source("dt_ideal")?)?;
    let points = sweep(&doc, "net.cmd_vel.base_delay", &[0.0, 0.05, 0.1, 0.2, 0.3])?;
    print!("{}", sweep_csv("net.cmd_vel.base_delay", &points));
    Ok(())
}
