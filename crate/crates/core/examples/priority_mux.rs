//! Walks a navigation channel and a force channel through preemption,
//! hand-back and the fail-safe stop.
//!
//! `cargo run --example priority_mux`

use twinsim::mux::{MuxChannel, PriorityMux};
use twinsim::world::Twist;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut mux = PriorityMux::with_channels([MuxChannel::new("nav", 10, 0.5), MuxChannel::new("force", 100, 0.2)])?;
    for tick in 0..30 {
        let t = tick as f64 * 0.05;
        if t < 1.0 {
            mux.offer("nav", Twist::new(0.4, 0.0), t)?;
        }
        if (0.3..0.5).contains(&t) {
            mux.offer("force", Twist::new(0.1, 0.6), t)?;
        }
        let cmd = mux.command(t);
        println!("t {t:.2}: {:<5} v {:.2} omega {:.2}", mux.active_channel().unwrap_or("-"), cmd.v, cmd.omega);
    }
    Ok(())
}
