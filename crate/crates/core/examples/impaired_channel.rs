//! Pushes encoded velocity commands through the presets and reports latency
//! and loss.
//!
//! `cargo run --example impaired_channel`

use twinsim::netsim::{ChannelConfig, Direction, NetworkSim};
use twinsim::wire::{decode_message, encode_message};
use twinsim::world::Twist;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for preset in ["ideal", "wifi-good", "wifi-poor"] {
        let mut net = NetworkSim::new();
        let cfg = ChannelConfig::preset(preset).expect("known preset").with_seed(1);
        let h = net.open_topic("cmd_vel", cfg, Direction::CyberToPhysical)?;
        let mut last_seq = None;
        let mut reordered = 0;
        for i in 0..1000u64 {
            let t = i as f64 * 0.05;
            let bytes = encode_message("cmd_vel", i, t, &Twist::new(0.3, 0.1))?;
            net.publish(h, bytes, t)?;
            for d in net.poll(h, t)? {
                let (env, _cmd): (_, Twist) = decode_message(&d.payload)?;
                if last_seq.is_some_and(|s| env.seq < s) {
                    reordered += 1;
                }
                last_seq = Some(env.seq);
            }
        }
        net.poll(h, 1e9)?;
        let m = net.snapshot(h, 50.0)?;
        println!(
            "{preset:<9} sent {} recv {} dropped {} | latency mean {:.4} s p95 {:.4} s | reordered {reordered} | {:.0} B/s lost",
            m.sent_count, m.recv_count, m.dropped_count, m.latency_mean, m.latency_p95, m.throughput_loss
        );
    }
    Ok(())
}
