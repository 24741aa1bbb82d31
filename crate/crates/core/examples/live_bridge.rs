//! Serves a manual-teleoperation run over WebSocket and drives it from an
//! in-process client.
//!
//! `cargo run --example live_bridge`

use std::time::Duration;

use tungstenite::Message;
use twinsim::bridge::{BridgeConfig, BridgeServer, Frame};
use twinsim::harness::{run_case_with, RunOptions, Scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut scenario = Scenario::bundled("mt_trace")?;
    scenario.time_budget = 4.0;
    let config = BridgeConfig { port: 0, ..BridgeConfig::default() };
    let server = BridgeServer::start(config, scenario.case_id, scenario.dwa.v_max, scenario.dwa.omega_max)?;
    println!("serving on {}", server.url());

    let url = server.url();
    let client = std::thread::spawn(move || -> Result<usize, tungstenite::Error> {
        let (mut ws, _) = tungstenite::connect(url)?;
        let mut states = 0;
        for i in 0..200 {
            if i % 3 == 0 && i < 60 {
                ws.send(Message::Text(r#"{"type":"command","v":0.3,"omega":0.2}"#.into()))?;
            }
            match ws.read()? {
                Message::Text(t) => match Frame::parse(t.as_str()) {
                    Ok(Frame::Hello { authority, .. }) => println!("hello, authority = {authority}"),
                    Ok(Frame::State { t, physical_pose: p, finished, .. }) => {
                        states += 1;
                        if states % 10 == 0 {
                            println!("t {t:.2}: physical ({:.3}, {:.3}, {:.3})", p.x, p.y, p.theta);
                        }
                        if finished {
                            break;
                        }
                    }
                    _ => {}
                },
                Message::Close(_) => break,
                _ => {}
            }
        }
        Ok(states)
    });

    std::thread::sleep(Duration::from_millis(200));
    let mut obs = server.observer();
    let run = run_case_with(&scenario, RunOptions { trace: None, observer: Some(&mut obs) })?;
    let states = client.join().expect("client thread")?;
    println!("{states} state frames; {} operator commands applied; final pose {:?}", obs.trace().rows.len(), run.trajectory.last().map(|r| r.physical));
    server.shutdown();
    Ok(())
}
