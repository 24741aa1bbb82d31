use std::net::TcpStream;
use std::thread;
use std::time::{Duration, Instant};

use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};
use twinsim::bridge::{BridgeConfig, BridgeServer, Frame, GridPatch};
use twinsim::harness::{report_json, run_case, run_case_with, CaseId, RunOptions, Scenario};

type Client = WebSocket<MaybeTlsStream<TcpStream>>;

fn start(case: CaseId, realtime: bool) -> BridgeServer {
    let config = BridgeConfig { port: 0, realtime, ..BridgeConfig::default() };
    BridgeServer::start(config, case, 0.5, 1.0).expect("server starts")
}

fn connect(server: &BridgeServer) -> Client {
    let (mut ws, _) = tungstenite::connect(server.url()).expect("client connects");
    if let MaybeTlsStream::Plain(s) = ws.get_mut() {
        s.set_read_timeout(Some(Duration::from_millis(50))).unwrap();
    }
    ws
}

fn next_frame(ws: &mut Client, deadline: Duration) -> Option<Frame> {
    let until = Instant::now() + deadline;
    while Instant::now() < until {
        match ws.read() {
            Ok(Message::Text(t)) => return Some(Frame::parse(t.as_str()).expect("server frames parse")),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(e) => panic!("client read failed: {e}"),
        }
    }
    None
}

fn wait_for(ws: &mut Client, deadline: Duration, pred: impl Fn(&Frame) -> bool) -> Frame {
    let until = Instant::now() + deadline;
    loop {
        let left = until.saturating_duration_since(Instant::now());
        assert!(!left.is_zero(), "expected frame did not arrive");
        if let Some(f) = next_frame(ws, left) {
            if pred(&f) {
                return f;
            }
        }
    }
}

fn send(ws: &mut Client, json: &str) {
    ws.send(Message::Text(json.to_string().into())).unwrap();
}

fn hello_authority(ws: &mut Client) -> bool {
    match next_frame(ws, Duration::from_secs(2)) {
        Some(Frame::Hello { authority, version, .. }) => {
            assert_eq!(version, 1);
            authority
        }
        other => panic!("expected hello first, got {other:?}"),
    }
}

fn short_mt() -> Scenario {
    let mut sc = Scenario::bundled("mt_trace").unwrap();
    sc.time_budget = 5.0;
    sc
}

#[test]
fn teleop_session_lifecycle() {
    let server = start(CaseId::MT, true);
    let mut operator = connect(&server);
    assert!(hello_authority(&mut operator));
    let mut watcher = connect(&server);
    assert!(!hello_authority(&mut watcher), "second MT client only observes");

    let sc = short_mt();
    let mut obs = server.observer();
    let started = Instant::now();
    let run = thread::spawn(move || {
        let run = run_case_with(&sc, RunOptions { trace: None, observer: Some(&mut obs) }).unwrap();
        (run, obs)
    });

    // first state frame carries a full grid snapshot
    let first = wait_for(&mut watcher, Duration::from_secs(3), |f| matches!(f, Frame::State { .. }));
    assert!(matches!(first, Frame::State { grid: Some(GridPatch::Full { .. }), .. }));

    send(&mut operator, r#"{"type":"command","t_client":0.1,"v":9.9,"omega":0.0}"#);
    let echo = wait_for(&mut operator, Duration::from_secs(2), |f| matches!(f, Frame::Command { .. }));
    assert_eq!(echo, Frame::Command { t_client: 0.1, v: 0.5, omega: 0.0 });

    send(&mut watcher, r#"{"type":"command","v":0.2,"omega":0.0}"#);
    let err = wait_for(&mut watcher, Duration::from_secs(2), |f| matches!(f, Frame::Error { .. }));
    assert!(matches!(err, Frame::Error { message } if message.contains("authority")));

    send(&mut operator, "{not json");
    assert!(matches!(wait_for(&mut operator, Duration::from_secs(2), |f| matches!(f, Frame::Error { .. })), Frame::Error { .. }));

    for _ in 0..6 {
        send(&mut operator, r#"{"type":"command","v":0.2,"omega":0.3}"#);
        thread::sleep(Duration::from_millis(50));
    }
    let left_at = started.elapsed().as_secs_f64();
    operator.close(None).unwrap();
    let _ = next_frame(&mut operator, Duration::from_millis(200));
    drop(operator);

    // authority is released on disconnect
    thread::sleep(Duration::from_millis(200));
    let mut next = connect(&server);
    assert!(hello_authority(&mut next));

    // without fresh operator commands the teleop channel times out and the robots halt
    let pose_at = |ws: &mut Client, min_t: f64| {
        match wait_for(ws, Duration::from_secs(4), |f| matches!(f, Frame::State { t, .. } if *t >= min_t)) {
            Frame::State { physical_pose, twin_pose, t, .. } => (t, physical_pose, twin_pose.unwrap()),
            _ => unreachable!(),
        }
    };
    let (t1, p1, w1) = pose_at(&mut watcher, left_at + 1.2);
    let (t2, p2, w2) = pose_at(&mut watcher, t1 + 0.5);
    assert!(p1.x > 0.0 && w1.x > 0.0, "operator commands moved both robots");
    assert_eq!((p1, w1), (p2, w2), "robots still moving after operator left (t {t1} -> {t2})");

    let (run, obs) = run.join().unwrap();
    assert_eq!(run.report.case_id, CaseId::MT);
    let trace = obs.trace();
    assert!(trace.rows.len() >= 7, "applied commands are recorded");
    assert_eq!(trace.rows[0].v, 0.5);
    let dir = tempfile::tempdir().unwrap();
    obs.record_trace(&dir.path().join("trace.csv")).unwrap();
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(text.starts_with("t,v,omega\n"));

    let last = wait_for(&mut watcher, Duration::from_secs(3), |f| matches!(f, Frame::State { finished: true, .. }));
    assert!(matches!(last, Frame::State { finished: true, .. }));
    drop(next);
    drop(watcher);
    server.shutdown();
}

#[test]
fn non_mt_sessions_never_command() {
    let server = start(CaseId::DT, false);
    let mut c = connect(&server);
    assert!(!hello_authority(&mut c));
    send(&mut c, r#"{"type":"command","v":0.1,"omega":0.0}"#);
    assert!(matches!(wait_for(&mut c, Duration::from_secs(2), |f| matches!(f, Frame::Error { .. })), Frame::Error { .. }));
    let deadline = Instant::now() + Duration::from_secs(2);
    while server.active_sessions() != 1 && Instant::now() < deadline {
        thread::sleep(Duration::from_millis(10));
    }
    assert_eq!(server.active_sessions(), 1);
}

#[test]
fn observer_does_not_change_results() {
    let sc = Scenario::bundled("st_obstructed").unwrap();
    let plain = run_case(&sc).unwrap();
    let server = start(sc.case_id, false);
    let mut watcher = connect(&server);
    assert!(!hello_authority(&mut watcher));
    let mut obs = server.observer();
    let served = run_case_with(&sc, RunOptions { trace: None, observer: Some(&mut obs) }).unwrap();
    assert_eq!(report_json(&plain.report), report_json(&served.report));
    assert_eq!(plain.trajectory, served.trajectory);
    assert!(obs.trace().rows.is_empty());
}
