//! Live streaming endpoint for run state and operator commands.
//!
//! Clients connect over a WebSocket and exchange JSON text frames tagged by
//! a `type` field: `hello` (server greeting), `state` (run snapshot or
//! delta), `command` (operator velocity, echoed back once applied) and
//! `error`. Only the first session of a manual-teleoperation run may
//! command; everyone else observes.

use std::io::ErrorKind;
use std::net::{IpAddr, Ipv4Addr, SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use crate::harness::{CaseId, CaseReport, RunObserver, TeleopTrace, TickSnapshot, TraceError};
use crate::nav::MissionStatus;
use crate::world::{Pose2D, Twist};

pub const DEFAULT_PORT: u16 = 8700;
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeConfig {
    pub bind: IpAddr,
    /// 0 picks a free port.
    pub port: u16,
    pub max_rate_hz: f64,
    /// Simulated seconds between full grid snapshots.
    pub snapshot_period: f64,
    /// Pace the run against the wall clock.
    pub realtime: bool,
    /// Keep every beam'th scan range in state frames.
    pub scan_stride: usize,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            bind: IpAddr::V4(Ipv4Addr::LOCALHOST),
            port: DEFAULT_PORT,
            max_rate_hz: 15.0,
            snapshot_period: 5.0,
            realtime: true,
            scan_stride: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelState {
    pub twin: Option<String>,
    pub physical: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    pub ranges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridPatch {
    Full { origin: [f64; 2], resolution: f64, width: usize, height: usize, data: Vec<u8> },
    /// Changed cells as `[col, row, occupancy byte]`.
    Delta { cells: Vec<[u32; 3]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionState {
    pub status: MissionStatus,
    pub goal_index: usize,
    pub goals: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Frame {
    Hello {
        version: u32,
        case_id: CaseId,
        authority: bool,
        v_max: f64,
        omega_max: f64,
    },
    State {
        version: u32,
        t: f64,
        tick: u64,
        case_id: CaseId,
        twin_pose: Option<Pose2D>,
        physical_pose: Pose2D,
        active_channel: ChannelState,
        scan: ScanSummary,
        grid: Option<GridPatch>,
        mission: MissionState,
        finished: bool,
    },
    Command {
        #[serde(default)]
        t_client: f64,
        v: f64,
        omega: f64,
    },
    Error {
        message: String,
    },
}

impl Frame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frame serializes")
    }

    pub fn parse(text: &str) -> Result<Frame, String> {
        serde_json::from_str(text).map_err(|e| format!("malformed frame: {e}"))
    }
}

#[derive(Debug, Clone)]
struct Published {
    version: u64,
    t: f64,
    tick: u64,
    twin_pose: Option<Pose2D>,
    physical_pose: Pose2D,
    channels: ChannelState,
    scan: ScanSummary,
    grid_meta: ([f64; 2], f64, usize, usize),
    grid: Arc<Vec<u8>>,
    mission: MissionState,
    finished: bool,
}

struct Shared {
    case_id: CaseId,
    v_max: f64,
    omega_max: f64,
    latest: Mutex<Option<Published>>,
    inbox: Mutex<Vec<Twist>>,
    authority: Mutex<Option<u64>>,
    stop: AtomicBool,
    next_client: AtomicU64,
    sessions: AtomicU64,
}

/// Running WebSocket server. Dropping it stops the accept loop and all
/// sessions.
pub struct BridgeServer {
    shared: Arc<Shared>,
    config: BridgeConfig,
    addr: SocketAddr,
    accept: Option<JoinHandle<()>>,
}

impl BridgeServer {
    pub fn start(config: BridgeConfig, case_id: CaseId, v_max: f64, omega_max: f64) -> std::io::Result<Self> {
        let listener = TcpListener::bind((config.bind, config.port))?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            case_id,
            v_max,
            omega_max,
            latest: Mutex::new(None),
            inbox: Mutex::new(Vec::new()),
            authority: Mutex::new(None),
            stop: AtomicBool::new(false),
            next_client: AtomicU64::new(0),
            sessions: AtomicU64::new(0),
        });
        let sh = shared.clone();
        let cfg = config;
        let accept = std::thread::spawn(move || {
            let mut workers = Vec::new();
            while !sh.stop.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        let sh2 = sh.clone();
                        workers.push(std::thread::spawn(move || session(stream, sh2, cfg)));
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
                    Err(_) => std::thread::sleep(Duration::from_millis(5)),
                }
            }
            for w in workers {
                let _ = w.join();
            }
        });
        Ok(Self { shared, config, addr, accept: Some(accept) })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("ws://{}", self.addr)
    }

    pub fn active_sessions(&self) -> u64 {
        self.shared.sessions.load(Ordering::SeqCst)
    }

    /// Observer to pass to the harness for this server's run.
    pub fn observer(&self) -> BridgeObserver {
        BridgeObserver {
            shared: self.shared.clone(),
            config: self.config,
            started: None,
            version: 0,
            trace: TeleopTrace::default(),
        }
    }

    pub fn shutdown(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for BridgeServer {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

/// Publishes run state to the server and feeds operator commands into the
/// run. Commands are applied, and recorded, at the tick they are drained.
pub struct BridgeObserver {
    shared: Arc<Shared>,
    config: BridgeConfig,
    started: Option<Instant>,
    version: u64,
    trace: TeleopTrace,
}

impl BridgeObserver {
    /// Every command applied so far, stamped with its server tick time.
    pub fn trace(&self) -> &TeleopTrace {
        &self.trace
    }

    pub fn record_trace(&self, path: &Path) -> Result<(), TraceError> {
        self.trace.save(path)
    }
}

impl RunObserver for BridgeObserver {
    fn on_tick(&mut self, s: &TickSnapshot<'_>) {
        let stride = self.config.scan_stride.max(1);
        let scan = ScanSummary {
            angle_min: s.scan.angle_min,
            angle_increment: s.scan.angle_increment * stride as f64,
            range_max: s.scan.range_max,
            ranges: s.scan.ranges.iter().step_by(stride).copied().collect(),
        };
        let g = s.grid;
        let bytes: Vec<u8> = (0..g.height)
            .flat_map(|row| (0..g.width).map(move |col| (col, row)))
            .map(|(col, row)| g.occupancy_byte(crate::grid::GridIndex::new(col, row)))
            .collect();
        self.version += 1;
        let published = Published {
            version: self.version,
            t: s.t,
            tick: s.tick,
            twin_pose: s.twin_pose,
            physical_pose: s.physical_pose,
            channels: ChannelState { twin: s.twin_channel.map(str::to_string), physical: s.physical_channel.map(str::to_string) },
            scan,
            grid_meta: ([g.origin.x, g.origin.y], g.resolution, g.width, g.height),
            grid: Arc::new(bytes),
            mission: MissionState {
                status: s.status,
                goal_index: s.goal_index,
                goals: s.goals.iter().map(|g| [g.x, g.y, g.yaw]).collect(),
            },
            finished: false,
        };
        *self.shared.latest.lock().expect("bridge state lock") = Some(published);
        if self.config.realtime {
            let start = *self.started.get_or_insert_with(Instant::now);
            let target = start + Duration::from_secs_f64(s.t);
            let now = Instant::now();
            if target > now {
                std::thread::sleep(target - now);
            }
        }
    }

    fn commands(&mut self, t: f64) -> Vec<Twist> {
        let drained: Vec<Twist> = std::mem::take(&mut *self.shared.inbox.lock().expect("inbox lock"));
        for c in &drained {
            self.trace.push(t, *c);
        }
        drained
    }

    fn on_finish(&mut self, _report: &CaseReport) {
        if let Some(p) = self.shared.latest.lock().expect("bridge state lock").as_mut() {
            p.finished = true;
            self.version += 1;
            p.version = self.version;
        }
    }
}

struct ClientView {
    sent_version: u64,
    grid: Option<Arc<Vec<u8>>>,
    last_snapshot_t: f64,
    last_send: Option<Instant>,
}

fn state_frame(p: &Published, case_id: CaseId, view: &mut ClientView, snapshot_period: f64) -> Frame {
    let (origin, resolution, width, height) = p.grid_meta;
    let full_due = match &view.grid {
        None => true,
        Some(prev) => prev.len() != p.grid.len() || p.t - view.last_snapshot_t >= snapshot_period,
    };
    let grid = if full_due {
        view.last_snapshot_t = p.t;
        Some(GridPatch::Full { origin, resolution, width, height, data: p.grid.to_vec() })
    } else {
        let prev = view.grid.as_ref().expect("checked above");
        let cells: Vec<[u32; 3]> = p
            .grid
            .iter()
            .zip(prev.iter())
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, (a, _))| [(i % width) as u32, (i / width) as u32, *a as u32])
            .collect();
        if cells.is_empty() {
            None
        } else {
            Some(GridPatch::Delta { cells })
        }
    };
    view.grid = Some(p.grid.clone());
    view.sent_version = p.version;
    Frame::State {
        version: PROTOCOL_VERSION,
        t: p.t,
        tick: p.tick,
        case_id,
        twin_pose: p.twin_pose,
        physical_pose: p.physical_pose,
        active_channel: p.channels.clone(),
        scan: p.scan.clone(),
        grid,
        mission: p.mission.clone(),
        finished: p.finished,
    }
}

fn send(ws: &mut WebSocket<TcpStream>, frame: &Frame) -> bool {
    ws.send(Message::Text(frame.to_json().into())).is_ok()
}

fn session(stream: TcpStream, shared: Arc<Shared>, config: BridgeConfig) {
    let _ = stream.set_nonblocking(false);
    let _ = stream.set_read_timeout(Some(Duration::from_millis(5)));
    let Ok(mut ws) = tungstenite::accept(stream) else { return };
    let id = shared.next_client.fetch_add(1, Ordering::SeqCst);
    shared.sessions.fetch_add(1, Ordering::SeqCst);
    let authority = shared.case_id == CaseId::MT && {
        let mut a = shared.authority.lock().expect("authority lock");
        if a.is_none() {
            *a = Some(id);
            true
        } else {
            false
        }
    };
    let hello = Frame::Hello {
        version: PROTOCOL_VERSION,
        case_id: shared.case_id,
        authority,
        v_max: shared.v_max,
        omega_max: shared.omega_max,
    };
    let mut alive = send(&mut ws, &hello);
    let mut view = ClientView { sent_version: 0, grid: None, last_snapshot_t: f64::NEG_INFINITY, last_send: None };
    let min_gap = Duration::from_secs_f64(1.0 / config.max_rate_hz.max(1e-3));

    while alive && !shared.stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => {
                let reply = match Frame::parse(text.as_str()) {
                    Ok(Frame::Command { t_client, v, omega }) if authority => {
                        if v.is_finite() && omega.is_finite() {
                            let applied = Twist::new(v, omega).clamped(shared.v_max, shared.omega_max);
                            shared.inbox.lock().expect("inbox lock").push(applied);
                            Frame::Command { t_client, v: applied.v, omega: applied.omega }
                        } else {
                            Frame::Error { message: "command values must be finite".into() }
                        }
                    }
                    Ok(Frame::Command { .. }) => Frame::Error { message: "this session has no command authority".into() },
                    Ok(_) => Frame::Error { message: "only command frames are accepted".into() },
                    Err(message) => Frame::Error { message },
                };
                alive = send(&mut ws, &reply);
            }
            Ok(Message::Close(_)) => alive = false,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => alive = false,
        }
        if !alive {
            break;
        }
        let due = view.last_send.is_none_or(|t| t.elapsed() >= min_gap);
        if due {
            let latest = shared.latest.lock().expect("bridge state lock").clone();
            if let Some(p) = latest.filter(|p| p.version > view.sent_version) {
                let frame = state_frame(&p, shared.case_id, &mut view, config.snapshot_period);
                view.last_send = Some(Instant::now());
                alive = send(&mut ws, &frame);
            }
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    if authority {
        *shared.authority.lock().expect("authority lock") = None;
    }
    shared.sessions.fetch_sub(1, Ordering::SeqCst);
}
