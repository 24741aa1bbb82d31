use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use super::report::{goal_error, CaseReport, CaseRun, GoalResult, SiteAccounting, TrajectoryRow};
use super::scenario::{CaseId, MapSource, Scenario, ScenarioError, TOPICS};
use super::trace::{TeleopTrace, TraceCursor};
use crate::feedback::{compute_feedback_force, force_to_correction, override_command, ForceVector};
use crate::grid::{GridError, InverseSensorModel, OccupancyGrid};
use crate::mux::{MuxChannel, MuxError, PriorityMux};
use crate::nav::{Goal, Mission, MissionStatus};
use crate::netsim::{Direction, NetError, NetworkSim, TopicHandle};
use crate::wire::{decode_message, encode_message, Payload, WireError};
use crate::world::{
    check_collision, raycast_scan, step_kinematics, LaserScan, OdometryNoise, OdometryNoiseModel, Pose2D, Twist,
    WorldError, WorldModel,
};

const GRID_PAD_CELLS: usize = 2;
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Mux(#[from] MuxError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// Read-only view of the run after each tick.
#[derive(Debug, Clone, Copy)]
pub struct TickSnapshot<'a> {
    pub tick: u64,
    pub t: f64,
    pub case_id: CaseId,
    pub twin_pose: Option<Pose2D>,
    pub physical_pose: Pose2D,
    pub twin_channel: Option<&'a str>,
    pub physical_channel: Option<&'a str>,
    pub scan: &'a LaserScan,
    pub grid: &'a OccupancyGrid,
    pub goals: &'a [Goal],
    pub goal_index: usize,
    pub status: MissionStatus,
}

/// Hook for live observation and operator input.
pub trait RunObserver {
    fn on_tick(&mut self, _snapshot: &TickSnapshot<'_>) {}

    /// Operator commands to apply at tick time `t` (MT only).
    fn commands(&mut self, _t: f64) -> Vec<Twist> {
        Vec::new()
    }

    fn on_finish(&mut self, _report: &CaseReport) {}
}

#[derive(Default)]
pub struct RunOptions<'a> {
    pub trace: Option<TeleopTrace>,
    pub observer: Option<&'a mut dyn RunObserver>,
}

struct Topics {
    cmd_vel: TopicHandle,
    odom: TopicHandle,
    scan: TopicHandle,
    force: TopicHandle,
}

struct Outbox {
    seq: BTreeMap<&'static str, u64>,
}

impl Outbox {
    fn new() -> Self {
        Self { seq: BTreeMap::new() }
    }

    fn send<P: Payload>(
        &mut self,
        net: &mut NetworkSim,
        h: TopicHandle,
        topic: &'static str,
        msg: &P,
        t: f64,
        acct: &mut SiteAccounting,
    ) -> Result<(), HarnessError> {
        let seq = self.seq.entry(topic).or_insert(0);
        *seq += 1;
        let bytes = encode_message(topic, *seq, t, msg)?;
        acct.messages_sent += 1;
        acct.bytes_sent += bytes.len() as u64;
        net.publish(h, bytes, t)?;
        Ok(())
    }
}

/// Receives typed messages, keeping only those newer than any seen before.
fn receive<P: Payload>(net: &mut NetworkSim, h: TopicHandle, t: f64, last_seq: &mut u64) -> Result<Vec<(f64, P)>, HarnessError> {
    let mut out = Vec::new();
    for d in net.poll(h, t)? {
        let (env, msg) = decode_message::<P>(&d.payload)?;
        if env.seq > *last_seq {
            *last_seq = env.seq;
            out.push((env.send_time, msg));
        }
    }
    Ok(out)
}

struct Body {
    world: WorldModel,
    pose: Pose2D,
    colliding: bool,
    collisions: u64,
}

impl Body {
    fn new(world: WorldModel, pose: Pose2D) -> Self {
        Self { world, pose, colliding: false, collisions: 0 }
    }

    /// Integrates `cmd`; a step that would intersect the world is refused
    /// and counted once per contact episode.
    fn advance(&mut self, cmd: Twist, dt: f64) -> Result<(), HarnessError> {
        let next = step_kinematics(self.pose, cmd, dt)?;
        if check_collision(&self.world, next) {
            if !self.colliding {
                self.collisions += 1;
            }
            self.colliding = true;
        } else {
            self.colliding = false;
            self.pose = next;
        }
        Ok(())
    }
}

enum Phase {
    Navigate,
    Settle { until: f64 },
    Done,
}

/// Walks the goal list one mission at a time with a settling dwell after
/// each, and scores every goal against the physical robot.
struct GoalTracker {
    goals: Vec<Goal>,
    idx: usize,
    phase: Phase,
    mission: Option<Mission>,
    reached: bool,
    seg_start: f64,
    last_motion: f64,
    results: Vec<GoalResult>,
    planner_seen: u64,
}

impl GoalTracker {
    fn new(goals: Vec<Goal>) -> Self {
        let phase = if goals.is_empty() { Phase::Done } else { Phase::Navigate };
        Self {
            goals,
            idx: 0,
            phase,
            mission: None,
            reached: false,
            seg_start: 0.0,
            last_motion: 0.0,
            results: Vec::new(),
            planner_seen: 0,
        }
    }

    fn done(&self) -> bool {
        matches!(self.phase, Phase::Done)
    }

    fn status(&self) -> MissionStatus {
        match (&self.phase, &self.mission) {
            (Phase::Navigate, _) => MissionStatus::Running,
            _ if self.reached => MissionStatus::Reached,
            (Phase::Done, _) if self.results.iter().all(|r| r.reached) => MissionStatus::Reached,
            _ => MissionStatus::Failed,
        }
    }

    /// Navigation command for this tick, adding any planner work to `acct`.
    fn command(&mut self, s: &Scenario, pose: Pose2D, current: Twist, grid: &OccupancyGrid, t: f64, acct: &mut SiteAccounting) -> Twist {
        match self.phase {
            Phase::Done | Phase::Settle { .. } => Twist::ZERO,
            Phase::Navigate => {
                if self.mission.is_none() {
                    self.mission = Some(Mission::new(vec![self.goals[self.idx]], s.dwa, s.mission, s.planning_world().robot_radius));
                    self.seg_start = t;
                    self.last_motion = t;
                    self.reached = false;
                    self.planner_seen = 0;
                }
                let m = self.mission.as_mut().expect("mission started");
                let out = m.step(pose, current, grid, s.tick_dt);
                acct.planner_invocations += m.planner_invocations() - self.planner_seen;
                self.planner_seen = m.planner_invocations();
                let timed_out = t + s.tick_dt - self.seg_start >= s.goal_timeout - TIME_EPS;
                if out.status != MissionStatus::Running || timed_out {
                    self.reached = out.status == MissionStatus::Reached;
                    self.phase = Phase::Settle { until: t + s.settle_time };
                }
                out.cmd
            }
        }
    }

    /// Bookkeeping after the physical step that ends at `t_end`.
    fn after_step(&mut self, s: &Scenario, physical: Pose2D, moved: bool, t_end: f64) {
        if moved && !self.done() {
            self.last_motion = t_end;
        }
        if let Phase::Settle { until } = self.phase {
            if t_end >= until - TIME_EPS {
                self.finish_goal(s, physical, true);
                self.idx += 1;
                self.mission = None;
                self.phase = if self.idx < self.goals.len() { Phase::Navigate } else { Phase::Done };
            }
        }
    }

    fn finish_goal(&mut self, s: &Scenario, physical: Pose2D, in_budget: bool) {
        let g = self.goals[self.idx];
        let err = goal_error(physical.position(), g.position());
        let completion = self.last_motion - self.seg_start;
        self.results.push(GoalResult {
            index: self.idx,
            goal: [g.x, g.y, g.yaw],
            reached: self.reached,
            goal_error: err,
            completion_time: Some(completion),
            success: self.reached && in_budget && err <= 2.0 * s.dwa.goal_xy_tol && self.last_motion <= s.time_budget + TIME_EPS,
        });
    }

    /// Closes out goals left open when the time budget ran out.
    fn close(&mut self, s: &Scenario, physical: Pose2D) {
        if !self.done() && self.mission.is_some() {
            self.finish_goal(s, physical, false);
            self.idx += 1;
        }
        while self.results.len() < self.goals.len() {
            let g = self.goals[self.results.len()];
            self.results.push(GoalResult {
                index: self.results.len(),
                goal: [g.x, g.y, g.yaw],
                reached: false,
                goal_error: goal_error(physical.position(), g.position()),
                completion_time: None,
                success: false,
            });
        }
        self.phase = Phase::Done;
    }
}

/// Manual teleoperation has no planner: a goal counts as reached once the
/// physical robot comes within twice the goal tolerance.
struct TeleopGoals {
    goals: Vec<Goal>,
    results: Vec<GoalResult>,
    seg_start: f64,
    all_reached_at: Option<f64>,
}

impl TeleopGoals {
    fn after_step(&mut self, s: &Scenario, physical: Pose2D, t_end: f64) {
        let i = self.results.len();
        if i >= self.goals.len() {
            return;
        }
        let g = self.goals[i];
        let err = goal_error(physical.position(), g.position());
        if err <= 2.0 * s.dwa.goal_xy_tol {
            self.results.push(GoalResult {
                index: i,
                goal: [g.x, g.y, g.yaw],
                reached: true,
                goal_error: err,
                completion_time: Some(t_end - self.seg_start),
                success: true,
            });
            self.seg_start = t_end;
            if self.results.len() == self.goals.len() {
                self.all_reached_at = Some(t_end);
            }
        }
    }

    fn close(&mut self, physical: Pose2D) {
        while self.results.len() < self.goals.len() {
            let g = self.goals[self.results.len()];
            self.results.push(GoalResult {
                index: self.results.len(),
                goal: [g.x, g.y, g.yaw],
                reached: false,
                goal_error: goal_error(physical.position(), g.position()),
                completion_time: None,
                success: false,
            });
        }
    }
}

fn new_grid(s: &Scenario, world: &WorldModel) -> Result<OccupancyGrid, GridError> {
    match s.mapping.source {
        MapSource::Exact => OccupancyGrid::rasterize(world, s.mapping.resolution, GRID_PAD_CELLS, s.mapping.l_max),
        MapSource::Scan => OccupancyGrid::covering(&world.bounds, s.mapping.resolution, GRID_PAD_CELLS),
    }
}

fn frontal_contact(scan: &LaserScan, threshold: f64) -> bool {
    scan.beams().any(|(b, r, none)| !none && b.abs() <= FRAC_PI_2 + TIME_EPS && r < threshold)
}

pub fn run_case(scenario: &Scenario) -> Result<CaseRun, HarnessError> {
    run_case_with(scenario, RunOptions::default())
}

/// Runs one experiment case to completion or until the time budget ends.
pub fn run_case_with(scenario: &Scenario, mut opts: RunOptions<'_>) -> Result<CaseRun, HarnessError> {
    let s = scenario;
    s.validate()?;
    let case = s.case_id;
    let dt = s.tick_dt;
    let max_ticks = (s.time_budget / dt + TIME_EPS).floor() as u64;
    let scan_every = ((s.mapping.scan_period / dt).round() as u64).max(1);
    let sensor: InverseSensorModel = s.mapping.sensor_model();
    let feedback = case.feedback_enabled();
    let fb = s.feedback.params;
    let (v_max, omega_max) = (s.dwa.v_max, s.dwa.omega_max);

    let mut net = NetworkSim::new();
    let topics = Topics {
        cmd_vel: net.open_topic("cmd_vel", s.channel("cmd_vel"), Direction::CyberToPhysical)?,
        odom: net.open_topic("odom", s.channel("odom"), Direction::PhysicalToCyber)?,
        scan: net.open_topic("scan", s.channel("scan"), Direction::PhysicalToCyber)?,
        force: net.open_topic("force", s.channel("force"), Direction::PhysicalToCyber)?,
    };

    // physical site
    let mut phys = Body::new(s.physical_world.clone(), s.start_pose());
    let mut odom = s.start_pose();
    let mut noise = OdometryNoise::new(OdometryNoiseModel { sigma_v: s.noise.sigma_v, sigma_omega: s.noise.sigma_omega, seed: s.seed });
    let mut phys_mux = PriorityMux::with_channels([
        MuxChannel::new("cmd_vel", 10, s.mux.cmd_vel_timeout),
        MuxChannel::new("safety", 100, s.mux.safety_timeout),
    ])?;
    let mut phys_out = Outbox::new();
    let mut phys_acct = SiteAccounting::default();
    let mut phys_cmd_seq = 0u64;

    // cyber site: the twin, or the remote planner in RO
    let low_channel = if case == CaseId::MT { "teleop" } else { "nav" };
    let mut twin = s.twin_world.clone().filter(|_| case.has_twin()).map(|w| Body::new(w, s.start_pose()));
    let mut twin_mux = PriorityMux::with_channels([
        MuxChannel::new(low_channel, 10, s.mux.nav_timeout),
        MuxChannel::new("force", 100, s.mux.force_timeout),
    ])?;
    let mut grid = new_grid(s, s.planning_world())?;
    let mut cyber_out = Outbox::new();
    let mut cyber_acct = SiteAccounting::default();
    let mut cyber_last_cmd = Twist::ZERO;
    let (mut force_seq, mut odom_seq, mut scan_seq) = (0u64, 0u64, 0u64);
    let mut odom_history: VecDeque<(f64, Pose2D)> = VecDeque::new();
    let mut remote_pose: Option<Pose2D> = None;

    let mut tracker = GoalTracker::new(s.goal_list());
    let mut teleop = TeleopGoals { goals: s.goal_list(), results: Vec::new(), seg_start: 0.0, all_reached_at: None };
    let mut cursor = opts.trace.take().map(TraceCursor::new);
    let trace_end = cursor.as_ref().and_then(|c| c.end_time());

    let mut trajectory = Vec::new();
    let (mut force_acts, mut safety_acts, mut estops) = (0u64, 0u64, 0u64);
    let mut tracking_sum = 0.0;
    let mut ticks = 0u64;

    while ticks < max_ticks {
        let k = ticks;
        let t = k as f64 * dt;
        let t_end = (k + 1) as f64 * dt;

        // 1. physical sense
        let phys_scan = raycast_scan(&phys.world, phys.pose, &s.scan, t)?;
        let scan_tick = k % scan_every == 0;
        if scan_tick {
            phys_out.send(&mut net, topics.scan, "scan", &phys_scan, t, &mut phys_acct)?;
        }
        phys_out.send(&mut net, topics.odom, "odom", &odom, t, &mut phys_acct)?;

        // 2. feedback publish and local safety override
        let mut estop = false;
        if feedback {
            let force = compute_feedback_force(&phys_scan, &fb);
            phys_acct.force_computations += 1;
            if fb.should_publish(&force) {
                phys_out.send(&mut net, topics.force, "force", &force, t, &mut phys_acct)?;
                let corr = force_to_correction(&force, &fb, v_max, omega_max);
                let nominal = phys_mux.latest("cmd_vel").map_or(Twist::ZERO, |(c, _)| c);
                phys_mux.offer("safety", override_command(nominal, corr), t)?;
            }
            estop = frontal_contact(&phys_scan, phys.world.robot_radius + s.feedback.estop_margin);
        }

        // 3. deliver to the cyber site
        let forces = receive::<ForceVector>(&mut net, topics.force, t, &mut force_seq)?;

        for (stamp, pose) in receive::<Pose2D>(&mut net, topics.odom, t, &mut odom_seq)? {
            if case == CaseId::RO {
                odom_history.push_back((stamp, pose));
                if odom_history.len() > 256 {
                    odom_history.pop_front();
                }
                remote_pose = Some(pose);
            }
        }
        for (stamp, scan) in receive::<LaserScan>(&mut net, topics.scan, t, &mut scan_seq)? {
            if case == CaseId::RO && s.mapping.source == MapSource::Scan {
                let at = odom_history.iter().rev().find(|(ts, _)| (*ts - stamp).abs() < TIME_EPS).map(|(_, p)| *p).or(remote_pose);
                if let Some(p) = at {
                    grid.update_with_scan(p, &scan, &sensor);
                    cyber_acct.mapping_updates += 1;
                }
            }
        }

        // 4-6. cyber site maps, plans, arbitrates, steps and publishes
        let mut twin_channel = None;
        if let Some(tw) = twin.as_mut() {
            if scan_tick && s.mapping.source == MapSource::Scan {
                let own = raycast_scan(&tw.world, tw.pose, &s.scan, t)?;
                grid.update_with_scan(tw.pose, &own, &sensor);
                cyber_acct.mapping_updates += 1;
            }
            if case == CaseId::MT {
                let mut cmds: Vec<Twist> = cursor.as_mut().map(|c| c.due(t).iter().map(|r| r.twist()).collect()).unwrap_or_default();
                if let Some(obs) = opts.observer.as_mut() {
                    cmds.extend(obs.commands(t));
                }
                for c in cmds {
                    twin_mux.offer(low_channel, c.clamped(v_max, omega_max), t)?;
                }
            } else {
                let nav = tracker.command(s, tw.pose, cyber_last_cmd, &grid, t, &mut cyber_acct);
                twin_mux.offer(low_channel, nav, t)?;
            }
            if feedback {
                if let Some((_, f)) = forces.last() {
                    let nominal = twin_mux.latest(low_channel).map_or(Twist::ZERO, |(c, _)| c);
                    let corr = force_to_correction(f, &fb, v_max, omega_max);
                    twin_mux.offer("force", override_command(nominal, corr), t)?;
                }
            }
            let cmd = twin_mux.command(t).clamped(v_max, omega_max);
            twin_channel = twin_mux.active_channel();
            if twin_channel == Some("force") {
                force_acts += 1;
            }
            tw.advance(cmd, dt)?;
            cyber_last_cmd = cmd;
            cyber_out.send(&mut net, topics.cmd_vel, "cmd_vel", &cmd, t, &mut cyber_acct)?;
        } else if let Some(pose) = remote_pose {
            let cmd = tracker.command(s, pose, cyber_last_cmd, &grid, t, &mut cyber_acct).clamped(v_max, omega_max);
            cyber_last_cmd = cmd;
            cyber_out.send(&mut net, topics.cmd_vel, "cmd_vel", &cmd, t, &mut cyber_acct)?;
        }

        // 7. deliver to the physical site
        for (_, cmd) in receive::<Twist>(&mut net, topics.cmd_vel, t, &mut phys_cmd_seq)? {
            phys_mux.offer("cmd_vel", cmd, t)?;
        }

        // 8. physical arbitrate and step
        let mut cmd = phys_mux.command(t);
        let phys_channel = phys_mux.active_channel();
        if phys_channel == Some("safety") {
            safety_acts += 1;
        }
        if estop && cmd.v > 0.0 {
            cmd.v = 0.0;
            estops += 1;
        }
        let before = phys.pose;
        let executed = noise.apply(cmd);
        phys.advance(executed, dt)?;
        odom = step_kinematics(odom, cmd, dt)?;
        let moved = phys.pose != before;

        ticks += 1;
        let twin_pose = twin.as_ref().map(|b| b.pose);
        if let Some(tp) = twin_pose {
            tracking_sum += tp.distance_to(&phys.pose);
        }
        trajectory.push(TrajectoryRow { tick: k, t: t_end, twin: twin_pose, physical: phys.pose });

        let finished = if case == CaseId::MT {
            teleop.after_step(s, phys.pose, t_end);
            let settled = teleop.all_reached_at.is_some_and(|at| t_end >= at + s.settle_time - TIME_EPS);
            let trace_over = cursor.as_ref().is_some_and(|c| c.exhausted())
                && trace_end.is_some_and(|te| t_end >= te + s.mux.nav_timeout + s.settle_time - TIME_EPS);
            settled || trace_over
        } else {
            tracker.after_step(s, phys.pose, moved, t_end);
            tracker.done()
        };

        if let Some(obs) = opts.observer.as_mut() {
            let goals: &[Goal] = if case == CaseId::MT { &teleop.goals } else { &tracker.goals };
            let (goal_index, status) = if case == CaseId::MT {
                let i = teleop.results.len();
                (i, if i == goals.len() { MissionStatus::Reached } else { MissionStatus::Running })
            } else {
                (tracker.idx.min(goals.len()), tracker.status())
            };
            obs.on_tick(&TickSnapshot {
                tick: k,
                t: t_end,
                case_id: case,
                twin_pose,
                physical_pose: phys.pose,
                twin_channel,
                physical_channel: phys_channel,
                scan: &phys_scan,
                grid: &grid,
                goals,
                goal_index,
                status,
            });
        }
        if finished {
            break;
        }
    }

    let duration = ticks as f64 * dt;
    let goals = if case == CaseId::MT {
        teleop.close(phys.pose);
        teleop.results
    } else {
        tracker.close(s, phys.pose);
        tracker.results
    };
    let success_rate = if goals.is_empty() { 0.0 } else { goals.iter().filter(|g| g.success).count() as f64 / goals.len() as f64 };

    let mut network = BTreeMap::new();
    for (name, h) in TOPICS.iter().zip([topics.cmd_vel, topics.odom, topics.scan, topics.force]) {
        network.insert(name.to_string(), net.snapshot(h, duration)?);
    }
    network.insert("all".to_string(), net.snapshot_all(duration));
    let mut accounting = BTreeMap::new();
    accounting.insert("physical".to_string(), phys_acct);
    accounting.insert(if case.has_twin() { "twin" } else { "remote" }.to_string(), cyber_acct);

    let report = CaseReport {
        case_id: case,
        seed: s.seed,
        ticks,
        duration,
        goals,
        success_rate,
        mean_tracking_error: if case.has_twin() && ticks > 0 {
            Some(tracking_sum / ticks as f64)
        } else if case.has_twin() {
            Some(0.0)
        } else {
            None
        },
        collision_count: phys.collisions,
        twin_collision_count: twin.as_ref().map_or(0, |b| b.collisions),
        force_activations: force_acts,
        safety_activations: safety_acts,
        estop_activations: estops,
        network,
        accounting,
        scenario: s.clone(),
    };
    if let Some(obs) = opts.observer.as_mut() {
        obs.on_finish(&report);
    }
    Ok(CaseRun { report, trajectory, map: grid })
}
