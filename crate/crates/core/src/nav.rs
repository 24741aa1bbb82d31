//! Twin autonomy: A* global planning on the inflated grid, dynamic-window
//! local planning with stop-before-collision admissibility, recovery
//! rotation, and a waypoint mission executor.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{BinaryGrid, DistanceField, GridIndex, OccupancyGrid};
use crate::world::{normalize_angle, step_kinematics, Pose2D, Twist};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NavError {
    #[error("goal is unreachable from start")]
    UnreachableGoal,
    #[error("invalid path endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("recovery exhausted after {cycles} rotation cycles")]
    RecoveryExhausted { cycles: u32 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Maximum number of full recovery rotations before a mission fails.
pub const MAX_RECOVERY_CYCLES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DwaParams {
    pub v_max: f64,
    pub v_min: f64,
    pub omega_max: f64,
    pub a_v: f64,
    pub a_omega: f64,
    pub sim_horizon: f64,
    pub control_dt: f64,
    /// Integration step of the forward rollout.
    pub rollout_dt: f64,
    pub n_v: usize,
    pub n_omega: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Distances above this saturate the clearance score at 1.
    pub clearance_cutoff: f64,
    pub goal_xy_tol: f64,
    pub goal_yaw_tol: f64,
}

impl Default for DwaParams {
    fn default() -> Self {
        Self {
            v_max: 0.5,
            v_min: 0.0,
            omega_max: 1.0,
            a_v: 0.5,
            a_omega: 2.0,
            sim_horizon: 1.5,
            control_dt: 0.25,
            rollout_dt: 0.05,
            n_v: 11,
            n_omega: 21,
            alpha: 0.8,
            beta: 0.1,
            gamma: 0.1,
            clearance_cutoff: 1.0,
            goal_xy_tol: 0.05,
            goal_yaw_tol: 0.1,
        }
    }
}

impl DwaParams {
    pub fn validate(&self) -> Result<(), NavError> {
        let positive = [
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
            ("a_v", self.a_v),
            ("a_omega", self.a_omega),
            ("sim_horizon", self.sim_horizon),
            ("control_dt", self.control_dt),
            ("rollout_dt", self.rollout_dt),
            ("clearance_cutoff", self.clearance_cutoff),
            ("goal_xy_tol", self.goal_xy_tol),
            ("goal_yaw_tol", self.goal_yaw_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(NavError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.v_min >= 0.0 && self.v_min <= self.v_max) {
            return Err(NavError::InvalidParams("need 0 <= v_min <= v_max".into()));
        }
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 || !(self.alpha + self.beta + self.gamma > 0.0) {
            return Err(NavError::InvalidParams("objective weights must be non-negative with positive sum".into()));
        }
        if self.n_v < 2 || self.n_omega < 2 {
            return Err(NavError::InvalidParams("n_v and n_omega must be at least 2".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- global

/// Path cost as counts of straight and diagonal moves; the scalar cost is
/// `straight + diagonal * sqrt(2)`, so equal costs compare exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl PathCost {
    pub fn value(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * SQRT_2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub cells: Vec<GridIndex>,
    pub waypoints: Vec<[f64; 2]>,
    pub cost: PathCost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Open {
    f: f64,
    g: f64,
    node: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then prefer larger g (deeper), then lower node id
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// 8-connected moves from `node`. Diagonals require both adjacent
/// orthogonal cells to be free (no corner cutting).
pub fn grid_neighbors(grid: &BinaryGrid, node: GridIndex) -> impl Iterator<Item = (GridIndex, bool)> + '_ {
    const MOVES: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
    let (c, r) = (node.col as i64, node.row as i64);
    let free = move |dc: i64, dr: i64| {
        grid.in_bounds(c + dc, r + dr) && !grid.is_blocked(GridIndex::new((c + dc) as usize, (r + dr) as usize))
    };
    MOVES.iter().filter_map(move |&(dc, dr)| {
        let diagonal = dc != 0 && dr != 0;
        if !free(dc, dr) || (diagonal && !(free(dc, 0) && free(0, dr))) {
            return None;
        }
        Some((GridIndex::new((c + dc) as usize, (r + dr) as usize), diagonal))
    })
}

/// Minimum-cost 8-connected path between the cells containing `start` and
/// `goal`, with waypoints at cell centers.
pub fn plan_global(grid: &BinaryGrid, start: [f64; 2], goal: [f64; 2]) -> Result<Path, NavError> {
    let s = grid
        .world_to_cell(start)
        .map_err(|e| NavError::InvalidEndpoint(format!("start: {e}")))?;
    let g = grid
        .world_to_cell(goal)
        .map_err(|e| NavError::InvalidEndpoint(format!("goal: {e}")))?;
    if grid.is_blocked(s) {
        return Err(NavError::InvalidEndpoint(format!("start cell ({}, {}) is occupied", s.col, s.row)));
    }
    if grid.is_blocked(g) {
        return Err(NavError::InvalidEndpoint(format!("goal cell ({}, {}) is occupied", g.col, g.row)));
    }
    let w = grid.width;
    let n = grid.width * grid.height;
    let flat = |i: GridIndex| i.row * w + i.col;
    let heuristic = |i: GridIndex| {
        let dx = (i.col as f64 - g.col as f64).abs();
        let dy = (i.row as f64 - g.row as f64).abs();
        dx.max(dy) + (SQRT_2 - 1.0) * dx.min(dy)
    };
    let mut best = vec![f64::INFINITY; n];
    let mut counts = vec![PathCost::default(); n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[flat(s)] = 0.0;
    heap.push(Open { f: heuristic(s), g: 0.0, node: flat(s) });
    while let Some(Open { node, .. }) = heap.pop() {
        if closed[node] {
            continue;
        }
        closed[node] = true;
        if node == flat(g) {
            break;
        }
        let here = GridIndex::new(node % w, node / w);
        for (next, diagonal) in grid_neighbors(grid, here) {
            let ni = flat(next);
            if closed[ni] {
                continue;
            }
            let mut c = counts[node];
            if diagonal {
                c.diagonal += 1;
            } else {
                c.straight += 1;
            }
            let ng = c.value();
            if ng < best[ni] {
                best[ni] = ng;
                counts[ni] = c;
                parent[ni] = node;
                heap.push(Open { f: ng + heuristic(next), g: ng, node: ni });
            }
        }
    }
    if !closed[flat(g)] {
        return Err(NavError::UnreachableGoal);
    }
    let mut cells = vec![g];
    let mut cur = flat(g);
    while cur != flat(s) {
        cur = parent[cur];
        cells.push(GridIndex::new(cur % w, cur / w));
    }
    cells.reverse();
    let waypoints = cells.iter().map(|&c| grid.cell_center(c)).collect();
    Ok(Path { cells, waypoints, cost: counts[flat(g)] })
}

// ----------------------------------------------------------------- local

/// Velocities reachable within one control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityWindow {
    pub v: (f64, f64),
    pub omega: (f64, f64),
}

impl VelocityWindow {
    pub fn contains(&self, t: Twist) -> bool {
        let eps = 1e-12;
        t.v >= self.v.0 - eps && t.v <= self.v.1 + eps && t.omega >= self.omega.0 - eps && t.omega <= self.omega.1 + eps
    }

    /// `n_v x n_omega` grid of evenly spaced samples, inclusive of the ends.
    pub fn samples(&self, n_v: usize, n_omega: usize) -> Vec<Twist> {
        let lin = |(lo, hi): (f64, f64), n: usize, i: usize| {
            let s = i as f64 / (n - 1) as f64;
            (lo + (hi - lo) * s).clamp(lo, hi)
        };
        let mut out = Vec::with_capacity(n_v * n_omega);
        for i in 0..n_v {
            for j in 0..n_omega {
                out.push(Twist::new(lin(self.v, n_v, i), lin(self.omega, n_omega, j)));
            }
        }
        out
    }
}

pub fn dynamic_window(current: Twist, params: &DwaParams) -> VelocityWindow {
    let dv = params.a_v * params.control_dt;
    let dw = params.a_omega * params.control_dt;
    let v_lo = (current.v - dv).max(params.v_min);
    let v_hi = (current.v + dv).min(params.v_max);
    let w_lo = (current.omega - dw).max(-params.omega_max);
    let w_hi = (current.omega + dw).min(params.omega_max);
    // a current velocity outside the limits collapses onto the nearest bound
    VelocityWindow {
        v: (v_lo.min(params.v_max), v_hi.max(params.v_min)),
        omega: (w_lo.min(params.omega_max), w_hi.max(-params.omega_max)),
    }
}

/// Obstacle knowledge the local planner scores against.
#[derive(Debug, Clone)]
pub struct ClearanceMap {
    pub field: DistanceField,
    pub robot_radius: f64,
}

impl ClearanceMap {
    pub fn from_grid(grid: &OccupancyGrid, occupied_threshold: f64, robot_radius: f64) -> Self {
        Self { field: grid.distance_field(occupied_threshold), robot_radius }
    }

    /// Free gap between the robot footprint centred at `p` and the nearest
    /// mapped obstacle; non-positive means contact.
    pub fn gap(&self, p: [f64; 2]) -> f64 {
        if self.field.center_distance(p) == 0.0 {
            return -self.robot_radius;
        }
        self.field.obstacle_distance(p) - self.robot_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryScore {
    pub heading: f64,
    pub clearance: f64,
    pub velocity: f64,
    pub total: f64,
    pub admissible: bool,
    /// Minimum footprint gap along the rollout, meters.
    pub clearance_raw: f64,
}

/// Unicycle rollout of a constant command from `pose` over the horizon,
/// including the start pose.
pub fn rollout(pose: Pose2D, cmd: Twist, params: &DwaParams) -> Vec<Pose2D> {
    let steps = (params.sim_horizon / params.rollout_dt - 1e-9).ceil().max(1.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let mut p = pose;
    out.push(p);
    for _ in 0..steps {
        p = step_kinematics(p, cmd, params.rollout_dt).unwrap_or(p);
        out.push(p);
    }
    out
}

pub fn evaluate_candidate(
    pose: Pose2D,
    candidate: Twist,
    goal: [f64; 2],
    map: &ClearanceMap,
    params: &DwaParams,
) -> TrajectoryScore {
    let traj = rollout(pose, candidate, params);
    let clearance_raw = traj.iter().map(|p| map.gap(p.position())).fold(f64::INFINITY, f64::min);
    let end = traj.last().copied().unwrap_or(pose);
    // a rollout that passes through the goal tolerance has captured the goal
    let captures = traj
        .iter()
        .any(|p| (goal[0] - p.x).hypot(goal[1] - p.y) <= params.goal_xy_tol);
    let heading = if captures {
        1.0
    } else {
        let bearing = (goal[1] - end.y).atan2(goal[0] - end.x);
        1.0 - normalize_angle(bearing - end.theta).abs() / PI
    };
    let clearance = (clearance_raw.min(params.clearance_cutoff) / params.clearance_cutoff).clamp(0.0, 1.0);
    let velocity = (candidate.v / params.v_max).clamp(0.0, 1.0);
    let collides = clearance_raw <= 0.0;
    let can_stop = candidate.v <= (2.0 * clearance_raw.max(0.0) * params.a_v).sqrt();
    TrajectoryScore {
        heading,
        clearance,
        velocity,
        total: params.alpha * heading + params.beta * clearance + params.gamma * velocity,
        admissible: !collides && can_stop,
        clearance_raw,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub cmd: Twist,
    /// Score of the chosen candidate; `None` when the recovery command was
    /// returned because nothing was admissible.
    pub score: Option<TrajectoryScore>,
}

impl Selection {
    pub fn admissible(&self) -> bool {
        self.score.is_some()
    }
}

const TIE_REL: f64 = 1e-12;
const TIE_ABS: f64 = 1e-9;

/// True if candidate `a` beats `b`: higher total, then lower |omega|, then
/// lower v, then positive omega.
pub fn prefer(a: (Twist, f64), b: (Twist, f64)) -> bool {
    let (ta, sa) = a;
    let (tb, sb) = b;
    let eps = TIE_REL * sa.abs().max(sb.abs());
    if sa > sb + eps {
        return true;
    }
    if sb > sa + eps {
        return false;
    }
    if (ta.omega.abs() - tb.omega.abs()).abs() > TIE_ABS {
        return ta.omega.abs() < tb.omega.abs();
    }
    if (ta.v - tb.v).abs() > TIE_ABS {
        return ta.v < tb.v;
    }
    ta.omega > tb.omega
}

pub fn select_velocity_detailed(
    pose: Pose2D,
    current: Twist,
    local_goal: [f64; 2],
    map: &ClearanceMap,
    params: &DwaParams,
) -> Selection {
    let window = dynamic_window(current, params);
    let mut best: Option<(Twist, TrajectoryScore)> = None;
    for cand in window.samples(params.n_v, params.n_omega) {
        let score = evaluate_candidate(pose, cand, local_goal, map, params);
        if !score.admissible {
            continue;
        }
        let better = match best {
            None => true,
            Some((bt, bs)) => prefer((cand, score.total), (bt, bs.total)),
        };
        if better {
            best = Some((cand, score));
        }
    }
    match best {
        Some((cmd, score)) => Selection { cmd, score: Some(score) },
        None => Selection { cmd: recovery_command(params), score: None },
    }
}

pub fn select_velocity(pose: Pose2D, current: Twist, local_goal: [f64; 2], map: &ClearanceMap, params: &DwaParams) -> Twist {
    select_velocity_detailed(pose, current, local_goal, map, params).cmd
}

pub fn recovery_command(params: &DwaParams) -> Twist {
    Twist::new(0.0, params.omega_max / 2.0)
}

/// Recovery rotation after `consecutive_inadmissible` ticks without an
/// admissible candidate. Fails once the accumulated rotation has completed
/// [`MAX_RECOVERY_CYCLES`] full turns.
pub fn trigger_recovery(consecutive_inadmissible: u32, params: &DwaParams, tick_dt: f64) -> Result<Twist, NavError> {
    let cycles = recovery_cycles(consecutive_inadmissible, params, tick_dt);
    if cycles >= MAX_RECOVERY_CYCLES {
        return Err(NavError::RecoveryExhausted { cycles });
    }
    Ok(recovery_command(params))
}

/// Completed full rotations after `count` recovery ticks.
pub fn recovery_cycles(count: u32, params: &DwaParams, tick_dt: f64) -> u32 {
    let turned = count as f64 * tick_dt * params.omega_max / 2.0;
    (turned / (2.0 * PI) + 1e-9).floor() as u32
}

// --------------------------------------------------------------- mission

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
}

impl Goal {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionStatus {
    Running,
    Reached,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MissionConfig {
    pub lookahead: f64,
    pub replan_period: f64,
    pub occupied_threshold: f64,
    pub inflation_radius: f64,
    /// Proportional gain of the final in-place yaw alignment.
    pub yaw_gain: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            lookahead: 1.0,
            replan_period: 1.0,
            occupied_threshold: 0.65,
            inflation_radius: 0.33,
            yaw_gain: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Navigate,
    Align,
}

/// Per-tick output of the mission executor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MissionOutput {
    pub cmd: Twist,
    pub status: MissionStatus,
    pub active_waypoint: usize,
    pub recovering: bool,
}

/// True when the footprint stays clear over every cell the segment `a -> b`
/// crosses, or is already in contact at `a` and never gets closer.
fn line_of_sight(grid: &OccupancyGrid, map: &ClearanceMap, a: [f64; 2], b: [f64; 2]) -> bool {
    let floor = map.gap(a).min(0.0);
    grid.ray_cells(a, b)
        .into_iter()
        .map(|c| grid.cell_center(c))
        .chain([b])
        .all(|p| map.gap(p) > floor)
}

/// Waypoint mission state machine, advanced once per control tick.
#[derive(Debug, Clone)]
pub struct Mission {
    waypoints: Vec<Goal>,
    active: usize,
    path: Option<Vec<[f64; 2]>>,
    progress: usize,
    since_plan: f64,
    inadmissible: u32,
    phase: Phase,
    status: MissionStatus,
    planner_invocations: u64,
    params: DwaParams,
    config: MissionConfig,
    robot_radius: f64,
}

impl Mission {
    pub fn new(waypoints: Vec<Goal>, params: DwaParams, config: MissionConfig, robot_radius: f64) -> Self {
        let status = if waypoints.is_empty() { MissionStatus::Reached } else { MissionStatus::Running };
        Self {
            waypoints,
            active: 0,
            path: None,
            progress: 0,
            since_plan: 0.0,
            inadmissible: 0,
            phase: Phase::Navigate,
            status,
            planner_invocations: 0,
            params,
            config,
            robot_radius,
        }
    }

    pub fn status(&self) -> MissionStatus {
        self.status
    }

    pub fn active_waypoint(&self) -> usize {
        self.active
    }

    pub fn planner_invocations(&self) -> u64 {
        self.planner_invocations
    }

    pub fn current_path(&self) -> Option<&[[f64; 2]]> {
        self.path.as_deref()
    }

    fn output(&self, cmd: Twist) -> MissionOutput {
        MissionOutput {
            cmd,
            status: self.status,
            active_waypoint: self.active,
            recovering: self.inadmissible > 0,
        }
    }

    fn replan(&mut self, pose: Pose2D, grid: &OccupancyGrid) {
        let goal = self.waypoints[self.active];
        let mut inflated = grid.inflate(self.config.occupied_threshold, self.config.inflation_radius);
        // the robot's own cell is never an obstacle to itself
        if let Ok(c) = inflated.world_to_cell(pose.position()) {
            inflated.set_blocked(c, false);
        }
        self.planner_invocations += 1;
        let mut wps = match plan_global(&inflated, pose.position(), goal.position()) {
            Ok(p) => p.waypoints,
            Err(_) => vec![pose.position()],
        };
        if wps.len() > 1 {
            let n = wps.len();
            wps[n - 1] = goal.position();
        } else {
            wps.push(goal.position());
        }
        self.path = Some(wps);
        self.progress = 0;
        self.since_plan = 0.0;
    }

    /// Farthest path point within the lookahead that the footprint can
    /// reach in a straight line.
    fn local_goal(&mut self, pose: Pose2D, grid: &OccupancyGrid, map: &ClearanceMap) -> [f64; 2] {
        let path = self.path.as_ref().expect("path planned");
        let mut pick = None;
        for (i, wp) in path.iter().enumerate().skip(self.progress) {
            if (wp[0] - pose.x).hypot(wp[1] - pose.y) <= self.config.lookahead && line_of_sight(grid, map, pose.position(), *wp) {
                pick = Some(i);
            }
        }
        if let Some(i) = pick {
            self.progress = i;
        }
        path[self.progress]
    }

    /// Advances the mission by one control tick of length `dt`.
    pub fn step(&mut self, pose: Pose2D, current: Twist, grid: &OccupancyGrid, dt: f64) -> MissionOutput {
        if self.status != MissionStatus::Running {
            return self.output(Twist::ZERO);
        }
        loop {
            let goal = self.waypoints[self.active];
            let dist = (goal.x - pose.x).hypot(goal.y - pose.y);
            let last = self.active + 1 == self.waypoints.len();
            if !last && dist <= self.params.goal_xy_tol {
                self.active += 1;
                self.path = None;
                self.inadmissible = 0;
                continue;
            }
            if last && (self.phase == Phase::Align || dist <= self.params.goal_xy_tol) {
                self.phase = Phase::Align;
                let err = normalize_angle(goal.yaw - pose.theta);
                if err.abs() <= self.params.goal_yaw_tol {
                    self.status = MissionStatus::Reached;
                    return self.output(Twist::ZERO);
                }
                let w = (self.config.yaw_gain * err.abs()).clamp(0.1, self.params.omega_max);
                return self.output(Twist::new(0.0, w.copysign(err)));
            }
            break;
        }
        self.since_plan += dt;
        if self.path.is_none() || self.since_plan >= self.config.replan_period - 1e-9 {
            self.replan(pose, grid);
        }
        let map = ClearanceMap::from_grid(grid, self.config.occupied_threshold, self.robot_radius);
        let local = self.local_goal(pose, grid, &map);
        let sel = select_velocity_detailed(pose, current, local, &map, &self.params);
        if sel.admissible() {
            self.inadmissible = 0;
            return self.output(sel.cmd);
        }
        let before = recovery_cycles(self.inadmissible, &self.params, dt);
        self.inadmissible += 1;
        match trigger_recovery(self.inadmissible, &self.params, dt) {
            Ok(cmd) => {
                if recovery_cycles(self.inadmissible, &self.params, dt) > before {
                    self.replan(pose, grid);
                }
                self.output(cmd)
            }
            Err(_) => {
                self.status = MissionStatus::Failed;
                self.output(Twist::ZERO)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::OccupancyGrid;

    fn free_grid(w: usize, h: usize) -> BinaryGrid {
        BinaryGrid::new_free(w, h, 1.0, [0.0, 0.0])
    }

    fn center(c: usize, r: usize) -> [f64; 2] {
        [c as f64 + 0.5, r as f64 + 0.5]
    }

    #[test]
    fn straight_path_on_empty_grid() {
        let g = free_grid(10, 10);
        let p = plan_global(&g, center(0, 0), center(0, 9)).unwrap();
        assert_eq!(p.cells.len(), 10);
        assert_eq!(p.cost, PathCost { straight: 9, diagonal: 0 });
        assert_eq!(p.cost.value(), 9.0);
        assert!(p.waypoints.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn walled_off_goal_is_unreachable() {
        let mut g = free_grid(10, 10);
        for c in 0..10 {
            g.set_blocked(GridIndex::new(c, 5), true);
        }
        assert_eq!(plan_global(&g, center(0, 0), center(0, 9)), Err(NavError::UnreachableGoal));
    }

    #[test]
    fn occupied_endpoints_rejected() {
        let mut g = free_grid(5, 5);
        g.set_blocked(GridIndex::new(4, 4), true);
        assert!(matches!(plan_global(&g, center(0, 0), center(4, 4)), Err(NavError::InvalidEndpoint(_))));
        assert!(matches!(plan_global(&g, center(4, 4), center(0, 0)), Err(NavError::InvalidEndpoint(_))));
        assert!(matches!(plan_global(&g, [-1.0, 0.0], center(0, 0)), Err(NavError::InvalidEndpoint(_))));
    }

    #[test]
    fn gap_in_wall_matches_bfs_route() {
        let mut g = free_grid(9, 9);
        for r in 0..9 {
            if r != 7 {
                g.set_blocked(GridIndex::new(4, r), true);
            }
        }
        let p = plan_global(&g, center(0, 0), center(8, 0)).unwrap();
        assert!(p.cells.contains(&GridIndex::new(4, 7)));
        // move counts must agree with the returned cell sequence
        let mut cost = PathCost::default();
        for w in p.cells.windows(2) {
            if w[0].col != w[1].col && w[0].row != w[1].row {
                cost.diagonal += 1;
            } else {
                cost.straight += 1;
            }
        }
        assert_eq!(cost, p.cost);
    }

    #[test]
    fn no_corner_cutting() {
        let mut g = free_grid(2, 2);
        g.set_blocked(GridIndex::new(1, 0), true);
        let p = plan_global(&g, center(0, 0), center(1, 1)).unwrap();
        assert_eq!(p.cost, PathCost { straight: 2, diagonal: 0 });
    }

    #[test]
    fn dynamic_window_examples() {
        let p = DwaParams { a_v: 0.5, control_dt: 0.25, v_max: 0.5, v_min: 0.0, ..DwaParams::default() };
        let w = dynamic_window(Twist::new(0.2, 0.0), &p);
        assert!((w.v.0 - 0.075).abs() < 1e-12 && (w.v.1 - 0.325).abs() < 1e-12);
        let w = dynamic_window(Twist::ZERO, &p);
        assert_eq!(w.v, (0.0, 0.125));
        let w = dynamic_window(Twist::new(0.5, 0.0), &p);
        assert_eq!(w.v.1, 0.5);
        let w = dynamic_window(Twist::new(0.0, 0.9), &p);
        assert_eq!(w.omega.1, 1.0);
    }

    fn empty_map() -> ClearanceMap {
        let g = OccupancyGrid::new([-10.0, -10.0], 0.05, 400, 400).unwrap();
        ClearanceMap::from_grid(&g, 0.65, 0.18)
    }

    #[test]
    fn best_case_candidate() {
        let p = DwaParams::default();
        let s = evaluate_candidate(Pose2D::default(), Twist::new(0.5, 0.0), [5.0, 0.0], &empty_map(), &p);
        assert_eq!(s.heading, 1.0);
        assert_eq!(s.velocity, 1.0);
        assert_eq!(s.clearance, 1.0);
        assert!(s.admissible);
        assert!((s.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rollout_into_occupied_cell_is_inadmissible() {
        let mut g = OccupancyGrid::new([-5.0, -5.0], 0.05, 200, 200).unwrap();
        let c = g.world_to_cell([0.3, 0.0]).unwrap();
        g.set_logodds(c, 5.0);
        let map = ClearanceMap::from_grid(&g, 0.65, 0.18);
        let s = evaluate_candidate(Pose2D::default(), Twist::new(0.5, 0.0), [5.0, 0.0], &map, &DwaParams::default());
        assert!(!s.admissible);
        assert!(s.clearance_raw <= 0.0);
    }

    #[test]
    fn stopping_distance_rule() {
        // with raw clearance c the candidate is admissible iff v <= sqrt(2 c a_v)
        let c: f64 = 0.1;
        let a_v = 0.5;
        let limit = (2.0 * c * a_v).sqrt();
        assert!((limit - 0.316227766).abs() < 1e-8);
        let admissible = |v: f64| v <= (2.0 * c * a_v).sqrt();
        assert!(admissible(0.3));
        assert!(!admissible(0.32));
    }

    #[test]
    fn empty_world_goal_ahead_selects_straight_max() {
        let p = DwaParams::default();
        let t = select_velocity(Pose2D::default(), Twist::new(0.2, 0.0), [5.0, 0.0], &empty_map(), &p);
        assert_eq!(t.omega, 0.0);
        assert!((t.v - 0.325).abs() < 1e-12);
    }

    #[test]
    fn all_inadmissible_yields_recovery() {
        let mut g = OccupancyGrid::new([-1.0, -1.0], 0.05, 40, 40).unwrap();
        g.logodds.iter_mut().for_each(|l| *l = 5.0);
        let map = ClearanceMap::from_grid(&g, 0.65, 0.18);
        let p = DwaParams::default();
        let s = select_velocity_detailed(Pose2D::default(), Twist::ZERO, [0.5, 0.0], &map, &p);
        assert!(!s.admissible());
        assert_eq!(s.cmd, Twist::new(0.0, 0.5));
    }

    #[test]
    fn recovery_bounds() {
        let p = DwaParams::default();
        assert_eq!(trigger_recovery(1, &p, 0.05).unwrap(), Twist::new(0.0, 0.5));
        // three full turns at 0.5 rad/s with 0.05 s ticks take 753.98 ticks
        assert!(trigger_recovery(753, &p, 0.05).is_ok());
        assert_eq!(
            trigger_recovery(754, &p, 0.05),
            Err(NavError::RecoveryExhausted { cycles: 3 })
        );
    }

    #[test]
    fn tie_break_order() {
        let a = (Twist::new(0.1, 0.5), 1.0);
        let b = (Twist::new(0.1, -0.5), 1.0);
        assert!(prefer(a, b) && !prefer(b, a));
        let c = (Twist::new(0.1, 0.2), 1.0);
        assert!(prefer(c, a));
        let d = (Twist::new(0.0, 0.2), 1.0);
        assert!(prefer(d, c));
        assert!(prefer((Twist::new(0.5, 1.0), 1.1), d));
    }

    #[test]
    fn identity_mission_reaches_immediately() {
        let g = OccupancyGrid::new([-2.0, -2.0], 0.05, 80, 80).unwrap();
        let mut m = Mission::new(vec![Goal::new(0.0, 0.0, 0.0)], DwaParams::default(), MissionConfig::default(), 0.18);
        let out = m.step(Pose2D::default(), Twist::ZERO, &g, 0.05);
        assert_eq!(out.status, MissionStatus::Reached);
        assert_eq!(out.cmd, Twist::ZERO);
        assert_eq!(m.planner_invocations(), 0);
    }

    #[test]
    fn final_waypoint_needs_yaw() {
        let g = OccupancyGrid::new([-2.0, -2.0], 0.05, 80, 80).unwrap();
        let mut m = Mission::new(vec![Goal::new(0.02, 0.0, 1.0)], DwaParams::default(), MissionConfig::default(), 0.18);
        let out = m.step(Pose2D::default(), Twist::ZERO, &g, 0.05);
        assert_eq!(out.status, MissionStatus::Running);
        assert_eq!(out.cmd.v, 0.0);
        assert!(out.cmd.omega > 0.0);
        let out = m.step(Pose2D::new(0.0, 0.0, 0.95), Twist::ZERO, &g, 0.05);
        assert_eq!(out.status, MissionStatus::Reached);
    }

    #[test]
    fn intermediate_waypoint_advances() {
        let g = OccupancyGrid::new([-2.0, -2.0], 0.05, 80, 80).unwrap();
        let wps = vec![Goal::new(0.01, 0.0, 0.0), Goal::new(1.0, 0.0, 0.0)];
        let mut m = Mission::new(wps, DwaParams::default(), MissionConfig::default(), 0.18);
        let out = m.step(Pose2D::default(), Twist::ZERO, &g, 0.05);
        assert_eq!(out.status, MissionStatus::Running);
        assert_eq!(out.active_waypoint, 1);
        assert!(out.cmd.v > 0.0);
    }

    #[test]
    fn mission_drives_to_goal_in_open_room() {
        let world = crate::world::WorldModel::square_room(4.0);
        let g = OccupancyGrid::rasterize(&world, 0.05, 2, 5.0).unwrap();
        let goal = Goal::new(1.0, 0.7, -1.0);
        let mut m = Mission::new(vec![goal], DwaParams::default(), MissionConfig::default(), 0.18);
        let mut pose = Pose2D::new(-1.0, -0.5, 2.0);
        let mut cur = Twist::ZERO;
        for _ in 0..2000 {
            let out = m.step(pose, cur, &g, 0.05);
            if out.status != MissionStatus::Running {
                break;
            }
            cur = out.cmd;
            pose = step_kinematics(pose, cur, 0.05).unwrap();
            assert!(!crate::world::check_collision(&world, pose));
        }
        assert_eq!(m.status(), MissionStatus::Reached);
        assert!((pose.x - goal.x).hypot(pose.y - goal.y) <= 0.05);
    }

    #[test]
    fn sight_line_is_blocked_by_an_obstacle_between_the_ends() {
        let world = crate::world::WorldModel::square_room(3.0)
            .with_obstacles(vec![crate::world::Shape::Disk { center: [0.0, 0.0], radius: 0.2 }]);
        let g = OccupancyGrid::rasterize(&world, 0.05, 2, 5.0).unwrap();
        let map = ClearanceMap::from_grid(&g, 0.65, 0.18);
        assert!(!line_of_sight(&g, &map, [-1.0, 0.0], [1.0, 0.0]));
        assert!(line_of_sight(&g, &map, [-1.0, 0.8], [1.0, 0.8]));
    }

    #[test]
    fn mission_recovers_around_an_obstacle_pocket() {
        let world = crate::world::WorldModel::square_room(3.0)
            .with_obstacles(vec![crate::world::Shape::Disk { center: [0.5, 0.0], radius: 0.2 }]);
        let g = OccupancyGrid::rasterize(&world, 0.05, 2, 5.0).unwrap();
        let goals = vec![Goal::new(1.1, 0.0, 0.0), Goal::new(-1.0, 1.0, 1.57)];
        let mut m = Mission::new(goals, DwaParams::default(), MissionConfig::default(), world.robot_radius);
        let (mut pose, mut cur) = (Pose2D::new(-1.0, 0.0, 0.0), Twist::ZERO);
        for _ in 0..2400 {
            let out = m.step(pose, cur, &g, 0.05);
            if out.status != MissionStatus::Running {
                break;
            }
            cur = out.cmd;
            pose = step_kinematics(pose, cur, 0.05).unwrap();
            assert!(!crate::world::check_collision(&world, pose));
        }
        assert_eq!(m.status(), MissionStatus::Reached);
    }
}
