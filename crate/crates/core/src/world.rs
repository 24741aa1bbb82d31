//! 2D worlds, unicycle kinematics, lidar raycasting and odometry noise.
//!
//! Both sites share this substrate: the twin runs in one [`WorldModel`], the
//! physical robot in another, and every sensor reading comes from
//! [`raycast_scan`].

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn distance_to(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Velocity command (`cmd_vel`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub v: f64,
    pub omega: f64,
}

impl Twist {
    pub const ZERO: Twist = Twist { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.omega.is_finite()
    }

    /// Clamps both components to the given symmetric limits.
    pub fn clamped(&self, v_max: f64, omega_max: f64) -> Twist {
        Twist {
            v: self.v.clamp(-v_max, v_max),
            omega: self.omega.clamp(-omega_max, omega_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    /// Euclidean distance from `p` to the closed rectangle (0 inside).
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let dx = (self.min[0] - p[0]).max(0.0).max(p[0] - self.max[0]);
        let dy = (self.min[1] - p[1]).max(0.0).max(p[1] - self.max[1]);
        dx.hypot(dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    Rect { min: [f64; 2], max: [f64; 2] },
}

impl Shape {
    /// Distance from `p` to the shape surface; zero or negative inside.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        match *self {
            Shape::Disk { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) - radius,
            Shape::Rect { min, max } => Rect::new(min, max).distance_to(p),
        }
    }

    /// Smallest ray parameter `t >= 0` at which `origin + t * dir` enters the
    /// shape. `dir` must be a unit vector.
    fn ray_hit(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        match *self {
            Shape::Disk { center, radius } => {
                let ox = origin[0] - center[0];
                let oy = origin[1] - center[1];
                let b = ox * dir[0] + oy * dir[1];
                let c = ox * ox + oy * oy - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t0 = -b - sq;
                let t1 = -b + sq;
                if t0 >= 0.0 {
                    Some(t0)
                } else if t1 >= 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            Shape::Rect { min, max } => {
                let mut t_enter = f64::NEG_INFINITY;
                let mut t_exit = f64::INFINITY;
                for axis in 0..2 {
                    if dir[axis] == 0.0 {
                        if origin[axis] < min[axis] || origin[axis] > max[axis] {
                            return None;
                        }
                    } else {
                        let a = (min[axis] - origin[axis]) / dir[axis];
                        let b = (max[axis] - origin[axis]) / dir[axis];
                        t_enter = t_enter.max(a.min(b));
                        t_exit = t_exit.min(a.max(b));
                    }
                }
                if t_exit < t_enter.max(0.0) {
                    None
                } else {
                    Some(t_enter.max(0.0))
                }
            }
        }
    }

    pub fn bounding_rect(&self) -> Rect {
        match *self {
            Shape::Disk { center, radius } => Rect::new(
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Shape::Rect { min, max } => Rect::new(min, max),
        }
    }
}

pub const DEFAULT_ROBOT_RADIUS: f64 = 0.18;

fn default_robot_radius() -> f64 {
    DEFAULT_ROBOT_RADIUS
}

/// A walled rectangular world with static obstacles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub bounds: Rect,
    #[serde(default)]
    pub obstacles: Vec<Shape>,
    #[serde(default = "default_robot_radius")]
    pub robot_radius: f64,
}

impl WorldModel {
    pub fn new(bounds: Rect, obstacles: Vec<Shape>, robot_radius: f64) -> Self {
        Self { bounds, obstacles, robot_radius }
    }

    /// Square walled room of side `side` centred on the origin.
    pub fn square_room(side: f64) -> Self {
        let h = side / 2.0;
        Self::new(Rect::new([-h, -h], [h, h]), Vec::new(), DEFAULT_ROBOT_RADIUS)
    }

    pub fn with_obstacles(mut self, obstacles: Vec<Shape>) -> Self {
        self.obstacles = obstacles;
        self
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.robot_radius > 0.0) {
            return Err(WorldError::InvalidState("robot_radius must be positive".into()));
        }
        if !(self.bounds.area() > 0.0) || self.bounds.width() <= 0.0 {
            return Err(WorldError::InvalidState("bounds must have positive area".into()));
        }
        for (i, ob) in self.obstacles.iter().enumerate() {
            let r = ob.bounding_rect();
            if !self.bounds.contains(r.min) || !self.bounds.contains(r.max) {
                return Err(WorldError::InvalidState(format!("obstacle {i} lies outside bounds")));
            }
        }
        Ok(())
    }

    /// Distance from `p` to the nearest wall or obstacle surface.
    pub fn clearance(&self, p: [f64; 2]) -> f64 {
        let b = &self.bounds;
        let wall = (p[0] - b.min[0])
            .min(b.max[0] - p[0])
            .min(p[1] - b.min[1])
            .min(b.max[1] - p[1]);
        self.obstacles.iter().map(|o| o.distance_to(p)).fold(wall, f64::min)
    }
}

/// Beam layout of the simulated rangefinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSpec {
    pub beams: usize,
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            beams: 360,
            angle_min: -PI,
            angle_increment: 2.0 * PI / 360.0,
            range_max: 3.5,
        }
    }
}

/// Rangefinder output. A range equal to `range_max` means no return.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserScan {
    pub stamp: f64,
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    pub ranges: Vec<f64>,
}

impl LaserScan {
    pub fn bearing(&self, i: usize) -> f64 {
        self.angle_min + i as f64 * self.angle_increment
    }

    pub fn is_no_return(&self, i: usize) -> bool {
        self.ranges[i] >= self.range_max
    }

    /// Iterates `(bearing, range, no_return)` in beam order.
    pub fn beams(&self) -> impl Iterator<Item = (f64, f64, bool)> + '_ {
        self.ranges
            .iter()
            .enumerate()
            .map(move |(i, &r)| (self.bearing(i), r, r >= self.range_max))
    }
}

pub fn step_kinematics(pose: Pose2D, cmd: Twist, dt: f64) -> Result<Pose2D, WorldError> {
    if !pose.is_finite() || !cmd.is_finite() || !dt.is_finite() {
        return Err(WorldError::InvalidState("non-finite pose, command or dt".into()));
    }
    if dt <= 0.0 {
        return Err(WorldError::InvalidState(format!("dt must be positive, got {dt}")));
    }
    Ok(Pose2D {
        x: pose.x + cmd.v * pose.theta.cos() * dt,
        y: pose.y + cmd.v * pose.theta.sin() * dt,
        theta: normalize_angle(pose.theta + cmd.omega * dt),
    })
}

pub fn raycast_scan(world: &WorldModel, pose: Pose2D, spec: &ScanSpec, stamp: f64) -> Result<LaserScan, WorldError> {
    if !pose.is_finite() {
        return Err(WorldError::InvalidState("non-finite pose".into()));
    }
    let b = &world.bounds;
    if !b.contains(pose.position()) {
        return Err(WorldError::InvalidState(format!(
            "pose ({}, {}) outside world bounds",
            pose.x, pose.y
        )));
    }
    let origin = pose.position();
    let ranges = (0..spec.beams)
        .map(|i| {
            let angle = pose.theta + spec.angle_min + i as f64 * spec.angle_increment;
            let dir = [angle.cos(), angle.sin()];
            let mut best = f64::INFINITY;
            // walls: the robot is inside, so take the exit distance per axis
            for axis in 0..2 {
                if dir[axis] > 0.0 {
                    best = best.min((b.max[axis] - origin[axis]) / dir[axis]);
                } else if dir[axis] < 0.0 {
                    best = best.min((b.min[axis] - origin[axis]) / dir[axis]);
                }
            }
            for ob in &world.obstacles {
                if let Some(t) = ob.ray_hit(origin, dir) {
                    best = best.min(t);
                }
            }
            if best >= spec.range_max {
                spec.range_max
            } else {
                best.max(f64::MIN_POSITIVE)
            }
        })
        .collect();
    Ok(LaserScan {
        stamp,
        angle_min: spec.angle_min,
        angle_increment: spec.angle_increment,
        range_max: spec.range_max,
        ranges,
    })
}

/// True iff the robot disk strictly intersects an obstacle or leaves the
/// bounds. Tangency does not count.
pub fn check_collision(world: &WorldModel, pose: Pose2D) -> bool {
    let r = world.robot_radius;
    let b = &world.bounds;
    if pose.x - r < b.min[0] || pose.x + r > b.max[0] || pose.y - r < b.min[1] || pose.y + r > b.max[1] {
        return true;
    }
    let p = pose.position();
    world.obstacles.iter().any(|o| o.distance_to(p) < r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometryNoiseModel {
    pub sigma_v: f64,
    pub sigma_omega: f64,
    pub seed: u64,
}

impl Default for OdometryNoiseModel {
    fn default() -> Self {
        Self { sigma_v: 0.0, sigma_omega: 0.0, seed: 0 }
    }
}

/// Seeded multiplicative Gaussian perturbation of executed velocities.
#[derive(Debug, Clone)]
pub struct OdometryNoise {
    model: OdometryNoiseModel,
    rng: ChaCha8Rng,
}

impl OdometryNoise {
    pub fn new(model: OdometryNoiseModel) -> Self {
        Self { model, rng: ChaCha8Rng::seed_from_u64(model.seed) }
    }

    pub fn model(&self) -> &OdometryNoiseModel {
        &self.model
    }

    pub fn apply(&mut self, cmd: Twist) -> Twist {
        // always draw both so the stream position is independent of the sigmas
        let nv: f64 = StandardNormal.sample(&mut self.rng);
        let nw: f64 = StandardNormal.sample(&mut self.rng);
        Twist {
            v: cmd.v * (1.0 + self.model.sigma_v * nv),
            omega: cmd.omega * (1.0 + self.model.sigma_omega * nw),
        }
    }
}

/// One-shot form: a fresh generator from `model.seed` perturbs `cmd`.
pub fn apply_odometry_noise(model: &OdometryNoiseModel, cmd: Twist) -> Twist {
    OdometryNoise::new(*model).apply(cmd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn pose(x: f64, y: f64, t: f64) -> Pose2D {
        Pose2D::new(x, y, t)
    }

    #[test]
    fn kinematics_examples() {
        let p = step_kinematics(pose(0.0, 0.0, 0.0), Twist::new(1.0, 0.0), 0.1).unwrap();
        assert!(close(p.x, 0.1, 1e-12) && close(p.y, 0.0, 1e-12) && close(p.theta, 0.0, 1e-12));

        let p = step_kinematics(pose(0.0, 0.0, 0.0), Twist::new(0.0, PI), 0.5).unwrap();
        assert!(close(p.x, 0.0, 1e-12) && close(p.theta, PI / 2.0, 1e-12));

        let p = step_kinematics(pose(1.0, 1.0, PI / 2.0), Twist::new(1.0, 0.0), 0.1).unwrap();
        assert!(close(p.x, 1.0, 1e-12) && close(p.y, 1.1, 1e-12) && close(p.theta, PI / 2.0, 1e-12));
    }

    #[test]
    fn kinematics_rejects_bad_input() {
        assert!(step_kinematics(pose(f64::NAN, 0.0, 0.0), Twist::ZERO, 0.1).is_err());
        assert!(step_kinematics(pose(0.0, 0.0, 0.0), Twist::new(f64::INFINITY, 0.0), 0.1).is_err());
        assert!(step_kinematics(pose(0.0, 0.0, 0.0), Twist::ZERO, 0.0).is_err());
    }

    #[test]
    fn angle_normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!(close(normalize_angle(3.0 * PI / 2.0), -PI / 2.0, 1e-12));
        assert!(close(normalize_angle(-7.0), -7.0 + 2.0 * PI, 1e-12));
    }

    fn single_beam(bearing: f64, range_max: f64) -> ScanSpec {
        ScanSpec { beams: 1, angle_min: bearing, angle_increment: 0.0, range_max }
    }

    #[test]
    fn raycast_square_room() {
        let w = WorldModel::square_room(6.0);
        let s = raycast_scan(&w, pose(0.0, 0.0, 0.0), &single_beam(0.0, 10.0), 0.0).unwrap();
        assert!(close(s.ranges[0], 3.0, 1e-12));
        let s = raycast_scan(&w, pose(0.0, 0.0, 0.0), &single_beam(PI / 4.0, 10.0), 0.0).unwrap();
        assert!(close(s.ranges[0], 3.0 * 2f64.sqrt(), 1e-9));
    }

    #[test]
    fn raycast_disk_and_rect() {
        let w = WorldModel::square_room(6.0).with_obstacles(vec![Shape::Disk { center: [1.0, 0.0], radius: 0.25 }]);
        let s = raycast_scan(&w, pose(0.0, 0.0, 0.0), &single_beam(0.0, 3.5), 0.0).unwrap();
        assert!(close(s.ranges[0], 0.75, 1e-12));

        let w = WorldModel::square_room(6.0).with_obstacles(vec![Shape::Rect { min: [0.5, -0.2], max: [0.8, 0.2] }]);
        let s = raycast_scan(&w, pose(0.0, 0.0, 0.0), &single_beam(0.0, 3.5), 0.0).unwrap();
        assert!(close(s.ranges[0], 0.5, 1e-12));
        let s = raycast_scan(&w, pose(0.0, 0.0, PI), &single_beam(0.0, 3.5), 0.0).unwrap();
        assert!(close(s.ranges[0], 3.0, 1e-12));
    }

    #[test]
    fn raycast_no_return_is_range_max() {
        let w = WorldModel::square_room(20.0);
        let s = raycast_scan(&w, pose(0.0, 0.0, 0.0), &ScanSpec::default(), 1.5).unwrap();
        assert_eq!(s.ranges.len(), 360);
        assert!(s.ranges.iter().all(|&r| r == 3.5));
        assert!((0..360).all(|i| s.is_no_return(i)));
        assert_eq!(s.stamp, 1.5);
    }

    #[test]
    fn raycast_outside_bounds_errors() {
        let w = WorldModel::square_room(6.0);
        assert!(raycast_scan(&w, pose(4.0, 0.0, 0.0), &ScanSpec::default(), 0.0).is_err());
    }

    #[test]
    fn raycast_is_rotation_invariant_for_square_room() {
        // rotating pose by a multiple of the beam increment re-indexes beams
        let w = WorldModel::square_room(6.0);
        let spec = ScanSpec::default();
        let a = raycast_scan(&w, pose(0.3, -0.2, 0.0), &spec, 0.0).unwrap();
        let b = raycast_scan(&w, pose(0.3, -0.2, 10.0 * spec.angle_increment), &spec, 0.0).unwrap();
        for i in 0..350 {
            assert!(close(a.ranges[i + 10], b.ranges[i], 1e-9));
        }
    }

    #[test]
    fn collision_examples() {
        let w = WorldModel::square_room(6.0);
        assert!(!check_collision(&w, pose(0.0, 0.0, 0.0)));
        assert!(check_collision(&w, pose(2.9, 0.0, 0.0)));
        // exactly tangent to the wall
        assert!(!check_collision(&w, pose(2.75, 0.0, 0.0)));
        let w = WorldModel::new(Rect::new([-3.0, -3.0], [3.0, 3.0]), vec![Shape::Disk { center: [1.0, 0.0], radius: 0.5 }], 0.5);
        assert!(!check_collision(&w, pose(0.0, 0.0, 0.0)));
        assert!(check_collision(&w, pose(0.01, 0.0, 0.0)));
    }

    #[test]
    fn world_validation() {
        let mut w = WorldModel::square_room(6.0);
        assert!(w.validate().is_ok());
        w.robot_radius = 0.0;
        assert!(w.validate().is_err());
        let w = WorldModel::square_room(6.0).with_obstacles(vec![Shape::Disk { center: [2.9, 0.0], radius: 0.25 }]);
        assert!(w.validate().is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let m = OdometryNoiseModel { sigma_v: 0.0, sigma_omega: 0.0, seed: 3 };
        let cmd = Twist::new(0.4, -0.3);
        assert_eq!(apply_odometry_noise(&m, cmd), cmd);
    }

    #[test]
    fn noise_is_deterministic() {
        let m = OdometryNoiseModel { sigma_v: 0.05, sigma_omega: 0.05, seed: 42 };
        let cmd = Twist::new(1.0, 0.5);
        assert_eq!(apply_odometry_noise(&m, cmd), apply_odometry_noise(&m, cmd));
        let mut a = OdometryNoise::new(m);
        let mut b = OdometryNoise::new(m);
        for _ in 0..100 {
            assert_eq!(a.apply(cmd), b.apply(cmd));
        }
    }

    #[test]
    fn noise_sample_std_matches_sigma() {
        let m = OdometryNoiseModel { sigma_v: 0.05, sigma_omega: 0.0, seed: 7 };
        let mut n = OdometryNoise::new(m);
        let vs: Vec<f64> = (0..10_000).map(|_| n.apply(Twist::new(1.0, 0.0)).v).collect();
        let mean = vs.iter().sum::<f64>() / vs.len() as f64;
        let var = vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vs.len() - 1) as f64;
        let std = var.sqrt();
        assert!((0.045..=0.055).contains(&std), "std {std}");
    }
}
