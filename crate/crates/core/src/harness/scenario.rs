use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_yaml::Value;
use thiserror::Error;

use crate::feedback::FeedbackParams;
use crate::grid::InverseSensorModel;
use crate::nav::{DwaParams, Goal, MissionConfig};
use crate::netsim::ChannelConfig;
use crate::world::{check_collision, Pose2D, ScanSpec, WorldModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid field '{field}': {message}")]
    Invalid { field: String, message: String },
    #[error("unknown bundled scenario '{0}'")]
    UnknownBundled(String),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CaseId {
    RO,
    MT,
    DT,
    ST,
}

impl CaseId {
    pub fn has_twin(self) -> bool {
        !matches!(self, CaseId::RO)
    }

    pub fn feedback_enabled(self) -> bool {
        matches!(self, CaseId::ST)
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseId::RO => "RO",
            CaseId::MT => "MT",
            CaseId::DT => "DT",
            CaseId::ST => "ST",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for CaseId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RO" => Ok(CaseId::RO),
            "MT" => Ok(CaseId::MT),
            "DT" => Ok(CaseId::DT),
            "ST" => Ok(CaseId::ST),
            other => Err(format!("unknown case '{other}', expected RO, MT, DT or ST")),
        }
    }
}

/// Optional per-field overrides applied on top of the preset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_delay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_prob: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
}

impl ChannelOverride {
    pub fn apply(&self, mut c: ChannelConfig) -> ChannelConfig {
        if let Some(v) = self.base_delay {
            c.base_delay = v;
        }
        if let Some(v) = self.jitter {
            c.jitter = v;
        }
        if let Some(v) = self.loss_prob {
            c.loss_prob = v;
        }
        if let Some(v) = self.bandwidth {
            c.bandwidth = v;
        }
        c
    }
}

pub const TOPICS: [&str; 4] = ["cmd_vel", "odom", "scan", "force"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetBlock {
    /// One of `ideal`, `wifi-good`, `wifi-poor`.
    pub preset: String,
    pub cmd_vel: ChannelOverride,
    pub odom: ChannelOverride,
    pub scan: ChannelOverride,
    pub force: ChannelOverride,
}

impl Default for NetBlock {
    fn default() -> Self {
        Self {
            preset: "ideal".into(),
            cmd_vel: ChannelOverride::default(),
            odom: ChannelOverride::default(),
            scan: ChannelOverride::default(),
            force: ChannelOverride::default(),
        }
    }
}

impl NetBlock {
    pub fn channel(&self, topic: &str, seed: u64) -> Option<ChannelConfig> {
        let base = ChannelConfig::preset(&self.preset)?.with_seed(seed);
        let o = match topic {
            "cmd_vel" => &self.cmd_vel,
            "odom" => &self.odom,
            "scan" => &self.scan,
            "force" => &self.force,
            _ => return None,
        };
        Some(o.apply(base))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackBlock {
    #[serde(flatten)]
    pub params: FeedbackParams,
    /// Extra distance beyond the robot radius at which the physical robot
    /// refuses forward motion toward a frontal return.
    pub estop_margin: f64,
}

impl Default for FeedbackBlock {
    fn default() -> Self {
        Self { params: FeedbackParams::default(), estop_margin: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuxBlock {
    pub nav_timeout: f64,
    pub force_timeout: f64,
    pub cmd_vel_timeout: f64,
    pub safety_timeout: f64,
}

impl Default for MuxBlock {
    fn default() -> Self {
        Self { nav_timeout: 0.5, force_timeout: 0.2, cmd_vel_timeout: 0.5, safety_timeout: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseBlock {
    pub sigma_v: f64,
    pub sigma_omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapSource {
    /// Built online from the robot's own scans.
    Scan,
    /// Ground-truth rasterization of the planning world.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingBlock {
    pub source: MapSource,
    pub resolution: f64,
    pub p_hit: f64,
    pub p_miss: f64,
    pub l_max: f64,
    /// Seconds between scans (mapping and scan publication rate).
    pub scan_period: f64,
}

impl Default for MappingBlock {
    fn default() -> Self {
        Self { source: MapSource::Scan, resolution: 0.05, p_hit: 0.7, p_miss: 0.3, l_max: 5.0, scan_period: 0.2 }
    }
}

impl MappingBlock {
    pub fn sensor_model(&self) -> InverseSensorModel {
        InverseSensorModel::from_probabilities(self.p_hit, self.p_miss, self.l_max)
    }
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}
fn default_tick() -> f64 {
    0.05
}
fn default_budget() -> f64 {
    300.0
}
fn default_settle() -> f64 {
    1.0
}
fn default_goal_timeout() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub case_id: CaseId,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tick")]
    pub tick_dt: f64,
    #[serde(default = "default_budget")]
    pub time_budget: f64,
    /// Dwell after each goal so the physical robot can finish replaying.
    #[serde(default = "default_settle")]
    pub settle_time: f64,
    #[serde(default = "default_goal_timeout")]
    pub goal_timeout: f64,
    #[serde(default)]
    pub start: [f64; 3],
    #[serde(default)]
    pub twin_world: Option<WorldModel>,
    pub physical_world: WorldModel,
    #[serde(default)]
    pub goals: Vec<[f64; 3]>,
    #[serde(default)]
    pub net: NetBlock,
    #[serde(default)]
    pub dwa: DwaParams,
    #[serde(default)]
    pub mission: MissionConfig,
    #[serde(default)]
    pub feedback: FeedbackBlock,
    #[serde(default)]
    pub mux: MuxBlock,
    #[serde(default)]
    pub noise: NoiseBlock,
    #[serde(default)]
    pub scan: ScanSpec,
    #[serde(default)]
    pub mapping: MappingBlock,
}

const BUNDLED: [(&str, &str); 5] = [
    ("dt_ideal", include_str!("../../scenarios/dt_ideal.yaml")),
    ("dt_wifi", include_str!("../../scenarios/dt_wifi.yaml")),
    ("st_obstructed", include_str!("../../scenarios/st_obstructed.yaml")),
    ("ro_obstructed", include_str!("../../scenarios/ro_obstructed.yaml")),
    ("mt_trace", include_str!("../../scenarios/mt_trace.yaml")),
];

pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    Scenario::from_value(load_scenario_value(path)?)
}

/// Raw document, for callers that edit fields before validation.
pub fn load_scenario_value(path: &Path) -> Result<Value, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    serde_yaml::from_str(&text).map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))
}

/// Sets a dotted path such as `net.cmd_vel.base_delay`, creating
/// intermediate mappings as needed.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), ScenarioError> {
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(invalid(path, "empty path segment"));
    }
    for (i, part) in parts.iter().enumerate() {
        if cur.is_null() {
            *cur = Value::Mapping(Default::default());
        }
        let map = cur
            .as_mapping_mut()
            .ok_or_else(|| invalid(parts[..i].join("."), "is not a mapping"))?;
        let key = Value::String(part.to_string());
        if i + 1 == parts.len() {
            map.insert(key, value);
            return Ok(());
        }
        cur = map.entry(key).or_insert(Value::Null);
    }
    unreachable!("non-empty path")
}

impl Scenario {
    pub fn from_yaml_str(text: &str) -> Result<Self, ScenarioError> {
        let v: Value = serde_yaml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Self::from_value(v)
    }

    pub fn from_value(v: Value) -> Result<Self, ScenarioError> {
        let s: Scenario = serde_yaml::from_value(v).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn bundled(name: &str) -> Result<Self, ScenarioError> {
        Self::from_yaml_str(Self::bundled_source(name)?)
    }

    pub fn bundled_source(name: &str) -> Result<&'static str, ScenarioError> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, s)| *s)
            .ok_or_else(|| ScenarioError::UnknownBundled(name.to_string()))
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("scenario serializes")
    }

    pub fn start_pose(&self) -> Pose2D {
        Pose2D::new(self.start[0], self.start[1], self.start[2])
    }

    pub fn goal_list(&self) -> Vec<Goal> {
        self.goals.iter().map(|g| Goal::new(g[0], g[1], g[2])).collect()
    }

    /// World the planner navigates: the twin's, or the physical one in RO.
    pub fn planning_world(&self) -> &WorldModel {
        match (&self.twin_world, self.case_id) {
            (Some(w), c) if c.has_twin() => w,
            _ => &self.physical_world,
        }
    }

    pub fn channel(&self, topic: &str) -> ChannelConfig {
        self.net.channel(topic, self.seed).expect("validated topic and preset")
    }

    pub fn with_case(mut self, case: CaseId) -> Result<Self, ScenarioError> {
        self.case_id = case;
        self.validate()?;
        Ok(self)
    }

    pub fn without_physical_obstacles(mut self) -> Self {
        self.physical_world.obstacles.clear();
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCHEMA_VERSION {
            return Err(invalid("version", format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.version)));
        }
        if !(self.tick_dt > 0.0 && self.tick_dt.is_finite()) {
            return Err(invalid("tick_dt", "must be positive"));
        }
        for (name, v) in [("time_budget", self.time_budget), ("settle_time", self.settle_time)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be non-negative"));
            }
        }
        if !(self.goal_timeout > 0.0) {
            return Err(invalid("goal_timeout", "must be positive"));
        }
        self.physical_world.validate().map_err(|e| invalid("physical_world", e.to_string()))?;
        if self.case_id.has_twin() {
            let tw = self.twin_world.as_ref().ok_or_else(|| invalid("twin_world", format!("required for case {}", self.case_id)))?;
            tw.validate().map_err(|e| invalid("twin_world", e.to_string()))?;
        }
        if !self.start.iter().all(|v| v.is_finite()) {
            return Err(invalid("start", "must be finite"));
        }
        let start = self.start_pose();
        if check_collision(&self.physical_world, start) {
            return Err(invalid("start", "collides in physical_world"));
        }
        if self.case_id.has_twin() && check_collision(self.planning_world(), start) {
            return Err(invalid("start", "collides in twin_world"));
        }
        for (i, g) in self.goals.iter().enumerate() {
            if !g.iter().all(|v| v.is_finite()) {
                return Err(invalid(format!("goals[{i}]"), "must be finite"));
            }
            for (label, world) in [("planning", self.planning_world()), ("physical", &self.physical_world)] {
                if !world.bounds.contains([g[0], g[1]]) || world.clearance([g[0], g[1]]) <= world.robot_radius {
                    return Err(invalid(
                        format!("goals[{i}]"),
                        format!("({}, {}) is not in free space of the {label} world", g[0], g[1]),
                    ));
                }
            }
        }
        if ChannelConfig::preset(&self.net.preset).is_none() {
            return Err(invalid("net.preset", format!("unknown preset '{}', expected ideal, wifi-good or wifi-poor", self.net.preset)));
        }
        for t in TOPICS {
            self.channel(t).validate().map_err(|e| invalid(format!("net.{t}"), e.to_string()))?;
        }
        self.dwa.validate().map_err(|e| invalid("dwa", e.to_string()))?;
        let m = &self.mission;
        if !(m.lookahead > 0.0 && m.replan_period > 0.0 && m.inflation_radius >= 0.0 && m.yaw_gain > 0.0) {
            return Err(invalid("mission", "lookahead, replan_period and yaw_gain must be positive, inflation_radius non-negative"));
        }
        if !(0.0..1.0).contains(&m.occupied_threshold) {
            return Err(invalid("mission.occupied_threshold", "must be in [0, 1)"));
        }
        self.feedback.params.validate(self.scan.range_max).map_err(|e| invalid("feedback", e))?;
        if !(self.feedback.estop_margin >= 0.0) {
            return Err(invalid("feedback.estop_margin", "must be non-negative"));
        }
        for (name, v) in [
            ("mux.nav_timeout", self.mux.nav_timeout),
            ("mux.force_timeout", self.mux.force_timeout),
            ("mux.cmd_vel_timeout", self.mux.cmd_vel_timeout),
            ("mux.safety_timeout", self.mux.safety_timeout),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        if !(self.noise.sigma_v >= 0.0 && self.noise.sigma_omega >= 0.0) {
            return Err(invalid("noise", "sigmas must be non-negative"));
        }
        if self.scan.beams == 0 || !(self.scan.range_max > 0.0) || !(self.scan.angle_increment > 0.0) {
            return Err(invalid("scan", "needs beams > 0, positive angle_increment and range_max"));
        }
        let mp = &self.mapping;
        if !(mp.resolution > 0.0 && mp.scan_period > 0.0) {
            return Err(invalid("mapping", "resolution and scan_period must be positive"));
        }
        mp.sensor_model().validate().map_err(|e| invalid("mapping", e.to_string()))?;
        Ok(())
    }
}
