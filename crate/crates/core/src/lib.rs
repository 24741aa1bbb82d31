//! Deterministic two-site simulation-twin robot control.
//!
//! A simulated twin robot maps its world and navigates with a dynamic-window
//! planner; its velocity commands cross an impaired simulated network to
//! drive a physical-site robot, which returns a repulsive force on a
//! high-priority multiplexer channel. The [`harness`] module runs the four
//! experiment topologies (remote offloading, manual teleoperation, digital
//! twin, simulation twin) and reports task and network metrics.

pub mod bridge;
pub mod feedback;
pub mod grid;
pub mod harness;
pub mod mux;
pub mod nav;
pub mod netsim;
pub mod wire;
pub mod world;

pub use grid::{GridIndex, InverseSensorModel, OccupancyGrid};
pub use nav::{DwaParams, Goal, Mission, MissionStatus};
pub use world::{LaserScan, Pose2D, Twist, WorldModel};
