//! Physical-site reactive force feedback.
//!
//! The physical robot turns its local scan into a repulsive body-frame force;
//! the twin (and the physical robot itself) turn that force into a velocity
//! override published on a high-priority multiplexer channel.

use serde::{Deserialize, Serialize};

use crate::world::{LaserScan, Twist};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceVector {
    pub fx: f64,
    pub fy: f64,
    pub stamp: f64,
}

impl ForceVector {
    pub fn magnitude(&self) -> f64 {
        self.fx.hypot(self.fy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeedbackParams {
    /// Influence distance, meters.
    pub d0: f64,
    pub k_rep: f64,
    pub f_max: f64,
    pub k_v: f64,
    pub k_omega: f64,
}

impl Default for FeedbackParams {
    fn default() -> Self {
        Self { d0: 0.6, k_rep: 0.05, f_max: 10.0, k_v: 0.1, k_omega: 0.5 }
    }
}

impl FeedbackParams {
    pub fn validate(&self, range_max: f64) -> Result<(), String> {
        for (name, v) in [("d0", self.d0), ("k_rep", self.k_rep), ("f_max", self.f_max), ("k_v", self.k_v), ("k_omega", self.k_omega)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("feedback.{name} must be positive, got {v}"));
            }
        }
        if self.d0 > range_max {
            return Err(format!("feedback.d0 {} exceeds scan range_max {range_max}", self.d0));
        }
        Ok(())
    }

    /// Magnitude above which a force is worth publishing.
    pub fn publish_threshold(&self) -> f64 {
        0.01 * self.f_max
    }

    pub fn should_publish(&self, force: &ForceVector) -> bool {
        force.magnitude() > self.publish_threshold()
    }
}

/// Potential-field repulsion summed over beams closer than `d0`, saturated
/// at `f_max`. No-return beams contribute nothing.
pub fn compute_feedback_force(scan: &LaserScan, params: &FeedbackParams) -> ForceVector {
    let (mut fx, mut fy) = (0.0, 0.0);
    for (bearing, d, no_return) in scan.beams() {
        if no_return || d >= params.d0 || d <= 0.0 {
            continue;
        }
        let mag = params.k_rep * (1.0 / d - 1.0 / params.d0) / (d * d);
        // unit vector from the obstacle point back toward the robot
        fx -= mag * bearing.cos();
        fy -= mag * bearing.sin();
    }
    let m = fx.hypot(fy);
    if m > params.f_max {
        fx *= params.f_max / m;
        fy *= params.f_max / m;
    }
    ForceVector { fx, fy, stamp: scan.stamp }
}

/// Velocity correction for a received force. The linear part can only slow
/// the robot; the angular part steers away from the obstacle.
pub fn force_to_correction(force: &ForceVector, params: &FeedbackParams, v_max: f64, omega_max: f64) -> Twist {
    let v = if force.fx < 0.0 { (params.k_v * force.fx).clamp(-v_max, 0.0) } else { 0.0 };
    let omega = (params.k_omega * force.fy).clamp(-omega_max, omega_max);
    Twist::new(v, omega)
}

/// Absolute override published on the high-priority channel: the current
/// forward speed reduced by the correction (never reversed), with the
/// correction's turn rate.
pub fn override_command(current: Twist, correction: Twist) -> Twist {
    Twist::new((current.v + correction.v).max(0.0), correction.omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn scan(bearings: &[(f64, f64)], range_max: f64) -> LaserScan {
        // one beam per entry, encoded via a 1-degree layout
        let n = 360;
        let inc = 2.0 * PI / n as f64;
        let mut ranges = vec![range_max; n];
        for &(b, r) in bearings {
            let i = ((b + PI) / inc).round() as usize % n;
            ranges[i] = r;
        }
        LaserScan { stamp: 2.0, angle_min: -PI, angle_increment: inc, range_max, ranges }
    }

    #[test]
    fn outside_influence_is_zero() {
        let p = FeedbackParams { d0: 1.0, k_rep: 1.0, ..FeedbackParams::default() };
        let f = compute_feedback_force(&scan(&[(0.0, 1.0), (1.0, 2.0)], 3.5), &p);
        assert_eq!((f.fx, f.fy), (0.0, 0.0));
        assert!(!p.should_publish(&f));
    }

    #[test]
    fn single_beam_ahead() {
        let p = FeedbackParams { d0: 1.0, k_rep: 1.0, f_max: 100.0, ..FeedbackParams::default() };
        let s = LaserScan { stamp: 0.0, angle_min: 0.0, angle_increment: 0.1, range_max: 3.5, ranges: vec![0.5] };
        let f = compute_feedback_force(&s, &p);
        assert!((f.fx + 4.0).abs() < 1e-12);
        assert!(f.fy.abs() < 1e-12);
    }

    #[test]
    fn symmetric_beams_cancel_laterally() {
        let p = FeedbackParams { d0: 1.0, k_rep: 1.0, f_max: 100.0, ..FeedbackParams::default() };
        let s = LaserScan {
            stamp: 0.0,
            angle_min: -PI / 2.0,
            angle_increment: PI,
            range_max: 3.5,
            ranges: vec![0.4, 0.4],
        };
        let f = compute_feedback_force(&s, &p);
        assert!(f.fy.abs() < 1e-12);
    }

    #[test]
    fn no_return_contributes_nothing() {
        let p = FeedbackParams { d0: 1.0, ..FeedbackParams::default() };
        let s = LaserScan { stamp: 0.0, angle_min: 0.0, angle_increment: 0.1, range_max: 0.5, ranges: vec![0.5] };
        assert_eq!(compute_feedback_force(&s, &p).magnitude(), 0.0);
    }

    #[test]
    fn correction_examples() {
        let p = FeedbackParams { k_v: 0.1, k_omega: 0.5, ..FeedbackParams::default() };
        assert_eq!(force_to_correction(&ForceVector::default(), &p, 0.5, 1.0), Twist::ZERO);
        let c = force_to_correction(&ForceVector { fx: -4.0, fy: 0.0, stamp: 0.0 }, &p, 0.5, 1.0);
        assert!((c.v + 0.4).abs() < 1e-12 && c.omega == 0.0);
        let c = force_to_correction(&ForceVector { fx: -4.0, fy: 0.0, stamp: 0.0 }, &p, 0.3, 1.0);
        assert_eq!(c.v, -0.3);
        let c = force_to_correction(&ForceVector { fx: 0.0, fy: 2.0, stamp: 0.0 }, &p, 0.5, 1.0);
        assert_eq!(c, Twist::new(0.0, 1.0));
        let c = force_to_correction(&ForceVector { fx: 0.0, fy: 4.0, stamp: 0.0 }, &p, 0.5, 1.0);
        assert_eq!(c.omega, 1.0);
        // forward force never accelerates
        let c = force_to_correction(&ForceVector { fx: 3.0, fy: 0.0, stamp: 0.0 }, &p, 0.5, 1.0);
        assert_eq!(c.v, 0.0);
    }

    #[test]
    fn override_never_reverses() {
        assert_eq!(override_command(Twist::new(0.2, 0.3), Twist::new(-0.5, -0.1)), Twist::new(0.0, -0.1));
        assert_eq!(override_command(Twist::new(0.4, 0.0), Twist::new(-0.1, 0.2)).v, 0.4 - 0.1);
    }

    proptest! {
        #[test]
        fn saturation_holds(ranges in proptest::collection::vec(0.01f64..3.5, 360)) {
            let p = FeedbackParams::default();
            let s = LaserScan { stamp: 0.0, angle_min: -PI, angle_increment: 2.0 * PI / 360.0, range_max: 3.5, ranges };
            prop_assert!(compute_feedback_force(&s, &p).magnitude() <= p.f_max * (1.0 + 1e-12));
        }

        #[test]
        fn repulsion_decreases_with_distance(a in 0.01f64..0.59, b in 0.01f64..0.59) {
            prop_assume!((a - b).abs() > 1e-6);
            let p = FeedbackParams { f_max: 1e12, ..FeedbackParams::default() };
            let one = |d: f64| compute_feedback_force(
                &LaserScan { stamp: 0.0, angle_min: 0.3, angle_increment: 0.0, range_max: 3.5, ranges: vec![d] }, &p).magnitude();
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(one(near) > one(far));
        }

        #[test]
        fn rotating_scan_rotates_force(shift in 0usize..360, seed in proptest::collection::vec(0.1f64..1.0, 360)) {
            let p = FeedbackParams { f_max: 1e12, ..FeedbackParams::default() };
            let inc = 2.0 * PI / 360.0;
            let base = LaserScan { stamp: 0.0, angle_min: -PI, angle_increment: inc, range_max: 3.5, ranges: seed.clone() };
            let mut rotated = base.clone();
            rotated.angle_min = -PI + shift as f64 * inc;
            let f0 = compute_feedback_force(&base, &p);
            let f1 = compute_feedback_force(&rotated, &p);
            let phi = shift as f64 * inc;
            let (rx, ry) = (f0.fx * phi.cos() - f0.fy * phi.sin(), f0.fx * phi.sin() + f0.fy * phi.cos());
            let tol = 1e-9 * f0.magnitude().max(1.0);
            prop_assert!((rx - f1.fx).abs() < tol && (ry - f1.fy).abs() < tol);
        }
    }
}
