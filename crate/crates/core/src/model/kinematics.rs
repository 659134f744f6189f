//! Planar projection of the arm onto the vertical plane spanned by joints 2
//! and 4.
//!
//! Angles are measured from the vertical (+y) toward +x, so the all-zero pose
//! points straight up:
//!
//! ```text
//! x = l24·sin θ2 + l_d·sin(θ2 + θ4)
//! y = l24·cos θ2 + l_d·cos(θ2 + θ4)
//! ```
//!
//! with `l24` the joint 2 → joint 4 length and `l_d` the distal length.

use serde::{Deserialize, Serialize};

use super::params::RobotParams;
use crate::joint::JointVec;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }
}

pub fn forward_kinematics_planar(q: &JointVec, p: &RobotParams) -> Point2 {
    let (s2, c2) = q[1].sin_cos();
    let (s24, c24) = (q[1] + q[3]).sin_cos();
    Point2 { x: p.link24 * s2 + p.distal_length * s24, y: p.link24 * c2 + p.distal_length * c24 }
}

/// Partial derivatives `[[∂x/∂θ2, ∂x/∂θ4], [∂y/∂θ2, ∂y/∂θ4]]`.
pub fn planar_jacobian(q: &JointVec, p: &RobotParams) -> [[f64; 2]; 2] {
    let (s2, c2) = q[1].sin_cos();
    let (s24, c24) = (q[1] + q[3]).sin_cos();
    let (l1, l2) = (p.link24, p.distal_length);
    [[l1 * c2 + l2 * c24, l2 * c24], [-l1 * s2 - l2 * s24, -l2 * s24]]
}

/// Tip velocity for the given joint velocities.
pub fn planar_velocity(q: &JointVec, dq: &JointVec, p: &RobotParams) -> Point2 {
    let jac = planar_jacobian(q, p);
    Point2 { x: jac[0][0] * dq[1] + jac[0][1] * dq[3], y: jac[1][0] * dq[1] + jac[1][1] * dq[3] }
}

/// Joint torques (on joints 2 and 4) produced by a planar force at the tip,
/// i.e. `Jᵀ·F`.
pub fn planar_force_to_torque(q: &JointVec, p: &RobotParams, fx: f64, fy: f64) -> JointVec {
    let jac = planar_jacobian(q, p);
    let mut tau = JointVec::ZERO;
    tau[1] = jac[0][0] * fx + jac[1][0] * fy;
    tau[3] = jac[0][1] * fx + jac[1][1] * fy;
    tau
}

/// Closed-form two-link inverse kinematics for the planar projection, elbow
/// configuration with `θ4 ≥ 0`. Returns `None` when the point is out of reach.
pub fn inverse_kinematics_planar(target: Point2, p: &RobotParams) -> Option<(f64, f64)> {
    let (l1, l2) = (p.link24, p.distal_length);
    let r2 = target.x * target.x + target.y * target.y;
    let cos4 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0..=1.0).contains(&cos4) {
        return None;
    }
    let t4 = cos4.acos();
    let t2 = target.x.atan2(target.y) - (l2 * t4.sin()).atan2(l1 + l2 * t4.cos());
    Some((t2, t4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn pose(t2: f64, t4: f64) -> JointVec {
        JointVec::new([0.0, t2, 0.0, t4, 0.0, 0.0, 0.0, 0.0])
    }

    #[test]
    fn straight_up_at_zero() {
        let p = RobotParams::default();
        let tip = forward_kinematics_planar(&JointVec::ZERO, &p);
        assert_eq!(tip.x, 0.0);
        assert_eq!(tip.y, p.link24 + p.distal_length);
    }

    #[test]
    fn horizontal_at_quarter_turn() {
        let p = RobotParams::default();
        let tip = forward_kinematics_planar(&pose(FRAC_PI_2, 0.0), &p);
        assert!((tip.x - (p.link24 + p.distal_length)).abs() < 1e-15);
        assert!(tip.y.abs() < 1e-15);
    }

    #[test]
    fn diagonal_pose_matches_oracle() {
        // Oracle: 0.25·sin(π/4) + 0.2865·sin(π/2), 0.25·cos(π/4) + 0.2865·cos(π/2).
        let p = RobotParams::default();
        let tip = forward_kinematics_planar(&pose(FRAC_PI_4, FRAC_PI_4), &p);
        assert!((tip.x - 0.463276695296637).abs() < 1e-14);
        assert!((tip.y - 0.176776695296637).abs() < 1e-14);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = RobotParams::default();
        let q = pose(0.7, 1.3);
        let jac = planar_jacobian(&q, &p);
        let h = 1e-6;
        for (col, axis) in [(0, 1), (1, 3)] {
            let mut qp = q;
            let mut qm = q;
            qp[axis] += h;
            qm[axis] -= h;
            let a = forward_kinematics_planar(&qp, &p);
            let b = forward_kinematics_planar(&qm, &p);
            assert!((jac[0][col] - (a.x - b.x) / (2.0 * h)).abs() < 1e-8);
            assert!((jac[1][col] - (a.y - b.y) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn inverse_kinematics_round_trip() {
        let p = RobotParams::default();
        for target in [Point2::new(0.3, -0.04), Point2::new(0.4, 0.03), Point2::new(0.2, 0.2)] {
            let (t2, t4) = inverse_kinematics_planar(target, &p).unwrap();
            let tip = forward_kinematics_planar(&pose(t2, t4), &p);
            assert!((tip.x - target.x).abs() < 1e-12);
            assert!((tip.y - target.y).abs() < 1e-12);
        }
        assert!(inverse_kinematics_planar(Point2::new(2.0, 0.0), &p).is_none());
    }
}
