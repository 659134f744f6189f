//! Diagonal-inertia rigid-body model and fixed-step forward dynamics.
//!
//! The plant follows `J(q)·q̈ = τ_ref − τ_res − D·q̇ − g(q)`, where `τ_res` is
//! the torque the environment exerts against the motion.

use serde::{Deserialize, Serialize};

use super::params::RobotParams;
use crate::error::{Error, Result};
use crate::joint::JointVec;

/// Control period of the reference system (500 Hz).
pub const CONTROL_DT: f64 = 1.0 / 500.0;

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RobotState {
    pub q: JointVec,
    pub dq: JointVec,
    pub t: f64,
}

impl RobotState {
    pub fn at_rest(q: JointVec) -> Self {
        RobotState { q, dq: JointVec::ZERO, t: 0.0 }
    }

    pub fn bit_eq(&self, other: &Self) -> bool {
        self.q.bit_eq(&other.q) && self.dq.bit_eq(&other.dq) && self.t.to_bits() == other.t.to_bits()
    }
}

fn check_finite(q: &JointVec, what: &'static str) -> Result<()> {
    match q.first_non_finite() {
        Some(joint) => Err(Error::NonFinite { what, joint }),
        None => Ok(()),
    }
}

/// Diagonal of the inertia matrix (kg·m²), each entry clamped to
/// `p.inertia_floor`.
pub fn inertia_matrix(q: &JointVec, p: &RobotParams) -> Result<JointVec> {
    check_finite(q, "joint angle")?;
    Ok(inertia_unchecked(q, p))
}

pub(crate) fn inertia_unchecked(q: &JointVec, p: &RobotParams) -> JointVec {
    let (t2, t3, t4) = (q[1], q[2], q[3]);
    let (s2, c2) = t2.sin_cos();
    let (s3, c3) = t3.sin_cos();
    let (s4, c4) = t4.sin_cos();
    let (s2s, s3s, s4s) = (s2 * s2, s3 * s3, s4 * s4);

    let (m2, m3, m4) = (p.mass2, p.mass3, p.mass4);
    let (a2, a3, a4) = (p.com2, p.com3, p.com4);
    let l2 = p.len2;
    let m4a4s = a4 * a4 * m4;

    let j1 = a2 * a2 * m2 * s2s + a3 * a3 * m3 * s2s + 2.0 * a3 * l2 * m3 * s2s
        - 0.125
            * m4a4s
            * ((-2.0 * t2 + t3 + 2.0 * t4).cos() - (2.0 * t2 - t3 + 2.0 * t4).cos() + (2.0 * t2 + t3 - 2.0 * t4).cos()
                - (2.0 * t2 + t3 + 2.0 * t4).cos())
        + m4a4s * s2s * s3s * s4s
        - 2.0 * m4a4s * s2s * s4s
        + m4a4s * s2s
        + m4a4s * s4s
        - 2.0 * a4 * l2 * m4 * s2s * c4
        + 2.0 * a4 * l2 * m4 * s2 * s4 * c2 * c3
        + p.inertia_x2 * s2s
        + p.inertia_x3 * s2s
        - p.inertia_y2 * s2s
        + p.inertia_y2
        + l2 * l2 * m3 * s2s
        + l2 * l2 * m4 * s2s;

    let j2 = a2 * a2 * m2 + a3 * a3 * m3 + 2.0 * a3 * l2 * m3 - m4a4s * s3s * s4s + m4a4s - 2.0 * a4 * l2 * m4 * c4
        + p.inertia_x2
        + p.inertia_x3
        + l2 * l2 * m3
        + l2 * l2 * m4;

    let j3 = m4a4s * s4s;

    let d = &p.distal_inertia;
    JointVec::new([j1, j2, j3, d[0], d[1], d[2], d[3], d[4]]).map(|j| j.max(p.inertia_floor))
}

/// Gravity torque vector (N·m); only joints 2, 3 and 4 are loaded.
pub fn gravity_vector(q: &JointVec, p: &RobotParams) -> Result<JointVec> {
    check_finite(q, "joint angle")?;
    Ok(gravity_unchecked(q, p))
}

pub(crate) fn gravity_unchecked(q: &JointVec, p: &RobotParams) -> JointVec {
    let (s2, c2) = q[1].sin_cos();
    let (s3, c3) = q[2].sin_cos();
    let (s4, c4) = q[3].sin_cos();
    let g = p.gravity;
    let (m4, a4) = (p.mass4, p.com4);

    let g2 = g
        * (p.com2 * p.mass2 * s2
            + p.mass3 * (p.com3 + p.len2) * s2
            + m4 * (a4 * s4 * c2 * c3 + (-a4 * c4 + p.len2 + p.len3) * s2));
    let g3 = -a4 * g * m4 * s2 * s3 * s4;
    let g4 = a4 * g * m4 * (s2 * c3 * c4 - s4 * c2);

    JointVec::new([0.0, g2, g3, g4, 0.0, 0.0, 0.0, 0.0])
}

/// Joint acceleration of the plant for the given applied and reaction torques.
pub fn acceleration(s: &RobotState, tau_ref: &JointVec, tau_res: &JointVec, p: &RobotParams) -> JointVec {
    let inertia = inertia_unchecked(&s.q, p);
    let gravity = gravity_unchecked(&s.q, p);
    let net = *tau_ref - *tau_res - p.friction.hadamard(s.dq) - gravity;
    net.zip_map(inertia, |f, j| f / j)
}

/// Advance the plant by one semi-implicit Euler step.
pub fn step_dynamics(
    s: &RobotState,
    tau_ref: &JointVec,
    tau_res: &JointVec,
    p: &RobotParams,
    dt: f64,
) -> Result<RobotState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be > 0, got {dt}")));
    }
    let ddq = acceleration(s, tau_ref, tau_res, p);
    let dq = s.dq + ddq * dt;
    let q = s.q + dq * dt;
    let next = RobotState { q, dq, t: s.t + dt };
    if let Some(joint) = next.q.first_non_finite().or_else(|| next.dq.first_non_finite()) {
        return Err(Error::Diverged {
            step: (s.t / dt).round() as usize,
            detail: format!(
                "joint {} non-finite at t={:.4}: q={:?} dq={:?} tau_ref={:?} tau_res={:?}",
                joint + 1,
                s.t,
                s.q,
                s.dq,
                tau_ref,
                tau_res
            ),
        });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pose(t2: f64, t3: f64, t4: f64) -> JointVec {
        JointVec::new([0.0, t2, t3, t4, 0.0, 0.0, 0.0, 0.0])
    }

    #[test]
    fn inertia_at_zero_pose() {
        let p = RobotParams::default();
        let j = inertia_matrix(&JointVec::ZERO, &p).unwrap();
        // Independent high-precision evaluation of the closed form: 0.040000179137.
        assert!((j[1] - 0.040000179137).abs() < 1e-12);
        // J3 = c4²·m4·sin²θ4 vanishes at θ4 = 0 and is lifted to the floor.
        assert_eq!(j[2], p.inertia_floor);
        // J1 = Iy2 = 0.0008 < floor.
        assert_eq!(j[0], p.inertia_floor);
        assert_eq!(&j.0[3..], &[0.0370, 0.0054, 0.0066, 0.0049, 0.0055]);
    }

    #[test]
    fn inertia_general_pose_matches_oracle() {
        // Oracle: 30-digit evaluation of the same closed forms at (0.3, -0.7, 1.1).
        let p = RobotParams::default();
        let j = inertia_matrix(&pose(0.3, -0.7, 1.1), &p).unwrap();
        assert!((j[0] - 0.0385706818470798).abs() < 1e-14);
        assert!((j[1] - 0.0630729093378519).abs() < 1e-14);
        assert!((j[2] - 0.0293698397486203).abs() < 1e-14);
    }

    #[test]
    fn gravity_values() {
        let p = RobotParams::default();
        assert_eq!(gravity_vector(&JointVec::ZERO, &p).unwrap(), JointVec::ZERO);
        let g = gravity_vector(&pose(PI / 2.0, 0.0, 0.0), &p).unwrap();
        assert!((g[3] - 1.2661595325).abs() < 1e-10);
        assert!((g[1] + 0.1612831689).abs() < 1e-10);
        let g = gravity_vector(&pose(0.3, -0.7, 1.1), &p).unwrap();
        assert!((g[1] - 0.981297620910259).abs() < 1e-13);
        assert!((g[2] - 0.214826087833901).abs() < 1e-13);
        assert!((g[3] + 0.948199332114965).abs() < 1e-13);
    }

    #[test]
    fn non_finite_pose_is_rejected() {
        let p = RobotParams::default();
        let q = JointVec::unit(3, f64::INFINITY);
        assert!(matches!(inertia_matrix(&q, &p), Err(Error::NonFinite { joint: 3, .. })));
        assert!(gravity_vector(&q, &p).is_err());
    }

    #[test]
    fn balanced_torque_gives_zero_acceleration() {
        let p = RobotParams::default();
        let s = RobotState { q: pose(0.4, 0.0, 1.2), dq: JointVec::splat(0.3), t: 0.0 };
        let tau_res = JointVec::unit(3, 0.7);
        let tau = tau_res + p.friction.hadamard(s.dq) + gravity_vector(&s.q, &p).unwrap();
        let next = step_dynamics(&s, &tau, &tau_res, &p, CONTROL_DT).unwrap();
        for i in 0..8 {
            assert!((next.dq[i] - s.dq[i]).abs() < 1e-12);
        }
        assert_eq!(next.t, CONTROL_DT);
    }

    #[test]
    fn single_step_friction_decay() {
        let p = RobotParams::default();
        let s = RobotState { q: JointVec::ZERO, dq: JointVec::splat(1.0), t: 0.0 };
        // Zero pose has zero gravity.
        let next = step_dynamics(&s, &JointVec::ZERO, &JointVec::ZERO, &p, CONTROL_DT).unwrap();
        let j = inertia_matrix(&s.q, &p).unwrap();
        for i in 0..8 {
            let expect = 1.0 - CONTROL_DT * p.friction[i] / j[i];
            assert!((next.dq[i] - expect).abs() < 1e-15, "joint {i}");
        }
    }

    #[test]
    fn constant_torque_matches_first_order_solution() {
        // Joint 5 (no gravity, constant inertia): ω(t) = (τ/D)(1 − e^{−Dt/J}).
        let p = RobotParams::default();
        let (j, d, tau) = (p.distal_inertia[1], p.friction[4], 0.05);
        let horizon = 5.0 * j / d;
        let steps = (horizon / CONTROL_DT).round() as usize;
        let mut s = RobotState::default();
        for _ in 0..steps {
            s = step_dynamics(&s, &JointVec::unit(4, tau), &JointVec::ZERO, &p, CONTROL_DT).unwrap();
        }
        let t = steps as f64 * CONTROL_DT;
        let exact = tau / d * (1.0 - (-d * t / j).exp());
        assert!(((s.dq[4] - exact) / exact).abs() < 0.005, "{} vs {}", s.dq[4], exact);
    }

    #[test]
    fn zero_dt_is_rejected() {
        let p = RobotParams::default();
        let s = RobotState::default();
        assert!(step_dynamics(&s, &JointVec::ZERO, &JointVec::ZERO, &p, 0.0).is_err());
    }

    #[test]
    fn divergence_reports_step() {
        let p = RobotParams::default();
        let s = RobotState::default();
        let err =
            step_dynamics(&s, &JointVec::unit(0, f64::MAX), &JointVec::unit(0, -f64::MAX), &p, CONTROL_DT).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }
}
