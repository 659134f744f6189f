//! Position-PD and force-P primitives and the control laws built from them:
//! four-channel bilateral, N-unit multilateral, motion-copying and three-unit
//! retouching.
//!
//! Every law splits its torque into a differential mode (position
//! synchronization), a common mode (force sum toward zero) and the observer
//! compensation, and `tau_ref` is always their sum in that order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::JointVec;

/// Per-joint torque limit applied before the plant (N·m).
pub const TORQUE_LIMIT: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gains {
    /// Position P gain (1/s²).
    pub kp: f64,
    /// Position D gain (1/s).
    pub kd: f64,
    /// Force P gain.
    pub kf: f64,
    /// Retouch blend: 0 replays the tape, 1 follows the editor.
    pub alpha: f64,
}

impl Default for Gains {
    fn default() -> Self {
        Gains { kp: 256.0, kd: 32.0, kf: 0.7, alpha: 0.5 }
    }
}

impl Gains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("kp", self.kp), ("kd", self.kd), ("kf", self.kf)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("gains.{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("gains.alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Angle, velocity and torque command values for one robot controller.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct CommandFrame {
    pub q_cmd: JointVec,
    pub dq_cmd: JointVec,
    pub tau_cmd: JointVec,
}

/// What a controller sees of one robot: measured angle, pseudo-differentiated
/// velocity and estimated reaction torque.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct UnitResponse {
    pub q: JointVec,
    pub dq: JointVec,
    pub tau_res: JointVec,
}

impl UnitResponse {
    pub fn as_command(&self) -> CommandFrame {
        CommandFrame { q_cmd: self.q, dq_cmd: self.dq, tau_cmd: self.tau_res }
    }
}

impl From<CommandFrame> for UnitResponse {
    fn from(f: CommandFrame) -> Self {
        UnitResponse { q: f.q_cmd, dq: f.dq_cmd, tau_res: f.tau_cmd }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlOutput {
    pub tau_ref: JointVec,
    pub diff_mode: JointVec,
    pub common_mode: JointVec,
    pub compensation: JointVec,
}

impl ControlOutput {
    pub fn compose(diff_mode: JointVec, common_mode: JointVec, compensation: JointVec) -> Self {
        ControlOutput { tau_ref: diff_mode + common_mode + compensation, diff_mode, common_mode, compensation }
    }

    /// Torque actually sent to the plant, and whether any joint saturated.
    pub fn saturated(&self) -> (JointVec, bool) {
        let clamped = self.tau_ref.clamp_abs(TORQUE_LIMIT);
        (clamped, clamped != self.tau_ref)
    }
}

/// `(Jn/2)·(kp·(q_cmd − q) + kd·(dq_cmd − dq))` per joint.
pub fn position_pd(cmd: &CommandFrame, q: &JointVec, dq: &JointVec, g: &Gains, jn: &JointVec) -> JointVec {
    let mut out = JointVec::ZERO;
    for i in 0..out.0.len() {
        out[i] = jn[i] / 2.0 * (g.kp * (cmd.q_cmd[i] - q[i]) + g.kd * (cmd.dq_cmd[i] - dq[i]));
    }
    out
}

/// Common-mode force term `−(kf/n)·Στ`.
pub fn force_p(tau_sum: &JointVec, kf: f64, n_units: usize) -> Result<JointVec> {
    if n_units < 2 {
        return Err(Error::InvalidArgument(format!("force_p needs at least 2 units, got {n_units}")));
    }
    let k = kf / n_units as f64;
    Ok(tau_sum.map(|t| -(k * t)))
}

fn common_mode(forces: &[JointVec], kf: f64) -> JointVec {
    let sum = forces.iter().fold(JointVec::ZERO, |acc, t| acc + *t);
    force_p(&sum, kf, forces.len()).expect("at least two units")
}

/// Position target `α·a + (1 − α)·b`, applied to angles and velocities.
pub fn internal_division(alpha: f64, a: &UnitResponse, b: &UnitResponse) -> (JointVec, JointVec) {
    let blend = |x: f64, y: f64| alpha * x + (1.0 - alpha) * y;
    (a.q.zip_map(b.q, blend), a.dq.zip_map(b.dq, blend))
}

/// Three-unit retouch law. The leader frame comes from the tape; returns the
/// follower and editor outputs.
#[allow(clippy::too_many_arguments)]
pub fn retouch_step(
    leader: &CommandFrame,
    follower: &UnitResponse,
    editor: &UnitResponse,
    g: &Gains,
    jn_follower: &JointVec,
    jn_editor: &JointVec,
    tau_dis_f: &JointVec,
    tau_dis_e: &JointVec,
) -> (ControlOutput, ControlOutput) {
    let leader = UnitResponse::from(*leader);
    let common = common_mode(&[leader.tau_res, follower.tau_res, editor.tau_res], g.kf);

    let (q_f, dq_f) = internal_division(g.alpha, editor, &leader);
    let target_f = CommandFrame { q_cmd: q_f, dq_cmd: dq_f, tau_cmd: JointVec::ZERO };
    let diff_f = position_pd(&target_f, &follower.q, &follower.dq, g, jn_follower);

    let (q_e, dq_e) = internal_division(g.alpha, follower, &leader);
    let target_e = CommandFrame { q_cmd: q_e, dq_cmd: dq_e, tau_cmd: JointVec::ZERO };
    let diff_e = position_pd(&target_e, &editor.q, &editor.dq, g, jn_editor);

    (ControlOutput::compose(diff_f, common, *tau_dis_f), ControlOutput::compose(diff_e, common, *tau_dis_e))
}

/// Four-channel bilateral law. Returns `(leader, follower)` outputs.
pub fn bilateral_4ch_step(
    leader: &UnitResponse,
    follower: &UnitResponse,
    g: &Gains,
    jn_leader: &JointVec,
    jn_follower: &JointVec,
    tau_dis_l: &JointVec,
    tau_dis_f: &JointVec,
) -> (ControlOutput, ControlOutput) {
    let common = common_mode(&[leader.tau_res, follower.tau_res], g.kf);
    let diff_f = position_pd(&leader.as_command(), &follower.q, &follower.dq, g, jn_follower);
    let diff_l = position_pd(&follower.as_command(), &leader.q, &leader.dq, g, jn_leader);
    (ControlOutput::compose(diff_l, common, *tau_dis_l), ControlOutput::compose(diff_f, common, *tau_dis_f))
}

/// One participant of a multilateral loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiUnit {
    pub response: UnitResponse,
    /// Nominal inertia used by this unit's controller.
    pub jn: JointVec,
    pub tau_dis: JointVec,
    /// A recorded unit produces outputs only and receives no command.
    pub is_tape: bool,
}

/// Multilateral law: each unit tracks the mean of the others' positions and
/// all units share the force-sum common mode.
pub fn multilateral_step(units: &[MultiUnit], g: &Gains) -> Result<Vec<Option<ControlOutput>>> {
    let n = units.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("multilateral control needs at least 2 units, got {n}")));
    }
    let forces: Vec<JointVec> = units.iter().map(|u| u.response.tau_res).collect();
    let common = common_mode(&forces, g.kf);
    let others = (n - 1) as f64;
    Ok(units
        .iter()
        .enumerate()
        .map(|(i, unit)| {
            if unit.is_tape {
                return None;
            }
            let (mut q_sum, mut dq_sum) = (JointVec::ZERO, JointVec::ZERO);
            for (j, other) in units.iter().enumerate() {
                if j != i {
                    q_sum += other.response.q;
                    dq_sum += other.response.dq;
                }
            }
            let target = CommandFrame {
                q_cmd: q_sum.map(|v| v / others),
                dq_cmd: dq_sum.map(|v| v / others),
                tau_cmd: JointVec::ZERO,
            };
            let diff = position_pd(&target, &unit.response.q, &unit.response.dq, g, &unit.jn);
            Some(ControlOutput::compose(diff, common, unit.tau_dis))
        })
        .collect())
}

/// Motion-copying law: the follower tracks a recorded frame as if it were a
/// live leader.
pub fn motion_copy_step(
    tape_frame: &CommandFrame,
    follower: &UnitResponse,
    g: &Gains,
    jn: &JointVec,
    tau_dis_f: &JointVec,
) -> ControlOutput {
    let common = common_mode(&[tape_frame.tau_cmd, follower.tau_res], g.kf);
    let diff = position_pd(tape_frame, &follower.q, &follower.dq, g, jn);
    ControlOutput::compose(diff, common, *tau_dis_f)
}
