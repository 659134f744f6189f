//! Scenario configuration: robot and environment parameters, gains, the
//! scripted operator hand and retouch interventions.
//!
//! Scenario files are TOML; every section is optional and falls back to the
//! built-in tube-transfer task (see `docs/scenario-format.md`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::control::{CommandFrame, Gains};
use crate::error::{Error, Result};
use crate::joint::{JointVec, GRIPPER, JOINTS};
use crate::model::{inverse_kinematics_planar, PegTaskEnv, Point2, RobotParams, RobotState, CONTROL_DT};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub q: JointVec,
}

/// Impedance model of the operator's hand on the leader: a spring-damper
/// toward a smooth reference through the waypoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandModel {
    /// Hand stiffness (N·m/rad).
    pub stiffness: f64,
    /// Hand damping (N·m·s/rad).
    pub damping: f64,
    pub waypoints: Vec<Waypoint>,
}

impl Default for HandModel {
    fn default() -> Self {
        tube_transfer_hand(&RobotParams::default(), &PegTaskEnv::default())
    }
}

impl HandModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.stiffness.is_finite() && self.stiffness >= 0.0) {
            return Err(Error::Config("hand.stiffness must be >= 0".into()));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(Error::Config("hand.damping must be >= 0".into()));
        }
        if self.waypoints.is_empty() {
            return Err(Error::Config("hand needs at least one waypoint".into()));
        }
        for pair in self.waypoints.windows(2) {
            if !(pair[1].t > pair[0].t) {
                return Err(Error::Config(format!(
                    "hand waypoints must be strictly time-ordered (t={} then t={})",
                    pair[0].t, pair[1].t
                )));
            }
        }
        if self.waypoints.iter().any(|w| !w.t.is_finite() || !w.q.is_finite()) {
            return Err(Error::Config("hand waypoints must be finite".into()));
        }
        Ok(())
    }

    pub fn start_pose(&self) -> JointVec {
        self.waypoints.first().map(|w| w.q).unwrap_or_default()
    }

    /// Reference angle and velocity at `t`: a shape-preserving cubic
    /// (Fritsch–Carlson) through the waypoints, held constant outside them.
    pub fn reference(&self, t: f64) -> (JointVec, JointVec) {
        let wps = &self.waypoints;
        let first = &wps[0];
        let last = &wps[wps.len() - 1];
        if wps.len() == 1 || t <= first.t {
            return (first.q, JointVec::ZERO);
        }
        if t >= last.t {
            return (last.q, JointVec::ZERO);
        }
        let seg = wps.partition_point(|w| w.t <= t) - 1;
        let (a, b) = (&wps[seg], &wps[seg + 1]);
        let h = b.t - a.t;
        let s = (t - a.t) / h;
        let mut q = JointVec::ZERO;
        let mut dq = JointVec::ZERO;
        for j in 0..JOINTS {
            let ma = pchip_slope(wps, seg, j);
            let mb = pchip_slope(wps, seg + 1, j);
            let (s2, s3) = (s * s, s * s * s);
            let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
            let h10 = s3 - 2.0 * s2 + s;
            let h01 = -2.0 * s3 + 3.0 * s2;
            let h11 = s3 - s2;
            q[j] = h00 * a.q[j] + h10 * h * ma + h01 * b.q[j] + h11 * h * mb;
            let d00 = (6.0 * s2 - 6.0 * s) / h;
            let d10 = 3.0 * s2 - 4.0 * s + 1.0;
            let d01 = (-6.0 * s2 + 6.0 * s) / h;
            let d11 = 3.0 * s2 - 2.0 * s;
            dq[j] = d00 * a.q[j] + d10 * ma + d01 * b.q[j] + d11 * mb;
        }
        (q, dq)
    }

    /// Torque the hand applies to a leader in state `s` at time `t`.
    pub fn torque(&self, t: f64, s: &RobotState) -> JointVec {
        let (q_ref, dq_ref) = self.reference(t);
        (q_ref - s.q) * self.stiffness + (dq_ref - s.dq) * self.damping
    }
}

/// Fritsch–Carlson slope at waypoint `i` for joint `j`; zero at the ends and
/// at local extrema, which makes repeated waypoints act as holds.
fn pchip_slope(wps: &[Waypoint], i: usize, j: usize) -> f64 {
    if i == 0 || i + 1 >= wps.len() {
        return 0.0;
    }
    let (h0, h1) = (wps[i].t - wps[i - 1].t, wps[i + 1].t - wps[i].t);
    let d0 = (wps[i].q[j] - wps[i - 1].q[j]) / h0;
    let d1 = (wps[i + 1].q[j] - wps[i].q[j]) / h1;
    if d0 * d1 <= 0.0 {
        return 0.0;
    }
    let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
    (w1 + w2) / (w1 / d0 + w2 / d1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterventionAction {
    /// Constant joint-space torque on the editor (N·m).
    Torque { torque: JointVec },
    /// Spring pulling the listed editor joints (1-based) toward the tape
    /// leader pose plus `offset`.
    Spring { offset: JointVec, stiffness: f64, damping: f64, joints: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionWindow {
    pub t_start: f64,
    pub t_end: f64,
    /// Raised-cosine fade in and out at the window edges (s).
    #[serde(default)]
    pub ramp: f64,
    pub action: InterventionAction,
}

impl InterventionWindow {
    fn weight(&self, t: f64) -> f64 {
        if t < self.t_start || t >= self.t_end {
            return 0.0;
        }
        if self.ramp <= 0.0 {
            return 1.0;
        }
        let edge = (t - self.t_start).min(self.t_end - t);
        if edge >= self.ramp {
            1.0
        } else {
            0.5 - 0.5 * (std::f64::consts::PI * edge / self.ramp).cos()
        }
    }
}

/// Scripted stand-in for a person pushing on the editor robot.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionProfile {
    #[serde(default, rename = "window")]
    pub windows: Vec<InterventionWindow>,
}

impl InterventionProfile {
    pub fn validate(&self, duration: f64) -> Result<()> {
        for (i, w) in self.windows.iter().enumerate() {
            if !(w.t_start.is_finite() && w.t_end.is_finite() && w.t_start >= 0.0 && w.t_end > w.t_start) {
                return Err(Error::Config(format!("window {i}: need 0 <= t_start < t_end")));
            }
            if w.t_end > duration + 1e-9 {
                return Err(Error::Config(format!("window {i} ends at {} beyond run duration {duration}", w.t_end)));
            }
            if !(w.ramp >= 0.0 && 2.0 * w.ramp <= w.t_end - w.t_start + 1e-12) {
                return Err(Error::Config(format!("window {i}: ramp must fit twice in the window")));
            }
            match &w.action {
                InterventionAction::Torque { torque } if !torque.is_finite() => {
                    return Err(Error::Config(format!("window {i}: non-finite torque")));
                }
                InterventionAction::Spring { stiffness, damping, joints, .. } => {
                    if *stiffness < 0.0 || *damping < 0.0 {
                        return Err(Error::Config(format!("window {i}: spring gains must be >= 0")));
                    }
                    if joints.iter().any(|j| *j < 1 || *j > JOINTS) {
                        return Err(Error::Config(format!("window {i}: joints are numbered 1..=8")));
                    }
                }
                _ => {}
            }
        }
        let mut sorted: Vec<&InterventionWindow> = self.windows.iter().collect();
        sorted.sort_by(|a, b| a.t_start.total_cmp(&b.t_start));
        for pair in sorted.windows(2) {
            if pair[1].t_start < pair[0].t_end {
                return Err(Error::Config(format!("intervention windows overlap at t={}", pair[1].t_start)));
            }
        }
        Ok(())
    }

    /// Torque on the editor at time `t`.
    pub fn torque(&self, t: f64, editor: &RobotState, leader: &CommandFrame) -> JointVec {
        let Some(w) = self.windows.iter().find(|w| t >= w.t_start && t < w.t_end) else {
            return JointVec::ZERO;
        };
        let weight = w.weight(t);
        let raw = match &w.action {
            InterventionAction::Torque { torque } => *torque,
            InterventionAction::Spring { offset, stiffness, damping, joints } => {
                let mut tau = JointVec::ZERO;
                for &j in joints {
                    let i = j - 1;
                    tau[i] = stiffness * (leader.q_cmd[i] + offset[i] - editor.q[i])
                        + damping * (leader.dq_cmd[i] - editor.dq[i]);
                }
                tau
            }
        };
        raw * weight
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("profile serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub enabled: bool,
    /// Angle sensor resolution (rad).
    pub quantization: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { enabled: false, quantization: 0.001 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Teaching duration (s).
    pub duration: f64,
    pub dt: f64,
    pub seed: u64,
    /// Pace runs to wall-clock time. Never changes results.
    pub realtime: bool,
    /// Extra time the last tape frame is held during copy and retouch (s).
    pub settle_time: f64,
    /// Serve a live session instead of a scripted intervention.
    pub live: bool,
    pub noise: NoiseConfig,
    pub params: RobotParams,
    pub env: PegTaskEnv,
    pub gains: Gains,
    pub hand: HandModel,
    pub intervention: Option<InterventionProfile>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: "tube-transfer".into(),
            duration: 24.0,
            dt: CONTROL_DT,
            seed: 0,
            realtime: false,
            settle_time: 1.0,
            live: false,
            noise: NoiseConfig::default(),
            params: RobotParams::default(),
            env: PegTaskEnv::default(),
            gains: Gains::default(),
            hand: HandModel::default(),
            intervention: None,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config("duration must be > 0".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config("dt must be > 0".into()));
        }
        if !(self.settle_time.is_finite() && self.settle_time >= 0.0) {
            return Err(Error::Config("settle_time must be >= 0".into()));
        }
        if self.noise.enabled && !(self.noise.quantization > 0.0) {
            return Err(Error::Config("noise.quantization must be > 0".into()));
        }
        self.params.validate()?;
        self.env.validate()?;
        self.gains.validate()?;
        self.hand.validate()?;
        if let Some(profile) = &self.intervention {
            profile.validate(f64::INFINITY)?;
        }
        Ok(())
    }

    /// Number of control steps in the teaching run; both ends of
    /// `[0, duration]` are sampled.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize + 1
    }

    pub fn settle_steps(&self) -> usize {
        (self.settle_time / self.dt).round() as usize
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Short content hash of the effective configuration. Pacing flags do
    /// not affect results and are left out.
    pub fn hash(&self) -> String {
        let mut sc = self.clone();
        sc.realtime = false;
        sc.live = false;
        let digest = Sha256::digest(sc.to_toml().as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Keyframe of a scripted teaching motion: tube-bottom position in the arm
/// plane and gripper angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keyframe {
    pub t: f64,
    pub tip: Point2,
    pub gripper: f64,
}

impl Keyframe {
    pub fn new(t: f64, x: f64, y: f64, gripper: f64) -> Self {
        Keyframe { t, tip: Point2::new(x, y), gripper }
    }
}

fn pose_for(key: &Keyframe, p: &RobotParams) -> Result<JointVec> {
    let (t2, t4) = inverse_kinematics_planar(key.tip, p).ok_or_else(|| {
        Error::Config(format!("keyframe at t={} ({}, {}) is out of reach", key.t, key.tip.x, key.tip.y))
    })?;
    let mut q = JointVec::ZERO;
    q[1] = t2;
    q[3] = t4;
    q[GRIPPER] = key.gripper;
    Ok(q)
}

impl HandModel {
    /// Hand following straight Cartesian segments between keyframes. Moving
    /// segments are sampled densely on a minimum-jerk time law so the
    /// joint-space spline stays close to the line.
    pub fn from_keyframes(keys: &[Keyframe], stiffness: f64, damping: f64, p: &RobotParams) -> Result<Self> {
        let first = keys.first().ok_or_else(|| Error::Config("no keyframes".into()))?;
        let mut waypoints = vec![Waypoint { t: first.t, q: pose_for(first, p)? }];
        for pair in keys.windows(2) {
            let (from, to) = (&pair[0], &pair[1]);
            let samples = if from.tip == to.tip { 1 } else { 12 };
            for k in 1..=samples {
                let s = k as f64 / samples as f64;
                let blend = s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
                let key = Keyframe::new(
                    from.t + (to.t - from.t) * s,
                    from.tip.x + (to.tip.x - from.tip.x) * blend,
                    from.tip.y + (to.tip.y - from.tip.y) * blend,
                    from.gripper + (to.gripper - from.gripper) * blend,
                );
                waypoints.push(Waypoint { t: key.t, q: pose_for(&key, p)? });
            }
        }
        let hand = HandModel { stiffness, damping, waypoints };
        hand.validate()?;
        Ok(hand)
    }
}

/// Keyframes that pick the tube out of the source rack, carry it over and
/// insert it into the target rack, then let go and back off.
pub fn tube_transfer_keyframes(env: &PegTaskEnv) -> Vec<Keyframe> {
    let (src, dst) = (env.source_hole, env.target_hole);
    let grasp = env.grasp_point();
    let (open, closed) = (0.0, 0.6);
    let travel = 0.03;
    // The tube is set down short of the target and slid into it, pressed
    // against the rack top.
    let landing = dst.x - 0.03;
    let hover = 0.008;
    let press = 0.006;
    let insert = 0.035;
    vec![
        Keyframe::new(0.0, src.x, src.y + travel, open),
        Keyframe::new(1.5, src.x, src.y + travel, open),
        Keyframe::new(4.0, grasp.x, grasp.y, open),
        Keyframe::new(5.0, grasp.x, grasp.y, open),
        Keyframe::new(6.5, grasp.x, grasp.y, closed),
        Keyframe::new(7.0, grasp.x, grasp.y, closed),
        Keyframe::new(10.0, src.x, src.y + travel, closed),
        Keyframe::new(12.0, landing, dst.y + hover, closed),
        Keyframe::new(13.0, landing, dst.y - press, closed),
        Keyframe::new(14.5, dst.x, dst.y - press, closed),
        Keyframe::new(15.5, dst.x, dst.y - insert, closed),
        Keyframe::new(17.5, dst.x, dst.y - insert, closed),
        Keyframe::new(19.0, dst.x, dst.y - insert, open),
        Keyframe::new(19.5, dst.x, dst.y - insert, open),
        Keyframe::new(22.5, dst.x, dst.y + travel, open),
        Keyframe::new(24.0, dst.x, dst.y + travel, open),
    ]
}

pub fn tube_transfer_hand(p: &RobotParams, env: &PegTaskEnv) -> HandModel {
    HandModel::from_keyframes(&tube_transfer_keyframes(env), 20.0, 2.0, p).expect("default keyframes are reachable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::forward_kinematics_planar;

    #[test]
    fn default_scenario_validates_and_round_trips() {
        let s = Scenario::default();
        s.validate().unwrap();
        assert_eq!(s.steps(), 12001);
        let back = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.hash(), s.hash());
    }

    #[test]
    fn partial_file_uses_defaults() {
        let s = Scenario::from_toml("seed = 7\n[gains]\nalpha = 0.25\n").unwrap();
        assert_eq!(s.seed, 7);
        assert_eq!(s.gains.alpha, 0.25);
        assert_eq!(s.gains.kp, 256.0);
        assert_eq!(s.params, RobotParams::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Scenario::from_toml("sede = 7\n").is_err());
    }

    #[test]
    fn hand_reference_interpolates_and_holds() {
        let hand = HandModel::default();
        let (q0, dq0) = hand.reference(-1.0);
        assert_eq!(q0, hand.waypoints[0].q);
        assert_eq!(dq0, JointVec::ZERO);
        for w in &hand.waypoints {
            let (q, _) = hand.reference(w.t);
            assert!((q - w.q).max_abs() < 1e-12);
        }
        // Velocity is the derivative of the reference.
        let h = 1e-6;
        for t in [3.1, 8.3, 12.0, 15.2] {
            let (_, dq) = hand.reference(t);
            let fd = (hand.reference(t + h).0 - hand.reference(t - h).0) * (0.5 / h);
            assert!((dq - fd).max_abs() < 1e-5, "t={t}");
        }
    }

    #[test]
    fn vertical_segments_stay_near_hole_axis() {
        let p = RobotParams::default();
        let env = PegTaskEnv::default();
        let hand = tube_transfer_hand(&p, &env);
        for k in 0..=300 {
            let t = 7.0 + 3.0 * k as f64 / 300.0;
            let (q, _) = hand.reference(t);
            let tip = forward_kinematics_planar(&q, &p);
            if tip.y < env.source_hole.y {
                assert!((tip.x - env.source_hole.x).abs() < 2e-4, "t={t} x={}", tip.x);
            }
        }
    }

    #[test]
    fn zero_stiffness_hand_applies_nothing_at_rest() {
        let hand = HandModel { stiffness: 0.0, damping: 0.0, ..HandModel::default() };
        let s = RobotState::at_rest(JointVec::splat(0.3));
        assert_eq!(hand.torque(5.0, &s), JointVec::ZERO);
    }

    fn spring_window() -> InterventionWindow {
        InterventionWindow {
            t_start: 1.0,
            t_end: 2.0,
            ramp: 0.2,
            action: InterventionAction::Spring {
                offset: JointVec::unit(3, 0.05),
                stiffness: 10.0,
                damping: 0.0,
                joints: vec![4],
            },
        }
    }

    #[test]
    fn intervention_profile_weights_and_springs() {
        let profile = InterventionProfile { windows: vec![spring_window()] };
        profile.validate(3.0).unwrap();
        let editor = RobotState::at_rest(JointVec::ZERO);
        let leader = CommandFrame::default();
        assert_eq!(profile.torque(0.5, &editor, &leader), JointVec::ZERO);
        let mid = profile.torque(1.5, &editor, &leader);
        assert!((mid[3] - 0.5).abs() < 1e-12);
        assert_eq!(mid[1], 0.0);
        let edge = profile.torque(1.1, &editor, &leader);
        assert!((edge[3] - 0.25).abs() < 1e-12);
        assert_eq!(profile.torque(2.0, &editor, &leader), JointVec::ZERO);
    }

    #[test]
    fn intervention_profile_validation() {
        let mut overlapping = InterventionProfile { windows: vec![spring_window(), spring_window()] };
        assert!(overlapping.validate(3.0).is_err());
        overlapping.windows.pop();
        assert!(overlapping.validate(1.5).is_err());
        let bad_joint = InterventionProfile {
            windows: vec![InterventionWindow {
                action: InterventionAction::Spring {
                    offset: JointVec::ZERO,
                    stiffness: 1.0,
                    damping: 0.0,
                    joints: vec![9],
                },
                ..spring_window()
            }],
        };
        assert!(bad_joint.validate(3.0).is_err());
    }

    #[test]
    fn intervention_profile_toml_round_trip() {
        let profile = InterventionProfile {
            windows: vec![
                spring_window(),
                InterventionWindow {
                    t_start: 2.5,
                    t_end: 3.0,
                    ramp: 0.0,
                    action: InterventionAction::Torque { torque: JointVec::unit(1, -0.5) },
                },
            ],
        };
        let text = profile.to_toml();
        let back: InterventionProfile = toml::from_str(&text).unwrap();
        assert_eq!(back, profile);
    }
}
