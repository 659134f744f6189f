//! Penalty-based peg-in-hole environment: two tube racks with chamfered holes,
//! a gripper that closes on the tube, and Coulomb friction on the rack tops.
//!
//! All geometry lives in the plane of [`forward_kinematics_planar`]. The tip
//! point is the bottom of the tube while it is held; a tube waiting in the
//! source rack is grasped with the tip at the source hole floor.

use serde::{Deserialize, Serialize};

use super::dynamics::RobotState;
use super::kinematics::{forward_kinematics_planar, planar_force_to_torque, planar_velocity, Point2};
use super::params::RobotParams;
use crate::error::{Error, Result};
use crate::joint::{JointVec, GRIPPER};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PegTaskEnv {
    /// Source hole axis `x` and rack top height `y` (m).
    pub source_hole: Point2,
    /// Target hole axis `x` and rack top height `y` (m).
    pub target_hole: Point2,
    /// Radial gap between tube and hole wall (m).
    pub hole_clearance: f64,
    /// Hole floor below the rack top (m).
    pub hole_depth: f64,
    /// Extra half-width of the entry chamfer at the rack top (m).
    pub chamfer_width: f64,
    /// Depth over which the chamfer narrows to the bore (m).
    pub chamfer_depth: f64,
    /// Half-width of each rack's top surface around its hole (m).
    pub rack_half_width: f64,
    /// Penalty stiffness of walls, floor and rack tops (N/m).
    pub wall_stiffness: f64,
    /// Penalty damping (N·s/m).
    pub wall_damping: f64,
    /// Coulomb coefficient on rack tops.
    pub surface_friction: f64,
    /// Gripper angle at which the fingers touch the tube (rad).
    pub grip_closure: f64,
    /// Finger contact stiffness (N·m/rad).
    pub grip_stiffness: f64,
    /// Finger contact damping (N·m·s/rad).
    pub grip_damping: f64,
    /// Max tip offset from the waiting tube for the fingers to close on it (m).
    pub grasp_tolerance: f64,
    /// Gripper reaction torque above which the tube counts as held (N·m).
    pub grip_threshold: f64,
    /// Contact force the fingers hold per unit grip torque (N per N·m). A
    /// harder knock pulls the tube out of the gripper.
    pub grip_capacity: f64,
    /// Target depth for a successful insertion (m).
    pub insertion_depth_goal: f64,
    /// Lateral force above which an insertion counts as skewed (N).
    pub lateral_force_limit: f64,
}

impl Default for PegTaskEnv {
    fn default() -> Self {
        PegTaskEnv {
            source_hole: Point2::new(0.30, 0.0),
            target_hole: Point2::new(0.40, 0.0),
            hole_clearance: 0.0005,
            hole_depth: 0.04,
            chamfer_width: 0.004,
            chamfer_depth: 0.004,
            rack_half_width: 0.04,
            wall_stiffness: 2000.0,
            wall_damping: 20.0,
            surface_friction: 0.5,
            grip_closure: 0.4,
            grip_stiffness: 10.0,
            grip_damping: 0.05,
            grasp_tolerance: 0.01,
            grip_threshold: 0.3,
            grip_capacity: 2.0,
            insertion_depth_goal: 0.03,
            lateral_force_limit: 15.0,
        }
    }
}

impl PegTaskEnv {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hole_clearance", self.hole_clearance),
            ("hole_depth", self.hole_depth),
            ("insertion_depth_goal", self.insertion_depth_goal),
            ("rack_half_width", self.rack_half_width),
            ("chamfer_depth", self.chamfer_depth),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("env.{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("chamfer_width", self.chamfer_width),
            ("wall_stiffness", self.wall_stiffness),
            ("wall_damping", self.wall_damping),
            ("surface_friction", self.surface_friction),
            ("grip_stiffness", self.grip_stiffness),
            ("grip_damping", self.grip_damping),
            ("grasp_tolerance", self.grasp_tolerance),
            ("grip_threshold", self.grip_threshold),
            ("grip_capacity", self.grip_capacity),
            ("lateral_force_limit", self.lateral_force_limit),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("env.{name} must be >= 0, got {v}")));
            }
        }
        if self.insertion_depth_goal > self.hole_depth {
            return Err(Error::Config("env.insertion_depth_goal exceeds hole_depth".into()));
        }
        Ok(())
    }

    /// Tip position at which the waiting tube can be grasped.
    pub fn grasp_point(&self) -> Point2 {
        Point2::new(self.source_hole.x, self.source_hole.y - self.hole_depth)
    }

    fn entry_half_width(&self) -> f64 {
        self.hole_clearance + self.chamfer_width
    }

    /// Allowed lateral offset of the tube axis at `depth` below the rack top.
    pub fn allowed_offset(&self, depth: f64) -> f64 {
        let taper = (1.0 - depth / self.chamfer_depth).max(0.0);
        self.hole_clearance + self.chamfer_width * taper
    }

    /// Which part of the environment a tube bottom at `at` would touch.
    pub fn classify(&self, at: Point2) -> Region {
        let racks = [(self.source_hole, Region::SourceHole), (self.target_hole, Region::TargetHole)];
        for (hole, region) in racks {
            if at.y >= hole.y {
                continue;
            }
            let offset = (at.x - hole.x).abs();
            if offset <= self.entry_half_width() {
                return region;
            }
            if offset <= self.rack_half_width {
                return Region::Surface;
            }
        }
        Region::Free
    }

    fn hole(&self, region: Region) -> Option<Point2> {
        match region {
            Region::SourceHole => Some(self.source_hole),
            Region::TargetHole => Some(self.target_hole),
            _ => None,
        }
    }

    fn region_top(&self, region: Region, x: f64) -> f64 {
        self.hole(region).map_or_else(|| self.rack_top_at(x), |h| h.y)
    }

    fn rack_top_at(&self, x: f64) -> f64 {
        if (x - self.source_hole.x).abs() <= self.rack_half_width {
            self.source_hole.y
        } else {
            self.target_hole.y
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Free,
    SourceHole,
    TargetHole,
    Surface,
}

impl Region {
    pub fn code(self) -> u8 {
        match self {
            Region::Free => 0,
            Region::SourceHole => 1,
            Region::TargetHole => 2,
            Region::Surface => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Region::Free,
            1 => Region::SourceHole,
            2 => Region::TargetHole,
            3 => Region::Surface,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactInfo {
    pub in_contact: bool,
    /// Largest wall (or surface friction) force magnitude on the tube (N).
    pub lateral_force: f64,
    /// Floor or rack-top reaction (N).
    pub normal_force: f64,
    /// Depth of the tube bottom below the top of the hole it is in (m).
    pub depth: f64,
    /// Magnitude of the environment force on the held tube (N).
    pub tube_force: f64,
    /// Gripper reaction torque (N·m).
    pub grip_torque: f64,
    pub tube_held: bool,
    pub region: Region,
}

impl Default for ContactInfo {
    fn default() -> Self {
        ContactInfo {
            in_contact: false,
            lateral_force: 0.0,
            normal_force: 0.0,
            depth: 0.0,
            tube_force: 0.0,
            grip_torque: 0.0,
            tube_held: false,
            region: Region::Free,
        }
    }
}

/// Where the tube is. Carries the friction anchor needed for stick-slip on
/// the rack tops.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TubeState {
    /// Waiting in the source hole.
    InRack,
    /// In the gripper; `anchor` is the sticking point while on a rack top and
    /// `inside` the region the tube bottom entered when it went below the
    /// rack-top plane. It stays there until lifted back out.
    Held { anchor: Option<f64>, inside: Option<Region> },
    /// Let go at the given tube-bottom position.
    Released { at: Point2 },
}

/// Forces from the two walls of a bore on a point at lateral `offset`,
/// with allowed half-gaps `gap_left`/`gap_right` and lateral velocity `vx`.
/// Returns `(net force along +x, larger single-wall magnitude)`.
pub(crate) fn wall_contact(
    offset: f64,
    vx: f64,
    gap_left: f64,
    gap_right: f64,
    stiffness: f64,
    damping: f64,
) -> (f64, f64) {
    let pen_left = -gap_left - offset;
    let pen_right = offset - gap_right;
    let left = if pen_left > 0.0 { (stiffness * pen_left - damping * vx).max(0.0) } else { 0.0 };
    let right = if pen_right > 0.0 { (stiffness * pen_right + damping * vx).max(0.0) } else { 0.0 };
    (left - right, left.max(right))
}

fn surface_normal(env: &PegTaskEnv, tip: Point2, vel: Point2) -> f64 {
    let pen = env.rack_top_at(tip.x) - tip.y;
    if pen > 0.0 {
        (env.wall_stiffness * pen - env.wall_damping * vel.y).max(0.0)
    } else {
        0.0
    }
}

fn friction_force(env: &PegTaskEnv, x: f64, vx: f64, anchor: f64, normal: f64) -> f64 {
    let limit = env.surface_friction * normal;
    (-env.wall_stiffness * (x - anchor) - env.wall_damping * vx).clamp(-limit, limit)
}

/// Reaction torque of the environment on the arm together with a contact
/// summary. Free space yields exactly zero torque.
pub fn contact_torque(s: &RobotState, env: &PegTaskEnv, p: &RobotParams, tube: &TubeState) -> (JointVec, ContactInfo) {
    let tip = forward_kinematics_planar(&s.q, p);
    let vel = planar_velocity(&s.q, &s.dq, p);
    let mut tau = JointVec::ZERO;
    let mut info = ContactInfo::default();

    let graspable = match tube {
        TubeState::InRack => {
            let grasp = env.grasp_point();
            (tip.x - grasp.x).abs() <= env.grasp_tolerance && (tip.y - grasp.y).abs() <= env.grasp_tolerance
        }
        TubeState::Held { .. } => true,
        TubeState::Released { .. } => false,
    };
    if graspable {
        let pen = s.q[GRIPPER] - env.grip_closure;
        if pen > 0.0 {
            let grip = (env.grip_stiffness * pen + env.grip_damping * s.dq[GRIPPER]).max(0.0);
            tau[GRIPPER] = grip;
            info.grip_torque = grip;
        }
        info.tube_held = info.grip_torque >= env.grip_threshold && info.grip_torque > 0.0;
    }

    match *tube {
        TubeState::InRack => {
            info.region = Region::SourceHole;
            info.depth = env.hole_depth;
        }
        TubeState::Released { at } => {
            info.region = env.classify(at);
            if let Some(hole) = env.hole(info.region) {
                info.depth = (hole.y - at.y).max(0.0);
            }
        }
        TubeState::Held { anchor, inside } => {
            // A tube below the rack-top plane keeps the region it entered,
            // except that one sliding along a rack top drops into a mouth.
            let here = env.classify(tip);
            info.region = match inside {
                Some(Region::Surface) if env.hole(here).is_some() => here,
                Some(r) if tip.y < env.region_top(r, tip.x) => r,
                _ => here,
            };
            let (mut fx, mut fy) = (0.0, 0.0);
            match info.region {
                Region::SourceHole | Region::TargetHole => {
                    let hole = env.hole(info.region).expect("hole region");
                    let depth = hole.y - tip.y;
                    info.depth = depth.max(0.0);
                    let gap = env.allowed_offset(depth);
                    let (lateral, largest) =
                        wall_contact(tip.x - hole.x, vel.x, gap, gap, env.wall_stiffness, env.wall_damping);
                    fx = lateral;
                    info.lateral_force = largest;
                    let floor_pen = depth - env.hole_depth;
                    if floor_pen > 0.0 {
                        fy = (env.wall_stiffness * floor_pen - env.wall_damping * vel.y).max(0.0);
                        info.normal_force = fy;
                    }
                }
                Region::Surface => {
                    let normal = surface_normal(env, tip, vel);
                    fy = normal;
                    info.normal_force = normal;
                    fx = friction_force(env, tip.x, vel.x, anchor.unwrap_or(tip.x), normal);
                    info.lateral_force = fx.abs();
                }
                Region::Free => {}
            }
            info.tube_force = fx.hypot(fy);
            if fx != 0.0 || fy != 0.0 {
                // The environment pushes the tube with (fx, fy); its reaction
                // against the arm's motion is the negated Jacobian-transpose map.
                tau -= planar_force_to_torque(&s.q, p, fx, fy);
            }
        }
    }
    info.in_contact = tau.iter().any(|v| *v != 0.0);
    (tau, info)
}

impl TubeState {
    /// Tube transition after a control step evaluated with [`contact_torque`].
    pub fn advance(&self, s: &RobotState, env: &PegTaskEnv, p: &RobotParams, info: &ContactInfo) -> TubeState {
        match *self {
            TubeState::InRack if info.tube_held => TubeState::Held { anchor: None, inside: Some(Region::SourceHole) },
            TubeState::InRack => TubeState::InRack,
            TubeState::Held { anchor, .. } => {
                let tip = forward_kinematics_planar(&s.q, p);
                if !info.tube_held || info.tube_force > env.grip_capacity * info.grip_torque {
                    return TubeState::Released { at: tip };
                }
                let inside = (info.region != Region::Free).then_some(info.region);
                if info.region != Region::Surface || info.normal_force <= 0.0 {
                    return TubeState::Held { anchor: None, inside };
                }
                let anchor = anchor.unwrap_or(tip.x);
                let slack = env.surface_friction * info.normal_force / env.wall_stiffness.max(f64::MIN_POSITIVE);
                let disp = tip.x - anchor;
                let anchor = if disp.abs() > slack { tip.x - disp.signum() * slack } else { anchor };
                TubeState::Held { anchor: Some(anchor), inside }
            }
            TubeState::Released { at } => TubeState::Released { at },
        }
    }

    pub fn is_held(&self) -> bool {
        matches!(self, TubeState::Held { .. })
    }
}
