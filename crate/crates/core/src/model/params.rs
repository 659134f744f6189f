use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::{JointVec, JOINTS};

/// Physical and observer parameters of the simulated 8-axis arm.
///
/// Defaults are the identified values of the reference hardware. Only the
/// first four links enter the configuration-dependent inertia and gravity
/// terms; joints 4..8 carry constant inertias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    /// Link masses (kg).
    pub mass2: f64,
    pub mass3: f64,
    pub mass4: f64,
    /// Joint-to-center-of-mass distances (m).
    pub com2: f64,
    pub com3: f64,
    pub com4: f64,
    /// Distance from joint 2 to joint 4 (m).
    pub link24: f64,
    /// Length `l2` used by the inertia and gravity closed forms (m).
    pub len2: f64,
    /// Length `l3` used by the gravity closed form (m).
    pub len3: f64,
    /// Link inertias (kg·m²).
    pub inertia_x2: f64,
    pub inertia_x3: f64,
    pub inertia_y2: f64,
    /// Constant inertias of joints 4..8 (kg·m²).
    pub distal_inertia: [f64; 5],
    /// Viscous friction per joint (N·m·s/rad).
    pub friction: JointVec,
    /// Observer and pseudo-differentiator cutoff per joint (rad/s).
    pub cutoff: JointVec,
    /// Gravitational acceleration (m/s²).
    pub gravity: f64,
    /// Lower clamp on every diagonal inertia entry (kg·m²).
    pub inertia_floor: f64,
    /// Distal segment length used by the planar projection (m).
    pub distal_length: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            mass2: 0.0128,
            mass3: 0.0,
            mass4: 0.4505,
            com2: 0.0002,
            com3: 0.0262,
            com4: 0.2865,
            link24: 0.25,
            len2: 0.25,
            len3: 0.0,
            inertia_x2: 0.0197,
            inertia_x3: 0.0197,
            inertia_y2: 0.0008,
            distal_inertia: [0.0370, 0.0054, 0.0066, 0.0049, 0.0055],
            friction: JointVec::new([0.0443, 0.2343, 0.0501, 0.1820, 0.0122, 0.0196, 0.0170, 0.0105]),
            cutoff: JointVec::new([10.0, 15.0, 10.0, 15.0, 90.0, 90.0, 90.0, 90.0]),
            gravity: 9.81,
            inertia_floor: 0.002,
            distal_length: 0.2865,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("mass2", self.mass2),
            ("mass3", self.mass3),
            ("mass4", self.mass4),
            ("com2", self.com2),
            ("com3", self.com3),
            ("com4", self.com4),
            ("link24", self.link24),
            ("len2", self.len2),
            ("len3", self.len3),
            ("inertia_x2", self.inertia_x2),
            ("inertia_x3", self.inertia_x3),
            ("inertia_y2", self.inertia_y2),
            ("gravity", self.gravity),
            ("distal_length", self.distal_length),
        ];
        for (name, v) in scalars {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.distal_inertia.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config("distal_inertia entries must be >= 0".into()));
        }
        if !(self.inertia_floor.is_finite() && self.inertia_floor > 0.0) {
            return Err(Error::Config("inertia_floor must be > 0".into()));
        }
        for i in 0..JOINTS {
            if !self.friction[i].is_finite() || self.friction[i] < 0.0 {
                return Err(Error::Config(format!("friction[{i}] must be >= 0")));
            }
            if !self.cutoff[i].is_finite() || self.cutoff[i] <= 0.0 {
                return Err(Error::Config(format!("cutoff[{i}] must be > 0")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RobotParams::default().validate().unwrap();
    }

    #[test]
    fn reference_cutoffs() {
        let p = RobotParams::default();
        assert_eq!(p.cutoff[0], 10.0);
        assert_eq!(p.cutoff[4], 90.0);
    }

    #[test]
    fn rejects_negative_mass_and_zero_floor() {
        let mut p = RobotParams::default();
        p.mass4 = -1.0;
        assert!(p.validate().is_err());
        let mut p = RobotParams::default();
        p.inertia_floor = 0.0;
        assert!(p.validate().is_err());
    }
}
