//! Per-joint first-order filters, pseudo-differentiation, disturbance observer
//! and reaction force observer.
//!
//! Every filter is the forward-Euler lag `y' = y + dt·fc·(x − y)`, with the
//! same cutoff per joint shared by all three estimators. Both observers use
//! the velocity form that avoids measuring acceleration:
//!
//! ```text
//! estimate = lpf(u + fc·Jn·q̇) − fc·Jn·q̇
//! ```
//!
//! which equals `lpf(u − Jn·q̈)` in continuous time.

use serde::{Deserialize, Serialize};

use crate::joint::{JointVec, JOINTS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lpf1State {
    pub y: f64,
    pub cutoff: f64,
}

impl Lpf1State {
    pub fn new(cutoff: f64, y: f64) -> Self {
        Lpf1State { y, cutoff }
    }
}

pub fn lpf_update(st: Lpf1State, x: f64, dt: f64) -> (Lpf1State, f64) {
    let y = st.y + dt * st.cutoff * (x - st.y);
    (Lpf1State { y, cutoff: st.cutoff }, y)
}

/// Filter bank and latest estimates for one physical robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObserverBank {
    pub cutoff: JointVec,
    /// Integrator state of the pseudo-differentiator (tracks `q`).
    diff: JointVec,
    dob: JointVec,
    rfob: JointVec,
    pub dq_hat: JointVec,
    /// Sum of friction and gravity compensation and the DOB output.
    pub tau_dis_hat: JointVec,
    pub tau_res_hat: JointVec,
}

impl ObserverBank {
    /// Bank at rest at pose `q0`: zero velocity and zero estimates, with the
    /// filter states consistent with that steady state.
    pub fn new(cutoff: JointVec, q0: JointVec) -> Self {
        ObserverBank {
            cutoff,
            diff: q0,
            dob: JointVec::ZERO,
            rfob: JointVec::ZERO,
            dq_hat: JointVec::ZERO,
            tau_dis_hat: JointVec::ZERO,
            tau_res_hat: JointVec::ZERO,
        }
    }

    /// Velocity estimate `fc·(q − ŷ)`, where `ŷ` integrates the estimate
    /// itself. A ramp of slope `m` is reproduced exactly in steady state.
    pub fn pseudo_diff_update(&mut self, q_meas: &JointVec, dt: f64) -> JointVec {
        for i in 0..JOINTS {
            let fc = self.cutoff[i];
            let dq = fc * (q_meas[i] - self.diff[i]);
            self.diff[i] += dt * dq;
            self.dq_hat[i] = dq;
        }
        self.dq_hat
    }

    /// Disturbance observer. `tau_ref` is the torque applied over the last
    /// period and `comp` the friction plus gravity model; the filter sees only
    /// the part of the input the model does not explain, and the returned
    /// total is the observer output plus `comp`.
    pub fn dob_update(
        &mut self,
        tau_ref: &JointVec,
        dq_meas: &JointVec,
        jn: &JointVec,
        comp: &JointVec,
        dt: f64,
    ) -> JointVec {
        for i in 0..JOINTS {
            let fc = self.cutoff[i];
            let momentum = fc * jn[i] * dq_meas[i];
            let (st, z) = lpf_update(Lpf1State::new(fc, self.dob[i]), tau_ref[i] - comp[i] + momentum, dt);
            self.dob[i] = st.y;
            self.tau_dis_hat[i] = z - momentum + comp[i];
        }
        self.tau_dis_hat
    }

    /// Output of the DOB alone, without the model compensation.
    pub fn dob_observed(&self, comp: &JointVec) -> JointVec {
        self.tau_dis_hat - *comp
    }

    /// Reaction force observer given the friction and gravity models.
    pub fn rfob_update(
        &mut self,
        tau_ref: &JointVec,
        dq_meas: &JointVec,
        jn: &JointVec,
        friction_comp: &JointVec,
        gravity_comp: &JointVec,
        dt: f64,
    ) -> JointVec {
        for i in 0..JOINTS {
            let fc = self.cutoff[i];
            let momentum = fc * jn[i] * dq_meas[i];
            let input = tau_ref[i] + momentum - friction_comp[i] - gravity_comp[i];
            let (st, z) = lpf_update(Lpf1State::new(fc, self.rfob[i]), input, dt);
            self.rfob[i] = st.y;
            self.tau_res_hat[i] = z - momentum;
        }
        self.tau_res_hat
    }

    pub fn is_finite(&self) -> bool {
        self.dq_hat.is_finite() && self.tau_dis_hat.is_finite() && self.tau_res_hat.is_finite()
    }
}
