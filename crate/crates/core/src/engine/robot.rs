//! One simulated robot: plant state, observer bank and the torque applied
//! over the previous period.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::control::{ControlOutput, UnitResponse};
use crate::error::{Error, Result};
use crate::joint::JointVec;
use crate::model::{gravity_unchecked, inertia_unchecked, step_dynamics, RobotParams, RobotState};
use crate::observers::ObserverBank;

/// Angle quantizer with seeded dither.
#[derive(Clone, Debug)]
pub struct SensorNoise {
    pub quantization: f64,
    rng: ChaCha8Rng,
}

impl SensorNoise {
    pub fn new(quantization: f64, rng: ChaCha8Rng) -> Self {
        SensorNoise { quantization, rng }
    }

    fn measure(&mut self, q: &JointVec) -> JointVec {
        let step = self.quantization;
        let mut out = *q;
        for v in out.0.iter_mut() {
            let dither: f64 = self.rng.gen_range(-0.5..0.5);
            *v = ((*v / step) + dither).round() * step;
        }
        out
    }
}

/// Controller-side view of a robot after sensing.
#[derive(Clone, Copy, Debug)]
pub struct Sensed {
    pub response: UnitResponse,
    pub jn: JointVec,
    pub tau_dis: JointVec,
}

#[derive(Clone, Debug)]
pub struct SimRobot {
    pub state: RobotState,
    pub observers: ObserverBank,
    tau_prev: JointVec,
    noise: Option<SensorNoise>,
}

impl SimRobot {
    /// Robot at rest at `q0`, its last applied torque set to hold gravity.
    pub fn new(q0: JointVec, p: &RobotParams, noise: Option<SensorNoise>) -> Self {
        SimRobot {
            state: RobotState::at_rest(q0),
            observers: ObserverBank::new(p.cutoff, q0),
            tau_prev: gravity_unchecked(&q0, p),
            noise,
        }
    }

    pub fn sense(&mut self, p: &RobotParams, dt: f64) -> Sensed {
        let q = match self.noise.as_mut() {
            Some(n) => n.measure(&self.state.q),
            None => self.state.q,
        };
        let dq = self.observers.pseudo_diff_update(&q, dt);
        let jn = inertia_unchecked(&q, p);
        let friction = p.friction.hadamard(dq);
        let gravity = gravity_unchecked(&q, p);
        let comp = friction + gravity;
        let tau_dis = self.observers.dob_update(&self.tau_prev, &dq, &jn, &comp, dt);
        let tau_res = self.observers.rfob_update(&self.tau_prev, &dq, &jn, &friction, &gravity, dt);
        Sensed { response: UnitResponse { q, dq, tau_res }, jn, tau_dis }
    }

    /// Saturates `out`, advances the plant under the true reaction torque
    /// and returns the applied torque and whether it saturated.
    pub fn actuate(
        &mut self,
        out: &ControlOutput,
        tau_res: &JointVec,
        p: &RobotParams,
        dt: f64,
        step: usize,
    ) -> Result<(JointVec, bool)> {
        if let Some(joint) = out.tau_ref.first_non_finite() {
            return Err(Error::Diverged {
                step,
                detail: format!("controller produced a non-finite torque on joint {}", joint + 1),
            });
        }
        let (applied, saturated) = out.saturated();
        self.state = step_dynamics(&self.state, &applied, tau_res, p, dt).map_err(|e| match e {
            Error::Diverged { detail, .. } => Error::Diverged { step, detail },
            other => other,
        })?;
        self.tau_prev = applied;
        Ok((applied, saturated))
    }
}
