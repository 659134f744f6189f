//! Teaching, motion-copying and retouching runs.

use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::log::{evaluate_success, RobotRecord, Role, RunLog, RunMode, StepRecord, SuccessReport};
use super::robot::{Sensed, SensorNoise, SimRobot};
use super::scenario::{InterventionProfile, Scenario};
use super::timeline::{InterventionTimeline, TimelineAction};
use crate::control::{bilateral_4ch_step, motion_copy_step, retouch_step, CommandFrame, ControlOutput, Gains};
use crate::error::{Error, Result};
use crate::joint::JointVec;
use crate::model::{contact_torque, ContactInfo, TubeState};
use crate::tape::Tape;

/// Sleeps so that step `k` starts no earlier than `k·dt` after the first.
pub(crate) struct Pacer {
    start: Option<Instant>,
    dt: f64,
}

impl Pacer {
    pub(crate) fn new(enabled: bool, dt: f64) -> Self {
        Pacer { start: enabled.then(Instant::now), dt }
    }

    /// Pacer for a loop resuming at step `k` now.
    pub(crate) fn resume_at(enabled: bool, dt: f64, k: usize) -> Self {
        Pacer {
            start: enabled.then(|| {
                let now = Instant::now();
                now.checked_sub(Duration::from_secs_f64(k as f64 * dt)).unwrap_or(now)
            }),
            dt,
        }
    }

    pub(crate) fn wait(&self, step: usize) {
        if let Some(start) = self.start {
            let due = start + Duration::from_secs_f64(step as f64 * self.dt);
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
    }
}

fn sensor_noise(sc: &Scenario, seed: u64, role: Role) -> Option<SensorNoise> {
    sc.noise.enabled.then(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(role as u64);
        SensorNoise::new(sc.noise.quantization, rng)
    })
}

fn robot_record(sensed: &Sensed, tau_ext: JointVec, output: ControlOutput, applied: JointVec) -> RobotRecord {
    RobotRecord {
        q: sensed.response.q,
        dq: sensed.response.dq,
        tau_res: sensed.response.tau_res,
        tau_ext,
        output,
        applied,
    }
}

fn tape_record(frame: &CommandFrame) -> RobotRecord {
    RobotRecord { q: frame.q_cmd, dq: frame.dq_cmd, tau_res: frame.tau_cmd, ..RobotRecord::default() }
}

/// Frame to track at step `k`; past the end the last pose is held at rest.
fn playback(tape: &Tape, k: usize) -> Result<CommandFrame> {
    let pb = tape.sample_at(k)?;
    let mut frame = pb.frame;
    if pb.past_end {
        frame.dq_cmd = JointVec::ZERO;
    }
    Ok(frame)
}

fn check_tape(tape: &Tape, sc: &Scenario) -> Result<()> {
    if tape.is_empty() {
        return Err(Error::Tape("tape has no samples".into()));
    }
    if (tape.dt() - sc.dt).abs() > 1e-12 * sc.dt {
        return Err(Error::Config(format!("tape dt {} differs from scenario dt {}", tape.dt(), sc.dt)));
    }
    Ok(())
}

/// Follower contact step: reaction torque, contact summary and the tube
/// state for the next step, all evaluated before the plant moves.
fn follower_contact(robot: &SimRobot, tube: &TubeState, sc: &Scenario) -> (JointVec, ContactInfo, TubeState) {
    let (tau, info) = contact_torque(&robot.state, &sc.env, &sc.params, tube);
    let next = tube.advance(&robot.state, &sc.env, &sc.params, &info);
    (tau, info, next)
}

#[derive(Clone, Debug)]
pub struct TeachRun {
    pub tape: Tape,
    pub log: RunLog,
    pub report: SuccessReport,
}

/// Bilateral teaching: the scripted hand moves the leader while the follower
/// handles the tube. The leader's responses are recorded as the tape.
pub fn run_teach(sc: &Scenario) -> Result<TeachRun> {
    sc.validate()?;
    let (p, dt) = (&sc.params, sc.dt);
    let q0 = sc.hand.start_pose();
    let mut leader = SimRobot::new(q0, p, sensor_noise(sc, sc.seed, Role::Leader));
    let mut follower = SimRobot::new(q0, p, sensor_noise(sc, sc.seed, Role::Follower));
    let mut tube = TubeState::InRack;
    let mut tape = Tape::new(dt, "teach")?;
    let mut log = RunLog::new(RunMode::Teach, dt, sc.seed, sc.hash(), vec![Role::Leader, Role::Follower]);
    let pacer = Pacer::new(sc.realtime, dt);
    for k in 0..sc.steps() {
        pacer.wait(k);
        let t = k as f64 * dt;
        let sl = leader.sense(p, dt);
        let sf = follower.sense(p, dt);
        let (out_l, out_f) =
            bilateral_4ch_step(&sl.response, &sf.response, &sc.gains, &sl.jn, &sf.jn, &sl.tau_dis, &sf.tau_dis);
        tape.append_sample(sl.response.as_command(), t)?;
        let hand = -sc.hand.torque(t, &leader.state);
        let (env_tau, contact, next_tube) = follower_contact(&follower, &tube, sc);
        let (app_l, sat_l) = leader.actuate(&out_l, &hand, p, dt, k)?;
        let (app_f, sat_f) = follower.actuate(&out_f, &env_tau, p, dt, k)?;
        tube = next_tube;
        log.records.push(StepRecord {
            step: k,
            t,
            robots: vec![robot_record(&sl, hand, out_l, app_l), robot_record(&sf, env_tau, out_f, app_f)],
            contact,
            intervention: JointVec::ZERO,
            saturated: sat_l || sat_f,
        });
    }
    let report = evaluate_success(&log, &sc.env);
    Ok(TeachRun { tape, log, report })
}

#[derive(Clone, Debug)]
pub struct CopyRun {
    pub log: RunLog,
    pub report: SuccessReport,
}

/// Motion-copying playback of `tape` on a fresh follower, followed by
/// `settle_time` holding the last frame. `seed` drives the sensor noise.
pub fn run_copy(tape: &Tape, sc: &Scenario, seed: u64) -> Result<CopyRun> {
    sc.validate()?;
    check_tape(tape, sc)?;
    let (p, dt) = (&sc.params, sc.dt);
    let q0 = tape.samples()[0].frame.q_cmd;
    let mut follower = SimRobot::new(q0, p, sensor_noise(sc, seed, Role::Follower));
    let mut tube = TubeState::InRack;
    let mut log = RunLog::new(RunMode::Copy, dt, seed, sc.hash(), vec![Role::Leader, Role::Follower]);
    let pacer = Pacer::new(sc.realtime, dt);
    for k in 0..tape.len() + sc.settle_steps() {
        pacer.wait(k);
        let frame = playback(tape, k)?;
        let sf = follower.sense(p, dt);
        let out = motion_copy_step(&frame, &sf.response, &sc.gains, &sf.jn, &sf.tau_dis);
        let (env_tau, contact, next_tube) = follower_contact(&follower, &tube, sc);
        let (applied, saturated) = follower.actuate(&out, &env_tau, p, dt, k)?;
        tube = next_tube;
        log.records.push(StepRecord {
            step: k,
            t: k as f64 * dt,
            robots: vec![tape_record(&frame), robot_record(&sf, env_tau, out, applied)],
            contact,
            intervention: JointVec::ZERO,
            saturated,
        });
    }
    let report = evaluate_success(&log, &sc.env);
    Ok(CopyRun { log, report })
}

/// Where the editor's external torque comes from in a scripted retouch run.
#[derive(Clone, Copy, Debug)]
pub enum InterventionSource<'a> {
    None,
    Profile(&'a InterventionProfile),
    Timeline(&'a InterventionTimeline),
}

#[derive(Clone, Debug)]
pub struct RetouchRun {
    pub tape: Tape,
    pub log: RunLog,
    pub report: SuccessReport,
    pub timeline: InterventionTimeline,
}

/// Step-wise retouch simulation: tape leader, follower and editor.
///
/// The new tape records, per step, the follower's position target
/// `α·q_e + (1 − α)·q_l` (and likewise for velocity) with the force command
/// `τ_l + τ_e`, so that copying it reproduces the retouched loop.
pub struct RetouchSim<'a> {
    tape: &'a Tape,
    sc: &'a Scenario,
    gains: Gains,
    follower: SimRobot,
    editor: SimRobot,
    tube: TubeState,
    out: Tape,
    log: RunLog,
    timeline: InterventionTimeline,
    held_torque: JointVec,
    step: usize,
    total: usize,
    pacer: Pacer,
}

impl<'a> RetouchSim<'a> {
    pub fn new(tape: &'a Tape, sc: &'a Scenario) -> Result<Self> {
        sc.validate()?;
        check_tape(tape, sc)?;
        let p = &sc.params;
        let q0 = tape.samples()[0].frame.q_cmd;
        let mut out = Tape::new(sc.dt, "retouch")?;
        out.meta.speed_factor = tape.meta.speed_factor;
        Ok(RetouchSim {
            tape,
            sc,
            gains: sc.gains,
            follower: SimRobot::new(q0, p, sensor_noise(sc, sc.seed, Role::Follower)),
            editor: SimRobot::new(q0, p, sensor_noise(sc, sc.seed, Role::Editor)),
            tube: TubeState::InRack,
            out,
            log: RunLog::new(
                RunMode::Retouch,
                sc.dt,
                sc.seed,
                sc.hash(),
                vec![Role::Leader, Role::Follower, Role::Editor],
            ),
            timeline: InterventionTimeline::default(),
            held_torque: JointVec::ZERO,
            step: 0,
            total: tape.len() + sc.settle_steps(),
            pacer: Pacer::new(sc.realtime, sc.dt),
        })
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn total_steps(&self) -> usize {
        self.total
    }

    pub fn finished(&self) -> bool {
        self.step >= self.total
    }

    pub fn alpha(&self) -> f64 {
        self.gains.alpha
    }

    pub fn scenario(&self) -> &Scenario {
        self.sc
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn retouched_tape(&self) -> &Tape {
        &self.out
    }

    pub fn timeline(&self) -> &InterventionTimeline {
        &self.timeline
    }

    pub fn editor_state(&self) -> &crate::model::RobotState {
        &self.editor.state
    }

    /// Editor torque held from the next step on. Recorded in the timeline.
    pub fn set_intervention(&mut self, torque: JointVec) -> Result<()> {
        if let Some(j) = torque.first_non_finite() {
            return Err(Error::NonFinite { what: "intervention torque", joint: j });
        }
        if !torque.bit_eq(&self.held_torque) {
            self.held_torque = torque;
            self.timeline.push(self.step, TimelineAction::Torque { torque });
        }
        Ok(())
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        let mut g = self.gains;
        g.alpha = alpha;
        g.validate()?;
        self.gains = g;
        self.timeline.push(self.step, TimelineAction::SetAlpha { alpha });
        Ok(())
    }

    /// Advance one control period. `profile` adds a scripted torque on top of
    /// the held intervention.
    pub fn step(&mut self, profile: Option<&InterventionProfile>) -> Result<()> {
        if self.finished() {
            return Err(Error::InvalidArgument("retouch run already finished".into()));
        }
        let k = self.step;
        self.pacer.wait(k);
        let (p, dt) = (&self.sc.params, self.sc.dt);
        let t = k as f64 * dt;
        let frame = playback(self.tape, k)?;
        let sf = self.follower.sense(p, dt);
        let se = self.editor.sense(p, dt);
        let (out_f, out_e) =
            retouch_step(&frame, &sf.response, &se.response, &self.gains, &sf.jn, &se.jn, &sf.tau_dis, &se.tau_dis);
        if k < self.tape.len() {
            let a = self.gains.alpha;
            let blend = |e: f64, l: f64| a * e + (1.0 - a) * l;
            let retouched = CommandFrame {
                q_cmd: se.response.q.zip_map(frame.q_cmd, blend),
                dq_cmd: se.response.dq.zip_map(frame.dq_cmd, blend),
                tau_cmd: frame.tau_cmd + se.response.tau_res,
            };
            self.out.append_sample(retouched, t)?;
        }
        let scripted = profile.map_or(JointVec::ZERO, |pr| pr.torque(t, &self.editor.state, &frame));
        let push = self.held_torque + scripted;
        let editor_res = -push;
        let (env_tau, contact, next_tube) = follower_contact(&self.follower, &self.tube, self.sc);
        let (app_f, sat_f) = self.follower.actuate(&out_f, &env_tau, p, dt, k)?;
        let (app_e, sat_e) = self.editor.actuate(&out_e, &editor_res, p, dt, k)?;
        self.tube = next_tube;
        self.log.records.push(StepRecord {
            step: k,
            t,
            robots: vec![
                tape_record(&frame),
                robot_record(&sf, env_tau, out_f, app_f),
                robot_record(&se, editor_res, out_e, app_e),
            ],
            contact,
            intervention: push,
            saturated: sat_f || sat_e,
        });
        self.step += 1;
        Ok(())
    }

    pub fn finish(self) -> RetouchRun {
        let report = evaluate_success(&self.log, &self.sc.env);
        RetouchRun { tape: self.out, log: self.log, report, timeline: self.timeline }
    }
}

/// Scripted retouch of `tape` to completion.
pub fn run_retouch(tape: &Tape, sc: &Scenario, source: InterventionSource<'_>) -> Result<RetouchRun> {
    let mut sim = RetouchSim::new(tape, sc)?;
    let horizon = tape.duration() + sc.settle_time;
    let profile = match source {
        InterventionSource::Profile(pr) => {
            pr.validate(horizon)?;
            Some(pr)
        }
        InterventionSource::Timeline(tl) => {
            tl.validate()?;
            None
        }
        InterventionSource::None => None,
    };
    let mut cursor = 0;
    while !sim.finished() {
        if let InterventionSource::Timeline(tl) = source {
            for event in tl.due(sim.step_index(), &mut cursor) {
                match &event.action {
                    TimelineAction::Torque { torque } => sim.set_intervention(*torque)?,
                    TimelineAction::SetAlpha { alpha } => sim.set_alpha(*alpha)?,
                }
            }
        }
        sim.step(profile)?;
    }
    Ok(sim.finish())
}
