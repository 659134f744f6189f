//! C ABI over the simulator.
//!
//! Objects cross the boundary as opaque handles created by `mr_*_new`/`load`
//! functions and released with the matching `mr_*_free`. Every fallible call
//! returns an [`MrStatus`]; on failure the message is available from
//! [`mr_last_error_message`] on the same thread until the next failing call.
//! Panics are caught at the boundary and reported as `MR_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use motion_retouch::engine::{
    run_copy, run_retouch, run_teach, FailureReason, InterventionProfile, InterventionSource, Scenario, SuccessReport,
};
use motion_retouch::tape::Tape;
use motion_retouch::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Tape = 3,
    Parse = 4,
    Config = 5,
    Io = 6,
    NonFinite = 7,
    Diverged = 8,
    Panic = 9,
}

/// Task outcome of a run. `failure` is 0 on success, otherwise 1 missed
/// grasp, 2 dropped, 3 insertion failed, 4 inserted at an angle.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MrOutcome {
    pub success: bool,
    pub failure: i32,
    pub grasped: bool,
    pub final_depth: f64,
    pub max_lateral_force: f64,
}

/// Opaque scenario handle.
pub struct MrScenario(Scenario);

/// Opaque tape handle.
pub struct MrTape(Tape);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let mut msg = msg.into();
    msg.retain(|c| c != '\0');
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> MrStatus {
    match err {
        Error::NonFinite { .. } => MrStatus::NonFinite,
        Error::Diverged { .. } => MrStatus::Diverged,
        Error::InvalidArgument(_) => MrStatus::InvalidArgument,
        Error::Tape(_) => MrStatus::Tape,
        Error::Parse { .. } => MrStatus::Parse,
        Error::Config(_) => MrStatus::Config,
        Error::Protocol(_) => MrStatus::InvalidArgument,
        Error::Io { .. } | Error::Stream(_) => MrStatus::Io,
    }
}

struct Fail(MrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> MrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MrStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            MrStatus::Panic
        }
    }
}

unsafe fn arg<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(MrStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| Fail(MrStatus::NullPointer, format!("{name} is null")))
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(MrStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(MrStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn outcome(r: &SuccessReport) -> MrOutcome {
    MrOutcome {
        success: r.success,
        failure: match r.failure {
            None => 0,
            Some(FailureReason::MissedGrasp) => 1,
            Some(FailureReason::Dropped) => 2,
            Some(FailureReason::InsertionFailed) => 3,
            Some(FailureReason::InsertedAtAngleProxy) => 4,
        },
        grasped: r.grasped,
        final_depth: r.final_depth,
        max_lateral_force: r.max_lateral_force,
    }
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failing call on this thread; empty if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn mr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Built-in tube-transfer scenario.
#[no_mangle]
pub unsafe extern "C" fn mr_scenario_default(out_scenario: *mut *mut MrScenario) -> MrStatus {
    guard(|| {
        let slot = out(out_scenario, "out_scenario")?;
        *slot = boxed(MrScenario(Scenario::default()));
        Ok(())
    })
}

/// Scenario parsed from TOML text.
#[no_mangle]
pub unsafe extern "C" fn mr_scenario_from_toml(toml: *const c_char, out_scenario: *mut *mut MrScenario) -> MrStatus {
    guard(|| {
        let slot = out(out_scenario, "out_scenario")?;
        let sc = Scenario::from_toml(text(toml, "toml")?)?;
        sc.validate()?;
        *slot = boxed(MrScenario(sc));
        Ok(())
    })
}

/// Scenario loaded from a TOML file.
#[no_mangle]
pub unsafe extern "C" fn mr_scenario_load(path: *const c_char, out_scenario: *mut *mut MrScenario) -> MrStatus {
    guard(|| {
        let slot = out(out_scenario, "out_scenario")?;
        *slot = boxed(MrScenario(Scenario::load(text(path, "path")?)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mr_scenario_free(scenario: *mut MrScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Bilateral teaching run. Writes the recorded tape and the follower outcome.
/// `out_outcome` may be null.
#[no_mangle]
pub unsafe extern "C" fn mr_teach(
    scenario: *const MrScenario,
    out_tape: *mut *mut MrTape,
    out_outcome: *mut MrOutcome,
) -> MrStatus {
    guard(|| {
        let sc = &arg(scenario, "scenario")?.0;
        let slot = out(out_tape, "out_tape")?;
        let run = run_teach(sc)?;
        if let Some(o) = out_outcome.as_mut() {
            *o = outcome(&run.report);
        }
        *slot = boxed(MrTape(run.tape));
        Ok(())
    })
}

/// Motion-copying playback of `tape` with sensor-noise seed `seed`.
#[no_mangle]
pub unsafe extern "C" fn mr_copy(
    tape: *const MrTape,
    scenario: *const MrScenario,
    seed: u64,
    out_outcome: *mut MrOutcome,
) -> MrStatus {
    guard(|| {
        let tape = &arg(tape, "tape")?.0;
        let sc = &arg(scenario, "scenario")?.0;
        let slot = out(out_outcome, "out_outcome")?;
        *slot = outcome(&run_copy(tape, sc, seed)?.report);
        Ok(())
    })
}

/// Scripted retouch of `tape`. `profile_path` names an intervention profile
/// file; null means no intervention. `out_outcome` may be null.
#[no_mangle]
pub unsafe extern "C" fn mr_retouch(
    tape: *const MrTape,
    scenario: *const MrScenario,
    profile_path: *const c_char,
    out_tape: *mut *mut MrTape,
    out_outcome: *mut MrOutcome,
) -> MrStatus {
    guard(|| {
        let tape = &arg(tape, "tape")?.0;
        let sc = &arg(scenario, "scenario")?.0;
        let slot = out(out_tape, "out_tape")?;
        let profile = if profile_path.is_null() {
            None
        } else {
            Some(InterventionProfile::load(text(profile_path, "profile_path")?)?)
        };
        let source = profile.as_ref().map_or(InterventionSource::None, InterventionSource::Profile);
        let run = run_retouch(tape, sc, source)?;
        if let Some(o) = out_outcome.as_mut() {
            *o = outcome(&run.report);
        }
        *slot = boxed(MrTape(run.tape));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mr_tape_load(path: *const c_char, out_tape: *mut *mut MrTape) -> MrStatus {
    guard(|| {
        let slot = out(out_tape, "out_tape")?;
        *slot = boxed(MrTape(Tape::load(text(path, "path")?)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mr_tape_save(tape: *const MrTape, path: *const c_char) -> MrStatus {
    guard(|| {
        arg(tape, "tape")?.0.save(text(path, "path")?)?;
        Ok(())
    })
}

/// Number of samples in `tape`.
#[no_mangle]
pub unsafe extern "C" fn mr_tape_len(tape: *const MrTape, out_len: *mut usize) -> MrStatus {
    guard(|| {
        let tape = &arg(tape, "tape")?.0;
        *out(out_len, "out_len")? = tape.len();
        Ok(())
    })
}

/// New tape playing `tape` `factor` times faster.
#[no_mangle]
pub unsafe extern "C" fn mr_tape_speed_up(tape: *const MrTape, factor: u32, out_tape: *mut *mut MrTape) -> MrStatus {
    guard(|| {
        let tape = &arg(tape, "tape")?.0;
        let slot = out(out_tape, "out_tape")?;
        *slot = boxed(MrTape(tape.speed_up(factor)?));
        Ok(())
    })
}

/// Copies the commanded angles of sample `index` into `out_q[0..8]`.
#[no_mangle]
pub unsafe extern "C" fn mr_tape_angles(tape: *const MrTape, index: usize, out_q: *mut f64) -> MrStatus {
    guard(|| {
        let tape = &arg(tape, "tape")?.0;
        if out_q.is_null() {
            return Err(Fail(MrStatus::NullPointer, "out_q is null".into()));
        }
        let sample = tape.samples().get(index).ok_or_else(|| {
            Fail(MrStatus::InvalidArgument, format!("sample {index} out of range (len {})", tape.len()))
        })?;
        let q = sample.frame.q_cmd.0;
        ptr::copy_nonoverlapping(q.as_ptr(), out_q, q.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mr_tape_free(tape: *mut MrTape) {
    if !tape.is_null() {
        drop(Box::from_raw(tape));
    }
}
