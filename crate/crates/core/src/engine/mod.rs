//! Simulation runs built on the model, observers and control laws, plus the
//! live retouch session.

mod log;
pub mod protocol;
mod robot;
mod run;
mod scenario;
mod session;
mod timeline;

pub use log::{
    evaluate_success, FailureReason, LogTable, RobotRecord, Role, RunLog, RunMode, StepRecord, SuccessReport,
};
pub use robot::{Sensed, SensorNoise, SimRobot};
pub use run::{run_copy, run_retouch, run_teach, CopyRun, InterventionSource, RetouchRun, RetouchSim, TeachRun};
pub use scenario::{
    tube_transfer_hand, tube_transfer_keyframes, HandModel, InterventionAction, InterventionProfile,
    InterventionWindow, Keyframe, NoiseConfig, Scenario, Waypoint,
};
pub use session::{timeline_path, unix_millis, LiveConfig, LiveOutcome, LiveSession};
pub use timeline::{InterventionTimeline, TimelineAction, TimelineEvent};
