//! Simulated bilateral teaching, motion-copying playback and three-unit
//! motion retouching on an 8-joint arm with a tube-transfer task.

pub mod control;
pub mod engine;
pub mod error;
pub mod joint;
pub mod model;
pub mod observers;
pub mod tape;

pub use error::{Error, Result};
pub use joint::JointVec;
