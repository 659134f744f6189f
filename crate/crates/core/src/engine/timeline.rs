//! Recorded live interventions, replayable step-for-step.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint::JointVec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimelineAction {
    /// Editor torque from this step on, until replaced.
    Torque {
        torque: JointVec,
    },
    SetAlpha {
        alpha: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimelineEvent {
    /// Control step at which the event takes effect.
    pub step: usize,
    #[serde(flatten)]
    pub action: TimelineAction,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InterventionTimeline {
    pub events: Vec<TimelineEvent>,
}

impl InterventionTimeline {
    pub fn push(&mut self, step: usize, action: TimelineAction) {
        self.events.push(TimelineEvent { step, action });
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.events.windows(2) {
            if pair[1].step < pair[0].step {
                return Err(Error::Config(format!(
                    "timeline events out of order: step {} after {}",
                    pair[1].step, pair[0].step
                )));
            }
        }
        for e in &self.events {
            match &e.action {
                TimelineAction::Torque { torque } if !torque.is_finite() => {
                    return Err(Error::Config(format!("timeline step {}: non-finite torque", e.step)));
                }
                TimelineAction::SetAlpha { alpha } if !(0.0..=1.0).contains(alpha) => {
                    return Err(Error::Config(format!("timeline step {}: alpha {alpha} outside [0, 1]", e.step)));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Events taking effect at `step`, given that the first `*cursor` events
    /// have been consumed.
    pub fn due<'a>(&'a self, step: usize, cursor: &mut usize) -> &'a [TimelineEvent] {
        let start = *cursor;
        while *cursor < self.events.len() && self.events[*cursor].step <= step {
            *cursor += 1;
        }
        &self.events[start..*cursor]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("timeline serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let timeline: Self =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        timeline.validate()?;
        Ok(timeline)
    }
}
