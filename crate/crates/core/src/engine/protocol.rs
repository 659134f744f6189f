//! Live-session messages. One JSON object per WebSocket text frame, tagged
//! by `type`. Field layout is documented in `docs/protocol.md`.

use serde::{Deserialize, Serialize};

use super::log::Role;
use crate::error::{Error, Result};
use crate::joint::JointVec;
use crate::model::ContactInfo;

/// Client to server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Intervene(Intervene),
    Control(Control),
}

/// Editor push, either joint torques or a planar force at the tube tip.
/// Exactly one of `torque` and `drag` is set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intervene {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    /// Client wall clock at send time, Unix milliseconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sent_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque: Option<JointVec>,
    /// Planar force (N) in the arm plane, x then y.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag: Option<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlAction {
    Start,
    Pause,
    Resume,
    Save,
    Quit,
    SetAlpha,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Control {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    pub action: ControlAction,
    /// Required for `set_alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self> {
        let msg: ClientMessage = serde_json::from_str(text).map_err(|e| Error::Protocol(e.to_string()))?;
        msg.validate()?;
        Ok(msg)
    }

    pub fn seq(&self) -> Option<u64> {
        match self {
            ClientMessage::Intervene(m) => m.seq,
            ClientMessage::Control(m) => m.seq,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ClientMessage::Intervene(m) => match (&m.torque, &m.drag) {
                (Some(t), None) if t.is_finite() => Ok(()),
                (None, Some(d)) if d.iter().all(|v| v.is_finite()) => Ok(()),
                (Some(_), Some(_)) | (None, None) => {
                    Err(Error::Protocol("intervene needs exactly one of torque, drag".into()))
                }
                _ => Err(Error::Protocol("intervene values must be finite".into())),
            },
            ClientMessage::Control(c) => match (c.action, c.alpha) {
                (ControlAction::SetAlpha, Some(a)) if (0.0..=1.0).contains(&a) => Ok(()),
                (ControlAction::SetAlpha, _) => Err(Error::Protocol("set_alpha needs alpha in [0, 1]".into())),
                (_, Some(_)) => Err(Error::Protocol("alpha is only valid with set_alpha".into())),
                _ => Ok(()),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client message serializes")
    }
}

/// Server to client.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State(Snapshot),
    Ack(Ack),
    Error(ErrorReply),
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server message serializes")
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Protocol(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotSnapshot {
    pub role: String,
    pub q: JointVec,
    pub dq: JointVec,
    pub tau_res: JointVec,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionConfigView {
    pub alpha: f64,
    pub dt: f64,
    pub decimation: usize,
    pub speed_factor: u32,
    pub total_steps: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    /// Interventions older than the staleness limit when they reached a tick.
    pub stale_dropped: u64,
    /// Malformed or invalid client messages.
    pub rejected: u64,
    /// Interventions whose torque hit the clamp on some joint.
    pub clamped: u64,
    /// Snapshots not sent because the outbound queue was full.
    pub snapshots_dropped: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub paused: bool,
    pub finished: bool,
    pub config: SessionConfigView,
    pub robots: Vec<RobotSnapshot>,
    pub contact: ContactInfo,
    pub intervention: JointVec,
    pub stats: SessionStats,
}

impl RobotSnapshot {
    pub fn new(role: Role, q: JointVec, dq: JointVec, tau_res: JointVec) -> Self {
        RobotSnapshot { role: role.as_str().to_string(), q, dq, tau_res }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    /// `intervene` or the control action name.
    pub action: String,
    /// Step at which the message took effect.
    pub step: usize,
    /// Torque actually applied, after mapping and clamping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applied: Option<JointVec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeline: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReply {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    pub reason: String,
}
