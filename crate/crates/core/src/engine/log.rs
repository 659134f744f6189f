//! Per-step run records, CSV export and task success evaluation.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::ControlOutput;
use crate::error::{Error, Result};
use crate::joint::{JointVec, JOINTS};
use crate::model::{ContactInfo, PegTaskEnv, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Leader,
    Follower,
    Editor,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Leader => "leader",
            Role::Follower => "follower",
            Role::Editor => "editor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Teach,
    Copy,
    Retouch,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Teach => "teach",
            RunMode::Copy => "copy",
            RunMode::Retouch => "retouch",
        }
    }
}

/// One robot at one step. For the tape leader in a retouch run the response
/// fields hold the played-back frame and the torque fields are zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RobotRecord {
    pub q: JointVec,
    pub dq: JointVec,
    /// Reaction torque estimate seen by the controller.
    pub tau_res: JointVec,
    /// True external torque acting on the plant.
    pub tau_ext: JointVec,
    pub output: ControlOutput,
    /// Torque after saturation.
    pub applied: JointVec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub robots: Vec<RobotRecord>,
    /// Contact state of the follower (the robot that handles the tube).
    pub contact: ContactInfo,
    /// Scripted or live torque on the editor (zero outside retouch runs).
    pub intervention: JointVec,
    pub saturated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub mode: RunMode,
    pub dt: f64,
    pub seed: u64,
    pub scenario_hash: String,
    pub roles: Vec<Role>,
    pub records: Vec<StepRecord>,
}

const ROBOT_FIELDS: [&str; 8] = ["q", "dq", "tau", "ext", "ref", "diff", "common", "comp"];
const CONTACT_FIELDS: [&str; 7] =
    ["in_contact", "lateral_force", "normal_force", "depth", "grip_torque", "tube_held", "region"];

impl RunLog {
    pub fn new(mode: RunMode, dt: f64, seed: u64, scenario_hash: String, roles: Vec<Role>) -> Self {
        RunLog { mode, dt, seed, scenario_hash, roles, records: Vec::new() }
    }

    pub fn role_index(&self, role: Role) -> Option<usize> {
        self.roles.iter().position(|r| *r == role)
    }

    /// Per-step records of one robot.
    pub fn robot(&self, role: Role) -> impl Iterator<Item = &RobotRecord> + '_ {
        let idx = self.role_index(role);
        self.records.iter().filter_map(move |r| idx.map(|i| &r.robots[i]))
    }

    pub fn any_saturated(&self) -> bool {
        self.records.iter().any(|r| r.saturated)
    }

    /// Bitwise equality of every logged number.
    pub fn bit_eq(&self, other: &RunLog) -> bool {
        self.to_csv() == other.to_csv()
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut cols = vec!["step".to_string(), "t".to_string()];
        for role in &self.roles {
            for field in ROBOT_FIELDS {
                for j in 1..=JOINTS {
                    cols.push(format!("{}_{field}{j}", role.as_str()));
                }
            }
        }
        cols.extend(CONTACT_FIELDS.iter().map(|s| s.to_string()));
        cols.extend((1..=JOINTS).map(|j| format!("int{j}")));
        cols.push("saturated".into());
        cols
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# retouch-log v1, mode={}, dt={}, seed={}, scenario={}",
            self.mode.as_str(),
            self.dt,
            self.seed,
            self.scenario_hash
        );
        out.push_str(&self.column_names().join(","));
        out.push('\n');
        let push_vec = |out: &mut String, v: &JointVec| {
            for x in v.iter() {
                let _ = write!(out, ",{x}");
            }
        };
        for rec in &self.records {
            let _ = write!(out, "{},{}", rec.step, rec.t);
            for r in &rec.robots {
                for v in [
                    &r.q,
                    &r.dq,
                    &r.tau_res,
                    &r.tau_ext,
                    &r.output.tau_ref,
                    &r.output.diff_mode,
                    &r.output.common_mode,
                    &r.output.compensation,
                ] {
                    push_vec(&mut out, v);
                }
            }
            let c = &rec.contact;
            let _ = write!(
                out,
                ",{},{},{},{},{},{},{}",
                c.in_contact as u8,
                c.lateral_force,
                c.normal_force,
                c.depth,
                c.grip_torque,
                c.tube_held as u8,
                c.region.code()
            );
            push_vec(&mut out, &rec.intervention);
            let _ = writeln!(out, ",{}", rec.saturated as u8);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// A run log read back from CSV as named numeric columns.
#[derive(Clone, Debug, PartialEq)]
pub struct LogTable {
    pub header: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl LogTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file, &path.display().to_string())
    }

    pub fn parse(reader: impl Read, origin: &str) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let parse_err = |line: usize, msg: String| Error::Parse { path: origin.to_string(), line, msg };
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty log".into()))?;
        let header = header?;
        if !header.starts_with("# retouch-log v1") {
            return Err(parse_err(1, format!("not a run log header: {header:?}")));
        }
        let (_, cols) = lines.next().ok_or_else(|| parse_err(2, "missing column names".into()))?;
        let columns: Vec<String> = cols?.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(idx + 1, e.to_string()))?;
            if row.len() != columns.len() {
                return Err(parse_err(idx + 1, format!("expected {} columns, found {}", columns.len(), row.len())));
            }
            rows.push(row);
        }
        Ok(LogTable { header, columns, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    MissedGrasp,
    Dropped,
    InsertionFailed,
    InsertedAtAngleProxy,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::MissedGrasp => "missed_grasp",
            FailureReason::Dropped => "dropped",
            FailureReason::InsertionFailed => "insertion_failed",
            FailureReason::InsertedAtAngleProxy => "inserted_at_angle_proxy",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub success: bool,
    pub failure: Option<FailureReason>,
    pub grasped: bool,
    pub final_region: Region,
    pub final_depth: f64,
    /// Largest lateral force while the held tube was in the target hole (N).
    pub max_lateral_force: f64,
}

/// Task outcome of a follower run. Checked in order: the tube must have been
/// grasped, must not end up outside both racks, must end released in the
/// target hole at least `insertion_depth_goal` deep, and must not have been
/// forced in harder than `lateral_force_limit`.
pub fn evaluate_success(log: &RunLog, env: &PegTaskEnv) -> SuccessReport {
    let grasped = log.records.iter().any(|r| r.contact.tube_held);
    let max_lateral_force = log
        .records
        .iter()
        .filter(|r| r.contact.tube_held && r.contact.region == Region::TargetHole)
        .map(|r| r.contact.lateral_force)
        .fold(0.0, f64::max);
    let last = log.records.last().map(|r| r.contact).unwrap_or_default();
    let failure = if !grasped {
        Some(FailureReason::MissedGrasp)
    } else if last.region == Region::Free && !last.tube_held {
        Some(FailureReason::Dropped)
    } else if last.tube_held || last.region != Region::TargetHole || last.depth < env.insertion_depth_goal {
        Some(FailureReason::InsertionFailed)
    } else if max_lateral_force > env.lateral_force_limit {
        Some(FailureReason::InsertedAtAngleProxy)
    } else {
        None
    };
    SuccessReport {
        success: failure.is_none(),
        failure,
        grasped,
        final_region: last.region,
        final_depth: last.depth,
        max_lateral_force,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(step: usize, contact: ContactInfo) -> StepRecord {
        StepRecord {
            step,
            t: step as f64 * 0.002,
            robots: vec![RobotRecord::default()],
            contact,
            intervention: JointVec::ZERO,
            saturated: false,
        }
    }

    fn log_with(contacts: &[ContactInfo]) -> RunLog {
        let mut log = RunLog::new(RunMode::Copy, 0.002, 0, "x".into(), vec![Role::Follower]);
        log.records = contacts.iter().enumerate().map(|(i, c)| record(i, *c)).collect();
        log
    }

    fn held(region: Region, depth: f64, lateral: f64) -> ContactInfo {
        ContactInfo { tube_held: true, region, depth, lateral_force: lateral, ..ContactInfo::default() }
    }

    fn released(region: Region, depth: f64) -> ContactInfo {
        ContactInfo { region, depth, ..ContactInfo::default() }
    }

    #[test]
    fn success_precedence() {
        let env = PegTaskEnv::default();
        let never = log_with(&[released(Region::SourceHole, 0.04)]);
        assert_eq!(evaluate_success(&never, &env).failure, Some(FailureReason::MissedGrasp));

        let dropped = log_with(&[held(Region::Free, 0.0, 0.0), released(Region::Free, 0.0)]);
        assert_eq!(evaluate_success(&dropped, &env).failure, Some(FailureReason::Dropped));

        let shallow = log_with(&[held(Region::TargetHole, 0.02, 1.0), released(Region::TargetHole, 0.02)]);
        assert_eq!(evaluate_success(&shallow, &env).failure, Some(FailureReason::InsertionFailed));

        let on_top = log_with(&[held(Region::Surface, 0.0, 3.0), released(Region::Surface, 0.0)]);
        assert_eq!(evaluate_success(&on_top, &env).failure, Some(FailureReason::InsertionFailed));

        let forced = log_with(&[held(Region::TargetHole, 0.035, 20.0), released(Region::TargetHole, 0.035)]);
        assert_eq!(evaluate_success(&forced, &env).failure, Some(FailureReason::InsertedAtAngleProxy));

        let good = log_with(&[held(Region::TargetHole, 0.035, 2.0), released(Region::TargetHole, 0.035)]);
        let report = evaluate_success(&good, &env);
        assert!(report.success);
        assert_eq!(report.max_lateral_force, 2.0);
    }

    #[test]
    fn csv_round_trips_through_table() {
        let log = log_with(&[held(Region::TargetHole, 0.035, 2.5), released(Region::TargetHole, 0.035)]);
        let text = log.to_csv();
        let table = LogTable::parse(text.as_bytes(), "mem").unwrap();
        assert_eq!(table.columns, log.column_names());
        assert_eq!(table.rows.len(), 2);
        assert_eq!(table.column("lateral_force").unwrap(), vec![2.5, 0.0]);
        assert_eq!(table.column("region").unwrap(), vec![2.0, 2.0]);
        assert!(table.column("follower_q9").is_none());
    }

    #[test]
    fn table_rejects_short_rows() {
        let text = "# retouch-log v1, mode=copy\nstep,t\n0\n";
        let err = LogTable::parse(text.as_bytes(), "short.csv").unwrap_err();
        assert!(err.to_string().starts_with("short.csv:3:"), "{err}");
    }
}
