//! Recorded motion data: per-step follower command values at the control rate.
//!
//! Text format (see `docs/tape-format.md`):
//!
//! ```text
//! # retouch-tape v1, dt=0.002, factor=1
//! # source=teach
//! step,t,q1,...,q8,dq1,...,dq8,tau1,...,tau8
//! 0,0,...
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so save followed by load
//! is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::CommandFrame;
use crate::error::{Error, Result};
use crate::joint::{JointVec, JOINTS};

pub const SCHEMA_VERSION: u32 = 1;
/// Data columns per row: step, t and three joint vectors.
pub const TAPE_COLUMNS: usize = 2 + 3 * JOINTS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TapeMeta {
    pub dt: f64,
    pub joint_count: usize,
    pub speed_factor: u32,
    pub source: String,
    pub schema_version: u32,
}

impl TapeMeta {
    pub fn new(dt: f64, source: impl Into<String>) -> Self {
        TapeMeta { dt, joint_count: JOINTS, speed_factor: 1, source: source.into(), schema_version: SCHEMA_VERSION }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TapeSample {
    pub step: usize,
    pub t: f64,
    pub frame: CommandFrame,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tape {
    pub meta: TapeMeta,
    samples: Vec<TapeSample>,
}

/// Result of [`Tape::sample_at`]: the frame and whether playback has run past
/// the last sample and is holding it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Playback {
    pub frame: CommandFrame,
    pub past_end: bool,
}

impl Tape {
    pub fn new(dt: f64, source: impl Into<String>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Tape(format!("dt must be > 0, got {dt}")));
        }
        Ok(Tape { meta: TapeMeta::new(dt, source), samples: Vec::new() })
    }

    pub fn samples(&self) -> &[TapeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.meta.dt
    }

    /// Time from the first sample to the last, `(len − 1)·dt`.
    pub fn duration(&self) -> f64 {
        self.samples.len().saturating_sub(1) as f64 * self.meta.dt
    }

    /// Append a frame recorded at time `t`, which must be within `dt/2` of
    /// `step · dt` for the next step index.
    pub fn append_sample(&mut self, frame: CommandFrame, t: f64) -> Result<()> {
        let step = self.samples.len();
        let expected = step as f64 * self.meta.dt;
        if !t.is_finite() || (t - expected).abs() > self.meta.dt / 2.0 {
            return Err(Error::Tape(format!("sample {step} stamped t={t}, expected {expected} (dt={})", self.meta.dt)));
        }
        if !(frame.q_cmd.is_finite() && frame.dq_cmd.is_finite() && frame.tau_cmd.is_finite()) {
            return Err(Error::Tape(format!("sample {step} has non-finite values")));
        }
        self.samples.push(TapeSample { step, t: expected, frame });
        Ok(())
    }

    /// Zero-order-hold playback. Steps past the end return the last sample.
    pub fn sample_at(&self, step: usize) -> Result<Playback> {
        let last = self.samples.last().ok_or_else(|| Error::Tape("empty tape".into()))?;
        Ok(match self.samples.get(step) {
            Some(s) => Playback { frame: s.frame, past_end: false },
            None => Playback { frame: last.frame, past_end: true },
        })
    }

    /// Keep every `k`-th sample, re-stamp at the original `dt`, and scale
    /// only the velocity commands by `k`.
    pub fn speed_up(&self, k: u32) -> Result<Tape> {
        if k == 0 {
            return Err(Error::InvalidArgument("speed-up factor must be >= 1".into()));
        }
        if self.is_empty() {
            return Err(Error::Tape("cannot speed up an empty tape".into()));
        }
        let scale = k as f64;
        let samples = self
            .samples
            .iter()
            .step_by(k as usize)
            .enumerate()
            .map(|(i, s)| TapeSample {
                step: i,
                t: i as f64 * self.meta.dt,
                frame: CommandFrame {
                    q_cmd: s.frame.q_cmd,
                    dq_cmd: if k == 1 { s.frame.dq_cmd } else { s.frame.dq_cmd * scale },
                    tau_cmd: s.frame.tau_cmd,
                },
            })
            .collect();
        let mut meta = self.meta.clone();
        meta.speed_factor *= k;
        Ok(Tape { meta, samples })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(64 + self.samples.len() * 400);
        let _ = writeln!(
            out,
            "# retouch-tape v{}, dt={}, factor={}",
            self.meta.schema_version, self.meta.dt, self.meta.speed_factor
        );
        if !self.meta.source.is_empty() {
            let _ = writeln!(out, "# source={}", self.meta.source);
        }
        out.push_str(&column_names());
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{},{}", s.step, s.t);
            for v in [&s.frame.q_cmd, &s.frame.dq_cmd, &s.frame.tau_cmd] {
                for x in v.iter() {
                    let _ = write!(out, ",{x}");
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Tape> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file, &path.display().to_string())
    }

    /// Parse a tape from a reader; `origin` names the source in errors.
    pub fn parse(reader: impl Read, origin: &str) -> Result<Tape> {
        let err = |line: usize, msg: String| Error::Parse { path: origin.to_string(), line, msg };
        let mut lines = BufReader::new(reader).lines().enumerate();

        let (_, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
        let header = header?;
        let (version, dt, factor) = parse_header(&header).map_err(|m| err(1, m))?;
        let mut meta = TapeMeta::new(dt, "");
        meta.schema_version = version;
        meta.speed_factor = factor;

        let mut samples = Vec::new();
        let mut seen_columns = false;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(src) = rest.strip_prefix("source=") {
                    meta.source = src.to_string();
                }
                continue;
            }
            if !seen_columns {
                if line != column_names() {
                    return Err(err(line_no, format!("expected column header `{}`", column_names())));
                }
                seen_columns = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != TAPE_COLUMNS {
                return Err(err(line_no, format!("expected {TAPE_COLUMNS} columns, found {}", fields.len())));
            }
            let step: usize =
                fields[0].trim().parse().map_err(|_| err(line_no, format!("bad step `{}`", fields[0])))?;
            if step != samples.len() {
                return Err(err(line_no, format!("non-monotone step: expected {}, found {step}", samples.len())));
            }
            let mut values = [0.0; TAPE_COLUMNS - 1];
            for (slot, field) in values.iter_mut().zip(&fields[1..]) {
                *slot = field
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(line_no, format!("bad number `{field}`")))?;
            }
            let t = values[0];
            let expected = step as f64 * dt;
            if (t - expected).abs() > dt / 2.0 {
                return Err(err(line_no, format!("time {t} inconsistent with step {step}·dt")));
            }
            let vec_at =
                |k: usize| JointVec::from_slice(&values[1 + k * JOINTS..1 + (k + 1) * JOINTS]).expect("8 values");
            samples.push(TapeSample {
                step,
                t,
                frame: CommandFrame { q_cmd: vec_at(0), dq_cmd: vec_at(1), tau_cmd: vec_at(2) },
            });
        }
        if !seen_columns {
            return Err(err(2, "missing column header".into()));
        }
        Ok(Tape { meta, samples })
    }

    /// Bitwise comparison of every stored value.
    pub fn bit_eq(&self, other: &Tape) -> bool {
        self.meta == other.meta
            && self.samples.len() == other.samples.len()
            && self.samples.iter().zip(&other.samples).all(|(a, b)| {
                a.step == b.step
                    && a.t.to_bits() == b.t.to_bits()
                    && a.frame.q_cmd.bit_eq(&b.frame.q_cmd)
                    && a.frame.dq_cmd.bit_eq(&b.frame.dq_cmd)
                    && a.frame.tau_cmd.bit_eq(&b.frame.tau_cmd)
            })
    }
}

pub fn column_names() -> String {
    let mut cols = vec!["step".to_string(), "t".to_string()];
    for prefix in ["q", "dq", "tau"] {
        cols.extend((1..=JOINTS).map(|j| format!("{prefix}{j}")));
    }
    cols.join(",")
}

fn parse_header(line: &str) -> std::result::Result<(u32, f64, u32), String> {
    let bad = || format!("malformed header `{line}`, expected `# retouch-tape v1, dt=<dt>, factor=<k>`");
    let rest = line.strip_prefix("# retouch-tape v").ok_or_else(bad)?;
    let mut parts = rest.split(',').map(str::trim);
    let version: u32 = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    if version != SCHEMA_VERSION {
        return Err(format!("unsupported tape schema version {version}"));
    }
    let dt: f64 = parts
        .next()
        .and_then(|p| p.strip_prefix("dt="))
        .and_then(|v| v.parse().ok())
        .filter(|v: &f64| v.is_finite() && *v > 0.0)
        .ok_or_else(bad)?;
    let factor: u32 = parts
        .next()
        .and_then(|p| p.strip_prefix("factor="))
        .and_then(|v| v.parse().ok())
        .filter(|k| *k >= 1)
        .ok_or_else(bad)?;
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((version, dt, factor))
}
