//! Workload specs and frame arrival traces.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use super::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrivalModel {
    /// I.i.d. exponential inter-arrival gaps with mean 1/rate.
    Exponential,
    /// Fixed gaps of exactly 1/rate.
    Periodic,
}

impl ArrivalModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ArrivalModel::Exponential => "exponential",
            ArrivalModel::Periodic => "periodic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exponential" => Some(ArrivalModel::Exponential),
            "periodic" => Some(ArrivalModel::Periodic),
            _ => None,
        }
    }
}

/// How many frames of which applications arrive, and how fast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    /// (application name, frame count) pairs.
    pub entries: Vec<(String, u32)>,
    /// Frame injection rate in frames per millisecond.
    pub injection_rate: f64,
    pub arrival_model: ArrivalModel,
    pub seed: u64,
}

impl WorkloadSpec {
    pub fn total_frames(&self) -> u64 {
        self.entries.iter().map(|&(_, n)| n as u64).sum()
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.entries.is_empty() {
            return Err(AppError::BadWorkload("no applications".into()));
        }
        if self.entries.iter().any(|&(_, n)| n == 0) {
            return Err(AppError::BadWorkload("frame counts must be > 0".into()));
        }
        if !(self.injection_rate > 0.0) {
            return Err(AppError::BadWorkload("injection rate must be > 0".into()));
        }
        Ok(())
    }

    /// Same workload at a different injection rate.
    pub fn at_rate(&self, injection_rate: f64) -> Self {
        Self {
            injection_rate,
            ..self.clone()
        }
    }
}

/// One frame arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub time_us: f64,
    pub app: String,
    pub frame_id: u64,
}

/// Time-ordered materialization of a workload spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameArrivalTrace {
    pub arrivals: Vec<Arrival>,
}

impl FrameArrivalTrace {
    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// One arrival per line: `time_us,app,frame_id`.
    pub fn emit(&self) -> String {
        let mut out = String::from("format dagsched-trace 1\n");
        for a in &self.arrivals {
            let _ = writeln!(out, "{},{},{}", a.time_us, a.app, a.frame_id);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, AppError> {
        let mut arrivals = Vec::new();
        let mut saw_format = false;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_format {
                if line != "format dagsched-trace 1" {
                    return Err(AppError::Parse {
                        line: lineno,
                        msg: "expected 'format dagsched-trace 1'".into(),
                    });
                }
                saw_format = true;
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let bad = |msg: &str| AppError::Parse {
                line: lineno,
                msg: msg.into(),
            };
            let time_us: f64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad arrival time"))?;
            let app = parts.next().ok_or_else(|| bad("missing app"))?.to_string();
            let frame_id: u64 = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("bad frame id"))?;
            arrivals.push(Arrival {
                time_us,
                app,
                frame_id,
            });
        }
        Ok(Self { arrivals })
    }
}

/// Materialize a workload spec into an arrival trace.
///
/// The multiset of frames is interleaved by a seeded uniform shuffle, then
/// arrival times are assigned in shuffled order: at zero for the first frame
/// and spaced by the arrival model afterwards. Pure in the spec, including
/// its seed.
pub fn generate_trace(
    spec: &WorkloadSpec,
    known_apps: &[&str],
) -> Result<FrameArrivalTrace, AppError> {
    spec.validate()?;
    for (name, _) in &spec.entries {
        if !known_apps.iter().any(|a| a == name) {
            return Err(AppError::UnknownApp(name.clone()));
        }
    }
    let mut frames: Vec<&str> = Vec::new();
    for (name, count) in &spec.entries {
        for _ in 0..*count {
            frames.push(name);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    frames.shuffle(&mut rng);

    let mean_gap_us = 1000.0 / spec.injection_rate;
    let exp = Exp::new(1.0 / mean_gap_us).expect("positive rate");
    let mut now = 0.0;
    let arrivals = frames
        .into_iter()
        .enumerate()
        .map(|(i, app)| {
            if i > 0 {
                now += match spec.arrival_model {
                    ArrivalModel::Periodic => mean_gap_us,
                    ArrivalModel::Exponential => exp.sample(&mut rng),
                };
            }
            Arrival {
                time_us: now,
                app: app.to_string(),
                frame_id: i as u64,
            }
        })
        .collect();
    Ok(FrameArrivalTrace { arrivals })
}

/// Workload spec file format.
///
/// ```text
/// format dagsched-workload 1
/// arrival exponential
/// rate 2.5
/// seed 42
/// app WiFi-TX 69
/// ```
pub fn emit_workload(spec: &WorkloadSpec) -> String {
    let mut out = String::from("format dagsched-workload 1\n");
    let _ = writeln!(out, "arrival {}", spec.arrival_model.as_str());
    let _ = writeln!(out, "rate {}", spec.injection_rate);
    let _ = writeln!(out, "seed {}", spec.seed);
    for (name, count) in &spec.entries {
        let _ = writeln!(out, "app {name} {count}");
    }
    out
}

pub fn parse_workload(text: &str) -> Result<WorkloadSpec, AppError> {
    let mut arrival = ArrivalModel::Exponential;
    let mut rate = None;
    let mut seed = 0u64;
    let mut entries = Vec::new();
    let mut saw_format = false;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| AppError::Parse {
            line: lineno,
            msg,
        };
        if !saw_format {
            if line != "format dagsched-workload 1" {
                return Err(bad("expected 'format dagsched-workload 1'".into()));
            }
            saw_format = true;
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "arrival" => {
                let s = parts.next().ok_or_else(|| bad("missing model".into()))?;
                arrival = ArrivalModel::parse(s)
                    .ok_or_else(|| bad(format!("unknown arrival model '{s}'")))?;
            }
            "rate" => {
                rate = Some(
                    parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| bad("bad rate".into()))?,
                );
            }
            "seed" => {
                seed = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("bad seed".into()))?;
            }
            "app" => {
                let name = parts
                    .next()
                    .ok_or_else(|| bad("missing app name".into()))?
                    .to_string();
                let count: u32 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("bad frame count".into()))?;
                entries.push((name, count));
            }
            other => return Err(bad(format!("unknown keyword '{other}'"))),
        }
    }
    let spec = WorkloadSpec {
        entries,
        injection_rate: rate
            .ok_or_else(|| AppError::BadWorkload("missing 'rate' line".into()))?,
        arrival_model: arrival,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}
