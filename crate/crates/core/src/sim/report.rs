//! Per-frame simulation reports, aggregates, and the job-slowdown metric.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SimError;

/// Timing and energy of one completed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRow {
    pub frame_id: u64,
    pub app: String,
    pub arrival_us: f64,
    pub completion_us: f64,
    pub latency_us: f64,
    pub energy_uj: f64,
}

/// Wall-clock statistics of scheduler invocations. These are the only
/// non-deterministic fields of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClockStats {
    pub decision_ns_mean: f64,
    pub decision_ns_median: f64,
    pub decision_ns_p99: f64,
}

impl WallClockStats {
    pub fn from_samples(samples: &[u64]) -> Self {
        if samples.is_empty() {
            return Self {
                decision_ns_mean: 0.0,
                decision_ns_median: 0.0,
                decision_ns_p99: 0.0,
            };
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let mean = sorted.iter().sum::<u64>() as f64 / sorted.len() as f64;
        Self {
            decision_ns_mean: mean,
            decision_ns_median: percentile(&sorted, 0.5),
            decision_ns_p99: percentile(&sorted, 0.99),
        }
    }
}

pub(crate) fn percentile(sorted: &[u64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx.min(sorted.len() - 1)] as f64
}

/// Output of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub format: String,
    pub version: u32,
    pub platform: String,
    pub scheduler: String,
    pub noise_pct: f64,
    pub seed: u64,
    /// Fingerprint of the driving trace; slowdown comparisons require a match.
    pub trace_fingerprint: u64,
    pub frames: Vec<FrameRow>,
    pub decisions: u64,
    pub avg_latency_us: f64,
    pub avg_energy_uj: f64,
    pub edp: f64,
    pub ed2p: f64,
    pub wall_clock: WallClockStats,
}

impl SimReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        platform: String,
        scheduler: String,
        noise_pct: f64,
        seed: u64,
        trace_fingerprint: u64,
        frames: Vec<FrameRow>,
        decisions: u64,
        decision_wall_ns: Vec<u64>,
    ) -> Self {
        let n = frames.len().max(1) as f64;
        let avg_latency_us = frames.iter().map(|f| f.latency_us).sum::<f64>() / n;
        let avg_energy_uj = frames.iter().map(|f| f.energy_uj).sum::<f64>() / n;
        Self {
            format: "dagsched-report".to_string(),
            version: 1,
            platform,
            scheduler,
            noise_pct,
            seed,
            trace_fingerprint,
            frames,
            decisions,
            avg_latency_us,
            avg_energy_uj,
            edp: avg_energy_uj * avg_latency_us,
            ed2p: avg_energy_uj * avg_latency_us * avg_latency_us,
            wall_clock: WallClockStats::from_samples(&decision_wall_ns),
        }
    }

    /// Aggregate value for an optimization objective.
    pub fn objective_value(&self, objective: crate::oracle::Objective) -> f64 {
        use crate::oracle::Objective::*;
        match objective {
            Performance => self.avg_latency_us,
            Energy => self.avg_energy_uj,
            Edp => self.edp,
            Ed2p => self.ed2p,
        }
    }

    /// One frame per row: `frame_id,app,arrival_us,completion_us,latency_us,energy_uj`.
    /// Metadata comments make the file self-describing for `compare`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# dagsched-report 1\n");
        let _ = writeln!(
            out,
            "# platform={} scheduler={} noise_pct={} seed={} trace_fingerprint={:016x} decisions={}",
            self.platform, self.scheduler, self.noise_pct, self.seed, self.trace_fingerprint,
            self.decisions
        );
        out.push_str("frame_id,app,arrival_us,completion_us,latency_us,energy_uj\n");
        for f in &self.frames {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                f.frame_id, f.app, f.arrival_us, f.completion_us, f.latency_us, f.energy_uj
            );
        }
        out
    }

    /// Parse a report CSV back; aggregates are recomputed from the rows and
    /// wall-clock stats are zero.
    pub fn parse_csv(text: &str) -> Result<Self, SimError> {
        let bad = |msg: &str| SimError::Scheduler(format!("report parse: {msg}"));
        let mut lines = text.lines();
        let first = lines.next().ok_or_else(|| bad("empty file"))?;
        if first.trim() != "# dagsched-report 1" {
            return Err(bad("missing '# dagsched-report 1' header"));
        }
        let mut platform = String::new();
        let mut scheduler = String::new();
        let mut noise_pct = 0.0;
        let mut seed = 0u64;
        let mut trace_fingerprint = 0u64;
        let mut decisions = 0u64;
        let mut frames = Vec::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for kv in meta.split_whitespace() {
                    if let Some((k, v)) = kv.split_once('=') {
                        match k {
                            "platform" => platform = v.to_string(),
                            "scheduler" => scheduler = v.to_string(),
                            "noise_pct" => noise_pct = v.parse().map_err(|_| bad("noise_pct"))?,
                            "seed" => seed = v.parse().map_err(|_| bad("seed"))?,
                            "trace_fingerprint" => {
                                trace_fingerprint = u64::from_str_radix(v, 16)
                                    .map_err(|_| bad("trace_fingerprint"))?
                            }
                            "decisions" => decisions = v.parse().map_err(|_| bad("decisions"))?,
                            _ => {}
                        }
                    }
                }
                continue;
            }
            if line.starts_with("frame_id,") {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 6 {
                return Err(bad("expected 6 columns"));
            }
            frames.push(FrameRow {
                frame_id: parts[0].parse().map_err(|_| bad("frame_id"))?,
                app: parts[1].to_string(),
                arrival_us: parts[2].parse().map_err(|_| bad("arrival_us"))?,
                completion_us: parts[3].parse().map_err(|_| bad("completion_us"))?,
                latency_us: parts[4].parse().map_err(|_| bad("latency_us"))?,
                energy_uj: parts[5].parse().map_err(|_| bad("energy_uj"))?,
            });
        }
        Ok(Self::new(
            platform,
            scheduler,
            noise_pct,
            seed,
            trace_fingerprint,
            frames,
            decisions,
            Vec::new(),
        ))
    }

    /// Aggregate block as JSON (excludes per-frame rows).
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Aggregate<'a> {
            format: &'a str,
            version: u32,
            platform: &'a str,
            scheduler: &'a str,
            noise_pct: f64,
            seed: u64,
            trace_fingerprint: u64,
            frames: usize,
            decisions: u64,
            avg_latency_us: f64,
            avg_energy_uj: f64,
            edp: f64,
            ed2p: f64,
            wall_clock: &'a WallClockStats,
        }
        serde_json::to_string_pretty(&Aggregate {
            format: &self.format,
            version: self.version,
            platform: &self.platform,
            scheduler: &self.scheduler,
            noise_pct: self.noise_pct,
            seed: self.seed,
            trace_fingerprint: self.trace_fingerprint,
            frames: self.frames.len(),
            decisions: self.decisions,
            avg_latency_us: self.avg_latency_us,
            avg_energy_uj: self.avg_energy_uj,
            edp: self.edp,
            ed2p: self.ed2p,
            wall_clock: &self.wall_clock,
        })
        .expect("report serializes")
    }
}

/// Job slowdown of `a` relative to `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slowdown {
    /// Mean over frames of latency_a / latency_b.
    pub per_frame_mean: f64,
    /// Ratio of average latencies.
    pub aggregate_ratio: f64,
}

/// Compare two reports covering the identical trace.
pub fn slowdown(a: &SimReport, b: &SimReport) -> Result<Slowdown, SimError> {
    if a.trace_fingerprint != b.trace_fingerprint || a.frames.len() != b.frames.len() {
        return Err(SimError::TraceMismatch);
    }
    let mut sum = 0.0;
    for (fa, fb) in a.frames.iter().zip(&b.frames) {
        if fa.frame_id != fb.frame_id || fa.app != fb.app {
            return Err(SimError::TraceMismatch);
        }
        sum += fa.latency_us / fb.latency_us;
    }
    Ok(Slowdown {
        per_frame_mean: sum / a.frames.len().max(1) as f64,
        aggregate_ratio: a.avg_latency_us / b.avg_latency_us,
    })
}
