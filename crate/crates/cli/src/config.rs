//! Shared argument resolution: platforms, workloads, rates, schedulers.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dagsched_core::appgraph::{
    builtin_suite, generate_trace, mix500_spec, parse_workload, ApplicationGraph,
    FrameArrivalTrace, WorkloadSpec,
};
use dagsched_core::ilsched::pipeline::{default_rates, saturation_rate};
use dagsched_core::oracle::Objective;
use dagsched_core::platform::{builtin_platform, parse_platform, ArchitectureGraph, BUILTIN_PLATFORMS};

/// Resolve a platform argument: a built-in name (G1..G5) or a file path.
pub fn load_platform(spec: &str) -> Result<ArchitectureGraph> {
    if BUILTIN_PLATFORMS.contains(&spec) {
        return Ok(builtin_platform(spec)?);
    }
    let text = std::fs::read_to_string(spec)
        .with_context(|| format!("reading platform file '{spec}'"))?;
    Ok(parse_platform(&text)?)
}

/// Resolve a workload argument: a spec file path, or the bundled 500-frame
/// mix when absent.
pub fn load_workload(path: Option<&Path>, rate: f64, seed: u64) -> Result<WorkloadSpec> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading workload file '{}'", p.display()))?;
            let mut spec = parse_workload(&text)?;
            if rate > 0.0 {
                spec.injection_rate = rate;
            }
            Ok(spec)
        }
        None => Ok(mix500_spec(rate.max(1.0), seed)),
    }
}

/// Applications referenced by a workload, resolved from the bundled suite.
pub fn workload_apps(spec: &WorkloadSpec) -> Result<Vec<&'static ApplicationGraph>> {
    let suite = builtin_suite();
    spec.entries
        .iter()
        .map(|(name, _)| {
            suite
                .iter()
                .find(|a| &a.name == name)
                .with_context(|| format!("unknown application '{name}'"))
        })
        .collect()
}

pub fn make_trace(spec: &WorkloadSpec, apps: &[&ApplicationGraph]) -> Result<FrameArrivalTrace> {
    let names: Vec<&str> = apps.iter().map(|a| a.name.as_str()).collect();
    Ok(generate_trace(spec, &names)?)
}

/// Injection rates: an explicit comma list (frames/ms) or the canonical
/// fractions of the platform/workload saturation rate.
pub fn resolve_rates(
    rates: Option<&str>,
    arch: &ArchitectureGraph,
    apps: &[&ApplicationGraph],
    spec: &WorkloadSpec,
) -> Result<Vec<f64>> {
    match rates {
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad rate '{s}'"))
            })
            .collect(),
        None => Ok(default_rates(arch, apps, spec)?),
    }
}

pub fn parse_objective(s: &str) -> Result<Objective> {
    Objective::parse(s).with_context(|| format!("unknown objective '{s}'"))
}

/// Scheduler selection syntax: `oracle:<objective>`, `policy:<model file>`,
/// `flat:<model file>`, or `exact[:<seconds>]`.
#[derive(Debug, Clone)]
pub enum SchedulerSpec {
    Oracle(Objective),
    Policy(PathBuf),
    Flat(PathBuf),
    Exact(f64),
}

pub fn parse_scheduler(s: &str) -> Result<SchedulerSpec> {
    if let Some(obj) = s.strip_prefix("oracle:") {
        return Ok(SchedulerSpec::Oracle(parse_objective(obj)?));
    }
    if let Some(path) = s.strip_prefix("policy:") {
        return Ok(SchedulerSpec::Policy(path.into()));
    }
    if let Some(path) = s.strip_prefix("flat:") {
        return Ok(SchedulerSpec::Flat(path.into()));
    }
    if s == "exact" {
        return Ok(SchedulerSpec::Exact(10.0));
    }
    if let Some(limit) = s.strip_prefix("exact:") {
        return Ok(SchedulerSpec::Exact(limit.parse().context("bad exact time limit")?));
    }
    bail!("unknown scheduler '{s}' (expected oracle:<objective>, policy:<file>, flat:<file>, exact[:<secs>])")
}

/// Join a possibly relative output path onto the output directory and make
/// sure the parent exists.
pub fn out_path(out_dir: &Path, path: &Path) -> Result<PathBuf> {
    let full = if path.is_absolute() {
        path.to_path_buf()
    } else {
        out_dir.join(path)
    };
    if let Some(parent) = full.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating '{}'", parent.display()))?;
        }
    }
    Ok(full)
}

pub fn saturation_for(
    arch: &ArchitectureGraph,
    apps: &[&ApplicationGraph],
    spec: &WorkloadSpec,
) -> Result<f64> {
    Ok(saturation_rate(arch, apps, spec)?)
}
