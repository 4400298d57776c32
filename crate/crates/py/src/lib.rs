//! Python bindings: the main platform/application/simulation types and the
//! training pipeline, exposed for scripting and notebook use.
//!
//! Build as a cdylib and import as `dagsched_py`; see python/smoke_test.py.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dagsched_core::appgraph::{
    self, builtin_suite, generate_trace, mix500_spec, ApplicationGraph, ArrivalModel,
    FrameArrivalTrace, WorkloadSpec,
};
use dagsched_core::ilsched::dagger::{dagger_run, DaggerParams};
use dagsched_core::ilsched::pipeline::{
    default_rates, evaluate_holdout, gen_dataset, saturation_rate,
};
use dagsched_core::ilsched::policy::{
    emit_policy, parse_policy, train_hierarchical, PolicyScheduler, TrainParams,
};
use dagsched_core::ilsched::Dataset;
use dagsched_core::oracle::exact::{exact_schedule, ExactParams};
use dagsched_core::oracle::{EtfScheduler, Objective};
use dagsched_core::platform::{builtin_platform, emit_platform, parse_platform, ArchitectureGraph};
use dagsched_core::sim::{run_simulation, slowdown, SimReport};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_objective(s: &str) -> PyResult<Objective> {
    Objective::parse(s).ok_or_else(|| value_err(format!("unknown objective '{s}'")))
}

/// Heterogeneous platform: clusters of PEs with profile tables.
#[pyclass(name = "Platform")]
#[derive(Clone)]
struct PyPlatform {
    inner: ArchitectureGraph,
}

#[pymethods]
impl PyPlatform {
    /// Built-in configuration G1..G5.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: builtin_platform(name).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_platform(text).map_err(value_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn pe_count(&self) -> usize {
        self.inner.pe_count()
    }

    #[getter]
    fn cluster_names(&self) -> Vec<String> {
        self.inner.clusters.iter().map(|c| c.name.clone()).collect()
    }

    fn comm_latency(&self, src: usize, dst: usize, volume: f64) -> PyResult<f64> {
        self.inner.comm_latency(src, dst, volume).map_err(value_err)
    }

    fn emit(&self) -> String {
        emit_platform(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Platform('{}', {} clusters, {} PEs)",
            self.inner.name,
            self.inner.cluster_count(),
            self.inner.pe_count()
        )
    }
}

/// One bundled or loaded application DAG.
#[pyclass(name = "App")]
#[derive(Clone)]
struct PyApp {
    inner: ApplicationGraph,
}

#[pymethods]
impl PyApp {
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        Ok(Self {
            inner: appgraph::builtin_app(name).map_err(value_err)?.clone(),
        })
    }

    /// Names of the bundled applications.
    #[staticmethod]
    fn suite() -> Vec<String> {
        builtin_suite().iter().map(|a| a.name.clone()).collect()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn task_count(&self) -> usize {
        self.inner.task_count()
    }

    fn downward_depth(&self, task: usize) -> PyResult<usize> {
        self.inner.downward_depth(task).map_err(value_err)
    }

    fn validate(&self) -> Vec<String> {
        self.inner
            .validate()
            .into_iter()
            .map(|v| format!("{v:?}"))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("App('{}', {} tasks)", self.inner.name, self.inner.task_count())
    }
}

/// Streaming workload description.
#[pyclass(name = "Workload")]
#[derive(Clone)]
struct PyWorkload {
    inner: WorkloadSpec,
}

#[pymethods]
impl PyWorkload {
    #[new]
    #[pyo3(signature = (entries, injection_rate, arrival="exponential", seed=0))]
    fn new(
        entries: Vec<(String, u32)>,
        injection_rate: f64,
        arrival: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let arrival_model = ArrivalModel::parse(arrival)
            .ok_or_else(|| value_err(format!("unknown arrival model '{arrival}'")))?;
        let spec = WorkloadSpec {
            entries,
            injection_rate,
            arrival_model,
            seed,
        };
        spec.validate().map_err(value_err)?;
        Ok(Self { inner: spec })
    }

    /// The bundled 500-frame six-application mix.
    #[staticmethod]
    #[pyo3(signature = (injection_rate, seed=42))]
    fn mix500(injection_rate: f64, seed: u64) -> Self {
        Self {
            inner: mix500_spec(injection_rate, seed),
        }
    }

    #[getter]
    fn injection_rate(&self) -> f64 {
        self.inner.injection_rate
    }

    fn at_rate(&self, injection_rate: f64) -> Self {
        Self {
            inner: self.inner.at_rate(injection_rate),
        }
    }

    fn total_frames(&self) -> u64 {
        self.inner.total_frames()
    }

    /// Materialize the arrival trace.
    fn trace(&self) -> PyResult<PyTrace> {
        let names: Vec<&str> = self.inner.entries.iter().map(|(n, _)| n.as_str()).collect();
        Ok(PyTrace {
            inner: generate_trace(&self.inner, &names).map_err(value_err)?,
        })
    }
}

#[pyclass(name = "Trace")]
#[derive(Clone)]
struct PyTrace {
    inner: FrameArrivalTrace,
}

#[pymethods]
impl PyTrace {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn emit(&self) -> String {
        self.inner.emit()
    }
}

/// Per-run simulation report.
#[pyclass(name = "Report")]
#[derive(Clone)]
struct PyReport {
    inner: SimReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn scheduler(&self) -> String {
        self.inner.scheduler.clone()
    }

    #[getter]
    fn frames(&self) -> usize {
        self.inner.frames.len()
    }

    #[getter]
    fn decisions(&self) -> u64 {
        self.inner.decisions
    }

    #[getter]
    fn avg_latency_us(&self) -> f64 {
        self.inner.avg_latency_us
    }

    #[getter]
    fn avg_energy_uj(&self) -> f64 {
        self.inner.avg_energy_uj
    }

    #[getter]
    fn edp(&self) -> f64 {
        self.inner.edp
    }

    #[getter]
    fn ed2p(&self) -> f64 {
        self.inner.ed2p
    }

    /// Frame rows as dicts.
    fn rows(&self) -> Vec<HashMap<String, f64>> {
        self.inner
            .frames
            .iter()
            .map(|f| {
                HashMap::from([
                    ("frame_id".to_string(), f.frame_id as f64),
                    ("arrival_us".to_string(), f.arrival_us),
                    ("completion_us".to_string(), f.completion_us),
                    ("latency_us".to_string(), f.latency_us),
                    ("energy_uj".to_string(), f.energy_uj),
                ])
            })
            .collect()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "Report('{}', {} frames, avg latency {:.1} µs)",
            self.inner.scheduler,
            self.inner.frames.len(),
            self.inner.avg_latency_us
        )
    }
}

#[pyclass(name = "Dataset")]
#[derive(Clone)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn emit(&self) -> String {
        self.inner.emit()
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Dataset::parse(text).map_err(value_err)?,
        })
    }

    /// Held-out accuracy table: stratified 80/20 split.
    #[pyo3(signature = (depth_cluster=12, depth_pe=12, min_leaf=4, flat_depth=12, split_seed=7))]
    fn holdout_accuracy(
        &self,
        depth_cluster: usize,
        depth_pe: usize,
        min_leaf: usize,
        flat_depth: usize,
        split_seed: u64,
    ) -> PyResult<HashMap<String, f64>> {
        let report = evaluate_holdout(
            &self.inner,
            TrainParams {
                depth_cluster,
                depth_pe,
                min_leaf,
            },
            flat_depth,
            split_seed,
        )
        .map_err(runtime_err)?;
        let mut out = HashMap::from([
            ("cluster".to_string(), report.cluster_accuracy),
            ("hierarchical".to_string(), report.composite_accuracy),
            ("flat".to_string(), report.flat_accuracy),
        ]);
        for (slot, acc) in report.pe_accuracy.iter().enumerate() {
            if let Some(acc) = acc {
                out.insert(
                    format!("pe_{}", self.inner.schema.cluster_names[slot]),
                    *acc,
                );
            }
        }
        Ok(out)
    }
}

/// Trained hierarchical policy.
#[pyclass(name = "Policy")]
#[derive(Clone)]
struct PyPolicy {
    inner: dagsched_core::ilsched::HierarchicalPolicy,
}

#[pymethods]
impl PyPolicy {
    fn emit(&self) -> String {
        emit_policy(&self.inner)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_policy(text).map_err(value_err)?,
        })
    }

    #[getter]
    fn objective(&self) -> String {
        self.inner.objective.as_str().to_string()
    }
}

/// Estimated saturation injection rate (frames/ms) of a workload on a
/// platform.
#[pyfunction]
fn saturation(platform: &PyPlatform, workload: &PyWorkload) -> PyResult<f64> {
    let apps = resolve_apps(workload)?;
    let refs: Vec<&ApplicationGraph> = apps.iter().collect();
    saturation_rate(&platform.inner, &refs, &workload.inner).map_err(value_err)
}

/// The canonical injection-rate sweep for a platform/workload pair.
#[pyfunction]
fn canonical_rates(platform: &PyPlatform, workload: &PyWorkload) -> PyResult<Vec<f64>> {
    let apps = resolve_apps(workload)?;
    let refs: Vec<&ApplicationGraph> = apps.iter().collect();
    default_rates(&platform.inner, &refs, &workload.inner).map_err(value_err)
}

fn resolve_apps(workload: &PyWorkload) -> PyResult<Vec<ApplicationGraph>> {
    workload
        .inner
        .entries
        .iter()
        .map(|(name, _)| {
            appgraph::builtin_app(name)
                .map(Clone::clone)
                .map_err(value_err)
        })
        .collect()
}

/// Simulate one workload. `scheduler` is `oracle:<objective>` or a Policy.
#[pyfunction]
#[pyo3(signature = (platform, workload, scheduler, noise_pct=0.0, seed=0))]
fn simulate(
    platform: &PyPlatform,
    workload: &PyWorkload,
    scheduler: &Bound<'_, PyAny>,
    noise_pct: f64,
    seed: u64,
) -> PyResult<PyReport> {
    let apps = resolve_apps(workload)?;
    let refs: Vec<&ApplicationGraph> = apps.iter().collect();
    let names: Vec<&str> = refs.iter().map(|a| a.name.as_str()).collect();
    let trace = generate_trace(&workload.inner, &names).map_err(value_err)?;
    let report = if let Ok(spec) = scheduler.extract::<String>() {
        let objective = spec
            .strip_prefix("oracle:")
            .ok_or_else(|| value_err("string schedulers must be 'oracle:<objective>'"))
            .and_then(parse_objective)?;
        let mut sched = EtfScheduler::new(objective);
        run_simulation(&platform.inner, &refs, &trace, &mut sched, noise_pct, seed)
            .map_err(runtime_err)?
    } else if let Ok(policy) = scheduler.extract::<PyPolicy>() {
        let mut sched = PolicyScheduler::new(&policy.inner, &platform.inner);
        run_simulation(&platform.inner, &refs, &trace, &mut sched, noise_pct, seed)
            .map_err(runtime_err)?
    } else {
        return Err(value_err(
            "scheduler must be 'oracle:<objective>' or a Policy",
        ));
    };
    Ok(PyReport { inner: report })
}

/// Oracle-driven dataset generation over an injection-rate sweep.
#[pyfunction]
#[pyo3(signature = (platform, workload, rates, objective="performance", pred_slots=4, seed=42))]
fn generate_dataset(
    platform: &PyPlatform,
    workload: &PyWorkload,
    rates: Vec<f64>,
    objective: &str,
    pred_slots: usize,
    seed: u64,
) -> PyResult<PyDataset> {
    let apps = resolve_apps(workload)?;
    let refs: Vec<&ApplicationGraph> = apps.iter().collect();
    let dataset = gen_dataset(
        &platform.inner,
        &refs,
        &workload.inner,
        &rates,
        parse_objective(objective)?,
        pred_slots,
        seed,
    )
    .map_err(runtime_err)?;
    Ok(PyDataset { inner: dataset })
}

/// Train the hierarchical policy.
#[pyfunction]
#[pyo3(signature = (dataset, depth_cluster=12, depth_pe=12, min_leaf=4))]
fn train(
    dataset: &PyDataset,
    depth_cluster: usize,
    depth_pe: usize,
    min_leaf: usize,
) -> PyResult<PyPolicy> {
    let policy = train_hierarchical(
        &dataset.inner,
        TrainParams {
            depth_cluster,
            depth_pe,
            min_leaf,
        },
    )
    .map_err(runtime_err)?;
    Ok(PyPolicy { inner: policy })
}

/// DAgger refinement over one or more traces; returns the selected policy
/// and per-iteration (gap, rows added) stats.
#[pyfunction]
#[pyo3(signature = (policy, platform, workload, rates, dataset, objective="performance", max_iters=10, target_pct=0.02, seed=42))]
#[allow(clippy::too_many_arguments)]
fn dagger(
    policy: &PyPolicy,
    platform: &PyPlatform,
    workload: &PyWorkload,
    rates: Vec<f64>,
    dataset: &PyDataset,
    objective: &str,
    max_iters: u32,
    target_pct: f64,
    seed: u64,
) -> PyResult<(PyPolicy, Vec<HashMap<String, f64>>)> {
    let apps = resolve_apps(workload)?;
    let refs: Vec<&ApplicationGraph> = apps.iter().collect();
    let names: Vec<&str> = refs.iter().map(|a| a.name.as_str()).collect();
    let traces: Vec<FrameArrivalTrace> = rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            let spec = WorkloadSpec {
                injection_rate: rate,
                seed: seed.wrapping_add(1000 + i as u64),
                ..workload.inner.clone()
            };
            generate_trace(&spec, &names).map_err(value_err)
        })
        .collect::<PyResult<_>>()?;
    let mut ds = dataset.inner.clone();
    let outcome = dagger_run(
        &policy.inner,
        &platform.inner,
        &refs,
        &traces,
        parse_objective(objective)?,
        &mut ds,
        &DaggerParams {
            max_iters,
            target_pct,
            train: policy.inner.params,
            noise_pct: 0.0,
            seed,
        },
    )
    .map_err(runtime_err)?;
    let stats = outcome
        .iterations
        .iter()
        .map(|it| {
            HashMap::from([
                ("iteration".to_string(), it.iteration as f64),
                ("avg_latency_us".to_string(), it.avg_latency_us),
                ("gap".to_string(), it.gap),
                ("cluster_rows_added".to_string(), it.cluster_rows_added as f64),
                ("pe_rows_added".to_string(), it.pe_rows_added as f64),
            ])
        })
        .collect();
    Ok((PyPolicy { inner: outcome.policy }, stats))
}

/// Job slowdown of report `a` relative to `b`:
/// (mean per-frame ratio, ratio of averages).
#[pyfunction]
fn job_slowdown(a: &PyReport, b: &PyReport) -> PyResult<(f64, f64)> {
    let s = slowdown(&a.inner, &b.inner).map_err(value_err)?;
    Ok((s.per_frame_mean, s.aggregate_ratio))
}

/// Branch-and-bound single-frame schedule of an app on an idle platform.
/// Returns (makespan_us, proven_optimal).
#[pyfunction]
#[pyo3(signature = (app, platform, time_limit_s=10.0))]
fn exact_makespan(app: &PyApp, platform: &PyPlatform, time_limit_s: f64) -> PyResult<(f64, bool)> {
    let result = exact_schedule(
        &app.inner,
        &platform.inner,
        &ExactParams {
            time_limit: std::time::Duration::from_secs_f64(time_limit_s),
            node_limit: None,
        },
    )
    .map_err(runtime_err)?;
    Ok((result.makespan_us, result.proven_optimal))
}

#[pymodule]
fn dagsched_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPlatform>()?;
    m.add_class::<PyApp>()?;
    m.add_class::<PyWorkload>()?;
    m.add_class::<PyTrace>()?;
    m.add_class::<PyReport>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(saturation, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_rates, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(dagger, m)?)?;
    m.add_function(wrap_pyfunction!(job_slowdown, m)?)?;
    m.add_function(wrap_pyfunction!(exact_makespan, m)?)?;
    Ok(())
}
