//! Hierarchical DAgger: the learner acts, the expert labels.
//!
//! Each iteration simulates the workload under the current policy while an
//! on-the-fly oracle is queried at every decision. When the cluster
//! predictions agree, a diverging PE prediction aggregates one PE row; when
//! they disagree, the cluster row is aggregated and the PE prediction is
//! re-checked inside the oracle's cluster. Execution always proceeds with
//! the learner's decision. The policy is retrained from scratch on the
//! aggregated dataset after every full-workload pass.

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DatasetRow, Provenance};
use super::policy::{
    realize_prediction, train_hierarchical, FallbackStats, HierarchicalPolicy, PolicyError,
    TrainParams,
};
use crate::appgraph::{AppError, ApplicationGraph, FrameArrivalTrace, WorkloadSpec};
use crate::features::{AblationMask, FeatureExtractor};
use crate::oracle::{oracle_pe_for_task, EtfScheduler, Objective};
use crate::platform::ArchitectureGraph;
use crate::sim::{
    run_simulation, slowdown, Assignment, Scheduler, SimError, SimReport, SimView, Slowdown,
};
use crate::util::derive_seed;

#[derive(Debug, thiserror::Error)]
pub enum DaggerError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    App(#[from] AppError),
    #[error(transparent)]
    Pipeline(#[from] super::pipeline::PipelineError),
}

#[derive(Debug, Clone)]
pub struct DaggerParams {
    pub max_iters: u32,
    /// Stop once avg execution time is within this fraction of the oracle's.
    pub target_pct: f64,
    pub train: TrainParams,
    pub noise_pct: f64,
    pub seed: u64,
}

impl Default for DaggerParams {
    fn default() -> Self {
        Self {
            max_iters: 10,
            target_pct: 0.02,
            train: TrainParams::default(),
            noise_pct: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaggerIteration {
    pub iteration: u32,
    pub avg_latency_us: f64,
    /// max(0, avg / oracle_avg − 1).
    pub gap: f64,
    pub cluster_rows_added: u64,
    pub pe_rows_added: u64,
    pub dataset_rows: usize,
}

#[derive(Debug)]
pub struct DaggerOutcome {
    /// Policy of the best iteration (smallest gap, ties to the earlier,
    /// smaller-dataset iteration).
    pub policy: HierarchicalPolicy,
    pub iterations: Vec<DaggerIteration>,
    pub best_iteration: u32,
    /// False when the target was still unmet at `max_iters`; callers may
    /// continue with more iterations.
    pub target_met: bool,
    pub oracle_avg_latency_us: f64,
}

/// Scheduler that acts with the learner while aggregating expert labels.
struct DaggerScheduler<'a> {
    policy: &'a HierarchicalPolicy,
    extractor: FeatureExtractor,
    objective: Objective,
    iteration: u32,
    rows: Vec<DatasetRow>,
    cluster_rows: u64,
    pe_rows: u64,
    fallbacks: FallbackStats,
}

impl<'a> DaggerScheduler<'a> {
    fn new(
        policy: &'a HierarchicalPolicy,
        arch: &ArchitectureGraph,
        objective: Objective,
        iteration: u32,
    ) -> Self {
        Self {
            policy,
            extractor: FeatureExtractor::new(policy.schema.clone(), arch, AblationMask::none()),
            objective,
            iteration,
            rows: Vec::new(),
            cluster_rows: 0,
            pe_rows: 0,
            fallbacks: FallbackStats::default(),
        }
    }
}

impl Scheduler for DaggerScheduler<'_> {
    fn next_assignment(&mut self, view: &SimView<'_>) -> Result<Assignment, SimError> {
        let fv = self
            .extractor
            .extract(view, 0)
            .map_err(|e| SimError::Scheduler(e.to_string()))?;
        let (cluster_pred, pe_pred) = self
            .policy
            .predict(&fv.values)
            .map_err(|e| SimError::Scheduler(e.to_string()))?;
        let task = &view.ready[0];

        let oracle_pe = oracle_pe_for_task(view.arch, view.pe_ready_time, task, self.objective)?;
        let oracle_cluster = view.arch.cluster_of(oracle_pe).expect("valid pe");
        let oracle_slot = self
            .extractor
            .projection()
            .slot_of(oracle_cluster)
            .expect("home platform cluster") as u32;
        let oracle_pe_idx = view.arch.pe_index_in_cluster(oracle_pe).expect("valid pe") as u32;

        let provenance = Provenance::Dagger(self.iteration);
        if cluster_pred == oracle_slot {
            if pe_pred != oracle_pe_idx {
                self.rows.push(DatasetRow {
                    features: fv.values.clone(),
                    cluster_label: oracle_slot,
                    pe_label: oracle_pe_idx,
                    train_cluster: false,
                    train_pe: true,
                    provenance,
                });
                self.pe_rows += 1;
            }
        } else {
            self.rows.push(DatasetRow {
                features: fv.values.clone(),
                cluster_label: oracle_slot,
                pe_label: oracle_pe_idx,
                train_cluster: true,
                train_pe: false,
                provenance,
            });
            self.cluster_rows += 1;
            let pe_pred_in_cstar = self
                .policy
                .pe_policies
                .get(oracle_slot as usize)
                .map(|p| p.predict(&fv.values))
                .transpose()
                .map_err(|e| SimError::Scheduler(e.to_string()))?
                .unwrap_or(0);
            if pe_pred_in_cstar != oracle_pe_idx {
                self.rows.push(DatasetRow {
                    features: fv.values,
                    cluster_label: oracle_slot,
                    pe_label: oracle_pe_idx,
                    train_cluster: false,
                    train_pe: true,
                    provenance,
                });
                self.pe_rows += 1;
            }
        }

        let (pe, outcome) = realize_prediction(
            view.arch,
            self.extractor.projection(),
            view,
            task,
            cluster_pred,
            pe_pred,
        )?;
        self.fallbacks.record(outcome);
        Ok(Assignment { ready_index: 0, pe })
    }

    fn label(&self) -> String {
        format!("dagger:{}", self.policy.objective.as_str())
    }
}

fn pooled_avg_latency(reports: &[SimReport]) -> f64 {
    let frames: usize = reports.iter().map(|r| r.frames.len()).sum();
    let total: f64 = reports
        .iter()
        .flat_map(|r| r.frames.iter().map(|f| f.latency_us))
        .sum();
    total / frames.max(1) as f64
}

/// Run the DAgger loop over one or more traces (e.g. an injection-rate
/// sweep). Aggregated rows are appended to `dataset`.
pub fn dagger_run(
    initial: &HierarchicalPolicy,
    arch: &ArchitectureGraph,
    apps: &[&ApplicationGraph],
    traces: &[FrameArrivalTrace],
    objective: Objective,
    dataset: &mut Dataset,
    params: &DaggerParams,
) -> Result<DaggerOutcome, DaggerError> {
    let oracle_reports: Vec<SimReport> = traces
        .iter()
        .enumerate()
        .map(|(i, trace)| {
            let mut oracle = EtfScheduler::new(objective);
            run_simulation(
                arch,
                apps,
                trace,
                &mut oracle,
                params.noise_pct,
                derive_seed(params.seed, &format!("dagger-oracle-{i}")),
            )
        })
        .collect::<Result<_, _>>()?;
    let oracle_avg = pooled_avg_latency(&oracle_reports);

    let mut current = initial.clone();
    let mut iterations = Vec::new();
    let mut best: Option<(f64, usize, u32, HierarchicalPolicy)> = None;
    let mut target_met = false;

    for iteration in 1..=params.max_iters {
        let mut cluster_rows = 0;
        let mut pe_rows = 0;
        let mut reports = Vec::with_capacity(traces.len());
        for (i, trace) in traces.iter().enumerate() {
            let mut scheduler = DaggerScheduler::new(&current, arch, objective, iteration);
            let report = run_simulation(
                arch,
                apps,
                trace,
                &mut scheduler,
                params.noise_pct,
                derive_seed(params.seed, &format!("dagger-iter-{iteration}-{i}")),
            )?;
            cluster_rows += scheduler.cluster_rows;
            pe_rows += scheduler.pe_rows;
            dataset.rows.append(&mut scheduler.rows);
            reports.push(report);
        }
        let avg = pooled_avg_latency(&reports);
        let gap = (avg / oracle_avg - 1.0).max(0.0);
        iterations.push(DaggerIteration {
            iteration,
            avg_latency_us: avg,
            gap,
            cluster_rows_added: cluster_rows,
            pe_rows_added: pe_rows,
            dataset_rows: dataset.len(),
        });
        let better = match &best {
            None => true,
            Some((best_gap, best_rows, _, _)) => {
                gap < *best_gap || (gap == *best_gap && dataset.len() < *best_rows)
            }
        };
        if better {
            best = Some((gap, dataset.len(), iteration, current.clone()));
        }
        if gap <= params.target_pct {
            target_met = true;
            break;
        }
        if iteration < params.max_iters {
            current = train_hierarchical(dataset, params.train)?;
        }
    }
    let (_, _, best_iteration, policy) = best.expect("at least one iteration ran");
    Ok(DaggerOutcome {
        policy,
        iterations,
        best_iteration,
        target_met,
        oracle_avg_latency_us: oracle_avg,
    })
}

#[derive(Debug, Clone)]
pub struct LooParams {
    /// Injection rates used for oracle dataset generation.
    pub train_rates: Vec<f64>,
    /// Injection rate of the evaluation mix.
    pub eval_rate: f64,
    pub pred_slots: usize,
    pub train: TrainParams,
    pub dagger: DaggerParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub excluded: String,
    pub before: Slowdown,
    pub after: Slowdown,
    pub iterations_used: u32,
    pub target_met: bool,
}

/// Train with one application excluded, evaluate against the oracle on the
/// full mix, then recover with DAgger.
pub fn leave_one_out(
    excluded: &str,
    arch: &ArchitectureGraph,
    apps: &[&ApplicationGraph],
    full_spec: &WorkloadSpec,
    params: &LooParams,
) -> Result<LooReport, DaggerError> {
    if !full_spec.entries.iter().any(|(name, _)| name == excluded) {
        return Err(AppError::UnknownApp(excluded.to_string()).into());
    }
    let train_spec = WorkloadSpec {
        entries: full_spec
            .entries
            .iter()
            .filter(|(name, _)| name != excluded)
            .cloned()
            .collect(),
        ..full_spec.clone()
    };
    let mut dataset = super::pipeline::gen_dataset(
        arch,
        apps,
        &train_spec,
        &params.train_rates,
        Objective::Performance,
        params.pred_slots,
        derive_seed(params.seed, "loo-gen"),
    )?;
    let policy = train_hierarchical(&dataset, params.train)?;

    let eval_spec = WorkloadSpec {
        injection_rate: params.eval_rate,
        seed: derive_seed(params.seed, "loo-eval"),
        ..full_spec.clone()
    };
    let names: Vec<&str> = apps.iter().map(|a| a.name.as_str()).collect();
    let eval_trace = crate::appgraph::generate_trace(&eval_spec, &names)?;

    let mut oracle = EtfScheduler::new(Objective::Performance);
    let oracle_report = run_simulation(arch, apps, &eval_trace, &mut oracle, 0.0, 0)?;

    let mut before_sched = super::policy::PolicyScheduler::new(&policy, arch);
    let before_report = run_simulation(arch, apps, &eval_trace, &mut before_sched, 0.0, 0)?;
    let before = slowdown(&before_report, &oracle_report)?;

    let outcome = dagger_run(
        &policy,
        arch,
        apps,
        std::slice::from_ref(&eval_trace),
        Objective::Performance,
        &mut dataset,
        &params.dagger,
    )?;

    let mut after_sched = super::policy::PolicyScheduler::new(&outcome.policy, arch);
    let after_report = run_simulation(arch, apps, &eval_trace, &mut after_sched, 0.0, 0)?;
    let after = slowdown(&after_report, &oracle_report)?;

    Ok(LooReport {
        excluded: excluded.to_string(),
        before,
        after,
        iterations_used: outcome.iterations.len() as u32,
        target_met: outcome.target_met,
    })
}
