//! Experiment plumbing shared by the CLI and the test suites: oracle-driven
//! dataset generation, held-out accuracy evaluation, and workload scaling.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DatasetRow, Provenance};
use super::policy::{train_flat, train_hierarchical, PolicyError, TrainParams};
use crate::appgraph::{generate_trace, AppError, ApplicationGraph, WorkloadSpec};
use crate::features::feature_schema;
use crate::oracle::{EtfScheduler, Objective};
use crate::platform::ArchitectureGraph;
use crate::sim::{run_simulation, SimError};
use crate::util::derive_seed;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    App(#[from] AppError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("dataset is empty: the workload produced no decisions")]
    EmptyDataset,
}

/// Run the oracle over one trace per injection rate and collect every
/// decision into a dataset.
pub fn gen_dataset(
    arch: &ArchitectureGraph,
    apps: &[&ApplicationGraph],
    spec: &WorkloadSpec,
    rates: &[f64],
    objective: Objective,
    pred_slots: usize,
    seed: u64,
) -> Result<Dataset, PipelineError> {
    let schema = feature_schema(arch, pred_slots);
    let mut dataset = Dataset::new(schema.clone(), objective, arch);
    let names: Vec<&str> = apps.iter().map(|a| a.name.as_str()).collect();
    for (i, &rate) in rates.iter().enumerate() {
        let trace_spec = WorkloadSpec {
            injection_rate: rate,
            seed: derive_seed(seed, &format!("gen-rate-{i}")),
            ..spec.clone()
        };
        let trace = generate_trace(&trace_spec, &names)?;
        let mut scheduler = EtfScheduler::recording(objective, schema.clone());
        run_simulation(
            arch,
            apps,
            &trace,
            &mut scheduler,
            0.0,
            derive_seed(seed, &format!("gen-sim-{i}")),
        )?;
        for decision in scheduler.take_decisions() {
            dataset.push_decision(&decision, Provenance::Initial);
        }
    }
    if dataset.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    Ok(dataset)
}

/// Held-out accuracies from a stratified 80/20 split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub train_rows: usize,
    pub test_rows: usize,
    pub cluster_accuracy: f64,
    /// Per cluster slot; None for single-PE clusters or empty test sets.
    pub pe_accuracy: Vec<Option<f64>>,
    /// End-to-end: both levels correct.
    pub composite_accuracy: f64,
    pub flat_accuracy: f64,
}

/// Split the dataset 80/20 stratified on the joint (cluster, PE) label,
/// train both policy shapes on the train side, and score the held-out side.
pub fn evaluate_holdout(
    dataset: &Dataset,
    train: TrainParams,
    flat_depth: usize,
    split_seed: u64,
) -> Result<HoldoutReport, PipelineError> {
    let eligible: Vec<&DatasetRow> = dataset
        .rows
        .iter()
        .filter(|r| r.train_cluster && r.train_pe)
        .collect();
    if eligible.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    // Group row indices by flat label, shuffle each group, hold out 20%.
    let mut groups: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (i, row) in eligible.iter().enumerate() {
        groups.entry(dataset.flat_label(row)).or_default().push(i);
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (label, mut idx) in groups {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(split_seed, &label.to_string()));
        idx.shuffle(&mut rng);
        let test_n = idx.len() / 5;
        test_idx.extend_from_slice(&idx[..test_n]);
        train_idx.extend_from_slice(&idx[test_n..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let mut train_set = Dataset {
        schema: dataset.schema.clone(),
        cluster_pe_counts: dataset.cluster_pe_counts.clone(),
        objective: dataset.objective,
        platform: dataset.platform.clone(),
        rows: train_idx.iter().map(|&i| eligible[i].clone()).collect(),
    };
    // Guard against a starved multi-PE cluster in the split: move every
    // held-out row of a missing cluster back to the train side.
    for (slot, &count) in dataset.cluster_pe_counts.iter().enumerate() {
        if count <= 1 {
            continue;
        }
        let present = train_set
            .rows
            .iter()
            .any(|r| r.cluster_label as usize == slot);
        if !present {
            let (moved, kept): (Vec<usize>, Vec<usize>) = test_idx
                .iter()
                .partition(|&&i| eligible[i].cluster_label as usize == slot);
            for i in moved {
                train_set.rows.push(eligible[i].clone());
            }
            test_idx = kept;
        }
    }

    let policy = train_hierarchical(&train_set, train)?;
    let flat = train_flat(&train_set, flat_depth, train.min_leaf)?;

    let mut cluster_hits = 0usize;
    let mut composite_hits = 0usize;
    let mut flat_hits = 0usize;
    let mut pe_hits = vec![0usize; dataset.schema.cluster_count];
    let mut pe_total = vec![0usize; dataset.schema.cluster_count];
    for &i in &test_idx {
        let row = eligible[i];
        let (cluster, pe) = policy
            .predict(&row.features)
            .map_err(PolicyError::from)?;
        if cluster == row.cluster_label {
            cluster_hits += 1;
            if pe == row.pe_label {
                composite_hits += 1;
            }
        }
        // Level-2 accuracy is conditioned on the oracle cluster.
        let slot = row.cluster_label as usize;
        if dataset.cluster_pe_counts[slot] > 1 {
            pe_total[slot] += 1;
            let pe_pred = policy.pe_policies[slot]
                .predict(&row.features)
                .map_err(|e| PolicyError::from(e))?;
            if pe_pred == row.pe_label {
                pe_hits[slot] += 1;
            }
        }
        let flat_pred = flat.predict(&row.features).map_err(PolicyError::from)?;
        if flat_pred == dataset.flat_label(row) {
            flat_hits += 1;
        }
    }
    let n_test = test_idx.len().max(1) as f64;
    Ok(HoldoutReport {
        train_rows: train_set.rows.len(),
        test_rows: test_idx.len(),
        cluster_accuracy: cluster_hits as f64 / n_test,
        pe_accuracy: pe_total
            .iter()
            .zip(&pe_hits)
            .map(|(&total, &hits)| {
                if total == 0 {
                    None
                } else {
                    Some(hits as f64 / total as f64)
                }
            })
            .collect(),
        composite_accuracy: composite_hits as f64 / n_test,
        flat_accuracy: flat_hits as f64 / n_test,
    })
}

/// Estimated saturation injection rate (frames/ms) of a workload mix: the
/// rate at which the platform's PEs would be fully busy if every task ran on
/// its fastest capable PE.
pub fn saturation_rate(
    arch: &ArchitectureGraph,
    apps: &[&ApplicationGraph],
    spec: &WorkloadSpec,
) -> Result<f64, AppError> {
    let mut total_work = 0.0;
    let mut total_frames = 0u64;
    for (name, count) in &spec.entries {
        let app = apps
            .iter()
            .find(|a| &a.name == name)
            .ok_or_else(|| AppError::UnknownApp(name.clone()))?;
        let frame_work: f64 = app
            .nodes
            .iter()
            .map(|node| {
                arch.capable_pes(node.task_type)
                    .map(|pe| pe.exec_time[&node.task_type])
                    .fold(f64::INFINITY, f64::min)
            })
            .sum();
        total_work += *count as f64 * frame_work;
        total_frames += *count as u64;
    }
    let per_frame_us = total_work / total_frames.max(1) as f64;
    Ok(1000.0 * arch.pe_count() as f64 / per_frame_us)
}

/// Canonical sweep fractions of the saturation rate. The window spans light
/// to moderate streaming load; past ~0.4 of saturation the backlog grows so
/// large that per-frame latencies are dominated by queueing rather than by
/// decision quality.
pub const RATE_FRACTIONS: [f64; 10] = [
    0.04, 0.07, 0.10, 0.13, 0.16, 0.20, 0.23, 0.27, 0.30, 0.33,
];

/// The canonical injection-rate sweep for a platform/workload pair.
pub fn default_rates(
    arch: &ArchitectureGraph,
    apps: &[&ApplicationGraph],
    spec: &WorkloadSpec,
) -> Result<Vec<f64>, AppError> {
    let sat = saturation_rate(arch, apps, spec)?;
    Ok(RATE_FRACTIONS.iter().map(|f| f * sat).collect())
}
