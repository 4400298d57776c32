//! Cross-module pipeline tests: dataset and model files, hierarchical
//! training contracts, policy inference, and the DAgger aggregation
//! branches.

use dagsched_core::appgraph::{
    builtin_suite, generate_trace, mix500_spec, suite_app_names, ApplicationGraph, Arrival,
    FrameArrivalTrace, TaskNode, WorkloadSpec,
};
use dagsched_core::features::{feature_schema, FeatureSchema};
use dagsched_core::ilsched::dagger::{dagger_run, leave_one_out, DaggerParams, LooParams};
use dagsched_core::ilsched::dataset::{Dataset, DatasetRow, Provenance};
use dagsched_core::ilsched::pipeline::{default_rates, gen_dataset};
use dagsched_core::ilsched::policy::{
    emit_policy, parse_policy, train_flat, train_hierarchical, PePolicy, PolicyError,
    PolicyScheduler, TrainParams,
};
use dagsched_core::ilsched::tree::{DecisionTree, TreeNode, TreeParams};
use dagsched_core::ilsched::HierarchicalPolicy;
use dagsched_core::oracle::{EtfScheduler, Objective};
use dagsched_core::platform::{builtin_platform, ArchitectureGraph, Cluster, TaskKind, TaskType, TaskTypeCatalog};
use dagsched_core::sim::run_simulation;

fn small_dataset() -> (ArchitectureGraph, Dataset) {
    let arch = builtin_platform("G1").unwrap();
    let suite = builtin_suite();
    let apps: Vec<&ApplicationGraph> = suite.iter().take(6).collect();
    let mut spec = mix500_spec(1.0, 42);
    spec.entries.iter_mut().for_each(|(_, n)| *n = (*n / 10).max(2));
    let rates = default_rates(&arch, &apps, &spec).unwrap();
    let dataset = gen_dataset(
        &arch,
        &apps,
        &spec,
        &rates[3..6],
        Objective::Performance,
        4,
        42,
    )
    .unwrap();
    (arch, dataset)
}

#[test]
fn dataset_file_round_trips_and_rejects_bad_hash() {
    let (_arch, dataset) = small_dataset();
    let text = dataset.emit();
    let parsed = Dataset::parse(&text).unwrap();
    assert_eq!(dataset, parsed);

    let tampered = text.replace("pred-slots 4", "pred-slots 3");
    assert!(Dataset::parse(&tampered).is_err());
}

#[test]
fn model_file_round_trips_and_rejects_bad_hash() {
    let (_arch, dataset) = small_dataset();
    let policy = train_hierarchical(&dataset, TrainParams::default()).unwrap();
    let text = emit_policy(&policy);
    let parsed = parse_policy(&text).unwrap();
    assert_eq!(policy, parsed);

    let tampered = text.replace("pred-slots 4", "pred-slots 2");
    match parse_policy(&tampered) {
        Err(PolicyError::SchemaHash { .. }) => {}
        other => panic!("expected schema hash rejection, got {other:?}"),
    }
}

#[test]
fn training_is_deterministic() {
    let (_arch, dataset) = small_dataset();
    let a = train_hierarchical(&dataset, TrainParams::default()).unwrap();
    let b = train_hierarchical(&dataset, TrainParams::default()).unwrap();
    assert_eq!(a, b);
    let fa = train_flat(&dataset, 12, 4).unwrap();
    let fb = train_flat(&dataset, 12, 4).unwrap();
    assert_eq!(fa, fb);
}

/// Platform with `pe_counts` general-purpose clusters and one task type;
/// cluster `i` runs type 0 with exec `execs[i]`.
fn toy_platform(pe_counts: &[usize], execs: &[f64]) -> ArchitectureGraph {
    let catalog = TaskTypeCatalog::new(vec![TaskType {
        id: 0,
        name: "t0".into(),
        kind: TaskKind::Generic,
    }])
    .unwrap();
    let mut next = 0;
    let clusters: Vec<Cluster> = pe_counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let pe_ids: Vec<usize> = (next..next + n).collect();
            next += n;
            Cluster {
                id: i,
                name: format!("c{i}"),
                pe_ids,
                kinds: vec![TaskKind::Generic],
            }
        })
        .collect();
    let profiles = (0..pe_counts.len())
        .map(|i| ((i, 0), (execs[i], 100.0)))
        .collect();
    ArchitectureGraph::assemble("toy", catalog, clusters, &profiles, 0.0, 0.1).unwrap()
}

fn constant_tree(label: u32, n_labels: usize, n_features: usize) -> DecisionTree {
    DecisionTree {
        nodes: vec![TreeNode::Leaf {
            label,
            counts: vec![1; n_labels],
        }],
        params: TreeParams::default(),
        n_labels,
        n_features,
    }
}

fn constant_policy(
    schema: &FeatureSchema,
    cluster_pe_counts: Vec<usize>,
    cluster: u32,
    pes: &[u32],
) -> HierarchicalPolicy {
    HierarchicalPolicy {
        schema: schema.clone(),
        cluster_pe_counts: cluster_pe_counts.clone(),
        objective: Objective::Performance,
        params: TrainParams::default(),
        cluster_tree: constant_tree(cluster, cluster_pe_counts.len(), schema.len()),
        pe_policies: pes
            .iter()
            .zip(&cluster_pe_counts)
            .map(|(&label, &count)| {
                if count <= 1 {
                    PePolicy::Constant(0)
                } else {
                    PePolicy::Tree(constant_tree(label, count, schema.len()))
                }
            })
            .collect(),
    }
}

fn one_task_app() -> ApplicationGraph {
    ApplicationGraph {
        app_id: 0,
        name: "one".into(),
        nodes: vec![TaskNode {
            id: 0,
            task_type: 0,
            predecessors: vec![],
            app_id: 0,
        }],
    }
}

fn one_frame_trace() -> FrameArrivalTrace {
    FrameArrivalTrace {
        arrivals: vec![Arrival {
            time_us: 0.0,
            app: "one".into(),
            frame_id: 0,
        }],
    }
}

/// Algorithm-2 branch: cluster predictions agree, PE predictions diverge →
/// exactly one PE row is aggregated.
#[test]
fn dagger_aggregates_one_pe_row_on_pe_mismatch() {
    let arch = toy_platform(&[2], &[10.0]);
    let schema = feature_schema(&arch, 4);
    // Idle platform: the oracle picks PE index 0; the policy says index 1.
    let policy = constant_policy(&schema, vec![2], 0, &[1]);
    let app = one_task_app();
    let trace = one_frame_trace();
    let mut dataset = Dataset::new(schema, Objective::Performance, &arch);
    let out = dagger_run(
        &policy,
        &arch,
        &[&app],
        std::slice::from_ref(&trace),
        Objective::Performance,
        &mut dataset,
        &DaggerParams {
            max_iters: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.iterations[0].cluster_rows_added, 0);
    assert_eq!(out.iterations[0].pe_rows_added, 1);
    assert_eq!(dataset.len(), 1);
    let row = &dataset.rows[0];
    assert!(!row.train_cluster && row.train_pe);
    assert_eq!(row.cluster_label, 0);
    assert_eq!(row.pe_label, 0);
    assert_eq!(row.provenance, Provenance::Dagger(1));
}

/// Algorithm-2 else-branch: cluster predictions diverge and the PE
/// prediction inside the oracle cluster also diverges → one cluster row and
/// one PE row.
#[test]
fn dagger_aggregates_cluster_and_pe_rows_on_cluster_mismatch() {
    // Cluster 0 is fast (exec 10), cluster 1 slow (exec 50): oracle picks
    // cluster 0, PE 0. Policy picks cluster 1 and, within cluster 0, PE 1.
    let arch = toy_platform(&[2, 2], &[10.0, 50.0]);
    let schema = feature_schema(&arch, 4);
    let policy = constant_policy(&schema, vec![2, 2], 1, &[1, 0]);
    let app = one_task_app();
    let trace = one_frame_trace();
    let mut dataset = Dataset::new(schema.clone(), Objective::Performance, &arch);
    let out = dagger_run(
        &policy,
        &arch,
        &[&app],
        std::slice::from_ref(&trace),
        Objective::Performance,
        &mut dataset,
        &DaggerParams {
            max_iters: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.iterations[0].cluster_rows_added, 1);
    assert_eq!(out.iterations[0].pe_rows_added, 1);
    let flags: Vec<(bool, bool)> = dataset
        .rows
        .iter()
        .map(|r| (r.train_cluster, r.train_pe))
        .collect();
    assert_eq!(flags, vec![(true, false), (false, true)]);

    // Same cluster mismatch, but the PE tree of the oracle cluster is
    // right: only the cluster row is aggregated.
    let policy = constant_policy(&schema, vec![2, 2], 1, &[0, 0]);
    let mut dataset = Dataset::new(schema, Objective::Performance, &arch);
    let out = dagger_run(
        &policy,
        &arch,
        &[&app],
        std::slice::from_ref(&trace),
        Objective::Performance,
        &mut dataset,
        &DaggerParams {
            max_iters: 1,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.iterations[0].cluster_rows_added, 1);
    assert_eq!(out.iterations[0].pe_rows_added, 0);
}

#[test]
fn constant_dataset_trains_constant_policy() {
    // The second cluster is single-PE so it trains as a constant rather
    // than starving.
    let arch = toy_platform(&[2, 1], &[10.0, 50.0]);
    let schema = feature_schema(&arch, 4);
    let mut dataset = Dataset::new(schema.clone(), Objective::Performance, &arch);
    // Every oracle decision: cluster 0, PE 1.
    for i in 0..40 {
        dataset.rows.push(DatasetRow {
            features: (0..schema.len()).map(|j| (i * j) as f64 % 7.0).collect(),
            cluster_label: 0,
            pe_label: 1,
            train_cluster: true,
            train_pe: true,
            provenance: Provenance::Initial,
        });
    }
    let policy = train_hierarchical(&dataset, TrainParams::default()).unwrap();
    for row in &dataset.rows {
        assert_eq!(policy.predict(&row.features).unwrap(), (0, 1));
    }
    // Flat on a single-label dataset is trivially perfect.
    let flat = train_flat(&dataset, 12, 4).unwrap();
    assert_eq!(flat.depth(), 0);
}

#[test]
fn starving_multi_pe_cluster_is_reported() {
    let arch = toy_platform(&[2, 2], &[10.0, 50.0]);
    let schema = feature_schema(&arch, 4);
    let mut dataset = Dataset::new(schema.clone(), Objective::Performance, &arch);
    for i in 0..10 {
        dataset.rows.push(DatasetRow {
            features: vec![i as f64; schema.len()],
            cluster_label: 0,
            pe_label: 0,
            train_cluster: true,
            train_pe: true,
            provenance: Provenance::Initial,
        });
    }
    // Cluster 1 has two PEs but zero rows.
    match train_hierarchical(&dataset, TrainParams::default()) {
        Err(PolicyError::InsufficientData { cluster: 1, .. }) => {}
        other => panic!("expected InsufficientData for cluster 1, got {other:?}"),
    }
}

#[test]
fn single_pe_clusters_use_constant_policies() {
    let arch = builtin_platform("G3").unwrap();
    let suite = builtin_suite();
    let apps: Vec<&ApplicationGraph> = suite.iter().take(6).collect();
    let mut spec = mix500_spec(2.0, 7);
    spec.entries.iter_mut().for_each(|(_, n)| *n = 4);
    let dataset = gen_dataset(&arch, &apps, &spec, &[2.0], Objective::Performance, 4, 7).unwrap();
    let policy = train_hierarchical(&dataset, TrainParams::default()).unwrap();
    assert!(policy
        .pe_policies
        .iter()
        .all(|p| matches!(p, PePolicy::Constant(0))));
}

/// On G5 every decision must land on a LITTLE or big PE.
#[test]
fn g5_policy_decisions_stay_in_existing_clusters() {
    let g1 = builtin_platform("G1").unwrap();
    let suite = builtin_suite();
    let apps: Vec<&ApplicationGraph> = suite.iter().take(6).collect();
    let mut spec = mix500_spec(1.0, 13);
    spec.entries.iter_mut().for_each(|(_, n)| *n = 6);
    let rates = default_rates(&g1, &apps, &spec).unwrap();
    let dataset = gen_dataset(&g1, &apps, &spec, &rates[2..5], Objective::Performance, 4, 13).unwrap();
    let policy = train_hierarchical(&dataset, TrainParams::default()).unwrap();

    let g5 = builtin_platform("G5").unwrap();
    let names: Vec<&str> = suite_app_names().to_vec();
    let trace = generate_trace(&spec.at_rate(3.0), &names).unwrap();

    struct PeAudit<'a> {
        inner: PolicyScheduler<'a>,
        pes: Vec<usize>,
    }
    impl dagsched_core::sim::Scheduler for PeAudit<'_> {
        fn next_assignment(
            &mut self,
            view: &dagsched_core::sim::SimView<'_>,
        ) -> Result<dagsched_core::sim::Assignment, dagsched_core::sim::SimError> {
            let a = self.inner.next_assignment(view)?;
            self.pes.push(a.pe);
            Ok(a)
        }
        fn label(&self) -> String {
            "audit".into()
        }
    }
    let mut audit = PeAudit {
        inner: PolicyScheduler::new(&policy, &g5),
        pes: Vec::new(),
    };
    run_simulation(&g5, &apps, &trace, &mut audit, 0.0, 0).unwrap();
    assert!(!audit.pes.is_empty());
    assert!(audit.pes.iter().all(|&pe| pe < g5.pe_count()));
}

#[test]
fn hierarchical_consistency_of_realized_pe() {
    // The realized PE always lies in the cluster chosen at level 1 unless
    // the fallback chain had to leave it (counted as an ETF fallback).
    let (arch, dataset) = small_dataset();
    let policy = train_hierarchical(&dataset, TrainParams::default()).unwrap();
    let suite = builtin_suite();
    let apps: Vec<&ApplicationGraph> = suite.iter().take(6).collect();
    let names: Vec<&str> = suite_app_names().to_vec();
    let spec = mix500_spec(3.0, 5);
    let trace = generate_trace(&spec, &names).unwrap();
    let mut sched = PolicyScheduler::new(&policy, &arch);
    run_simulation(&arch, &apps, &trace, &mut sched, 0.0, 0).unwrap();
    assert_eq!(sched.fallbacks.etf_fallback, 0, "home platform never needs ETF fallback");
}

#[test]
fn leave_one_out_without_distribution_shift_changes_little() {
    // Excluding an app that is absent from the evaluation trace: before and
    // after DAgger match because nothing was missing.
    let arch = builtin_platform("G1").unwrap();
    let suite = builtin_suite();
    let apps: Vec<&ApplicationGraph> = suite.iter().take(6).collect();
    let spec = WorkloadSpec {
        entries: vec![
            ("RangeDet".to_string(), 20),
            ("TempMit".to_string(), 20),
            ("SC-RX".to_string(), 20),
            ("WiFi-TX".to_string(), 1),
        ],
        injection_rate: 1.0,
        arrival_model: dagsched_core::appgraph::ArrivalModel::Exponential,
        seed: 33,
    };
    let rates = default_rates(&arch, &apps, &spec).unwrap();
    let params = LooParams {
        train_rates: rates[4..8].to_vec(),
        eval_rate: rates[5],
        pred_slots: 4,
        train: TrainParams::default(),
        dagger: DaggerParams::default(),
        seed: 33,
    };
    let report = leave_one_out("WiFi-TX", &arch, &apps, &spec, &params).unwrap();
    assert!(report.before.per_frame_mean < 1.10);
    assert!((report.after.per_frame_mean - report.before.per_frame_mean).abs() < 0.05);
}

#[test]
fn dagger_dataset_grows_monotonically() {
    let (arch, mut dataset) = small_dataset();
    let before = dataset.len();
    let policy = train_hierarchical(&dataset, TrainParams::default()).unwrap();
    let suite = builtin_suite();
    let apps: Vec<&ApplicationGraph> = suite.iter().take(6).collect();
    let names: Vec<&str> = suite_app_names().to_vec();
    let mut spec = mix500_spec(4.0, 17);
    spec.entries.iter_mut().for_each(|(_, n)| *n = 8);
    let trace = generate_trace(&spec, &names).unwrap();
    let out = dagger_run(
        &policy,
        &arch,
        &[&suite[0], &suite[1], &suite[2], &suite[3], &suite[4], &suite[5]],
        std::slice::from_ref(&trace),
        Objective::Performance,
        &mut dataset,
        &DaggerParams {
            max_iters: 3,
            target_pct: 0.0,
            ..Default::default()
        },
    )
    .unwrap();
    let mut last = before;
    for it in &out.iterations {
        assert!(it.dataset_rows >= last);
        last = it.dataset_rows;
    }
    assert_eq!(dataset.len(), last);
    let _ = apps;
}

#[test]
fn loo_unknown_app_is_rejected() {
    let arch = builtin_platform("G1").unwrap();
    let suite = builtin_suite();
    let apps: Vec<&ApplicationGraph> = suite.iter().take(6).collect();
    let spec = mix500_spec(1.0, 1);
    let params = LooParams {
        train_rates: vec![1.0],
        eval_rate: 1.0,
        pred_slots: 4,
        train: TrainParams::default(),
        dagger: DaggerParams::default(),
        seed: 1,
    };
    assert!(leave_one_out("NotAnApp", &arch, &apps, &spec, &params).is_err());
}
