use super::*;
use crate::platform::builtin_platform;
use crate::sim::{PredRecord, TaskInstance};

fn synthetic_view<'a>(
    arch: &'a ArchitectureGraph,
    now: f64,
    pe_ready_time: &'a [f64],
    ready: &'a [TaskInstance],
    depths: &'a [Vec<usize>],
) -> SimView<'a> {
    SimView {
        now,
        arch,
        pe_ready_time,
        ready,
        depths,
    }
}

fn first_frame_task(task_type: usize) -> TaskInstance {
    TaskInstance {
        frame_id: 0,
        task_id: 0,
        app_id: 0,
        task_type,
        ready_time: 0.0,
        preds: Vec::new(),
    }
}

#[test]
fn schema_length_follows_the_formula() {
    // length = 4 + 3C + 1 + 3K + P (P per-PE availability slots)
    let g1 = builtin_platform("G1").unwrap();
    let schema = feature_schema(&g1, 4);
    assert_eq!(schema.len(), 4 + 3 * 5 + 1 + 3 * 4 + 16);
    assert_eq!(schema.len(), 48);

    let g5 = builtin_platform("G5").unwrap();
    assert_eq!(feature_schema(&g5, 4).len(), 4 + 3 * 2 + 1 + 3 * 4 + 8);

    // one single-PE cluster, K=1: 4 + 3 + 1 + 3 + 1 = 12
    let names = vec!["only".to_string()];
    assert_eq!(schema_from_cluster_names(&names, &[1], 1).len(), 12);
}

#[test]
fn schema_is_deterministic_and_hash_stable() {
    let g1 = builtin_platform("G1").unwrap();
    let a = feature_schema(&g1, 4);
    let b = feature_schema(&g1, 4);
    assert_eq!(a, b);
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), feature_schema(&g1, 3).hash());
}

#[test]
fn idle_platform_source_task_vector() {
    let g1 = builtin_platform("G1").unwrap();
    let schema = feature_schema(&g1, 4);
    let pe_ready = vec![0.0; g1.pe_count()];
    let ready = vec![first_frame_task(0)];
    let depths = vec![vec![3usize]];
    let view = synthetic_view(&g1, 0.0, &pe_ready, &ready, &depths);
    let fv = extract(&view, 0, &schema, &AblationMask::none()).unwrap();

    let idx = |name: &str| schema.fields.iter().position(|f| f.name == name).unwrap();
    assert_eq!(fv.values[idx("task_id")], 0.0);
    assert_eq!(fv.values[idx("app_id")], 0.0);
    assert_eq!(fv.values[idx("depth")], 3.0);
    assert_eq!(fv.values[idx("pred_count")], 0.0);
    assert_eq!(fv.values[idx("ready_order")], 0.0);
    for cluster in &g1.clusters {
        assert_eq!(fv.values[idx(&format!("ready_{}", cluster.name))], 0.0);
    }
    for k in 0..4 {
        assert_eq!(fv.values[idx(&format!("pred{k}_id"))], SENTINEL);
        assert_eq!(fv.values[idx(&format!("pred{k}_cluster"))], SENTINEL);
        assert_eq!(fv.values[idx(&format!("pred{k}_volume"))], SENTINEL);
    }
    // Task type 0 is generic: accelerator clusters read as sentinel.
    assert_eq!(fv.values[idx("exec_MatMul")], SENTINEL);
    assert_eq!(fv.values[idx("exec_FFT")], SENTINEL);
    assert_eq!(fv.values[idx("exec_Decoder")], SENTINEL);
    assert!(fv.values[idx("exec_LITTLE")] > 0.0);
    assert!(fv.values[idx("exec_big")] > 0.0);
    assert!(fv.values.iter().all(|v| !v.is_nan()));
}

#[test]
fn predecessor_slots_copy_cluster_and_volume() {
    let g1 = builtin_platform("G1").unwrap();
    let schema = feature_schema(&g1, 4);
    let pe_ready = vec![0.0; g1.pe_count()];
    let mut task = first_frame_task(0);
    // One predecessor that ran on cluster 2 (a MatMul PE) with volume 8.
    let matmul_pe = g1.clusters[2].pe_ids[0];
    task.preds.push(PredRecord {
        task_id: 7,
        pe: matmul_pe,
        finish_us: 0.0,
        volume: 8.0,
    });
    let ready = vec![task];
    let depths = vec![vec![0usize; 10]];
    let view = synthetic_view(&g1, 0.0, &pe_ready, &ready, &depths);
    let fv = extract(&view, 0, &schema, &AblationMask::none()).unwrap();
    let idx = |name: &str| schema.fields.iter().position(|f| f.name == name).unwrap();
    assert_eq!(fv.values[idx("pred0_id")], 7.0);
    assert_eq!(fv.values[idx("pred0_cluster")], 2.0);
    assert_eq!(fv.values[idx("pred0_volume")], 8.0);
    assert_eq!(fv.values[idx("pred1_id")], SENTINEL);
    assert_eq!(fv.values[idx("pred_count")], 1.0);
}

#[test]
fn overflowing_predecessors_keep_largest_volumes() {
    let g1 = builtin_platform("G1").unwrap();
    let schema = feature_schema(&g1, 2);
    let pe_ready = vec![0.0; g1.pe_count()];
    let mut task = first_frame_task(0);
    for (id, vol) in [(1, 3.0), (2, 9.0), (3, 6.0)] {
        task.preds.push(PredRecord {
            task_id: id,
            pe: 0,
            finish_us: 0.0,
            volume: vol,
        });
    }
    let ready = vec![task];
    let depths = vec![vec![0usize; 10]];
    let view = synthetic_view(&g1, 0.0, &pe_ready, &ready, &depths);
    let fv = extract(&view, 0, &schema, &AblationMask::none()).unwrap();
    let idx = |name: &str| schema.fields.iter().position(|f| f.name == name).unwrap();
    // Volume-descending: preds 2 (9.0) then 3 (6.0); pred 1 dropped.
    assert_eq!(fv.values[idx("pred0_id")], 2.0);
    assert_eq!(fv.values[idx("pred0_volume")], 9.0);
    assert_eq!(fv.values[idx("pred1_id")], 3.0);
    assert_eq!(fv.values[idx("pred1_volume")], 6.0);
    assert_eq!(fv.values[idx("pred_count")], 3.0);
}

#[test]
fn time_shift_invariance() {
    let g1 = builtin_platform("G1").unwrap();
    let schema = feature_schema(&g1, 4);
    let depths = vec![vec![5usize; 10]];

    let mut task = first_frame_task(3);
    task.ready_time = 40.0;
    task.preds.push(PredRecord {
        task_id: 2,
        pe: 1,
        finish_us: 40.0,
        volume: 5.0,
    });
    let pe_ready: Vec<f64> = (0..g1.pe_count()).map(|i| 40.0 + i as f64).collect();
    let ready = vec![task.clone()];
    let view = synthetic_view(&g1, 40.0, &pe_ready, &ready, &depths);
    let fv_a = extract(&view, 0, &schema, &AblationMask::none()).unwrap();

    // Shift every absolute clock by 10,000 µs.
    let delta = 10_000.0;
    let mut task_b = task;
    task_b.ready_time += delta;
    task_b.preds[0].finish_us += delta;
    let pe_ready_b: Vec<f64> = pe_ready.iter().map(|t| t + delta).collect();
    let ready_b = vec![task_b];
    let view_b = synthetic_view(&g1, 40.0 + delta, &pe_ready_b, &ready_b, &depths);
    let fv_b = extract(&view_b, 0, &schema, &AblationMask::none()).unwrap();
    assert_eq!(fv_a, fv_b);
}

#[test]
fn idle_pes_read_as_zero_offset() {
    // pe_ready_time in the past (idle PE) must not go negative.
    let g1 = builtin_platform("G1").unwrap();
    let schema = feature_schema(&g1, 4);
    let pe_ready = vec![5.0; g1.pe_count()];
    let ready = vec![first_frame_task(0)];
    let depths = vec![vec![0usize; 10]];
    let view = synthetic_view(&g1, 100.0, &pe_ready, &ready, &depths);
    let fv = extract(&view, 0, &schema, &AblationMask::none()).unwrap();
    let idx = |name: &str| schema.fields.iter().position(|f| f.name == name).unwrap();
    assert_eq!(fv.values[idx("ready_LITTLE")], 0.0);
}

#[test]
fn ablation_masks_zero_their_groups() {
    let g1 = builtin_platform("G1").unwrap();
    let schema = feature_schema(&g1, 4);
    let pe_ready: Vec<f64> = (0..g1.pe_count()).map(|i| 7.0 * i as f64).collect();
    let mut task = first_frame_task(1);
    task.task_id = 5;
    task.preds.push(PredRecord {
        task_id: 1,
        pe: 2,
        finish_us: 0.0,
        volume: 4.0,
    });
    let ready = vec![task];
    let depths = vec![vec![2usize; 10]];
    let view = synthetic_view(&g1, 0.0, &pe_ready, &ready, &depths);

    let masks = [
        AblationMask { zero_static: true, ..Default::default() },
        AblationMask { zero_dynamic: true, ..Default::default() },
        AblationMask { zero_pe_availability: true, ..Default::default() },
        AblationMask { zero_task_identity: true, ..Default::default() },
    ];
    for mask in masks {
        let fv = extract(&view, 0, &schema, &mask).unwrap();
        for (value, field) in fv.values.iter().zip(&schema.fields) {
            let should_zero = (mask.zero_static && field.kind == FeatureKind::Static)
                || (mask.zero_dynamic && field.kind == FeatureKind::Dynamic)
                || (mask.zero_pe_availability && field.group == FeatureGroup::PeAvailability)
                || (mask.zero_task_identity && field.group == FeatureGroup::TaskIdentity);
            if should_zero {
                assert_eq!(*value, 0.0, "field {} not masked", field.name);
            }
        }
    }
}

#[test]
fn task_not_ready_error() {
    let g1 = builtin_platform("G1").unwrap();
    let schema = feature_schema(&g1, 4);
    let pe_ready = vec![0.0; g1.pe_count()];
    let ready: Vec<TaskInstance> = vec![];
    let depths = vec![vec![0usize; 1]];
    let view = synthetic_view(&g1, 0.0, &pe_ready, &ready, &depths);
    assert!(matches!(
        extract(&view, 0, &schema, &AblationMask::none()),
        Err(FeatureError::TaskNotReady(0))
    ));
}

/// Static fields are identical across frames of the same app; the pinned
/// mid-simulation vector guards the full encoding.
#[test]
fn static_fields_repeat_across_frames_and_golden_vector() {
    use crate::appgraph::{builtin_suite, generate_trace, mix500_spec, suite_app_names};
    use crate::oracle::{EtfScheduler, Objective};
    use crate::sim::run_simulation;

    let arch = builtin_platform("G1").unwrap();
    let suite = builtin_suite();
    let apps: Vec<&crate::appgraph::ApplicationGraph> = suite.iter().take(6).collect();
    let mut spec = mix500_spec(4.0, 21);
    spec.entries.iter_mut().for_each(|(_, n)| *n = 8);
    let names: Vec<&str> = suite_app_names().to_vec();
    let trace = generate_trace(&spec, &names).unwrap();
    let schema = feature_schema(&arch, 4);
    let mut recorder = EtfScheduler::recording(Objective::Performance, schema.clone());
    run_simulation(&arch, &apps, &trace, &mut recorder, 0.0, 0).unwrap();
    let decisions = recorder.take_decisions();
    assert!(!decisions.is_empty());

    // Static profile fields depend only on (app, task); compare across
    // frames of the same app task.
    let static_idx: Vec<usize> = schema
        .fields
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FeatureKind::Static && f.group != FeatureGroup::PredIdentity)
        .map(|(i, _)| i)
        .collect();
    let mut by_task: std::collections::BTreeMap<(usize, usize), Vec<&crate::oracle::OracleDecision>> =
        Default::default();
    for d in &decisions {
        by_task.entry((d.app_id, d.task_id)).or_default().push(d);
    }
    let mut compared = 0;
    for (_key, group) in by_task {
        if group.len() < 2 {
            continue;
        }
        for d in &group[1..] {
            for &i in &static_idx {
                assert_eq!(
                    d.features.values[i], group[0].features.values[i],
                    "static field {} differs across frames",
                    schema.fields[i].name
                );
            }
        }
        compared += 1;
    }
    assert!(compared > 10);
}
