use super::*;
use crate::platform::TaskKind;
use crate::util::fnv1a;

/// The seven-node example shape: 0→1, 1→{2,3,4}, {2,3,4}→5, 5→6.
fn seven_node_chain_fan() -> ApplicationGraph {
    let preds: Vec<Vec<(usize, f64)>> = vec![
        vec![],
        vec![(0, 2.0)],
        vec![(1, 3.0)],
        vec![(1, 4.0)],
        vec![(1, 5.0)],
        vec![(2, 1.0), (3, 1.0), (4, 1.0)],
        vec![(5, 2.0)],
    ];
    ApplicationGraph {
        app_id: 0,
        name: "seven".into(),
        nodes: preds
            .into_iter()
            .enumerate()
            .map(|(id, predecessors)| TaskNode {
                id,
                task_type: 0,
                predecessors,
                app_id: 0,
            })
            .collect(),
    }
}

#[test]
fn seven_node_graph_is_valid() {
    assert!(seven_node_chain_fan().validate().is_empty());
}

#[test]
fn two_node_cycle_is_detected() {
    let app = ApplicationGraph {
        app_id: 0,
        name: "cycle".into(),
        nodes: vec![
            TaskNode {
                id: 0,
                task_type: 0,
                predecessors: vec![(1, 1.0)],
                app_id: 0,
            },
            TaskNode {
                id: 1,
                task_type: 0,
                predecessors: vec![(0, 1.0)],
                app_id: 0,
            },
        ],
    };
    let violations = app.validate();
    assert!(violations.contains(&DagViolation::Cycle));
}

#[test]
fn single_node_graph_is_valid() {
    let app = ApplicationGraph {
        app_id: 0,
        name: "one".into(),
        nodes: vec![TaskNode {
            id: 0,
            task_type: 0,
            predecessors: vec![],
            app_id: 0,
        }],
    };
    assert!(app.validate().is_empty());
    assert_eq!(app.downward_depth(0).unwrap(), 0);
}

/// Independent oracle: longest path to a terminal by exhaustive DFS over
/// all paths.
fn longest_path_by_enumeration(app: &ApplicationGraph, from: usize) -> usize {
    let succs = app.successor_lists();
    fn dfs(succs: &[Vec<(usize, f64)>], u: usize) -> usize {
        succs[u]
            .iter()
            .map(|&(v, _)| 1 + dfs(succs, v))
            .max()
            .unwrap_or(0)
    }
    dfs(&succs, from)
}

#[test]
fn downward_depth_matches_exhaustive_enumeration() {
    let app = seven_node_chain_fan();
    for node in 0..7 {
        assert_eq!(
            app.downward_depth(node).unwrap(),
            longest_path_by_enumeration(&app, node),
            "node {node}"
        );
    }
    // Head of the chain: 0→1→{2|3|4}→5→6 is four edges.
    assert_eq!(app.downward_depth(0).unwrap(), 4);
    assert_eq!(app.downward_depth(6).unwrap(), 0);
}

#[test]
fn chain_head_depth_is_length_minus_one() {
    for n in [1usize, 2, 5, 12] {
        let app = ApplicationGraph {
            app_id: 0,
            name: "chain".into(),
            nodes: (0..n)
                .map(|id| TaskNode {
                    id,
                    task_type: 0,
                    predecessors: if id == 0 { vec![] } else { vec![(id - 1, 1.0)] },
                    app_id: 0,
                })
                .collect(),
        };
        assert_eq!(app.downward_depth(0).unwrap(), n - 1);
    }
}

#[test]
fn unknown_task_depth_is_an_error() {
    let app = seven_node_chain_fan();
    assert!(matches!(
        app.downward_depth(99),
        Err(AppError::UnknownTask { task: 99, .. })
    ));
}

#[test]
fn suite_task_counts_match_the_roster() {
    let expected = [
        ("WiFi-TX", 27),
        ("WiFi-RX", 34),
        ("RangeDet", 7),
        ("SC-TX", 8),
        ("SC-RX", 8),
        ("TempMit", 10),
        ("PulseDoppler", 449),
    ];
    for (name, count) in expected {
        let app = builtin_app(name).unwrap();
        assert_eq!(app.task_count(), count, "{name}");
        assert!(app.validate().is_empty(), "{name} must be a valid DAG");
    }
    assert!(matches!(
        builtin_app("NoSuchApp"),
        Err(AppError::UnknownApp(_))
    ));
}

#[test]
fn range_det_has_three_fft_tasks() {
    let catalog = builtin_catalog();
    let app = builtin_app("RangeDet").unwrap();
    let ffts = app
        .nodes
        .iter()
        .filter(|n| catalog.get(n.task_type).unwrap().kind == TaskKind::Fft)
        .count();
    assert_eq!(ffts, 3);
}

#[test]
fn pulse_doppler_kind_census() {
    let catalog = builtin_catalog();
    let app = builtin_app("PulseDoppler").unwrap();
    let mut fft = 0;
    let mut ifft = 0;
    let mut generic = 0;
    for node in &app.nodes {
        match catalog.get(node.task_type).unwrap().kind {
            TaskKind::Fft => fft += 1,
            TaskKind::Ifft => ifft += 1,
            TaskKind::Generic => generic += 1,
            other => panic!("unexpected kind {other:?}"),
        }
    }
    assert_eq!((fft, ifft, generic), (192, 128, 129));
}

#[test]
fn suite_fan_in_is_bounded() {
    for app in builtin_suite() {
        if app.name == "PulseDoppler" {
            continue; // wired explicitly, fan-in ≤ 3 by construction too
        }
        for node in &app.nodes {
            assert!(
                node.predecessors.len() <= 3,
                "{} node {} has fan-in {}",
                app.name,
                node.id,
                node.predecessors.len()
            );
        }
    }
}

#[test]
fn suite_graphs_are_pinned() {
    let catalog = builtin_catalog();
    let fingerprints: Vec<String> = builtin_suite()
        .iter()
        .map(|app| format!("{}:{:016x}", app.name, fnv1a(emit_app(app, &catalog).as_bytes())))
        .collect();
    let expected = [
        "WiFi-TX:c3ce39972929207d",
        "WiFi-RX:fc60179815e75a88",
        "RangeDet:c55dad4c96295fb9",
        "SC-TX:69f08a4c57e44558",
        "SC-RX:9b0a1f8b34d1400c",
        "TempMit:93c4aad9151d0224",
        "PulseDoppler:8e873aec381f9bb3",
    ];
    assert_eq!(fingerprints, expected);
}

#[test]
fn dag_file_round_trips() {
    let catalog = builtin_catalog();
    for app in builtin_suite() {
        let text = emit_app(app, &catalog);
        let parsed = parse_app(&text, &catalog).unwrap();
        assert_eq!(app, &parsed, "{}", app.name);
    }
}

#[test]
fn mix500_trace_has_five_hundred_frames() {
    let spec = mix500_spec(2.0, 42);
    let names: Vec<&str> = suite_app_names().to_vec();
    let trace = generate_trace(&spec, &names).unwrap();
    assert_eq!(trace.len(), 500);
    // arrivals non-decreasing, frame ids unique and dense
    for pair in trace.arrivals.windows(2) {
        assert!(pair[0].time_us <= pair[1].time_us);
    }
    let mut ids: Vec<u64> = trace.arrivals.iter().map(|a| a.frame_id).collect();
    ids.sort_unstable();
    assert_eq!(ids, (0..500).collect::<Vec<u64>>());
}

#[test]
fn periodic_trace_is_evenly_spaced() {
    let spec = WorkloadSpec {
        entries: vec![("RangeDet".to_string(), 3)],
        injection_rate: 1.0,
        arrival_model: ArrivalModel::Periodic,
        seed: 7,
    };
    let trace = generate_trace(&spec, &["RangeDet"]).unwrap();
    let times: Vec<f64> = trace.arrivals.iter().map(|a| a.time_us).collect();
    assert_eq!(times, vec![0.0, 1000.0, 2000.0]);
}

#[test]
fn trace_generation_is_deterministic() {
    let spec = mix500_spec(3.0, 99);
    let names: Vec<&str> = suite_app_names().to_vec();
    let a = generate_trace(&spec, &names).unwrap();
    let b = generate_trace(&spec, &names).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.emit(), b.emit());
}

#[test]
fn unknown_app_in_spec_is_rejected() {
    let spec = WorkloadSpec {
        entries: vec![("Mystery".to_string(), 1)],
        injection_rate: 1.0,
        arrival_model: ArrivalModel::Exponential,
        seed: 0,
    };
    assert!(matches!(
        generate_trace(&spec, &["RangeDet"]),
        Err(AppError::UnknownApp(_))
    ));
}

#[test]
fn exponential_mean_gap_tracks_the_rate() {
    for (seed, rate) in [(1u64, 2.0f64), (2, 8.0), (3, 0.5)] {
        let spec = WorkloadSpec {
            entries: vec![("SC-TX".to_string(), 10_000)],
            injection_rate: rate,
            arrival_model: ArrivalModel::Exponential,
            seed,
        };
        let trace = generate_trace(&spec, &["SC-TX"]).unwrap();
        let gaps: Vec<f64> = trace
            .arrivals
            .windows(2)
            .map(|w| w[1].time_us - w[0].time_us)
            .collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let expected = 1000.0 / rate;
        assert!(
            (mean - expected).abs() / expected < 0.05,
            "seed {seed}: mean gap {mean} vs expected {expected}"
        );
    }
}

#[test]
fn trace_file_round_trips() {
    let spec = mix500_spec(5.0, 11);
    let names: Vec<&str> = suite_app_names().to_vec();
    let trace = generate_trace(&spec, &names).unwrap();
    let parsed = FrameArrivalTrace::parse(&trace.emit()).unwrap();
    assert_eq!(trace, parsed);
}

#[test]
fn workload_file_round_trips() {
    let spec = mix500_spec(2.5, 42);
    let parsed = parse_workload(&emit_workload(&spec)).unwrap();
    assert_eq!(spec, parsed);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        /// downward_depth(parent) ≥ downward_depth(child) + 1 on every edge.
        #[test]
        fn depth_dominates_children(app_idx in 0usize..7) {
            let app = &builtin_suite()[app_idx];
            let depths = app.downward_depths();
            for node in &app.nodes {
                for &(pred, _) in &node.predecessors {
                    prop_assert!(depths[pred] >= depths[node.id] + 1);
                }
            }
        }

        #[test]
        fn volumes_are_non_negative(app_idx in 0usize..7) {
            let app = &builtin_suite()[app_idx];
            for node in &app.nodes {
                for &(_, v) in &node.predecessors {
                    prop_assert!(v >= 0.0);
                }
            }
        }
    }
}
