//! The bundled synthetic application suite.
//!
//! Six streaming applications plus a large radar-style graph, generated by a
//! fixed seeded layered-DAG constructor so every build sees byte-identical
//! graphs. Task counts and accelerator usage per application:
//!
//! | app          | tasks | accelerator tasks        |
//! |--------------|-------|--------------------------|
//! | WiFi-TX      | 27    | 4 fft                    |
//! | WiFi-RX      | 34    | 4 fft, 2 decoder         |
//! | RangeDet     | 7     | 3 fft                    |
//! | SC-TX        | 8     | none                     |
//! | SC-RX        | 8     | 2 decoder                |
//! | TempMit      | 10    | 3 matmul                 |
//! | PulseDoppler | 449   | 192 fft, 128 ifft        |

use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AppError, ApplicationGraph, TaskNode};
use crate::platform::{TaskKind, TaskType, TaskTypeCatalog};
use crate::util::derive_seed;

/// Seed anchoring the generated suite.
pub const SUITE_SEED: u64 = 0xda65_0a_d5;

/// Suite application names in canonical app-id order.
pub fn suite_app_names() -> [&'static str; 7] {
    [
        "WiFi-TX",
        "WiFi-RX",
        "RangeDet",
        "SC-TX",
        "SC-RX",
        "TempMit",
        "PulseDoppler",
    ]
}

struct SuiteEntry {
    name: &'static str,
    tasks: usize,
    max_width: usize,
    fft: usize,
    decoder: usize,
    matmul: usize,
}

fn suite_entries() -> [SuiteEntry; 6] {
    [
        SuiteEntry { name: "WiFi-TX", tasks: 27, max_width: 4, fft: 4, decoder: 0, matmul: 0 },
        SuiteEntry { name: "WiFi-RX", tasks: 34, max_width: 4, fft: 4, decoder: 2, matmul: 0 },
        SuiteEntry { name: "RangeDet", tasks: 7, max_width: 3, fft: 3, decoder: 0, matmul: 0 },
        SuiteEntry { name: "SC-TX", tasks: 8, max_width: 2, fft: 0, decoder: 0, matmul: 0 },
        SuiteEntry { name: "SC-RX", tasks: 8, max_width: 2, fft: 0, decoder: 2, matmul: 0 },
        SuiteEntry { name: "TempMit", tasks: 10, max_width: 3, fft: 0, decoder: 0, matmul: 3 },
    ]
}

fn snake(name: &str) -> String {
    name.to_lowercase().replace('-', "_")
}

/// Predecessor lists for a layered random DAG with a single source, a single
/// terminal, fan-in at most three, and every node on a source-to-terminal
/// path. Layer widths are drawn back-to-front so each layer is at most three
/// times wider than its successor layer, which guarantees coverage.
fn layered_predecessors(
    n: usize,
    max_width: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<(usize, f64)>> {
    assert!(n >= 2, "layered DAG needs at least source and terminal");
    let interior = n - 2;
    let mut rev_widths = Vec::new();
    let mut prev = 1usize; // terminal layer
    let mut rem = interior;
    while rem > 0 {
        let upper = max_width.min(3 * prev).min(rem);
        let lower = upper.div_ceil(2);
        let w = rng.random_range(lower..=upper);
        rev_widths.push(w);
        prev = w;
        rem -= w;
    }
    // Forward layer layout: source, interior layers, terminal.
    let mut layers: Vec<Vec<usize>> = Vec::new();
    layers.push(vec![0]);
    let mut next_id = 1;
    for &w in rev_widths.iter().rev() {
        layers.push((next_id..next_id + w).collect());
        next_id += w;
    }
    layers.push(vec![n - 1]);

    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut out_degree = vec![0usize; n];
    for li in 1..layers.len() {
        let above = &layers[li - 1];
        let here = &layers[li];
        for &v in here {
            let fan_in = rng.random_range(1..=3usize.min(above.len()));
            let mut pool = above.clone();
            pool.shuffle(rng);
            for &p in pool.iter().take(fan_in) {
                preds[v].push(p);
                out_degree[p] += 1;
            }
        }
        // Cover: every node of the layer above needs a successor here.
        for &p in above {
            if out_degree[p] > 0 {
                continue;
            }
            if let Some(&v) = here.iter().find(|&&v| preds[v].len() < 3) {
                preds[v].push(p);
                out_degree[p] += 1;
            } else {
                // All slots taken: some other source above feeds this layer
                // more than once; swap one of its edges over to p.
                'swap: for &v in here {
                    for slot in 0..preds[v].len() {
                        let q = preds[v][slot];
                        if out_degree[q] >= 2 {
                            preds[v][slot] = p;
                            out_degree[q] -= 1;
                            out_degree[p] += 1;
                            break 'swap;
                        }
                    }
                }
            }
        }
    }
    preds
        .into_iter()
        .map(|ps| {
            ps.into_iter()
                .map(|p| (p, rng.random_range(1..=16) as f64))
                .collect()
        })
        .collect()
}

/// Assign accelerator kinds to a deterministic random subset of the interior
/// nodes; source and terminal stay generic.
fn assign_kinds(
    n: usize,
    fft: usize,
    decoder: usize,
    matmul: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<TaskKind> {
    let mut kinds = vec![TaskKind::Generic; n];
    let mut interior: Vec<usize> = (1..n - 1).collect();
    interior.shuffle(rng);
    let mut it = interior.into_iter();
    for _ in 0..fft {
        kinds[it.next().expect("enough interior nodes")] = TaskKind::Fft;
    }
    for _ in 0..decoder {
        kinds[it.next().expect("enough interior nodes")] = TaskKind::Decoder;
    }
    for _ in 0..matmul {
        kinds[it.next().expect("enough interior nodes")] = TaskKind::MatMul;
    }
    kinds
}

/// The fixed seven-node range-detection shape: a chain that fans out to
/// three parallel FFT stages and joins again before the terminal task.
fn range_det_predecessors(rng: &mut ChaCha8Rng) -> (Vec<Vec<(usize, f64)>>, Vec<TaskKind>) {
    let mut vol = || rng.random_range(1..=16) as f64;
    let preds = vec![
        vec![],
        vec![(0, vol())],
        vec![(1, vol())],
        vec![(1, vol())],
        vec![(1, vol())],
        vec![(2, vol()), (3, vol()), (4, vol())],
        vec![(5, vol())],
    ];
    let kinds = vec![
        TaskKind::Generic,
        TaskKind::Generic,
        TaskKind::Fft,
        TaskKind::Fft,
        TaskKind::Fft,
        TaskKind::Generic,
        TaskKind::Generic,
    ];
    (preds, kinds)
}

/// Pulse-Doppler analog: source fans out to 192 parallel FFT tasks, which
/// feed 128 inverse-FFT tasks, followed by a reduction pyramid to a single
/// terminal. 449 tasks total, five shared task types.
fn pulse_doppler(app_id: usize, type_base: usize, rng: &mut ChaCha8Rng) -> ApplicationGraph {
    const FFT: usize = 192;
    const IFFT: usize = 128;
    let reduce_widths = [64, 32, 16, 8, 4, 2, 1];
    let mut nodes: Vec<TaskNode> = Vec::new();
    let vol = |rng: &mut ChaCha8Rng| rng.random_range(1..=16) as f64;

    // type ids: base+0 src, +1 fft, +2 ifft, +3 stage, +4 sink
    nodes.push(TaskNode { id: 0, task_type: type_base, predecessors: vec![], app_id });
    let fft_start = 1;
    for i in 0..FFT {
        nodes.push(TaskNode {
            id: fft_start + i,
            task_type: type_base + 1,
            predecessors: vec![(0, vol(rng))],
            app_id,
        });
    }
    let ifft_start = fft_start + FFT;
    let mut ifft_preds: Vec<Vec<(usize, f64)>> = vec![Vec::new(); IFFT];
    for i in 0..FFT {
        ifft_preds[i % IFFT].push((fft_start + i, vol(rng)));
    }
    for (i, preds) in ifft_preds.into_iter().enumerate() {
        nodes.push(TaskNode {
            id: ifft_start + i,
            task_type: type_base + 2,
            predecessors: preds,
            app_id,
        });
    }
    let mut prev_start = ifft_start;
    let mut prev_width = IFFT;
    let mut next_start = ifft_start + IFFT;
    for &w in &reduce_widths {
        let mut preds: Vec<Vec<(usize, f64)>> = vec![Vec::new(); w];
        for i in 0..prev_width {
            preds[i % w].push((prev_start + i, vol(rng)));
        }
        for (i, p) in preds.into_iter().enumerate() {
            nodes.push(TaskNode {
                id: next_start + i,
                task_type: type_base + 3,
                predecessors: p,
                app_id,
            });
        }
        prev_start = next_start;
        prev_width = w;
        next_start += w;
    }
    nodes.push(TaskNode {
        id: next_start,
        task_type: type_base + 4,
        predecessors: vec![(prev_start, vol(rng))],
        app_id,
    });
    debug_assert_eq!(nodes.len(), 449);
    ApplicationGraph {
        app_id,
        name: "PulseDoppler".to_string(),
        nodes,
    }
}

fn build_suite() -> (Vec<ApplicationGraph>, TaskTypeCatalog) {
    let mut apps = Vec::new();
    let mut types: Vec<TaskType> = Vec::new();
    for (app_id, entry) in suite_entries().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SUITE_SEED, entry.name));
        let (preds, kinds) = if entry.name == "RangeDet" {
            range_det_predecessors(&mut rng)
        } else {
            let preds = layered_predecessors(entry.tasks, entry.max_width, &mut rng);
            let kinds = assign_kinds(entry.tasks, entry.fft, entry.decoder, entry.matmul, &mut rng);
            (preds, kinds)
        };
        let base = types.len();
        let prefix = snake(entry.name);
        let mut nodes = Vec::with_capacity(entry.tasks);
        for (i, (p, kind)) in preds.into_iter().zip(kinds).enumerate() {
            types.push(TaskType {
                id: base + i,
                name: format!("{prefix}_t{i:02}"),
                kind,
            });
            nodes.push(TaskNode {
                id: i,
                task_type: base + i,
                predecessors: p,
                app_id,
            });
        }
        apps.push(ApplicationGraph {
            app_id,
            name: entry.name.to_string(),
            nodes,
        });
    }
    // Pulse-Doppler shares five task types across its 449 nodes.
    let base = types.len();
    for (i, (suffix, kind)) in [
        ("src", TaskKind::Generic),
        ("fft", TaskKind::Fft),
        ("ifft", TaskKind::Ifft),
        ("stage", TaskKind::Generic),
        ("sink", TaskKind::Generic),
    ]
    .into_iter()
    .enumerate()
    {
        types.push(TaskType {
            id: base + i,
            name: format!("pd_{suffix}"),
            kind,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SUITE_SEED, "PulseDoppler"));
    apps.push(pulse_doppler(apps.len(), base, &mut rng));

    let catalog = TaskTypeCatalog::new(types).expect("suite catalog is well formed");
    for app in &apps {
        debug_assert!(app.is_valid(), "generated app {} is invalid", app.name);
    }
    (apps, catalog)
}

fn suite_cell() -> &'static (Vec<ApplicationGraph>, TaskTypeCatalog) {
    static CELL: OnceLock<(Vec<ApplicationGraph>, TaskTypeCatalog)> = OnceLock::new();
    CELL.get_or_init(build_suite)
}

/// All bundled applications in app-id order.
pub fn builtin_suite() -> &'static [ApplicationGraph] {
    &suite_cell().0
}

/// Task types used by the bundled suite; built-in platforms profile exactly
/// these.
pub fn builtin_catalog() -> TaskTypeCatalog {
    suite_cell().1.clone()
}

/// Look up one bundled application by name.
pub fn builtin_app(name: &str) -> Result<&'static ApplicationGraph, AppError> {
    builtin_suite()
        .iter()
        .find(|a| a.name == name)
        .ok_or_else(|| AppError::UnknownApp(name.to_string()))
}

/// The bundled 500-frame mixed workload over the six streaming apps.
pub fn mix500_spec(injection_rate: f64, seed: u64) -> crate::appgraph::WorkloadSpec {
    crate::appgraph::WorkloadSpec {
        entries: vec![
            ("WiFi-TX".to_string(), 69),
            ("WiFi-RX".to_string(), 111),
            ("RangeDet".to_string(), 64),
            ("SC-TX".to_string(), 64),
            ("SC-RX".to_string(), 91),
            ("TempMit".to_string(), 101),
        ],
        injection_rate,
        arrival_model: crate::appgraph::ArrivalModel::Exponential,
        seed,
    }
}
