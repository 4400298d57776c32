//! Built-in platform configurations and the synthetic profile generator.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{ArchitectureGraph, Cluster, PlatformError, TaskKind, TaskTypeCatalog};
use crate::appgraph::builtin_catalog;
use crate::util::{derive_seed, fnv1a};

/// Names of the built-in configurations, baseline first.
pub const BUILTIN_PLATFORMS: [&str; 5] = ["G1", "G2", "G3", "G4", "G5"];

/// Cluster sizes (LITTLE, big, MatMul, FFT, Decoder) per configuration.
fn cluster_sizes(name: &str) -> Option<[usize; 5]> {
    match name {
        "G1" => Some([4, 4, 2, 4, 2]),
        "G2" => Some([2, 2, 2, 2, 2]),
        "G3" => Some([1, 1, 1, 1, 1]),
        "G4" => Some([4, 4, 1, 1, 1]),
        "G5" => Some([4, 4, 0, 0, 0]),
        _ => None,
    }
}

const ALL_KINDS: [TaskKind; 5] = [
    TaskKind::Generic,
    TaskKind::Fft,
    TaskKind::Ifft,
    TaskKind::MatMul,
    TaskKind::Decoder,
];

/// Canonical cluster roster: (name, supported kinds).
fn cluster_roster() -> Vec<(&'static str, Vec<TaskKind>)> {
    vec![
        ("LITTLE", ALL_KINDS.to_vec()),
        ("big", ALL_KINDS.to_vec()),
        ("MatMul", vec![TaskKind::MatMul]),
        ("FFT", vec![TaskKind::Fft, TaskKind::Ifft]),
        ("Decoder", vec![TaskKind::Decoder]),
    ]
}

/// Seed anchoring every built-in profile table.
const PROFILE_SEED: u64 = 0x5ced_01_5eed;

/// Per-task-type raw profile draws. Values depend only on the type name so
/// every configuration sharing a cluster name sees identical tables.
struct TypeProfile {
    little_exec: f64,
    little_power: f64,
    big_exec: f64,
    big_power: f64,
    accel_exec: f64,
    accel_power: f64,
}

fn type_profile(type_name: &str) -> TypeProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(PROFILE_SEED, type_name));
    let little_exec: f64 = rng.random_range(20.0..120.0);
    let little_power: f64 = rng.random_range(60.0..140.0);
    // big is 1.5-3x faster than LITTLE, accelerators 5-20x faster;
    // power ordered LITTLE < accelerator < big for every task.
    let big_speedup: f64 = rng.random_range(1.5..3.0);
    let accel_speedup: f64 = rng.random_range(5.0..20.0);
    let accel_power_factor: f64 = rng.random_range(1.2..2.0);
    let big_power_factor: f64 = rng.random_range(2.5..4.0);
    TypeProfile {
        little_exec,
        little_power,
        big_exec: little_exec / big_speedup,
        big_power: little_power * big_power_factor,
        accel_exec: little_exec / accel_speedup,
        accel_power: little_power * accel_power_factor,
    }
}

/// Generate the (cluster id, task type id) -> (exec µs, power mW) tables for
/// a roster of clusters against a catalog. Deterministic; this is the ground
/// truth profile used by all built-in platforms.
pub fn generate_profile_tables(
    catalog: &TaskTypeCatalog,
    clusters: &[Cluster],
) -> BTreeMap<(usize, usize), (f64, f64)> {
    let mut tables = BTreeMap::new();
    for ty in catalog.iter() {
        let prof = type_profile(&ty.name);
        for cluster in clusters {
            if !cluster.kinds.contains(&ty.kind) {
                continue;
            }
            let (exec, power) = match cluster.name.as_str() {
                "LITTLE" => (prof.little_exec, prof.little_power),
                "big" => (prof.big_exec, prof.big_power),
                // Any accelerator cluster gets the accelerator draw.
                _ => (prof.accel_exec, prof.accel_power),
            };
            tables.insert((cluster.id, ty.id), (exec, power));
        }
    }
    tables
}

/// Build one of the G1..G5 configurations against the built-in task catalog.
pub fn builtin_platform(name: &str) -> Result<ArchitectureGraph, PlatformError> {
    let sizes = cluster_sizes(name).ok_or_else(|| PlatformError::UnknownConfig(name.into()))?;
    let catalog = builtin_catalog();
    let mut clusters = Vec::new();
    let mut next_pe = 0;
    for ((cluster_name, kinds), &size) in cluster_roster().into_iter().zip(sizes.iter()) {
        if size == 0 {
            continue;
        }
        let pe_ids: Vec<usize> = (next_pe..next_pe + size).collect();
        next_pe += size;
        clusters.push(Cluster {
            id: clusters.len(),
            name: cluster_name.to_string(),
            pe_ids,
            kinds,
        });
    }
    let profiles = generate_profile_tables(&catalog, &clusters);
    ArchitectureGraph::assemble(name, catalog, clusters, &profiles, 0.02, 0.5)
}

/// Stable fingerprint of a platform's structure and profile tables, used to
/// pin the generated ground truth in tests.
pub fn platform_fingerprint(arch: &ArchitectureGraph) -> u64 {
    fnv1a(super::format::emit_platform(arch).as_bytes())
}
