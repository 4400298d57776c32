//! Heterogeneous many-core platform model.
//!
//! A platform is a set of clusters, each holding processing elements (PEs)
//! with identical static execution-time and power profiles, plus a linear
//! communication-latency model over ordered PE pairs. Platforms are loaded
//! from a line-oriented description file or taken from the built-in G1..G5
//! configurations, and are immutable once validated.

mod builtin;
mod format;

pub use builtin::{
    builtin_platform, generate_profile_tables, platform_fingerprint, BUILTIN_PLATFORMS,
};
pub use format::{emit_platform, parse_platform};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Which hardware can run a task of this kind. General-purpose clusters run
/// everything; accelerator clusters run only their own kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Generic,
    Fft,
    Ifft,
    MatMul,
    Decoder,
}

impl TaskKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKind::Generic => "generic",
            TaskKind::Fft => "fft",
            TaskKind::Ifft => "ifft",
            TaskKind::MatMul => "matmul",
            TaskKind::Decoder => "decoder",
        }
    }

    pub fn parse(s: &str) -> Option<TaskKind> {
        match s {
            "generic" => Some(TaskKind::Generic),
            "fft" => Some(TaskKind::Fft),
            "ifft" => Some(TaskKind::Ifft),
            "matmul" => Some(TaskKind::MatMul),
            "decoder" => Some(TaskKind::Decoder),
            _ => None,
        }
    }
}

/// One profiled task type. Application nodes reference types by id; profile
/// tables are keyed by (cluster, type).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskType {
    pub id: usize,
    pub name: String,
    pub kind: TaskKind,
}

/// Ordered, densely indexed set of task types known to a platform.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaskTypeCatalog {
    types: Vec<TaskType>,
}

impl TaskTypeCatalog {
    pub fn new(types: Vec<TaskType>) -> Result<Self, PlatformError> {
        let mut names = BTreeSet::new();
        for (i, t) in types.iter().enumerate() {
            if t.id != i {
                return Err(PlatformError::Validation(format!(
                    "task type ids must be dense: expected {i}, got {}",
                    t.id
                )));
            }
            if !names.insert(t.name.clone()) {
                return Err(PlatformError::Validation(format!(
                    "duplicate task type name '{}'",
                    t.name
                )));
            }
        }
        Ok(Self { types })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&TaskType> {
        self.types.get(id)
    }

    pub fn by_name(&self, name: &str) -> Option<&TaskType> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &TaskType> {
        self.types.iter()
    }
}

/// Group of PEs sharing one static profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub name: String,
    pub pe_ids: Vec<usize>,
    /// Task kinds this cluster's PEs can execute.
    pub kinds: Vec<TaskKind>,
}

/// A core or accelerator instance. Execution time is in microseconds, power
/// in milliwatts; both maps cover exactly the supported task types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessingElement {
    pub id: usize,
    pub cluster_id: usize,
    pub supported_task_types: BTreeSet<usize>,
    pub exec_time: BTreeMap<usize, f64>,
    pub power: BTreeMap<usize, f64>,
}

impl ProcessingElement {
    pub fn supports(&self, task_type: usize) -> bool {
        self.supported_task_types.contains(&task_type)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlatformError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid platform: {0}")]
    Validation(String),
    #[error("unknown platform configuration '{0}'")]
    UnknownConfig(String),
    #[error("unknown PE id {0}")]
    UnknownPe(usize),
}

/// Validated, immutable platform description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureGraph {
    pub name: String,
    pub catalog: TaskTypeCatalog,
    pub clusters: Vec<Cluster>,
    pub pes: Vec<ProcessingElement>,
    /// Latency per volume unit (µs/unit) for every ordered PE pair.
    pub link_rate: Vec<Vec<f64>>,
    /// Rate used between distinct PEs of the same cluster.
    pub intra_cluster_rate: f64,
    /// Rate used between PEs of different clusters.
    pub inter_cluster_rate: f64,
}

impl ArchitectureGraph {
    /// Assemble and validate a platform from per-cluster profile tables.
    ///
    /// `profiles` maps (cluster id, task type id) to (exec µs, power mW);
    /// entries must exist exactly for the type kinds each cluster supports.
    pub fn assemble(
        name: &str,
        catalog: TaskTypeCatalog,
        clusters: Vec<Cluster>,
        profiles: &BTreeMap<(usize, usize), (f64, f64)>,
        intra_cluster_rate: f64,
        inter_cluster_rate: f64,
    ) -> Result<Self, PlatformError> {
        let mut pes: Vec<Option<ProcessingElement>> = Vec::new();
        for cluster in &clusters {
            let mut exec_time = BTreeMap::new();
            let mut power = BTreeMap::new();
            let mut supported = BTreeSet::new();
            for ty in catalog.iter() {
                let wanted = cluster.kinds.contains(&ty.kind);
                match (wanted, profiles.get(&(cluster.id, ty.id))) {
                    (true, Some(&(e, p))) => {
                        exec_time.insert(ty.id, e);
                        power.insert(ty.id, p);
                        supported.insert(ty.id);
                    }
                    (true, None) => {
                        return Err(PlatformError::Validation(format!(
                            "missing profile for cluster '{}' task type '{}'",
                            cluster.name, ty.name
                        )))
                    }
                    (false, Some(_)) => {
                        return Err(PlatformError::Validation(format!(
                            "profile given for unsupported kind: cluster '{}' task type '{}'",
                            cluster.name, ty.name
                        )))
                    }
                    (false, None) => {}
                }
            }
            for &pe_id in &cluster.pe_ids {
                if pes.len() <= pe_id {
                    pes.resize(pe_id + 1, None);
                }
                if pes[pe_id].is_some() {
                    return Err(PlatformError::Validation(format!(
                        "PE {pe_id} listed in more than one cluster"
                    )));
                }
                pes[pe_id] = Some(ProcessingElement {
                    id: pe_id,
                    cluster_id: cluster.id,
                    supported_task_types: supported.clone(),
                    exec_time: exec_time.clone(),
                    power: power.clone(),
                });
            }
        }
        let pes: Vec<ProcessingElement> = pes
            .into_iter()
            .enumerate()
            .map(|(i, pe)| {
                pe.ok_or_else(|| PlatformError::Validation(format!("PE ids not dense: {i} missing")))
            })
            .collect::<Result<_, _>>()?;

        let n = pes.len();
        let mut link_rate = vec![vec![0.0; n]; n];
        for (src, row) in link_rate.iter_mut().enumerate() {
            for (dst, rate) in row.iter_mut().enumerate() {
                *rate = if src == dst {
                    0.0
                } else if pes[src].cluster_id == pes[dst].cluster_id {
                    intra_cluster_rate
                } else {
                    inter_cluster_rate
                };
            }
        }

        let arch = Self {
            name: name.to_string(),
            catalog,
            clusters,
            pes,
            link_rate,
            intra_cluster_rate,
            inter_cluster_rate,
        };
        arch.validate()?;
        Ok(arch)
    }

    fn validate(&self) -> Result<(), PlatformError> {
        if self.clusters.is_empty() {
            return Err(PlatformError::Validation("no clusters".into()));
        }
        let mut cluster_names = BTreeSet::new();
        for (i, c) in self.clusters.iter().enumerate() {
            if c.id != i {
                return Err(PlatformError::Validation(format!(
                    "cluster ids must be dense: expected {i}, got {}",
                    c.id
                )));
            }
            if c.pe_ids.is_empty() {
                return Err(PlatformError::Validation(format!(
                    "cluster '{}' has no PEs",
                    c.name
                )));
            }
            if !cluster_names.insert(c.name.clone()) {
                return Err(PlatformError::Validation(format!(
                    "duplicate cluster name '{}'",
                    c.name
                )));
            }
        }
        // Every PE in exactly one cluster, and cluster membership consistent.
        let mut seen = vec![false; self.pes.len()];
        for c in &self.clusters {
            for &pe_id in &c.pe_ids {
                let pe = self
                    .pes
                    .get(pe_id)
                    .ok_or(PlatformError::UnknownPe(pe_id))?;
                if seen[pe_id] {
                    return Err(PlatformError::Validation(format!(
                        "PE {pe_id} listed in more than one cluster"
                    )));
                }
                seen[pe_id] = true;
                if pe.cluster_id != c.id {
                    return Err(PlatformError::Validation(format!(
                        "PE {pe_id} cluster mismatch"
                    )));
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(PlatformError::Validation(format!(
                "PE {orphan} belongs to no cluster"
            )));
        }
        // Profile sanity and cluster homogeneity.
        for pe in &self.pes {
            if pe.exec_time.keys().ne(pe.supported_task_types.iter())
                || pe.power.keys().ne(pe.supported_task_types.iter())
            {
                return Err(PlatformError::Validation(format!(
                    "PE {} profile keys do not match supported types",
                    pe.id
                )));
            }
            for (&ty, &e) in &pe.exec_time {
                if !(e > 0.0) {
                    return Err(PlatformError::Validation(format!(
                        "PE {} type {ty} has non-positive exec time",
                        pe.id
                    )));
                }
            }
            for (&ty, &p) in &pe.power {
                if !(p > 0.0) {
                    return Err(PlatformError::Validation(format!(
                        "PE {} type {ty} has non-positive power",
                        pe.id
                    )));
                }
            }
        }
        for c in &self.clusters {
            let first = &self.pes[c.pe_ids[0]];
            for &pe_id in &c.pe_ids[1..] {
                let pe = &self.pes[pe_id];
                if pe.exec_time != first.exec_time || pe.power != first.power {
                    return Err(PlatformError::Validation(format!(
                        "cluster '{}' is not homogeneous",
                        c.name
                    )));
                }
            }
        }
        // Link table must be total, non-negative, zero on the diagonal.
        if self.link_rate.len() != self.pes.len() {
            return Err(PlatformError::Validation("link table not total".into()));
        }
        for (src, row) in self.link_rate.iter().enumerate() {
            if row.len() != self.pes.len() {
                return Err(PlatformError::Validation("link table not total".into()));
            }
            for (dst, &r) in row.iter().enumerate() {
                if r < 0.0 {
                    return Err(PlatformError::Validation(format!(
                        "negative link rate {src}->{dst}"
                    )));
                }
                if src == dst && r != 0.0 {
                    return Err(PlatformError::Validation(format!(
                        "self link {src}->{src} must have zero rate"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn pe_count(&self) -> usize {
        self.pes.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_of(&self, pe: usize) -> Result<usize, PlatformError> {
        self.pes
            .get(pe)
            .map(|p| p.cluster_id)
            .ok_or(PlatformError::UnknownPe(pe))
    }

    /// Index of `pe` inside its cluster's ordered `pe_ids`.
    pub fn pe_index_in_cluster(&self, pe: usize) -> Result<usize, PlatformError> {
        let cluster = &self.clusters[self.cluster_of(pe)?];
        Ok(cluster
            .pe_ids
            .iter()
            .position(|&p| p == pe)
            .expect("validated membership"))
    }

    /// Communication latency for moving `volume` units from `src` to `dst`.
    /// Zero for same-PE transfers; linear in volume otherwise.
    pub fn comm_latency(&self, src: usize, dst: usize, volume: f64) -> Result<f64, PlatformError> {
        if src >= self.pes.len() {
            return Err(PlatformError::UnknownPe(src));
        }
        if dst >= self.pes.len() {
            return Err(PlatformError::UnknownPe(dst));
        }
        Ok(self.link_rate[src][dst] * volume)
    }

    /// Cluster exec time of `task_type`, if the cluster supports it.
    pub fn cluster_exec_time(&self, cluster: usize, task_type: usize) -> Option<f64> {
        let pe = *self.clusters.get(cluster)?.pe_ids.first()?;
        self.pes[pe].exec_time.get(&task_type).copied()
    }

    /// Cluster power of `task_type`, if the cluster supports it.
    pub fn cluster_power(&self, cluster: usize, task_type: usize) -> Option<f64> {
        let pe = *self.clusters.get(cluster)?.pe_ids.first()?;
        self.pes[pe].power.get(&task_type).copied()
    }

    /// PEs capable of running `task_type`, in id order.
    pub fn capable_pes(&self, task_type: usize) -> impl Iterator<Item = &ProcessingElement> {
        self.pes.iter().filter(move |pe| pe.supports(task_type))
    }

    /// True when at least one PE supports every type used by `used_types`.
    pub fn check_supports(&self, used_types: &BTreeSet<usize>) -> Result<(), PlatformError> {
        for &ty in used_types {
            if self.capable_pes(ty).next().is_none() {
                let name = self
                    .catalog
                    .get(ty)
                    .map(|t| t.name.clone())
                    .unwrap_or_else(|| format!("#{ty}"));
                return Err(PlatformError::Validation(format!(
                    "no PE supports task type '{name}'"
                )));
            }
        }
        Ok(())
    }
}
