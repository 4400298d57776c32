//! Hierarchical and flat scheduling policies over decision trees.
//!
//! Level 1 predicts the cluster; level 2 holds one tree per multi-PE
//! cluster (single-PE clusters use a constant) and predicts the PE index
//! inside the level-1 cluster. A flat policy predicts the PE directly and
//! serves as the baseline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DatasetError};
use super::tree::{DecisionTree, TreeError, TreeNode, TreeParams};
use crate::features::{
    schema_from_cluster_names, AblationMask, ClusterProjection, FeatureExtractor, FeatureSchema,
};
use crate::oracle::{etf_decide, Objective};
use crate::platform::ArchitectureGraph;
use crate::sim::{Assignment, Scheduler, SimError, SimView, TaskInstance};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("insufficient data for cluster {cluster} ('{name}'): {rows} rows")]
    InsufficientData {
        cluster: usize,
        name: String,
        rows: usize,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("schema hash mismatch: file {file:#018x}, expected {expected:#018x}")]
    SchemaHash { file: u64, expected: u64 },
}

/// Level-2 policy for one cluster slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PePolicy {
    /// Single-PE cluster: always PE index 0.
    Constant(u32),
    Tree(DecisionTree),
}

impl PePolicy {
    pub fn predict(&self, fv: &[f64]) -> Result<u32, TreeError> {
        match self {
            PePolicy::Constant(label) => Ok(*label),
            PePolicy::Tree(tree) => tree.predict(fv),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainParams {
    pub depth_cluster: usize,
    pub depth_pe: usize,
    pub min_leaf: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            depth_cluster: 12,
            depth_pe: 12,
            min_leaf: 4,
        }
    }
}

/// Two-level policy: cluster tree plus one PE policy per cluster slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalPolicy {
    pub schema: FeatureSchema,
    pub cluster_pe_counts: Vec<usize>,
    pub objective: Objective,
    pub params: TrainParams,
    pub cluster_tree: DecisionTree,
    pub pe_policies: Vec<PePolicy>,
}

impl HierarchicalPolicy {
    /// Predicted (cluster slot, PE index within cluster) for a feature
    /// vector.
    pub fn predict(&self, fv: &[f64]) -> Result<(u32, u32), TreeError> {
        let cluster = self.cluster_tree.predict(fv)?;
        let pe = self
            .pe_policies
            .get(cluster as usize)
            .map(|p| p.predict(fv))
            .transpose()?
            .unwrap_or(0);
        Ok((cluster, pe))
    }
}

/// Column indices of the per-PE availability block (fields named
/// `ready_<cluster>_<j>`).
fn per_pe_columns(schema: &FeatureSchema) -> Vec<usize> {
    let per_cluster: std::collections::BTreeSet<String> = schema
        .cluster_names
        .iter()
        .map(|n| format!("ready_{n}"))
        .collect();
    schema
        .fields
        .iter()
        .enumerate()
        .filter(|(_, f)| {
            f.name.starts_with("ready_")
                && f.name != "ready_order"
                && !per_cluster.contains(&f.name)
        })
        .map(|(i, _)| i)
        .collect()
}

/// Train the two-level policy: the cluster tree on every cluster-flagged
/// row, each PE tree only on PE-flagged rows labeled with that cluster.
///
/// The cluster tree trains with the per-PE availability block zeroed, so it
/// only ever splits on cluster-granular state. That keeps the level-1
/// decision stable when the policy is projected onto platforms with
/// different PE counts per cluster; the per-PE block exists for the level-2
/// trees.
pub fn train_hierarchical(
    dataset: &Dataset,
    params: TrainParams,
) -> Result<HierarchicalPolicy, PolicyError> {
    if dataset.is_empty() {
        return Err(PolicyError::Tree(TreeError::EmptyDataset));
    }
    dataset.validate()?;
    let pe_cols = per_pe_columns(&dataset.schema);
    let cluster_rows: Vec<&super::dataset::DatasetRow> =
        dataset.rows.iter().filter(|r| r.train_cluster).collect();
    let features: Vec<Vec<f64>> = cluster_rows
        .iter()
        .map(|r| {
            let mut f = r.features.clone();
            for &i in &pe_cols {
                f[i] = 0.0;
            }
            f
        })
        .collect();
    let labels: Vec<u32> = cluster_rows.iter().map(|r| r.cluster_label).collect();
    let mut cluster_tree = DecisionTree::fit(
        &features,
        &labels,
        TreeParams {
            max_depth: params.depth_cluster,
            min_leaf: params.min_leaf,
        },
    )?;
    // The label space spans all cluster slots even if some never occur.
    cluster_tree.n_labels = dataset.schema.cluster_count;

    let mut pe_policies = Vec::with_capacity(dataset.schema.cluster_count);
    for (slot, &pe_count) in dataset.cluster_pe_counts.iter().enumerate() {
        if pe_count <= 1 {
            pe_policies.push(PePolicy::Constant(0));
            continue;
        }
        let rows: Vec<&super::dataset::DatasetRow> = dataset
            .rows
            .iter()
            .filter(|r| r.train_pe && r.cluster_label as usize == slot)
            .collect();
        if rows.len() < params.min_leaf {
            return Err(PolicyError::InsufficientData {
                cluster: slot,
                name: dataset.schema.cluster_names[slot].clone(),
                rows: rows.len(),
            });
        }
        let features: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
        let labels: Vec<u32> = rows.iter().map(|r| r.pe_label).collect();
        let mut tree = DecisionTree::fit(
            &features,
            &labels,
            TreeParams {
                max_depth: params.depth_pe,
                min_leaf: params.min_leaf,
            },
        )?;
        tree.n_labels = pe_count;
        pe_policies.push(PePolicy::Tree(tree));
    }
    Ok(HierarchicalPolicy {
        schema: dataset.schema.clone(),
        cluster_pe_counts: dataset.cluster_pe_counts.clone(),
        objective: dataset.objective,
        params,
        cluster_tree,
        pe_policies,
    })
}

/// Train the flat baseline: one tree predicting the dense global PE label.
pub fn train_flat(dataset: &Dataset, depth: usize, min_leaf: usize) -> Result<DecisionTree, PolicyError> {
    if dataset.is_empty() {
        return Err(PolicyError::Tree(TreeError::EmptyDataset));
    }
    let rows: Vec<&super::dataset::DatasetRow> = dataset
        .rows
        .iter()
        .filter(|r| r.train_cluster && r.train_pe)
        .collect();
    let features: Vec<Vec<f64>> = rows.iter().map(|r| r.features.clone()).collect();
    let labels: Vec<u32> = rows.iter().map(|r| dataset.flat_label(r)).collect();
    let mut tree = DecisionTree::fit(
        &features,
        &labels,
        TreeParams {
            max_depth: depth,
            min_leaf,
        },
    )?;
    tree.n_labels = dataset.total_pes();
    Ok(tree)
}

/// How a policy decision was realized on the platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionOutcome {
    /// Predicted PE used as-is.
    Direct,
    /// Predicted PE cannot run the task; fell back to the earliest-ready
    /// capable PE in the predicted cluster.
    ClusterFallback,
    /// Predicted cluster is absent or cannot run the task; fell back to an
    /// on-the-spot ETF-performance decision.
    EtfFallback,
}

/// Map a (cluster slot, PE index) prediction onto a concrete, capable PE.
pub fn realize_prediction(
    arch: &ArchitectureGraph,
    projection: &ClusterProjection,
    view: &SimView<'_>,
    task: &TaskInstance,
    cluster_slot: u32,
    pe_index: u32,
) -> Result<(usize, DecisionOutcome), SimError> {
    if let Some(cluster) = projection
        .slots
        .get(cluster_slot as usize)
        .copied()
        .flatten()
    {
        let pe_ids = &arch.clusters[cluster].pe_ids;
        if let Some(&pe) = pe_ids.get(pe_index as usize) {
            if arch.pes[pe].supports(task.task_type) {
                return Ok((pe, DecisionOutcome::Direct));
            }
        }
        // Earliest-ready capable PE within the predicted cluster.
        let fallback = pe_ids
            .iter()
            .copied()
            .filter(|&pe| arch.pes[pe].supports(task.task_type))
            .min_by(|&a, &b| {
                view.pe_ready_time[a]
                    .total_cmp(&view.pe_ready_time[b])
                    .then(a.cmp(&b))
            });
        if let Some(pe) = fallback {
            return Ok((pe, DecisionOutcome::ClusterFallback));
        }
    }
    // No usable PE in the predicted cluster: decide with ETF on the spot.
    let single = std::slice::from_ref(task);
    let assignment = etf_decide(arch, view.pe_ready_time, single, Objective::Performance)?;
    Ok((assignment.pe, DecisionOutcome::EtfFallback))
}

/// Counts of fallback realizations during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackStats {
    pub direct: u64,
    pub cluster_fallback: u64,
    pub etf_fallback: u64,
}

impl FallbackStats {
    pub fn record(&mut self, outcome: DecisionOutcome) {
        match outcome {
            DecisionOutcome::Direct => self.direct += 1,
            DecisionOutcome::ClusterFallback => self.cluster_fallback += 1,
            DecisionOutcome::EtfFallback => self.etf_fallback += 1,
        }
    }
}

/// The hierarchical policy as a simulation scheduler. Tasks are decided in
/// canonical ready order.
pub struct PolicyScheduler<'a> {
    pub policy: &'a HierarchicalPolicy,
    extractor: FeatureExtractor,
    pub fallbacks: FallbackStats,
}

impl<'a> PolicyScheduler<'a> {
    pub fn new(policy: &'a HierarchicalPolicy, arch: &ArchitectureGraph) -> Self {
        let extractor = FeatureExtractor::new(policy.schema.clone(), arch, AblationMask::none());
        Self {
            policy,
            extractor,
            fallbacks: FallbackStats::default(),
        }
    }

    pub fn with_mask(policy: &'a HierarchicalPolicy, arch: &ArchitectureGraph, mask: AblationMask) -> Self {
        let extractor = FeatureExtractor::new(policy.schema.clone(), arch, mask);
        Self {
            policy,
            extractor,
            fallbacks: FallbackStats::default(),
        }
    }

    /// Decide a PE for the ready task at `ready_index`.
    pub fn decide_pe(&mut self, view: &SimView<'_>, ready_index: usize) -> Result<usize, SimError> {
        let fv = self
            .extractor
            .extract(view, ready_index)
            .map_err(|e| SimError::Scheduler(e.to_string()))?;
        let (cluster, pe_index) = self
            .policy
            .predict(&fv.values)
            .map_err(|e| SimError::Scheduler(e.to_string()))?;
        let task = &view.ready[ready_index];
        let (pe, outcome) = realize_prediction(
            view.arch,
            self.extractor.projection(),
            view,
            task,
            cluster,
            pe_index,
        )?;
        self.fallbacks.record(outcome);
        Ok(pe)
    }
}

impl Scheduler for PolicyScheduler<'_> {
    fn next_assignment(&mut self, view: &SimView<'_>) -> Result<Assignment, SimError> {
        let pe = self.decide_pe(view, 0)?;
        Ok(Assignment { ready_index: 0, pe })
    }

    fn label(&self) -> String {
        format!("policy:{}", self.policy.objective.as_str())
    }
}

/// The flat baseline as a simulation scheduler.
pub struct FlatScheduler<'a> {
    pub tree: &'a DecisionTree,
    pub schema: FeatureSchema,
    pub cluster_pe_counts: Vec<usize>,
    extractor: FeatureExtractor,
    pub fallbacks: FallbackStats,
}

impl<'a> FlatScheduler<'a> {
    pub fn new(
        tree: &'a DecisionTree,
        schema: FeatureSchema,
        cluster_pe_counts: Vec<usize>,
        arch: &ArchitectureGraph,
    ) -> Self {
        let extractor = FeatureExtractor::new(schema.clone(), arch, AblationMask::none());
        Self {
            tree,
            schema,
            cluster_pe_counts,
            extractor,
            fallbacks: FallbackStats::default(),
        }
    }

    fn split_label(&self, label: u32) -> (u32, u32) {
        let mut rest = label as usize;
        for (slot, &count) in self.cluster_pe_counts.iter().enumerate() {
            if rest < count {
                return (slot as u32, rest as u32);
            }
            rest -= count;
        }
        (self.cluster_pe_counts.len().saturating_sub(1) as u32, 0)
    }
}

impl Scheduler for FlatScheduler<'_> {
    fn next_assignment(&mut self, view: &SimView<'_>) -> Result<Assignment, SimError> {
        let fv = self
            .extractor
            .extract(view, 0)
            .map_err(|e| SimError::Scheduler(e.to_string()))?;
        let label = self
            .tree
            .predict(&fv.values)
            .map_err(|e| SimError::Scheduler(e.to_string()))?;
        let (cluster, pe_index) = self.split_label(label);
        let task = &view.ready[0];
        let (pe, outcome) = realize_prediction(
            view.arch,
            self.extractor.projection(),
            view,
            task,
            cluster,
            pe_index,
        )?;
        self.fallbacks.record(outcome);
        Ok(Assignment { ready_index: 0, pe })
    }

    fn label(&self) -> String {
        "flat".to_string()
    }
}

// ── Model file format ────────────────────────────────────────────────────

/// A trained flat baseline with the platform shape needed to map its dense
/// global PE labels back to (cluster, PE) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatModel {
    pub schema: FeatureSchema,
    pub cluster_pe_counts: Vec<usize>,
    pub objective: Objective,
    pub tree: DecisionTree,
}

/// Serialize a flat model.
pub fn emit_flat_model(model: &FlatModel) -> String {
    let mut out = String::from("format dagsched-flat-model 1\n");
    let _ = writeln!(out, "objective {}", model.objective.as_str());
    let _ = writeln!(out, "pred-slots {}", model.schema.pred_slots);
    let _ = writeln!(out, "cluster-names {}", model.schema.cluster_names.join(","));
    let counts: Vec<String> = model.cluster_pe_counts.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "cluster-pe-counts {}", counts.join(","));
    let _ = writeln!(out, "schema-hash {:#018x}", model.schema.hash());
    emit_tree(&mut out, "tree flat", &model.tree);
    out
}

/// Parse a flat model file, rejecting schema-hash mismatches.
pub fn parse_flat_model(text: &str) -> Result<FlatModel, PolicyError> {
    let patched = text.replace("format dagsched-flat-model 1", "format dagsched-model 1");
    // Reuse the hierarchical parser's tree machinery by reading the flat
    // tree as a PE tree of a pseudo-slot.
    let err = |msg: &str| PolicyError::Parse {
        line: 0,
        msg: msg.into(),
    };
    if !text.starts_with("format dagsched-flat-model 1") {
        return Err(err("expected 'format dagsched-flat-model 1'"));
    }
    let patched = patched.replace("tree flat", "tree pe 0");
    let mut objective = Objective::Performance;
    let mut pred_slots = 0usize;
    let mut cluster_names: Vec<String> = Vec::new();
    let mut cluster_pe_counts: Vec<usize> = Vec::new();
    let mut file_hash = None;
    for line in patched.lines() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("objective") => {
                objective = Objective::parse(parts.next().unwrap_or_default())
                    .ok_or_else(|| err("bad objective"))?;
            }
            Some("pred-slots") => {
                pred_slots = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("bad pred-slots"))?;
            }
            Some("cluster-names") => {
                cluster_names = parts
                    .next()
                    .unwrap_or_default()
                    .split(',')
                    .map(String::from)
                    .collect();
            }
            Some("cluster-pe-counts") => {
                cluster_pe_counts = parts
                    .next()
                    .unwrap_or_default()
                    .split(',')
                    .map(|s| s.parse().map_err(|_| err("bad pe count")))
                    .collect::<Result<_, _>>()?;
            }
            Some("schema-hash") => {
                let s = parts.next().unwrap_or_default();
                let s = s.strip_prefix("0x").unwrap_or(s);
                file_hash =
                    Some(u64::from_str_radix(s, 16).map_err(|_| err("bad schema hash"))?);
            }
            _ => {}
        }
    }
    let schema = schema_from_cluster_names(&cluster_names, &cluster_pe_counts, pred_slots);
    match file_hash {
        Some(h) if h != schema.hash() => {
            return Err(PolicyError::SchemaHash {
                file: h,
                expected: schema.hash(),
            })
        }
        None => return Err(err("missing schema-hash")),
        _ => {}
    }
    let tree = parse_tree_block(&patched)?;
    Ok(FlatModel {
        schema,
        cluster_pe_counts,
        objective,
        tree,
    })
}

fn parse_tree_block(text: &str) -> Result<DecisionTree, PolicyError> {
    let err = |msg: String| PolicyError::Parse { line: 0, msg };
    let mut tree: Option<DecisionTree> = None;
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("tree") => {
                let mut n_labels = 0;
                let mut n_features = 0;
                for kv in parts {
                    if let Some(v) = kv.strip_prefix("labels=") {
                        n_labels = v.parse().map_err(|_| err("bad labels".into()))?;
                    } else if let Some(v) = kv.strip_prefix("features=") {
                        n_features = v.parse().map_err(|_| err("bad features".into()))?;
                    }
                }
                tree = Some(DecisionTree {
                    nodes: Vec::new(),
                    params: TreeParams::default(),
                    n_labels,
                    n_features,
                });
            }
            Some("node") => {
                let tree = tree.as_mut().ok_or_else(|| err("node before tree".into()))?;
                let _idx = parts.next();
                match parts.next() {
                    Some("split") => {
                        let vals: Vec<&str> = parts.collect();
                        if vals.len() != 4 {
                            return Err(err("bad split node".into()));
                        }
                        tree.nodes.push(TreeNode::Split {
                            feature: vals[0].parse().map_err(|_| err("bad feature".into()))?,
                            threshold: vals[1].parse().map_err(|_| err("bad threshold".into()))?,
                            left: vals[2].parse().map_err(|_| err("bad left".into()))?,
                            right: vals[3].parse().map_err(|_| err("bad right".into()))?,
                        });
                    }
                    Some("leaf") => {
                        let label = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err("bad label".into()))?;
                        let counts = parts
                            .next()
                            .unwrap_or_default()
                            .split(',')
                            .map(|s| s.parse().map_err(|_| err("bad count".into())))
                            .collect::<Result<_, _>>()?;
                        tree.nodes.push(TreeNode::Leaf { label, counts });
                    }
                    other => return Err(err(format!("bad node kind {other:?}"))),
                }
            }
            _ => {}
        }
    }
    tree.ok_or_else(|| err("missing tree block".into()))
}

/// Serialize a hierarchical policy as a versioned structured-text dump.
pub fn emit_policy(policy: &HierarchicalPolicy) -> String {
    let mut out = String::from("format dagsched-model 1\n");
    let _ = writeln!(out, "objective {}", policy.objective.as_str());
    let _ = writeln!(out, "clusters {}", policy.schema.cluster_count);
    let _ = writeln!(out, "pred-slots {}", policy.schema.pred_slots);
    let _ = writeln!(out, "cluster-names {}", policy.schema.cluster_names.join(","));
    let counts: Vec<String> = policy.cluster_pe_counts.iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "cluster-pe-counts {}", counts.join(","));
    let _ = writeln!(out, "schema-hash {:#018x}", policy.schema.hash());
    let _ = writeln!(
        out,
        "hyper depth_cluster={} depth_pe={} min_leaf={}",
        policy.params.depth_cluster, policy.params.depth_pe, policy.params.min_leaf
    );
    emit_tree(&mut out, "tree cluster", &policy.cluster_tree);
    for (slot, pe_policy) in policy.pe_policies.iter().enumerate() {
        match pe_policy {
            PePolicy::Constant(label) => {
                let _ = writeln!(out, "tree pe {slot} const {label}");
            }
            PePolicy::Tree(tree) => {
                emit_tree(&mut out, &format!("tree pe {slot}"), tree);
            }
        }
    }
    out
}

fn emit_tree(out: &mut String, header: &str, tree: &DecisionTree) {
    let _ = writeln!(
        out,
        "{header} nodes={} labels={} features={}",
        tree.nodes.len(),
        tree.n_labels,
        tree.n_features
    );
    for (i, node) in tree.nodes.iter().enumerate() {
        match node {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let _ = writeln!(out, "node {i} split {feature} {threshold} {left} {right}");
            }
            TreeNode::Leaf { label, counts } => {
                let counts: Vec<String> = counts.iter().map(|c| c.to_string()).collect();
                let _ = writeln!(out, "node {i} leaf {label} {}", counts.join(","));
            }
        }
    }
}

/// Parse a model file, rejecting schema-hash mismatches. The schema field
/// list is reconstructed from the platform shape in the header, so the file
/// hash must match the reconstruction.
pub fn parse_policy(text: &str) -> Result<HierarchicalPolicy, PolicyError> {
    let err = |line: usize, msg: String| PolicyError::Parse { line, msg };
    let mut objective = Objective::Performance;
    let mut pred_slots = 0usize;
    let mut cluster_names: Vec<String> = Vec::new();
    let mut cluster_pe_counts: Vec<usize> = Vec::new();
    let mut file_hash: Option<u64> = None;
    let mut params = TrainParams::default();
    let mut saw_format = false;

    enum Target {
        Cluster,
        Pe(usize),
    }
    let mut trees: Vec<(Target, DecisionTree)> = Vec::new();
    let mut constants: Vec<(usize, u32)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_format {
            if line != "format dagsched-model 1" {
                return Err(err(lineno, "expected 'format dagsched-model 1'".into()));
            }
            saw_format = true;
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "objective" => {
                let s = parts.next().unwrap_or_default();
                objective = Objective::parse(s)
                    .ok_or_else(|| err(lineno, format!("unknown objective '{s}'")))?;
            }
            "clusters" => { /* implied by cluster-names */ }
            "pred-slots" => {
                pred_slots = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(lineno, "bad pred-slots".into()))?;
            }
            "cluster-names" => {
                cluster_names = parts
                    .next()
                    .unwrap_or_default()
                    .split(',')
                    .map(|s| s.to_string())
                    .collect();
            }
            "cluster-pe-counts" => {
                cluster_pe_counts = parts
                    .next()
                    .unwrap_or_default()
                    .split(',')
                    .map(|s| s.parse().map_err(|_| err(lineno, "bad pe count".into())))
                    .collect::<Result<_, _>>()?;
            }
            "schema-hash" => {
                let s = parts.next().unwrap_or_default();
                let s = s.strip_prefix("0x").unwrap_or(s);
                file_hash = Some(
                    u64::from_str_radix(s, 16).map_err(|_| err(lineno, "bad schema hash".into()))?,
                );
            }
            "hyper" => {
                for kv in parts {
                    if let Some(v) = kv.strip_prefix("depth_cluster=") {
                        params.depth_cluster =
                            v.parse().map_err(|_| err(lineno, "bad depth".into()))?;
                    } else if let Some(v) = kv.strip_prefix("depth_pe=") {
                        params.depth_pe = v.parse().map_err(|_| err(lineno, "bad depth".into()))?;
                    } else if let Some(v) = kv.strip_prefix("min_leaf=") {
                        params.min_leaf = v.parse().map_err(|_| err(lineno, "bad min_leaf".into()))?;
                    }
                }
            }
            "tree" => {
                let target = match parts.next() {
                    Some("cluster") => Target::Cluster,
                    Some("pe") => {
                        let slot: usize = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err(lineno, "bad cluster slot".into()))?;
                        Target::Pe(slot)
                    }
                    other => return Err(err(lineno, format!("bad tree target {other:?}"))),
                };
                let rest: Vec<&str> = parts.collect();
                if rest.first() == Some(&"const") {
                    let label: u32 = rest
                        .get(1)
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(lineno, "bad const label".into()))?;
                    match target {
                        Target::Pe(slot) => constants.push((slot, label)),
                        Target::Cluster => {
                            return Err(err(lineno, "cluster tree cannot be const".into()))
                        }
                    }
                    continue;
                }
                let mut n_labels = 0usize;
                let mut n_features = 0usize;
                for kv in &rest {
                    if let Some(v) = kv.strip_prefix("labels=") {
                        n_labels = v.parse().map_err(|_| err(lineno, "bad labels".into()))?;
                    } else if let Some(v) = kv.strip_prefix("features=") {
                        n_features = v.parse().map_err(|_| err(lineno, "bad features".into()))?;
                    }
                }
                trees.push((
                    target,
                    DecisionTree {
                        nodes: Vec::new(),
                        params: TreeParams {
                            max_depth: params.depth_cluster.max(params.depth_pe),
                            min_leaf: params.min_leaf,
                        },
                        n_labels,
                        n_features,
                    },
                ));
            }
            "node" => {
                let (_, tree) = trees
                    .last_mut()
                    .ok_or_else(|| err(lineno, "node before any tree".into()))?;
                let _index: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(lineno, "bad node index".into()))?;
                match parts.next() {
                    Some("split") => {
                        let feature: usize = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err(lineno, "bad feature".into()))?;
                        let threshold: f64 = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err(lineno, "bad threshold".into()))?;
                        let left: usize = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err(lineno, "bad left".into()))?;
                        let right: usize = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err(lineno, "bad right".into()))?;
                        tree.nodes.push(TreeNode::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        });
                    }
                    Some("leaf") => {
                        let label: u32 = parts
                            .next()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| err(lineno, "bad label".into()))?;
                        let counts: Vec<u64> = parts
                            .next()
                            .unwrap_or_default()
                            .split(',')
                            .map(|s| s.parse().map_err(|_| err(lineno, "bad count".into())))
                            .collect::<Result<_, _>>()?;
                        tree.nodes.push(TreeNode::Leaf { label, counts });
                    }
                    other => return Err(err(lineno, format!("bad node kind {other:?}"))),
                }
            }
            other => return Err(err(lineno, format!("unknown keyword '{other}'"))),
        }
    }

    // Rebuild the schema from the platform shape and verify the hash.
    let schema = schema_from_cluster_names(&cluster_names, &cluster_pe_counts, pred_slots);
    let expected = schema.hash();
    match file_hash {
        Some(h) if h != expected => {
            return Err(PolicyError::SchemaHash {
                file: h,
                expected,
            })
        }
        None => {
            return Err(PolicyError::Parse {
                line: 0,
                msg: "missing schema-hash".into(),
            })
        }
        _ => {}
    }

    let mut cluster_tree = None;
    let mut pe_policies: Vec<Option<PePolicy>> = vec![None; cluster_names.len()];
    for (target, tree) in trees {
        match target {
            Target::Cluster => cluster_tree = Some(tree),
            Target::Pe(slot) => {
                if slot >= pe_policies.len() {
                    return Err(PolicyError::Parse {
                        line: 0,
                        msg: format!("pe tree slot {slot} out of range"),
                    });
                }
                pe_policies[slot] = Some(PePolicy::Tree(tree));
            }
        }
    }
    for (slot, label) in constants {
        if slot >= pe_policies.len() {
            return Err(PolicyError::Parse {
                line: 0,
                msg: format!("pe const slot {slot} out of range"),
            });
        }
        pe_policies[slot] = Some(PePolicy::Constant(label));
    }
    let pe_policies: Vec<PePolicy> = pe_policies
        .into_iter()
        .enumerate()
        .map(|(slot, p)| {
            p.ok_or_else(|| PolicyError::Parse {
                line: 0,
                msg: format!("missing pe policy for cluster {slot}"),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(HierarchicalPolicy {
        schema,
        cluster_pe_counts,
        objective,
        params,
        cluster_tree: cluster_tree.ok_or_else(|| PolicyError::Parse {
            line: 0,
            msg: "missing cluster tree".into(),
        })?,
        pe_policies,
    })
}

