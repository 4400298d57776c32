//! Fixed-length numeric state encoding for one ready task.
//!
//! The schema is parameterized by the platform shape: cluster count `C`,
//! total PE count `P`, and the predecessor slot count `K`; its length is
//! `5 + 3C + 3K + P`. Static fields describe the task and its profile,
//! dynamic fields describe the live system relative to the current time
//! (never absolute clocks):
//!
//! | field                     | arity | kind    |
//! |---------------------------|-------|---------|
//! | task id                   | 1     | static  |
//! | app id                    | 1     | static  |
//! | downward depth            | 1     | static  |
//! | predecessor count         | 1     | static  |
//! | per-cluster exec time     | C     | static  |
//! | per-cluster power         | C     | static  |
//! | predecessor task ids      | K     | static  |
//! | order in ready queue      | 1     | dynamic |
//! | per-cluster ready offset  | C     | dynamic |
//! | per-PE ready offset       | P     | dynamic |
//! | predecessor clusters      | K     | dynamic |
//! | predecessor comm volumes  | K     | dynamic |
//!
//! The per-PE offsets are what make the PE-within-cluster level learnable:
//! the expert's in-cluster choice is an argmin over PE availability, which
//! no cluster-level aggregate exposes. All extraction work is O(C + K + P)
//! per decision and never scans the ready set. Absent or unsupported
//! entries hold the sentinel `-1`. Predecessors beyond `K` keep the `K`
//! largest communication volumes.

use serde::{Deserialize, Serialize};

use crate::platform::ArchitectureGraph;
use crate::sim::SimView;
use crate::util::fnv1a;

pub const SENTINEL: f64 = -1.0;

/// Availability reading for PEs or clusters that do not exist on the
/// platform under evaluation. Unlike the identity sentinel, missing
/// capacity must read as busy-forever, never as idle.
pub const UNAVAILABLE: f64 = 1e12;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("task index {0} is not in the ready set")]
    TaskNotReady(usize),
    #[error("feature vector length {got} does not match schema length {want}")]
    SchemaMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Static,
    Dynamic,
}

/// Maskable feature groups, mirroring the ablation axes: all static fields,
/// all dynamic fields, the PE-availability block, and the task-identity
/// block (task id, depth, app id).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureGroup {
    TaskIdentity,
    StaticProfile,
    PredIdentity,
    ReadyOrder,
    PeAvailability,
    PredContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureField {
    pub name: String,
    pub kind: FeatureKind,
    pub group: FeatureGroup,
}

/// Ordered field list for a given platform shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub cluster_count: usize,
    pub pred_slots: usize,
    /// Cluster names in slot order; used to project onto other platforms.
    pub cluster_names: Vec<String>,
    /// PE slots per cluster on the schema's home platform.
    pub cluster_pe_counts: Vec<usize>,
    pub fields: Vec<FeatureField>,
}

/// Default predecessor slot count.
pub const DEFAULT_PRED_SLOTS: usize = 4;

/// Build the schema for a platform with `pred_slots` predecessor slots.
pub fn feature_schema(arch: &ArchitectureGraph, pred_slots: usize) -> FeatureSchema {
    let cluster_names: Vec<String> = arch.clusters.iter().map(|c| c.name.clone()).collect();
    let pe_counts: Vec<usize> = arch.clusters.iter().map(|c| c.pe_ids.len()).collect();
    schema_from_cluster_names(&cluster_names, &pe_counts, pred_slots)
}

/// The field list is fully determined by the cluster names, their PE
/// counts, and the slot count; model and dataset files rebuild schemas
/// through this.
pub fn schema_from_cluster_names(
    cluster_names: &[String],
    cluster_pe_counts: &[usize],
    pred_slots: usize,
) -> FeatureSchema {
    assert!(pred_slots >= 1, "need at least one predecessor slot");
    assert_eq!(cluster_names.len(), cluster_pe_counts.len());
    let mut fields = Vec::new();
    let mut push = |name: String, kind, group| {
        fields.push(FeatureField { name, kind, group });
    };
    use FeatureGroup::*;
    use FeatureKind::*;
    push("task_id".into(), Static, TaskIdentity);
    push("app_id".into(), Static, TaskIdentity);
    push("depth".into(), Static, TaskIdentity);
    push("pred_count".into(), Static, StaticProfile);
    for name in cluster_names {
        push(format!("exec_{name}"), Static, StaticProfile);
    }
    for name in cluster_names {
        push(format!("power_{name}"), Static, StaticProfile);
    }
    for k in 0..pred_slots {
        push(format!("pred{k}_id"), Static, PredIdentity);
    }
    push("ready_order".into(), Dynamic, ReadyOrder);
    for name in cluster_names {
        push(format!("ready_{name}"), Dynamic, PeAvailability);
    }
    for (name, &count) in cluster_names.iter().zip(cluster_pe_counts) {
        for j in 0..count {
            push(format!("ready_{name}_{j}"), Dynamic, PeAvailability);
        }
    }
    for k in 0..pred_slots {
        push(format!("pred{k}_cluster"), Dynamic, PredContext);
    }
    for k in 0..pred_slots {
        push(format!("pred{k}_volume"), Dynamic, PredContext);
    }
    FeatureSchema {
        cluster_count: cluster_names.len(),
        pred_slots,
        cluster_names: cluster_names.to_vec(),
        cluster_pe_counts: cluster_pe_counts.to_vec(),
        fields,
    }
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    /// Stable content hash; model and dataset files embed it and refuse to
    /// mix schemas.
    pub fn hash(&self) -> u64 {
        let mut text = format!("{} {}", self.cluster_count, self.pred_slots);
        for c in &self.cluster_pe_counts {
            text.push_str(&format!(" {c}"));
        }
        for f in &self.fields {
            text.push(' ');
            text.push_str(&f.name);
        }
        fnv1a(text.as_bytes())
    }

    /// Map schema cluster slots onto `arch` clusters by name. Slots whose
    /// cluster does not exist on `arch` resolve to `None` and read as the
    /// sentinel.
    pub fn projection(&self, arch: &ArchitectureGraph) -> ClusterProjection {
        let slots = self
            .cluster_names
            .iter()
            .map(|name| arch.clusters.iter().position(|c| &c.name == name))
            .collect();
        ClusterProjection { slots }
    }
}

/// Resolved mapping from schema cluster slots to platform cluster ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterProjection {
    /// `slots[i]` is the platform cluster backing schema slot `i`.
    pub slots: Vec<Option<usize>>,
}

impl ClusterProjection {
    /// Schema slot for a platform cluster id, if any.
    pub fn slot_of(&self, cluster: usize) -> Option<usize> {
        self.slots.iter().position(|&s| s == Some(cluster))
    }
}

/// Which feature groups are zeroed before training/inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AblationMask {
    pub zero_static: bool,
    pub zero_dynamic: bool,
    pub zero_pe_availability: bool,
    pub zero_task_identity: bool,
}

impl AblationMask {
    pub fn none() -> Self {
        Self::default()
    }

    fn masks(&self, field: &FeatureField) -> bool {
        (self.zero_static && field.kind == FeatureKind::Static)
            || (self.zero_dynamic && field.kind == FeatureKind::Dynamic)
            || (self.zero_pe_availability && field.group == FeatureGroup::PeAvailability)
            || (self.zero_task_identity && field.group == FeatureGroup::TaskIdentity)
    }
}

/// One encoded state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn empty() -> Self {
        Self { values: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Reusable extractor binding a schema to a platform.
pub struct FeatureExtractor {
    pub schema: FeatureSchema,
    pub mask: AblationMask,
    projection: ClusterProjection,
}

impl FeatureExtractor {
    pub fn new(schema: FeatureSchema, arch: &ArchitectureGraph, mask: AblationMask) -> Self {
        let projection = schema.projection(arch);
        Self {
            schema,
            mask,
            projection,
        }
    }

    pub fn projection(&self) -> &ClusterProjection {
        &self.projection
    }

    /// Encode the ready task at `ready_index`.
    pub fn extract(
        &self,
        view: &SimView<'_>,
        ready_index: usize,
    ) -> Result<FeatureVector, FeatureError> {
        let task = view
            .ready
            .get(ready_index)
            .ok_or(FeatureError::TaskNotReady(ready_index))?;
        let schema = &self.schema;
        let c = schema.cluster_count;
        let k = schema.pred_slots;
        let mut values = Vec::with_capacity(schema.len());

        values.push(task.task_id as f64);
        values.push(task.app_id as f64);
        values.push(view.depths[task.app_id][task.task_id] as f64);
        values.push(task.preds.len() as f64);
        for slot in 0..c {
            let v = self.projection.slots[slot]
                .and_then(|cl| view.arch.cluster_exec_time(cl, task.task_type))
                .unwrap_or(SENTINEL);
            values.push(v);
        }
        for slot in 0..c {
            let v = self.projection.slots[slot]
                .and_then(|cl| view.arch.cluster_power(cl, task.task_type))
                .unwrap_or(SENTINEL);
            values.push(v);
        }
        // Keep the K predecessors with the largest comm volumes, volume
        // descending, ties by task id.
        let mut preds: Vec<&crate::sim::PredRecord> = task.preds.iter().collect();
        preds.sort_by(|a, b| {
            b.volume
                .total_cmp(&a.volume)
                .then(a.task_id.cmp(&b.task_id))
        });
        preds.truncate(k);
        for slot in 0..k {
            values.push(preds.get(slot).map_or(SENTINEL, |p| p.task_id as f64));
        }

        values.push(ready_index as f64);
        // Per-cluster earliest ready offsets.
        for slot in 0..c {
            let v = match self.projection.slots[slot] {
                Some(cl) => view.arch.clusters[cl]
                    .pe_ids
                    .iter()
                    .map(|&pe| (view.pe_ready_time[pe] - view.now).max(0.0))
                    .fold(f64::INFINITY, f64::min),
                None => UNAVAILABLE,
            };
            values.push(v);
        }
        // Per-PE ready offsets.
        for slot in 0..c {
            let cluster = self.projection.slots[slot];
            for j in 0..schema.cluster_pe_counts[slot] {
                let v = cluster
                    .and_then(|cl| view.arch.clusters[cl].pe_ids.get(j).copied())
                    .map_or(UNAVAILABLE, |pe| (view.pe_ready_time[pe] - view.now).max(0.0));
                values.push(v);
            }
        }
        for slot in 0..k {
            let v = preds.get(slot).map_or(SENTINEL, |p| {
                let cluster = view.arch.pes[p.pe].cluster_id;
                self.projection
                    .slot_of(cluster)
                    .map_or(SENTINEL, |s| s as f64)
            });
            values.push(v);
        }
        for slot in 0..k {
            values.push(preds.get(slot).map_or(SENTINEL, |p| p.volume));
        }

        debug_assert_eq!(values.len(), schema.len());
        for (value, field) in values.iter_mut().zip(&schema.fields) {
            if self.mask.masks(field) {
                *value = 0.0;
            }
        }
        Ok(FeatureVector { values })
    }
}

/// One-shot extraction; builds the platform projection on the fly.
pub fn extract(
    view: &SimView<'_>,
    ready_index: usize,
    schema: &FeatureSchema,
    mask: &AblationMask,
) -> Result<FeatureVector, FeatureError> {
    FeatureExtractor::new(schema.clone(), view.arch, *mask).extract(view, ready_index)
}

#[cfg(test)]
mod tests;
