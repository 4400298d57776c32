//! Labeled training data and its file format.
//!
//! Every row holds the feature snapshot of one expert decision plus the
//! oracle's cluster and PE-within-cluster labels. The two `train_*` flags
//! say which policy level the row feeds: initial oracle rows train both
//! levels, DAgger-aggregated rows train exactly the level whose prediction
//! diverged.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureField, FeatureGroup, FeatureKind, FeatureSchema};
use crate::oracle::{Objective, OracleDecision};
use crate::platform::ArchitectureGraph;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dataset is empty")]
    Empty,
    #[error("schema hash mismatch: header says {header:#018x}, contents hash to {computed:#018x}")]
    SchemaHash { header: u64, computed: u64 },
    #[error("row {row}: {msg}")]
    BadRow { row: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Initial,
    Dagger(u32),
}

impl Provenance {
    pub fn as_string(&self) -> String {
        match self {
            Provenance::Initial => "initial".to_string(),
            Provenance::Dagger(i) => format!("dagger-{i}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "initial" {
            return Some(Provenance::Initial);
        }
        s.strip_prefix("dagger-")
            .and_then(|n| n.parse().ok())
            .map(Provenance::Dagger)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub features: Vec<f64>,
    /// Oracle cluster, as a schema cluster slot.
    pub cluster_label: u32,
    /// Oracle PE index within that cluster.
    pub pe_label: u32,
    pub train_cluster: bool,
    pub train_pe: bool,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FeatureSchema,
    /// PEs per schema cluster slot on the home platform; bounds the label
    /// spaces.
    pub cluster_pe_counts: Vec<usize>,
    pub objective: Objective,
    pub platform: String,
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn new(schema: FeatureSchema, objective: Objective, arch: &ArchitectureGraph) -> Self {
        Self {
            cluster_pe_counts: schema.cluster_pe_counts.clone(),
            schema,
            objective,
            platform: arch.name.clone(),
            rows: Vec::new(),
        }
    }

    pub fn push_decision(&mut self, decision: &OracleDecision, provenance: Provenance) {
        debug_assert_eq!(decision.features.len(), self.schema.len());
        self.rows.push(DatasetRow {
            features: decision.features.values.clone(),
            cluster_label: decision.cluster as u32,
            pe_label: decision.pe_in_cluster as u32,
            train_cluster: true,
            train_pe: true,
            provenance,
        });
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Total PE count across cluster slots (the flat label space).
    pub fn total_pes(&self) -> usize {
        self.cluster_pe_counts.iter().sum()
    }

    /// Flat PE label of a row: dense index over (cluster slot, pe index).
    pub fn flat_label(&self, row: &DatasetRow) -> u32 {
        let before: usize = self.cluster_pe_counts[..row.cluster_label as usize]
            .iter()
            .sum();
        before as u32 + row.pe_label
    }

    /// Histogram of (cluster label, count) over rows that train the cluster
    /// level.
    pub fn cluster_histogram(&self) -> Vec<(u32, usize)> {
        let mut counts = vec![0usize; self.schema.cluster_count];
        for row in self.rows.iter().filter(|r| r.train_cluster) {
            counts[row.cluster_label as usize] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(c, n)| (c as u32, n))
            .collect()
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.features.len() != self.schema.len() {
                return Err(DatasetError::BadRow {
                    row: i,
                    msg: format!(
                        "feature length {} does not match schema length {}",
                        row.features.len(),
                        self.schema.len()
                    ),
                });
            }
            let c = row.cluster_label as usize;
            if c >= self.schema.cluster_count {
                return Err(DatasetError::BadRow {
                    row: i,
                    msg: format!("cluster label {c} out of range"),
                });
            }
            if (row.pe_label as usize) >= self.cluster_pe_counts[c] {
                return Err(DatasetError::BadRow {
                    row: i,
                    msg: format!("pe label {} out of range for cluster {c}", row.pe_label),
                });
            }
            if row.features.iter().any(|v| v.is_nan()) {
                return Err(DatasetError::BadRow {
                    row: i,
                    msg: "NaN feature value".into(),
                });
            }
        }
        Ok(())
    }

    /// Serialize: header block, then one CSV row per decision.
    pub fn emit(&self) -> String {
        let mut out = String::from("format dagsched-dataset 1\n");
        let _ = writeln!(out, "platform {}", self.platform);
        let _ = writeln!(out, "objective {}", self.objective.as_str());
        let _ = writeln!(out, "clusters {}", self.schema.cluster_count);
        let _ = writeln!(out, "pred-slots {}", self.schema.pred_slots);
        let _ = writeln!(out, "cluster-names {}", self.schema.cluster_names.join(","));
        let counts: Vec<String> = self.cluster_pe_counts.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "cluster-pe-counts {}", counts.join(","));
        let _ = writeln!(out, "schema-hash {:#018x}", self.schema.hash());
        for field in &self.schema.fields {
            let kind = match field.kind {
                FeatureKind::Static => "static",
                FeatureKind::Dynamic => "dynamic",
            };
            let _ = writeln!(out, "feature {} {} {:?}", field.name, kind, field.group);
        }
        out.push_str("data\n");
        for row in &self.rows {
            for v in &row.features {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.cluster_label,
                row.pe_label,
                row.train_cluster as u8,
                row.train_pe as u8,
                row.provenance.as_string()
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let err = |line: usize, msg: String| DatasetError::Parse { line, msg };
        let mut platform = String::new();
        let mut objective = Objective::Performance;
        let mut cluster_count = 0usize;
        let mut pred_slots = 0usize;
        let mut cluster_names: Vec<String> = Vec::new();
        let mut cluster_pe_counts: Vec<usize> = Vec::new();
        let mut header_hash: Option<u64> = None;
        let mut fields: Vec<FeatureField> = Vec::new();
        let mut rows = Vec::new();
        let mut in_data = false;
        let mut saw_format = false;

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_format {
                if line != "format dagsched-dataset 1" {
                    return Err(err(lineno, "expected 'format dagsched-dataset 1'".into()));
                }
                saw_format = true;
                continue;
            }
            if in_data {
                let parts: Vec<&str> = line.split(',').collect();
                let want = fields.len() + 5;
                if parts.len() != want {
                    return Err(err(
                        lineno,
                        format!("expected {want} columns, found {}", parts.len()),
                    ));
                }
                let mut features = Vec::with_capacity(fields.len());
                for p in &parts[..fields.len()] {
                    features.push(
                        p.parse::<f64>()
                            .map_err(|_| err(lineno, format!("bad feature value '{p}'")))?,
                    );
                }
                let tail = &parts[fields.len()..];
                rows.push(DatasetRow {
                    features,
                    cluster_label: tail[0]
                        .parse()
                        .map_err(|_| err(lineno, "bad cluster label".into()))?,
                    pe_label: tail[1]
                        .parse()
                        .map_err(|_| err(lineno, "bad pe label".into()))?,
                    train_cluster: tail[2] == "1",
                    train_pe: tail[3] == "1",
                    provenance: Provenance::parse(tail[4])
                        .ok_or_else(|| err(lineno, format!("bad provenance '{}'", tail[4])))?,
                });
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next().unwrap() {
                "platform" => platform = parts.next().unwrap_or_default().to_string(),
                "objective" => {
                    let s = parts.next().unwrap_or_default();
                    objective = Objective::parse(s)
                        .ok_or_else(|| err(lineno, format!("unknown objective '{s}'")))?;
                }
                "clusters" => {
                    cluster_count = parts
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(lineno, "bad cluster count".into()))?;
                }
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
                    header_hash = Some(
                        u64::from_str_radix(s, 16)
                            .map_err(|_| err(lineno, "bad schema hash".into()))?,
                    );
                }
                "feature" => {
                    let name = parts
                        .next()
                        .ok_or_else(|| err(lineno, "missing feature name".into()))?
                        .to_string();
                    let kind = match parts.next() {
                        Some("static") => FeatureKind::Static,
                        Some("dynamic") => FeatureKind::Dynamic,
                        other => return Err(err(lineno, format!("bad feature kind {other:?}"))),
                    };
                    let group = match parts.next() {
                        Some("TaskIdentity") => FeatureGroup::TaskIdentity,
                        Some("StaticProfile") => FeatureGroup::StaticProfile,
                        Some("PredIdentity") => FeatureGroup::PredIdentity,
                        Some("ReadyOrder") => FeatureGroup::ReadyOrder,
                        Some("PeAvailability") => FeatureGroup::PeAvailability,
                        Some("PredContext") => FeatureGroup::PredContext,
                        other => return Err(err(lineno, format!("bad feature group {other:?}"))),
                    };
                    fields.push(FeatureField { name, kind, group });
                }
                "data" => in_data = true,
                other => return Err(err(lineno, format!("unknown keyword '{other}'"))),
            }
        }
        let schema = FeatureSchema {
            cluster_count,
            pred_slots,
            cluster_names,
            cluster_pe_counts: cluster_pe_counts.clone(),
            fields,
        };
        let computed = schema.hash();
        match header_hash {
            Some(h) if h != computed => {
                return Err(DatasetError::SchemaHash {
                    header: h,
                    computed,
                })
            }
            None => {
                return Err(DatasetError::Parse {
                    line: 0,
                    msg: "missing schema-hash".into(),
                })
            }
            _ => {}
        }
        let dataset = Self {
            schema,
            cluster_pe_counts,
            objective,
            platform,
            rows,
        };
        dataset
            .validate()
            .map_err(|e| DatasetError::Parse {
                line: 0,
                msg: e.to_string(),
            })?;
        Ok(dataset)
    }
}
