//! Line-oriented platform description format.
//!
//! ```text
//! format dagsched-platform 1
//! name G1
//! links intra 0.02 inter 0.5
//! tasktype <id> <name> <kind>
//! cluster <id> <name> kinds=<k1,k2,...> pes=<id,id,...>
//! profile <cluster-id> <type-id> exec=<µs> power=<mW>
//! ```
//!
//! Blank lines and `#` comments are ignored. `emit_platform` writes the same
//! format back; parse(emit(p)) reproduces `p` exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{ArchitectureGraph, Cluster, PlatformError, TaskKind, TaskType, TaskTypeCatalog};

const FORMAT_LINE: &str = "format dagsched-platform 1";

fn err(line: usize, msg: impl Into<String>) -> PlatformError {
    PlatformError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parse and validate a platform description.
pub fn parse_platform(text: &str) -> Result<ArchitectureGraph, PlatformError> {
    let mut name = String::new();
    let mut intra = None;
    let mut inter = None;
    let mut types: Vec<TaskType> = Vec::new();
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut profiles: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    let mut saw_format = false;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_format {
            if line != FORMAT_LINE {
                return Err(err(lineno, format!("expected '{FORMAT_LINE}'")));
            }
            saw_format = true;
            continue;
        }
        let mut parts = line.split_whitespace();
        let keyword = parts.next().unwrap();
        match keyword {
            "name" => {
                name = parts
                    .next()
                    .ok_or_else(|| err(lineno, "missing platform name"))?
                    .to_string();
            }
            "links" => {
                let rest: Vec<&str> = parts.collect();
                if rest.len() != 4 || rest[0] != "intra" || rest[2] != "inter" {
                    return Err(err(lineno, "expected 'links intra <rate> inter <rate>'"));
                }
                intra = Some(parse_f64(rest[1], lineno)?);
                inter = Some(parse_f64(rest[3], lineno)?);
            }
            "tasktype" => {
                let id = parse_usize(parts.next(), lineno, "task type id")?;
                let ty_name = parts
                    .next()
                    .ok_or_else(|| err(lineno, "missing task type name"))?;
                let kind_str = parts
                    .next()
                    .ok_or_else(|| err(lineno, "missing task kind"))?;
                let kind = TaskKind::parse(kind_str)
                    .ok_or_else(|| err(lineno, format!("unknown task kind '{kind_str}'")))?;
                types.push(TaskType {
                    id,
                    name: ty_name.to_string(),
                    kind,
                });
            }
            "cluster" => {
                let id = parse_usize(parts.next(), lineno, "cluster id")?;
                let cl_name = parts
                    .next()
                    .ok_or_else(|| err(lineno, "missing cluster name"))?;
                let mut kinds = Vec::new();
                let mut pe_ids = Vec::new();
                for kv in parts {
                    if let Some(list) = kv.strip_prefix("kinds=") {
                        for k in list.split(',').filter(|s| !s.is_empty()) {
                            kinds.push(
                                TaskKind::parse(k)
                                    .ok_or_else(|| err(lineno, format!("unknown kind '{k}'")))?,
                            );
                        }
                    } else if let Some(list) = kv.strip_prefix("pes=") {
                        for p in list.split(',').filter(|s| !s.is_empty()) {
                            pe_ids.push(
                                p.parse()
                                    .map_err(|_| err(lineno, format!("bad PE id '{p}'")))?,
                            );
                        }
                    } else {
                        return Err(err(lineno, format!("unexpected token '{kv}'")));
                    }
                }
                clusters.push(Cluster {
                    id,
                    name: cl_name.to_string(),
                    pe_ids,
                    kinds,
                });
            }
            "profile" => {
                let cluster = parse_usize(parts.next(), lineno, "cluster id")?;
                let ty = parse_usize(parts.next(), lineno, "task type id")?;
                let mut exec = None;
                let mut power = None;
                for kv in parts {
                    if let Some(v) = kv.strip_prefix("exec=") {
                        exec = Some(parse_f64(v, lineno)?);
                    } else if let Some(v) = kv.strip_prefix("power=") {
                        power = Some(parse_f64(v, lineno)?);
                    } else {
                        return Err(err(lineno, format!("unexpected token '{kv}'")));
                    }
                }
                let exec = exec.ok_or_else(|| err(lineno, "missing exec="))?;
                let power = power.ok_or_else(|| err(lineno, "missing power="))?;
                profiles.insert((cluster, ty), (exec, power));
            }
            other => return Err(err(lineno, format!("unknown keyword '{other}'"))),
        }
    }
    if !saw_format {
        return Err(err(0, format!("empty document, expected '{FORMAT_LINE}'")));
    }
    if name.is_empty() {
        return Err(PlatformError::Validation("missing 'name' line".into()));
    }
    let intra = intra.ok_or_else(|| PlatformError::Validation("missing 'links' line".into()))?;
    let inter = inter.expect("set together with intra");
    let catalog = TaskTypeCatalog::new(types)?;
    ArchitectureGraph::assemble(&name, catalog, clusters, &profiles, intra, inter)
}

/// Serialize a platform in the description format.
pub fn emit_platform(arch: &ArchitectureGraph) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_LINE);
    out.push('\n');
    let _ = writeln!(out, "name {}", arch.name);
    let _ = writeln!(
        out,
        "links intra {} inter {}",
        arch.intra_cluster_rate, arch.inter_cluster_rate
    );
    for ty in arch.catalog.iter() {
        let _ = writeln!(out, "tasktype {} {} {}", ty.id, ty.name, ty.kind.as_str());
    }
    for c in &arch.clusters {
        let kinds: Vec<&str> = c.kinds.iter().map(|k| k.as_str()).collect();
        let pes: Vec<String> = c.pe_ids.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(
            out,
            "cluster {} {} kinds={} pes={}",
            c.id,
            c.name,
            kinds.join(","),
            pes.join(",")
        );
    }
    for c in &arch.clusters {
        let pe = &arch.pes[c.pe_ids[0]];
        for (&ty, &exec) in &pe.exec_time {
            let power = pe.power[&ty];
            let _ = writeln!(out, "profile {} {} exec={} power={}", c.id, ty, exec, power);
        }
    }
    out
}

fn parse_f64(s: &str, line: usize) -> Result<f64, PlatformError> {
    s.parse()
        .map_err(|_| err(line, format!("bad number '{s}'")))
}

fn parse_usize(s: Option<&str>, line: usize, what: &str) -> Result<usize, PlatformError> {
    let s = s.ok_or_else(|| err(line, format!("missing {what}")))?;
    s.parse().map_err(|_| err(line, format!("bad {what} '{s}'")))
}
