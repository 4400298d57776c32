//! Line-oriented DAG description format.
//!
//! ```text
//! format dagsched-dag 1
//! app <app_id> <name>
//! node <id> <type-name>
//! edge <src> <dst> <volume>
//! ```
//!
//! Task types are referenced by name and resolved against a platform's task
//! type catalog on load.

use std::fmt::Write as _;

use super::{AppError, ApplicationGraph, TaskNode};
use crate::platform::TaskTypeCatalog;

const FORMAT_LINE: &str = "format dagsched-dag 1";

fn err(line: usize, msg: impl Into<String>) -> AppError {
    AppError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parse a DAG file, resolving task type names against `catalog`, and
/// validate the result.
pub fn parse_app(text: &str, catalog: &TaskTypeCatalog) -> Result<ApplicationGraph, AppError> {
    let mut app_id = None;
    let mut name = String::new();
    let mut nodes: Vec<TaskNode> = Vec::new();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
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
        match parts.next().unwrap() {
            "app" => {
                let id: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(lineno, "bad app id"))?;
                name = parts
                    .next()
                    .ok_or_else(|| err(lineno, "missing app name"))?
                    .to_string();
                app_id = Some(id);
            }
            "node" => {
                let id: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(lineno, "bad node id"))?;
                let type_name = parts
                    .next()
                    .ok_or_else(|| err(lineno, "missing task type name"))?;
                let ty = catalog
                    .by_name(type_name)
                    .ok_or_else(|| err(lineno, format!("unknown task type '{type_name}'")))?;
                nodes.push(TaskNode {
                    id,
                    task_type: ty.id,
                    predecessors: Vec::new(),
                    app_id: 0,
                });
            }
            "edge" => {
                let src: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(lineno, "bad edge src"))?;
                let dst: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(lineno, "bad edge dst"))?;
                let volume: f64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err(lineno, "bad edge volume"))?;
                edges.push((src, dst, volume));
            }
            other => return Err(err(lineno, format!("unknown keyword '{other}'"))),
        }
    }
    let app_id = app_id.ok_or_else(|| err(0, "missing 'app' line"))?;
    nodes.sort_by_key(|n| n.id);
    for node in &mut nodes {
        node.app_id = app_id;
    }
    let mut app = ApplicationGraph {
        app_id,
        name,
        nodes,
    };
    for (src, dst, volume) in edges {
        let node = app
            .nodes
            .iter_mut()
            .find(|n| n.id == dst)
            .ok_or_else(|| AppError::UnknownTask {
                app: app.name.clone(),
                task: dst,
            })?;
        node.predecessors.push((src, volume));
    }
    let violations = app.validate();
    if !violations.is_empty() {
        return Err(AppError::Invalid(violations));
    }
    Ok(app)
}

/// Serialize a DAG in the description format.
pub fn emit_app(app: &ApplicationGraph, catalog: &TaskTypeCatalog) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_LINE);
    out.push('\n');
    let _ = writeln!(out, "app {} {}", app.app_id, app.name);
    for node in &app.nodes {
        let ty = catalog.get(node.task_type).expect("type in catalog");
        let _ = writeln!(out, "node {} {}", node.id, ty.name);
    }
    for node in &app.nodes {
        for &(pred, volume) in &node.predecessors {
            let _ = writeln!(out, "edge {} {} {}", pred, node.id, volume);
        }
    }
    out
}
