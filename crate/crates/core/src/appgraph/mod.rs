//! Application DAG model and streaming workload generation.
//!
//! Applications are directed acyclic graphs of typed tasks with per-edge
//! communication volumes. The module ships a synthetic six-application suite
//! plus a large radar-style graph, and materializes workload specs into
//! frame arrival traces.

mod builtin;
mod format;
mod workload;

pub use builtin::{
    builtin_app, builtin_catalog, builtin_suite, mix500_spec, suite_app_names, SUITE_SEED,
};
pub use format::{emit_app, parse_app};
pub use workload::{
    emit_workload, generate_trace, parse_workload, Arrival, ArrivalModel, FrameArrivalTrace,
    WorkloadSpec,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("unknown application '{0}'")]
    UnknownApp(String),
    #[error("unknown task {task} in app '{app}'")]
    UnknownTask { app: String, task: usize },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid application graph: {0:?}")]
    Invalid(Vec<DagViolation>),
    #[error("invalid workload spec: {0}")]
    BadWorkload(String),
}

/// A structural defect found by [`ApplicationGraph::validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DagViolation {
    DuplicateNodeId(usize),
    SelfEdge(usize),
    UnknownPredecessor { node: usize, pred: usize },
    NegativeVolume { node: usize, pred: usize },
    Cycle,
    NoSourceNode,
    NoTerminalNode,
}

/// One task of an application: its profiled type plus incoming edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskNode {
    pub id: usize,
    pub task_type: usize,
    /// (predecessor task id, communication volume) pairs.
    pub predecessors: Vec<(usize, f64)>,
    pub app_id: usize,
}

/// A validated task DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationGraph {
    pub app_id: usize,
    pub name: String,
    pub nodes: Vec<TaskNode>,
}

impl ApplicationGraph {
    pub fn task_count(&self) -> usize {
        self.nodes.len()
    }

    /// All structural violations; empty means the graph is a usable DAG.
    pub fn validate(&self) -> Vec<DagViolation> {
        let mut violations = Vec::new();
        let n = self.nodes.len();
        let mut ids = BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(node.id) {
                violations.push(DagViolation::DuplicateNodeId(node.id));
            }
            for &(pred, vol) in &node.predecessors {
                if pred == node.id {
                    violations.push(DagViolation::SelfEdge(node.id));
                }
                if pred >= n || !self.nodes.iter().any(|m| m.id == pred) {
                    violations.push(DagViolation::UnknownPredecessor {
                        node: node.id,
                        pred,
                    });
                }
                if vol < 0.0 {
                    violations.push(DagViolation::NegativeVolume {
                        node: node.id,
                        pred,
                    });
                }
            }
        }
        if !violations.is_empty() {
            // Id-level problems make the reachability checks unreliable.
            return violations;
        }
        // Kahn's algorithm; leftover nodes indicate a cycle.
        let mut indegree: Vec<usize> = self.nodes.iter().map(|t| t.predecessors.len()).collect();
        let succs = self.successor_lists();
        let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut visited = 0;
        while let Some(u) = queue.pop() {
            visited += 1;
            for &(v, _) in &succs[u] {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    queue.push(v);
                }
            }
        }
        if visited != n {
            violations.push(DagViolation::Cycle);
        }
        if n > 0 && !self.nodes.iter().any(|t| t.predecessors.is_empty()) {
            violations.push(DagViolation::NoSourceNode);
        }
        if n > 0 && !(0..n).any(|i| succs[i].is_empty()) {
            violations.push(DagViolation::NoTerminalNode);
        }
        violations
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Successor adjacency derived from the predecessor lists, indexed by
    /// node id; entries are (successor id, edge volume).
    pub fn successor_lists(&self) -> Vec<Vec<(usize, f64)>> {
        let mut succs = vec![Vec::new(); self.nodes.len()];
        for node in &self.nodes {
            for &(pred, vol) in &node.predecessors {
                succs[pred].push((node.id, vol));
            }
        }
        succs
    }

    /// Longest edge-path length from `task` to any terminal node. Terminal
    /// nodes have depth zero.
    pub fn downward_depth(&self, task: usize) -> Result<usize, AppError> {
        if task >= self.nodes.len() {
            return Err(AppError::UnknownTask {
                app: self.name.clone(),
                task,
            });
        }
        Ok(self.downward_depths()[task])
    }

    /// Downward depth of every node (reverse-topological DP).
    pub fn downward_depths(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let succs = self.successor_lists();
        let mut depth = vec![0usize; n];
        let mut state = vec![0u8; n];
        let mut topo = Vec::with_capacity(n);
        for start in 0..n {
            if state[start] != 0 {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            while let Some(&mut (u, ref mut next)) = stack.last_mut() {
                if state[u] == 0 {
                    state[u] = 1;
                }
                if *next < succs[u].len() {
                    let (v, _) = succs[u][*next];
                    *next += 1;
                    if state[v] == 0 {
                        stack.push((v, 0));
                    }
                } else {
                    state[u] = 2;
                    topo.push(u);
                    stack.pop();
                }
            }
        }
        // `topo` lists successors before their predecessors, so each node's
        // successor depths are final by the time it is visited.
        for u in topo {
            let d = succs[u]
                .iter()
                .map(|&(v, _)| depth[v] + 1)
                .max()
                .unwrap_or(0);
            depth[u] = d;
        }
        depth
    }

    /// Task type ids referenced by this graph.
    pub fn used_types(&self) -> BTreeSet<usize> {
        self.nodes.iter().map(|t| t.task_type).collect()
    }
}

#[cfg(test)]
mod tests;
