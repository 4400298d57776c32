//! Expert schedulers used to generate training labels.
//!
//! ETF scans every (ready task, capable PE) pair and dispatches the pair
//! minimizing the objective cost; re-evaluated after each dispatch against
//! the updated state. The cost per objective:
//!
//! - performance: finish time = max(PE free, ready + comm) + exec
//! - energy:      exec × power
//! - edp:         (finish − ready) × exec × power
//! - ed2p:        (finish − ready)² × exec × power
//!
//! Ties fall back to the performance cost, then (PE id, task id).

pub mod exact;

use serde::{Deserialize, Serialize};

use crate::features::{extract, AblationMask, FeatureSchema, FeatureVector};
use crate::platform::ArchitectureGraph;
use crate::sim::{Assignment, Scheduler, SimError, SimView, Simulation, TaskInstance};

/// Optimization objective an oracle (and the policies learned from it)
/// minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    Performance,
    Energy,
    Edp,
    Ed2p,
}

impl Objective {
    pub fn as_str(&self) -> &'static str {
        match self {
            Objective::Performance => "performance",
            Objective::Energy => "energy",
            Objective::Edp => "edp",
            Objective::Ed2p => "ed2p",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "performance" => Some(Objective::Performance),
            "energy" => Some(Objective::Energy),
            "edp" => Some(Objective::Edp),
            "ed2p" => Some(Objective::Ed2p),
            _ => None,
        }
    }

    pub const ALL: [Objective; 4] = [
        Objective::Performance,
        Objective::Energy,
        Objective::Edp,
        Objective::Ed2p,
    ];
}

/// (objective cost, performance cost) of running `task` on `pe` now.
pub fn pair_cost(
    arch: &ArchitectureGraph,
    pe_ready_time: &[f64],
    task: &TaskInstance,
    pe: usize,
    objective: Objective,
) -> (f64, f64) {
    let pe_info = &arch.pes[pe];
    let exec = pe_info.exec_time[&task.task_type];
    let power = pe_info.power[&task.task_type];
    let comm = Simulation::comm_delay(arch, task, pe);
    let start = (task.ready_time + comm).max(pe_ready_time[pe]);
    let finish = start + exec;
    let energy = exec * power / 1000.0;
    let wait = finish - task.ready_time;
    let cost = match objective {
        Objective::Performance => finish,
        Objective::Energy => energy,
        Objective::Edp => wait * energy,
        Objective::Ed2p => wait * wait * energy,
    };
    (cost, finish)
}

/// Scan all (ready task, capable PE) pairs and return the minimizer.
///
/// Total order on candidates: objective cost, then performance cost, then
/// PE id, then task id.
pub fn etf_decide(
    arch: &ArchitectureGraph,
    pe_ready_time: &[f64],
    ready: &[TaskInstance],
    objective: Objective,
) -> Result<Assignment, SimError> {
    let mut best: Option<(f64, f64, usize, usize, usize)> = None;
    for (index, task) in ready.iter().enumerate() {
        let mut any = false;
        for pe_info in arch.capable_pes(task.task_type) {
            any = true;
            let (cost, finish) = pair_cost(arch, pe_ready_time, task, pe_info.id, objective);
            let key = (cost, finish, pe_info.id, task.task_id, index);
            let better = match best {
                None => true,
                Some((bc, bf, bp, bt, _)) => (cost, finish, pe_info.id, task.task_id)
                    .partial_cmp(&(bc, bf, bp, bt))
                    .is_some_and(|o| o.is_lt()),
            };
            if better {
                best = Some(key);
            }
        }
        if !any {
            return Err(SimError::NoCapablePe {
                task_type: task.task_type,
            });
        }
    }
    best.map(|(_, _, pe, _, index)| Assignment {
        ready_index: index,
        pe,
    })
    .ok_or(SimError::Scheduler("empty ready set".into()))
}

/// The oracle's PE choice for one specific task: the ETF scan restricted to
/// that task's capable PEs.
pub fn oracle_pe_for_task(
    arch: &ArchitectureGraph,
    pe_ready_time: &[f64],
    task: &TaskInstance,
    objective: Objective,
) -> Result<usize, SimError> {
    let single = std::slice::from_ref(task);
    etf_decide(arch, pe_ready_time, single, objective).map(|a| a.pe)
}

/// One recorded expert decision: the dispatched task, its pre-decision
/// feature snapshot, and the chosen PE/cluster labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleDecision {
    pub frame_id: u64,
    pub task_id: usize,
    pub app_id: usize,
    pub pe: usize,
    pub cluster: usize,
    pub pe_in_cluster: usize,
    pub features: FeatureVector,
    pub objective: Objective,
}

/// Optional feature recording attached to an [`EtfScheduler`].
pub struct DecisionRecorder {
    pub schema: FeatureSchema,
    pub mask: AblationMask,
    pub decisions: Vec<OracleDecision>,
}

impl DecisionRecorder {
    pub fn new(schema: FeatureSchema) -> Self {
        Self {
            schema,
            mask: AblationMask::none(),
            decisions: Vec::new(),
        }
    }
}

/// ETF as a simulation scheduler, optionally recording (state, decision)
/// pairs for training data.
pub struct EtfScheduler {
    pub objective: Objective,
    pub recorder: Option<DecisionRecorder>,
}

impl EtfScheduler {
    pub fn new(objective: Objective) -> Self {
        Self {
            objective,
            recorder: None,
        }
    }

    pub fn recording(objective: Objective, schema: FeatureSchema) -> Self {
        Self {
            objective,
            recorder: Some(DecisionRecorder::new(schema)),
        }
    }

    pub fn take_decisions(&mut self) -> Vec<OracleDecision> {
        self.recorder
            .as_mut()
            .map(|r| std::mem::take(&mut r.decisions))
            .unwrap_or_default()
    }
}

impl Scheduler for EtfScheduler {
    fn next_assignment(&mut self, view: &SimView<'_>) -> Result<Assignment, SimError> {
        let assignment = etf_decide(view.arch, view.pe_ready_time, view.ready, self.objective)?;
        if let Some(rec) = &mut self.recorder {
            let task = &view.ready[assignment.ready_index];
            let features = extract(view, assignment.ready_index, &rec.schema, &rec.mask)
                .map_err(|e| SimError::Scheduler(e.to_string()))?;
            rec.decisions.push(OracleDecision {
                frame_id: task.frame_id,
                task_id: task.task_id,
                app_id: task.app_id,
                pe: assignment.pe,
                cluster: view.arch.cluster_of(assignment.pe).expect("valid pe"),
                pe_in_cluster: view.arch.pe_index_in_cluster(assignment.pe).expect("valid pe"),
                features,
                objective: self.objective,
            });
        }
        Ok(assignment)
    }

    fn label(&self) -> String {
        format!("oracle:{}", self.objective.as_str())
    }
}

/// Drain the current ready set with ETF, dispatching each chosen pair and
/// recording one decision per task against the state updated by the prior
/// dispatches.
pub fn oracle_schedule_step(
    sim: &mut Simulation<'_>,
    objective: Objective,
    schema: Option<&FeatureSchema>,
) -> Result<Vec<OracleDecision>, SimError> {
    let mut decisions = Vec::new();
    while !sim.ready_tasks().is_empty() {
        let view = sim.view();
        let assignment = etf_decide(view.arch, view.pe_ready_time, view.ready, objective)?;
        let task = &view.ready[assignment.ready_index];
        let features = match schema {
            Some(schema) => extract(&view, assignment.ready_index, schema, &AblationMask::none())
                .map_err(|e| SimError::Scheduler(e.to_string()))?,
            None => FeatureVector::empty(),
        };
        decisions.push(OracleDecision {
            frame_id: task.frame_id,
            task_id: task.task_id,
            app_id: task.app_id,
            pe: assignment.pe,
            cluster: view.arch.cluster_of(assignment.pe).expect("valid pe"),
            pe_in_cluster: view.arch.pe_index_in_cluster(assignment.pe).expect("valid pe"),
            features,
            objective,
        });
        sim.dispatch(assignment.ready_index, assignment.pe)?;
    }
    Ok(decisions)
}
