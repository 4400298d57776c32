//! Discrete-event simulation of streaming frames over a platform.
//!
//! Frames arrive per a trace; each task becomes ready once all its
//! predecessors finish; at every scheduling point the engine drains the
//! ready set by repeatedly asking the scheduler for one (task, PE)
//! assignment and dispatching it. Execution times can be perturbed by
//! truncated Gaussian noise. A run is strictly single-threaded and
//! deterministic for a fixed seed and deterministic scheduler.

mod report;

pub use report::{slowdown, FrameRow, SimReport, Slowdown, WallClockStats};

use std::cmp::Reverse;
use std::collections::{BinaryHeap, BTreeMap, BTreeSet, VecDeque};
use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::appgraph::{ApplicationGraph, FrameArrivalTrace};
use crate::platform::ArchitectureGraph;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("no PE supports task type {task_type}")]
    NoCapablePe { task_type: usize },
    #[error("PE {pe} does not support task type {task_type}")]
    UnsupportedTask { pe: usize, task_type: usize },
    #[error("trace references unknown app '{0}'")]
    UnknownApp(String),
    #[error("ready index {index} out of range ({len} ready)")]
    BadReadyIndex { index: usize, len: usize },
    #[error("scheduler error: {0}")]
    Scheduler(String),
    #[error("reports cover different traces")]
    TraceMismatch,
}

/// A completed predecessor of a ready task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredRecord {
    pub task_id: usize,
    pub pe: usize,
    pub finish_us: f64,
    pub volume: f64,
}

/// One ready task of one in-flight frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    pub frame_id: u64,
    pub task_id: usize,
    pub app_id: usize,
    pub task_type: usize,
    /// Time all predecessors finished (equals the max predecessor finish).
    pub ready_time: f64,
    pub preds: Vec<PredRecord>,
}

/// One (ready task, PE) decision returned by a scheduler.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Assignment {
    /// Index into the canonical ready list.
    pub ready_index: usize,
    pub pe: usize,
}

/// Read-only view of the live state handed to schedulers and feature
/// extraction.
pub struct SimView<'a> {
    pub now: f64,
    pub arch: &'a ArchitectureGraph,
    pub pe_ready_time: &'a [f64],
    /// Ready tasks in canonical order: ascending ready time, ties by
    /// (frame id, task id).
    pub ready: &'a [TaskInstance],
    /// Downward depth per (app id, task id), from the bound app set.
    pub depths: &'a [Vec<usize>],
}

/// A scheduling policy: pick the next assignment from a non-empty ready set.
///
/// Per-task policies inspect `view.ready[0]` and return index 0; joint
/// policies like ETF may pick any ready task. The engine keeps invoking this
/// until the ready set drains, so every task instance is decided exactly
/// once, at its ready event.
pub trait Scheduler {
    fn next_assignment(&mut self, view: &SimView<'_>) -> Result<Assignment, SimError>;

    /// Name used in report metadata.
    fn label(&self) -> String;
}

/// Per-task completion status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TaskStatus {
    Pending,
    Ready,
    Running,
    Done,
}

#[derive(Debug, Clone)]
struct FrameState {
    app_id: usize,
    arrival_us: f64,
    status: Vec<TaskStatus>,
    /// (pe, finish time) per completed task.
    finished: Vec<Option<(usize, f64)>>,
    remaining: usize,
    energy_uj: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Event {
    Arrival { app_id: usize, frame_id: u64 },
    Completion { frame_id: u64, task_id: usize, pe: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct QueuedEvent {
    time: f64,
    seq: u64,
    event: Event,
}

impl Eq for QueuedEvent {}

impl Ord for QueuedEvent {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for QueuedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// An assigned-but-unstarted entry in a PE queue.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuedTask {
    pub frame_id: u64,
    pub task_id: usize,
    pub start_us: f64,
    pub finish_us: f64,
}

/// Live simulator state plus accumulated outputs.
pub struct Simulation<'a> {
    arch: &'a ArchitectureGraph,
    apps: Vec<&'a ApplicationGraph>,
    depths: Vec<Vec<usize>>,
    succs: Vec<Vec<Vec<(usize, f64)>>>,
    noise_pct: f64,
    seed: u64,
    rng: ChaCha8Rng,

    now: f64,
    events: BinaryHeap<Reverse<QueuedEvent>>,
    event_seq: u64,
    pe_ready_time: Vec<f64>,
    pe_queue: Vec<VecDeque<QueuedTask>>,
    ready: Vec<TaskInstance>,
    inflight: BTreeMap<u64, FrameState>,

    frames: Vec<FrameRow>,
    decisions: u64,
    decision_wall_ns: Vec<u64>,
    trace_fingerprint: u64,
}

impl<'a> Simulation<'a> {
    /// Bind a platform, application set, and trace. Fails if the trace
    /// references an app not provided or the platform cannot run some task
    /// type.
    pub fn new(
        arch: &'a ArchitectureGraph,
        apps: &[&'a ApplicationGraph],
        trace: &FrameArrivalTrace,
        noise_pct: f64,
        seed: u64,
    ) -> Result<Self, SimError> {
        let mut used_types = BTreeSet::new();
        for app in apps {
            debug_assert!(app.is_valid(), "app '{}' failed validation", app.name);
            used_types.extend(app.used_types());
        }
        for &ty in &used_types {
            if arch.capable_pes(ty).next().is_none() {
                return Err(SimError::NoCapablePe { task_type: ty });
            }
        }
        let mut events = BinaryHeap::new();
        let mut seq = 0u64;
        for arrival in &trace.arrivals {
            let app = apps
                .iter()
                .position(|a| a.name == arrival.app)
                .ok_or_else(|| SimError::UnknownApp(arrival.app.clone()))?;
            events.push(Reverse(QueuedEvent {
                time: arrival.time_us,
                seq,
                event: Event::Arrival {
                    app_id: app,
                    frame_id: arrival.frame_id,
                },
            }));
            seq += 1;
        }
        let depths = apps.iter().map(|a| a.downward_depths()).collect();
        let succs = apps.iter().map(|a| a.successor_lists()).collect();
        Ok(Self {
            arch,
            apps: apps.to_vec(),
            depths,
            succs,
            noise_pct,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            now: 0.0,
            events,
            event_seq: seq,
            pe_ready_time: vec![0.0; arch.pe_count()],
            pe_queue: vec![VecDeque::new(); arch.pe_count()],
            ready: Vec::new(),
            inflight: BTreeMap::new(),
            frames: Vec::new(),
            decisions: 0,
            decision_wall_ns: Vec::new(),
            trace_fingerprint: crate::util::fnv1a(trace.emit().as_bytes()),
        })
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Ready tasks in canonical order.
    pub fn ready_tasks(&self) -> &[TaskInstance] {
        &self.ready
    }

    pub fn view(&self) -> SimView<'_> {
        SimView {
            now: self.now,
            arch: self.arch,
            pe_ready_time: &self.pe_ready_time,
            ready: &self.ready,
            depths: &self.depths,
        }
    }

    /// Advance to the next event time, apply every event scheduled at that
    /// time, and return whether anything happened. The ready set may be
    /// non-empty afterwards; callers drain it before stepping again.
    pub fn step_events(&mut self) -> bool {
        let Some(Reverse(first)) = self.events.pop() else {
            return false;
        };
        debug_assert!(first.time >= self.now, "time went backwards");
        self.now = first.time;
        self.apply_event(first.event);
        while let Some(Reverse(peek)) = self.events.peek() {
            if peek.time > self.now {
                break;
            }
            let Reverse(ev) = self.events.pop().unwrap();
            self.apply_event(ev.event);
        }
        for queue in &mut self.pe_queue {
            while queue.front().is_some_and(|t| t.start_us <= self.now) {
                queue.pop_front();
            }
        }
        true
    }

    fn apply_event(&mut self, event: Event) {
        match event {
            Event::Arrival { app_id, frame_id } => {
                let app = self.apps[app_id];
                let n = app.task_count();
                let mut state = FrameState {
                    app_id,
                    arrival_us: self.now,
                    status: vec![TaskStatus::Pending; n],
                    finished: vec![None; n],
                    remaining: n,
                    energy_uj: 0.0,
                };
                for node in &app.nodes {
                    if node.predecessors.is_empty() {
                        state.status[node.id] = TaskStatus::Ready;
                        self.insert_ready(TaskInstance {
                            frame_id,
                            task_id: node.id,
                            app_id,
                            task_type: node.task_type,
                            ready_time: self.now,
                            preds: Vec::new(),
                        });
                    }
                }
                self.inflight.insert(frame_id, state);
            }
            Event::Completion {
                frame_id,
                task_id,
                pe,
            } => {
                let state = self.inflight.get_mut(&frame_id).expect("frame in flight");
                state.status[task_id] = TaskStatus::Done;
                state.finished[task_id] = Some((pe, self.now));
                state.remaining -= 1;
                let app_id = state.app_id;
                if state.remaining == 0 {
                    let state = self.inflight.remove(&frame_id).unwrap();
                    self.frames.push(FrameRow {
                        frame_id,
                        app: self.apps[app_id].name.clone(),
                        arrival_us: state.arrival_us,
                        completion_us: self.now,
                        latency_us: self.now - state.arrival_us,
                        energy_uj: state.energy_uj,
                    });
                    return;
                }
                // Successors whose predecessors are now all done become ready.
                let succ_ids: Vec<usize> = self.succs[app_id][task_id]
                    .iter()
                    .map(|&(v, _)| v)
                    .collect();
                let app = self.apps[app_id];
                for succ in succ_ids {
                    let state = self.inflight.get_mut(&frame_id).unwrap();
                    if state.status[succ] != TaskStatus::Pending {
                        continue;
                    }
                    let node = &app.nodes[succ];
                    let all_done = node
                        .predecessors
                        .iter()
                        .all(|&(p, _)| state.status[p] == TaskStatus::Done);
                    if !all_done {
                        continue;
                    }
                    state.status[succ] = TaskStatus::Ready;
                    let preds: Vec<PredRecord> = node
                        .predecessors
                        .iter()
                        .map(|&(p, volume)| {
                            let (pe, finish_us) = state.finished[p].expect("pred done");
                            PredRecord {
                                task_id: p,
                                pe,
                                finish_us,
                                volume,
                            }
                        })
                        .collect();
                    let ready_time = preds
                        .iter()
                        .map(|p| p.finish_us)
                        .fold(f64::NEG_INFINITY, f64::max);
                    self.insert_ready(TaskInstance {
                        frame_id,
                        task_id: succ,
                        app_id,
                        task_type: node.task_type,
                        ready_time,
                        preds,
                    });
                }
            }
        }
    }

    fn insert_ready(&mut self, task: TaskInstance) {
        let task_key = (task.ready_time, task.frame_id, task.task_id);
        let pos = self
            .ready
            .partition_point(|t| (t.ready_time, t.frame_id, t.task_id) <= task_key);
        self.ready.insert(pos, task);
    }

    /// Communication delay charged if `task` runs on `pe`: the maximum over
    /// predecessors of the link latency for that predecessor's volume.
    pub fn comm_delay(arch: &ArchitectureGraph, task: &TaskInstance, pe: usize) -> f64 {
        task.preds
            .iter()
            .map(|p| arch.link_rate[p.pe][pe] * p.volume)
            .fold(0.0, f64::max)
    }

    /// Dispatch one ready task to a PE: fixes its start and (noisy) finish
    /// time, charges energy, advances the PE, and enqueues the completion.
    pub fn dispatch(&mut self, ready_index: usize, pe: usize) -> Result<(), SimError> {
        if ready_index >= self.ready.len() {
            return Err(SimError::BadReadyIndex {
                index: ready_index,
                len: self.ready.len(),
            });
        }
        let task = self.ready.remove(ready_index);
        let pe_info = &self.arch.pes[pe];
        let Some(&nominal_exec) = pe_info.exec_time.get(&task.task_type) else {
            return Err(SimError::UnsupportedTask {
                pe,
                task_type: task.task_type,
            });
        };
        let comm = Self::comm_delay(self.arch, &task, pe);
        let start = (task.ready_time + comm).max(self.pe_ready_time[pe]);
        let exec = self.perturb(nominal_exec);
        let finish = start + exec;
        let power = pe_info.power[&task.task_type];
        self.pe_ready_time[pe] = finish;
        self.pe_queue[pe].push_back(QueuedTask {
            frame_id: task.frame_id,
            task_id: task.task_id,
            start_us: start,
            finish_us: finish,
        });
        let state = self.inflight.get_mut(&task.frame_id).expect("in flight");
        state.status[task.task_id] = TaskStatus::Running;
        state.energy_uj += exec * power / 1000.0;
        self.events.push(Reverse(QueuedEvent {
            time: finish,
            seq: self.event_seq,
            event: Event::Completion {
                frame_id: task.frame_id,
                task_id: task.task_id,
                pe,
            },
        }));
        self.event_seq += 1;
        Ok(())
    }

    /// Multiplicative Gaussian perturbation with std `noise_pct`, truncated
    /// at ±3σ and floored at 1% of nominal.
    fn perturb(&mut self, nominal: f64) -> f64 {
        if self.noise_pct <= 0.0 {
            return nominal;
        }
        let normal = Normal::new(0.0, self.noise_pct).expect("valid std");
        let draw: f64 = normal.sample(&mut self.rng);
        let clipped = draw.clamp(-3.0 * self.noise_pct, 3.0 * self.noise_pct);
        (nominal * (1.0 + clipped)).max(0.01 * nominal)
    }

    /// Drain the ready set through the scheduler, timing each decision.
    fn drain_ready(&mut self, scheduler: &mut dyn Scheduler) -> Result<(), SimError> {
        while !self.ready.is_empty() {
            let t0 = Instant::now();
            let assignment = scheduler.next_assignment(&self.view())?;
            self.decision_wall_ns.push(t0.elapsed().as_nanos() as u64);
            self.decisions += 1;
            self.dispatch(assignment.ready_index, assignment.pe)?;
        }
        Ok(())
    }

    /// Run every frame to completion and summarize.
    pub fn run(mut self, scheduler: &mut dyn Scheduler) -> Result<SimReport, SimError> {
        while self.step_events() {
            self.drain_ready(scheduler)?;
        }
        debug_assert!(self.inflight.is_empty(), "all frames complete");
        let mut frames = std::mem::take(&mut self.frames);
        frames.sort_by_key(|f| f.frame_id);
        Ok(SimReport::new(
            self.arch.name.clone(),
            scheduler.label(),
            self.noise_pct,
            self.seed,
            self.trace_fingerprint,
            frames,
            self.decisions,
            std::mem::take(&mut self.decision_wall_ns),
        ))
    }
}

/// Convenience wrapper: bind and run in one call.
pub fn run_simulation(
    arch: &ArchitectureGraph,
    apps: &[&ApplicationGraph],
    trace: &FrameArrivalTrace,
    scheduler: &mut dyn Scheduler,
    noise_pct: f64,
    seed: u64,
) -> Result<SimReport, SimError> {
    Simulation::new(arch, apps, trace, noise_pct, seed)?.run(scheduler)
}

#[cfg(test)]
mod tests;
