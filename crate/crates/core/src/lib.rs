//! Discrete-event simulation and imitation-learning scheduling for streaming
//! DAG applications on heterogeneous many-core platforms.
//!
//! The crate is organized around the lifecycle of a scheduling experiment:
//!
//! - [`platform`] models the target hardware: clusters of processing elements
//!   with per-task execution-time/power profiles and a linear communication
//!   model.
//! - [`appgraph`] models applications as task DAGs, ships a synthetic
//!   application suite, and turns workload specs into frame arrival traces.
//! - [`sim`] drives frames through the platform under a pluggable scheduler
//!   and produces per-frame timing/energy reports.
//! - [`oracle`] provides the expert schedulers: earliest-finish ETF with
//!   selectable objective and an exact branch-and-bound solver for small
//!   single-frame instances.
//! - [`features`] encodes (state, ready task) pairs into fixed-length numeric
//!   vectors.
//! - [`ilsched`] trains decision-tree policies from oracle decisions,
//!   composes them hierarchically, and closes the loop with DAgger.

pub mod appgraph;
pub mod features;
pub mod ilsched;
pub mod oracle;
pub mod platform;
pub mod sim;
pub(crate) mod util;

pub use appgraph::{ApplicationGraph, FrameArrivalTrace, TaskNode, WorkloadSpec};
pub use features::{FeatureSchema, FeatureVector};
pub use ilsched::{Dataset, DecisionTree, HierarchicalPolicy};
pub use oracle::{Objective, OracleDecision};
pub use platform::{ArchitectureGraph, Cluster, ProcessingElement, TaskKind};
pub use sim::{Scheduler, SimReport, Simulation, TaskInstance};
