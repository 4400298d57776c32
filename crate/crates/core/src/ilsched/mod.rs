//! Imitation-learned scheduling policies: decision trees, the hierarchical
//! two-level policy with its flat baseline, training datasets, DAgger, and
//! experiment plumbing.

pub mod dagger;
pub mod dataset;
pub mod pipeline;
pub mod policy;
pub mod tree;

pub use dagger::{dagger_run, leave_one_out, DaggerOutcome, DaggerParams, LooParams, LooReport};
pub use dataset::{Dataset, DatasetRow, Provenance};
pub use pipeline::{evaluate_holdout, gen_dataset, saturation_rate, HoldoutReport};
pub use policy::{
    emit_flat_model, emit_policy, parse_flat_model, parse_policy, train_flat, train_hierarchical,
    FlatModel, FlatScheduler, HierarchicalPolicy, PePolicy, PolicyScheduler, TrainParams,
};
pub use tree::{DecisionTree, TreeParams};
