//! Evaluation metrics, experiment orchestration, and ablation sweeps.

pub mod experiment;
pub mod metrics;
pub mod sweeps;

pub use experiment::{
    evaluate_unit, prepare_unit, run_experiment, DagRecord, DagUnit, ExperimentConfig,
    ExperimentReport, LambdaPolicy, MethodResult, MethodSummary, PairSummary,
};
pub use metrics::{inversion_count_normalized, pehe, pehe_top_decile};
pub use sweeps::{sweep_lambda, sweep_misspec, sweep_subgraph, SweepReport};
