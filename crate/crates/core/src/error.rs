//! Crate-wide error type.
//!
//! Variants are grouped by the subsystem that raises them; everything is
//! surfaced through the single [`Error`] enum so errors propagate freely
//! between the graph, data, and scoring layers.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // graph
    #[error("directed cycle detected in graph")]
    CycleDetected,
    #[error("unknown node id {0}")]
    UnknownNode(u32),
    #[error("duplicate node id {0}")]
    DuplicateNode(u32),
    #[error("graphs are not defined over the same node set")]
    NodeSetMismatch,
    #[error("graph requires exactly one treatment and one outcome node, found {treatments} treatment(s) and {outcomes} outcome(s)")]
    MissingRoles { treatments: usize, outcomes: usize },

    // data
    #[error("column {0:?} not found or not aligned with graph nodes")]
    ColumnMismatch(String),
    #[error("column {0:?} is not numeric")]
    NonNumericColumn(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset columns have unequal lengths")]
    RaggedColumns,
    #[error("binary column {0:?} contains values other than 0 and 1")]
    NotBinary(String),
    #[error("dataset schema does not match: {0}")]
    SchemaMismatch(String),
    #[error("dataset has no outcome column")]
    MissingOutcome,
    #[error("dataset has no treatment column")]
    MissingTreatment,

    // independence / fitness
    #[error("not enough samples: need more than {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("graph still has edges into the treatment node; mutilate it first")]
    NotMutilated,

    // risks / selection
    #[error("treatment column is single-valued; cannot fit a propensity model")]
    DegenerateTreatment,
    #[error("training data contains only one treatment arm")]
    SingleArmData,
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("input is empty")]
    EmptyInput,
    #[error("need at least two models, got {0}")]
    TooFewModels(usize),

    // dgp
    #[error("graph too small to place treatment and outcome roles (need at least 3 nodes, got {0})")]
    InfeasibleRoles(usize),
    #[error("edge from {src} to {dst} has no weight")]
    MissingWeights { src: u32, dst: u32 },
    #[error("perturbation set is empty or contains a node that is not an ancestor of the outcome")]
    InvalidPerturbSet,
    #[error("could not complete graph mutation without creating a cycle")]
    NoAcyclicCompletion,

    // config / io
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// data/runtime problems.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}
