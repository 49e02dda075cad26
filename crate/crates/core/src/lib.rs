//! Model selection for individualized-treatment-effect (ITE) estimators under
//! unsupervised domain adaptation.
//!
//! Candidate models are scored by a validation risk on labeled source data
//! plus a causal risk: the negative log-likelihood of the interventional
//! causal DAG given the unlabeled target covariates augmented with the
//! model's predicted potential outcomes. The crate also ships a synthetic
//! structural-equation benchmark and an experiment harness that validates the
//! selection method end to end.

pub mod data;
pub mod dgp;
pub mod error;
pub mod fitness;
pub mod graph;
pub mod harness;
pub mod independence;
mod numeric;
pub mod risks;
pub mod selection;
pub mod zoo;

pub use error::{Error, Result};
