//! Learning-rate policies as an ensemble-building pipeline.
//!
//! * [`lr_policy`] evaluates parameterized schedules.
//! * [`trainer`] trains desk-scale MLPs under a schedule.
//! * [`tuning`] runs grid or random search over policies and keeps a trial database.
//! * [`ensemble`] holds prediction matrices and voting.
//! * [`selection`] picks teams from a model pool, including focal-diversity selection.
//! * [`variance`] checks the parameter-variance recurrence of SGD with random LRs by Monte Carlo.
//! * [`llm_vote`] votes over per-option log-likelihoods of multiple-choice answers.

pub mod ensemble;
pub mod error;
pub mod llm_vote;
pub mod lr_policy;
pub mod rng;
pub mod selection;
pub mod trainer;
pub mod tuning;
pub mod variance;

pub use error::{Error, Result};
