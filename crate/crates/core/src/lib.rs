//! Simulation and estimation of average treatment effects for A/B tests on
//! social graphs, where a unit's response may depend on how much of its
//! neighborhood is treated.
//!
//! The pieces fit together as a pipeline: build or load a [`graph::Graph`],
//! assign treatment, compute each node's treated-neighbor fraction, draw
//! responses from one of the [`models`], estimate the average treatment
//! effect with any of the [`estimators`], and compare against the variance
//! [`bounds`]. The [`experiment`] module replicates that pipeline across a
//! grid of effect configurations to show what model misspecification does
//! to each estimator; [`report`] serializes the outcome.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod graph;
mod linalg;
pub mod models;
pub mod report;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::EstimatorKind;
pub use experiment::{run_study, ExperimentConfig, StudyReport, DEFAULT_SEED};
pub use graph::Graph;
pub use models::{ModelKind, ModelParams};
