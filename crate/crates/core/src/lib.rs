//! Cocoon metrics for tweet corpora and a one-dimensional Sznajd model of Open/Closed
//! opinion dynamics.
//!
//! The analysis half extracts retweet and mention edges from tweet text, aggregates them
//! into cohort interaction matrices and cocoon ratios, and fits logistic regressions of
//! individual openness. The simulation half runs the spin chain to absorption and sweeps
//! the initial Closed fraction.

pub mod cli;
pub mod corpus;
pub mod econ;
pub mod extract;
pub mod logit;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod sznajd;
