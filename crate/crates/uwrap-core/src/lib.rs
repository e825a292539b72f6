//! Calibrated uncertainty estimation around opaque binary classifiers.
//!
//! The crate takes a trained event classifier (a "data-driven model"), derives
//! per-event quality factors from the data the classifier sees, fits a decision
//! tree that partitions events by those factors, and calibrates an exact
//! binomial upper bound on the error probability of every partition. The result
//! is a wrapper that turns each yes/no prediction into a prediction plus a
//! statistically valid uncertainty, which can then be aggregated into bounds on
//! population-level quantities such as cell-type ratios per sample.
//!
//! Module map:
//! - [`data_model`]: events, samples, panels, CSV ingestion, split handling
//! - [`synthgen`]: seeded Gaussian-mixture generator for synthetic datasets
//! - [`ddm`]: the wrapped classifier (built-in perceptron or external table)
//! - [`quality_factors`]: marker, density, homogeneity, percentile, outcome factors
//! - [`impact_model`]: decision tree, binomial calibration, the wrapper itself
//! - [`evaluation`]: Brier score decomposition and variant comparison
//! - [`aggregation`]: population count/ratio bounds from per-event estimates

pub mod aggregation;
pub mod data_model;
pub mod ddm;
pub mod error;
pub mod evaluation;
pub mod impact_model;
pub mod quality_factors;
pub mod synthgen;

pub use error::{Result, UwError};
