//! Strategic classification on finite instances.
//!
//! The strategic loss charges a hypothesis both for misclassifying a point
//! and for labeling it 0 while it can reach a point labeled 1 through the
//! manipulation graph. This crate evaluates that loss exactly on finite
//! domains, analyzes its loss classes by brute-force VC computation, bounds
//! it under an approximate graph, learns such graphs from samples, and runs
//! seeded Monte Carlo sample-complexity experiments.

pub mod cli;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod graphdist;
pub mod learners;
pub mod losses;
pub mod scenarios;
pub mod table;
pub mod vcdim;

pub use domain::{
    enumerate_class, induce_graph, ClassFamily, CostModel, Descriptor, FiniteDomain, Hypothesis, HypothesisClass,
    LabeledDistribution, LabeledSample, ManipulationGraph, Marginal, Norm,
};
pub use error::{Error, Result};
pub use losses::LossKind;
