//! Structured sparsity toolkit.
//!
//! Norms over groups of variables (partitions, intervals, grid half-planes,
//! trees, power-set DAGs), their proximal operators, ISTA/FISTA solvers,
//! penalized regression with regularization paths and cross-validation,
//! structured dictionary learning and hierarchical kernel selection.

pub mod cli;
pub mod error;
pub mod factorization;
pub mod groups;
pub mod hkl;
pub mod linalg;
pub mod models;
pub mod norms;
pub mod prox;
pub mod proxcheck;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
