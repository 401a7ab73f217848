//! Variance-reduced accelerated operator splitting for generalized equations
//! `0 ∈ Fx + Tx`, where `F = (1/n) Σ Fᵢ` is a finite sum and `T` is accessed
//! through its resolvent.

pub mod checks;
pub mod constants;
pub mod data;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod par;
pub mod problem;
pub mod problems;
pub mod prox;
pub mod residual;
pub mod rng;
pub mod solvers;
pub mod trace;
pub mod vector;

pub use error::{Result, VfosaError};
pub use problem::{ComponentOperator, GeProblem, Resolvent};
pub use vector::DenseVector;
