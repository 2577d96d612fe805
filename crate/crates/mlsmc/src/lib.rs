// `!(x > 0.0)` is used deliberately throughout: unlike `x <= 0.0` it also
// rejects NaN, which is exactly what the input guards want.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Multilevel sequential Monte Carlo (MLSMC) estimation of normalizing-constant
//! ratios Z_L/Z_0 across a hierarchy of increasingly resolved target densities.
//!
//! The crate provides the Feynman-Kac model interface ([`fk::LevelModel`]), the
//! particle engine ([`engine::run_mlsmc`]), the standard product estimator and a
//! telescoped estimator that reaches one level deeper at no extra particle cost
//! ([`estimators`]), a cost-optimal sample-size planner ([`allocation`]), a
//! finite-state enumeration oracle for exact cross-checks ([`oracle`]), and a
//! built-in Bayesian inverse problem for a one-dimensional elliptic PDE
//! ([`fem`], [`inverse`]).

pub mod allocation;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod fem;
pub mod fk;
pub mod inverse;
pub mod oracle;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
