// `!(x > 0.0)` is used deliberately in input guards: unlike `x <= 0.0`
// it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Library half of the benchmark harness; the `mlsmc` binary is a thin
//! wrapper so integration tests can drive studies in-process.

pub mod config;
pub mod problem;
pub mod study;
