//! Experiment harness for the `vqephase` simulator: scenario registry,
//! configuration handling, parallel sweep execution and artifact output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod error;
pub mod output;
pub mod pool;
pub mod scenario;

pub use error::RunError;
