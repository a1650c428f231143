//! Exponential-dimension state-vector simulation of symmetry-projected eSWAP
//! circuits for frustrated j1-j2 Heisenberg magnets, together with the
//! finite-shot optimizers, Boltzmann sampler and fitting tools used to study
//! how the shot budget controls the achievable ground-state fidelity.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] builds geometries, bond sets, checkerboard layers and
//!   spatial symmetry groups.
//! * [`engine`] holds the state-vector kernels (dimer states, eSWAP gates,
//!   site permutations).
//! * [`spectrum`] is the exact-diagonalization oracle.
//! * [`ansatz`] evaluates projected energies, gradients and metric tensors.
//! * [`shots`] models Hadamard-test measurement statistics.
//! * [`optimize`], [`thermal`] and [`analysis`] implement the experiment
//!   protocols on top.
//!
//! Amplitude kernels are data-parallel through rayon when the `parallel`
//! feature is enabled (the default); without it every kernel runs
//! sequentially with identical results.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ansatz;
pub mod engine;
mod error;
pub mod experiments;
pub mod lattice;
pub mod optimize;
pub mod par;
pub mod shots;
pub mod spectrum;
pub mod thermal;

pub use error::{Error, Result};
pub use num_complex::Complex64;
