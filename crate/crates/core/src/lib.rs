//! Quasi-static quantum Szilard engine for interacting bosons in a one-dimensional box.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cache;
pub mod eigen;
pub mod engine;
pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod oracle;
pub mod search;
pub mod spectrum;
pub mod thermo;
pub mod units;
