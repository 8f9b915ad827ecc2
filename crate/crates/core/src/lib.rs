//! Optimal control of single-electron charge transfer in a one-dimensional
//! double quantum dot.
//!
//! The crate discretizes the double-well Hamiltonian on a uniform grid,
//! computes its low-lying spectrum, propagates states under a dipole-coupled
//! control field, and optimizes that field at fixed fluence with optional
//! envelope and low-pass constraints. Optimized transfer fields can be
//! chained with their time inversions into n-fold sequential transfers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod fields;
pub mod grid;
pub mod hamiltonian;
pub mod oct;
pub mod par;
pub mod propagate;
pub mod sequence;
pub mod sweep;
pub mod system;
pub mod units;

pub use error::{Error, Result};
pub use grid::{Grid, WaveFunction};
pub use system::{DoubleDot, Task};
