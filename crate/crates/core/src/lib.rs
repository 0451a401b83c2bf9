//! Spectral toolkit for two-dimensional periodic Pauli-type Hamiltonians.
//!
//! The operators handled here have kinetic part `σ·F(-i∇)` for a vector
//! symbol `F: R² → R³` that vanishes at the origin and grows like `|p|^d`,
//! perturbed by a lattice of compactly supported matrix-valued bumps
//! `β Σ_γ χ((x-γ)/α)·σ`. The crate computes Bloch band structures of the
//! fibers in a truncated plane-wave basis, detects the spectral gap that the
//! perturbation opens around zero energy, reduces fibers with a Schur
//! (Feshbach) complement onto the constant-mode subspace, and evaluates the
//! free-resolvent integral kernel together with its decay envelope.
//!
//! Modules:
//! - [`model`]: dispersions, bump potentials, run parameters, flux geometry
//! - [`planewave`]: truncated fiber matrices and mode-block partitions
//! - [`spectrum`]: eigensolves, band structures, gap detection, sweeps
//! - [`feshbach`]: Schur complement, coupling norms, remainder scaling
//! - [`kernel`]: free-resolvent kernel quadrature and envelope checks
//!
//! Everything is pure and immutable after construction; per-point work
//! (k-points, sweep cells, kernel samples) runs under a parallel map when
//! the `parallel` feature (default) is enabled.

pub mod error;
pub mod feshbach;
pub mod fit;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod par;
pub mod pauli;
pub mod planewave;
pub mod quadrature;
pub mod spectrum;

pub use error::{Error, Result};
