//! Simulation engines for adiabatic sweeps of 1D spin chains under a single
//! injected Pauli error.
//!
//! The crate provides three interchangeable evolution engines plus a
//! classical baseline:
//!
//! * [`exact`] — dense state-vector evolution and full diagonalization,
//!   the reference oracle for everything else (n ≤ 14).
//! * [`freefermion`] — covariance-matrix (Gaussian) dynamics for the
//!   transverse-field Ising line, scaling to hundreds of sites.
//! * [`mps`] — TEBD on matrix product states for non-integrable models at
//!   intermediate sizes, including imaginary-time ground-state search.
//! * [`randomcircuit`] — Markov-chain / Monte Carlo model of error spreading
//!   in brick-wall random circuits.
//!
//! [`models`] holds the Hamiltonian families, sweep schedules, noise events
//! and experiment configuration shared by all engines.

// Force linkage of the BLAS/LAPACK backend used by ndarray and ndarray-linalg.
extern crate blas_src;
extern crate openblas_src;

pub mod error;
pub mod exact;
pub mod freefermion;
pub mod models;
pub mod mps;
pub mod randomcircuit;

pub use error::{CoreError, ErrorClass, Result};

/// Complex double-precision scalar used across all engines.
pub type C64 = num_complex::Complex64;
