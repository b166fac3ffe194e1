//! Desk-scale numerics for the strong-coupling polaron energy–momentum upper
//! bound.
//!
//! The crate computes the Pekar minimizers, the Hessian of the field
//! functional and its Bogoliubov trace correction, the Landau–Pekar mass, the
//! Gaussian-weight integrals of the trial-state analysis, and assembles the
//! parabolic upper bound on the ground-state energy of the fiber Hamiltonian.
//!
//! Module layout follows the data flow:
//!
//! * [`radial_core`] — radial grids, quadrature, spherical-Bessel transforms,
//!   angular-momentum sector kernels and Legendre projections.
//! * [`pekar_scf`] — the self-consistent Pekar (Choquard) solver.
//! * [`sector_operators`] — per-sector Schrödinger operators, the reduced
//!   resolvent and the Hessian blocks.
//! * [`bogoliubov`] — fourth roots, Bogoliubov coefficients, trace
//!   corrections and the truncated-Fock oracle.
//! * [`gaussian_weights`] — displacement fields, the weight function and the
//!   leading-order integrals.
//! * [`dispersion_bound`] — the energy–momentum bound table.
//! * [`config`], [`artifact`] and [`checks`] — run configuration, persisted
//!   solutions and the invariant suites.

// Negated comparisons deliberately reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod banded;
pub mod bogoliubov;
pub mod checks;
pub mod config;
pub mod dispersion_bound;
pub mod error;
pub mod fit;
pub mod gaussian_weights;
pub mod pekar_scf;
pub mod radial_core;
pub mod sector_operators;
pub mod special;

pub use error::{Error, Result};
