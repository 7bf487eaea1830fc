//! U-statistics of bounded symmetric kernels over temporally dependent data.
//!
//! The crate is organised around the objects needed to study exponential
//! concentration of U-statistics under mixing:
//!
//! * [`kernels`] – bounded symmetric kernels (mean, Kendall sign product,
//!   symmetrized Spearman, table-driven kernels on finite alphabets).
//! * [`processes`] – seeded generators for iid, AR(1), m-dependent, finite
//!   Markov chain and Gaussian copula vector series.
//! * [`mixing`] – exact α, β, φ (and conditional) mixing coefficients of
//!   finite-state Markov chains.
//! * [`ustat`] – U-statistic evaluation, fast rank statistics, the
//!   permutation (decoupling) average and the telescoping decomposition of
//!   `U − θ*` with exact conditional expectations.
//! * [`bounds`] – parametric tail and log-MGF bounds plus calibration.
//! * [`hidim`] – Kendall / Spearman correlation matrices and max-norm
//!   deviation experiments.
//! * [`harness`] – configuration, seeded parallel experiment engine and
//!   output files used by the `depu` CLI.

pub mod bounds;
pub mod harness;
pub mod hidim;
pub mod kernels;
pub mod mixing;
pub mod processes;
pub mod rng;
pub mod stats;
pub mod ustat;

pub use kernels::{KernelKind, KernelSpec, StateTable};
pub use processes::{FiniteMarkovChain, ProcessKind, ProcessSpec, SeriesPath};
