//! Dynamic angular synchronization.
//!
//! Estimates time-evolving phases `g*(k) ∈ C^n`, `k = 1..T`, from noisy
//! pairwise offset measurements `A(k) ≈ g*(k) g*(k)^H - I`, using the fact
//! that the latent phases vary smoothly along the time axis. The crate
//! contains:
//!
//! - [`signal`]: anchored unit-modulus signals, measurement stacks and the
//!   columnar text format used to store them;
//! - [`spectral`]: the closed-form path-graph Laplacian basis and the
//!   low-frequency projector `P_{τ,n}`;
//! - [`synthgen`]: seeded generators for smooth ground truths and for the
//!   additive Gaussian and outlier noise models;
//! - [`trs`]: a matrix-free solver for sphere-constrained complex quadratic
//!   maximization, plus a dense oracle;
//! - [`estimators`]: global TRS, local TRS with global smoothing, global
//!   matrix denoising with local TRS or spectral synchronization, the
//!   projected power method and the naive per-block spectral baseline;
//! - [`selection`]: the β grid and data-fidelity based selection rules;
//! - [`metrics`]: RMSE and the theory-derived `τ*` and bias oracles;
//! - [`experiment`]: the Monte-Carlo sweep runner behind the CLI;
//! - [`selftest`]: the invariant suite exposed as `dynsync selftest`.

pub mod error;
pub mod estimators;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod selection;
pub mod selftest;
pub mod signal;
pub mod spectral;
pub mod synthgen;
pub mod trs;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
