//! Kernel ridge regression through the lens of its integral-operator spectrum.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectra`] and [`conjugate`] build analytic eigenvalue models of kernel
//!   integral operators, with Monte Carlo oracles to check them;
//! * [`kernels`] evaluates kernels, explicit feature maps and Gram matrices;
//! * [`sampler`] draws designs, targets and noise from counter-keyed streams;
//! * [`rates`] turns a spectrum and a target into the theoretical error rate
//!   `r*(lambda, k)` together with its admissibility diagnostics;
//! * [`solver`] fits KRR in closed form and measures excess risk;
//! * [`experiments`] wires everything into seeded, reproducible sweeps.
//!
//! Data-parallel loops go through [`par`], which falls back to sequential
//! iteration when the `parallel` feature is disabled.

pub mod activation;
pub mod conjugate;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod linalg;
pub mod par;
pub mod rates;
pub mod sampler;
pub mod solver;
pub mod spectra;

pub use error::{KrrError, Result};
pub use par::Parallelism;
