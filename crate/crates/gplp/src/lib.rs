//! Bayesian low-pass filtering with band-limited Gaussian-process priors.
//!
//! A time series is modeled as the sum of two independent latent GPs whose
//! spectral densities split a square-exponential spectrum at a cutoff
//! frequency `b`: the low component owns `[-b, b]`, the high component owns
//! the rest, and together they add back to an SE kernel. Low-pass filtering
//! is then exact posterior inference over the low-frequency component, which
//! handles noisy and unevenly sampled records and carries calibrated error
//! bars. A zero-phase Butterworth cascade is included as the classical
//! baseline, plus synthetic-signal and FFT utilities for validation.
//!
//! Modules:
//! - [`cerf`]: overflow-safe complex error function (the one special
//!   function the closed-form band-limited kernel needs)
//! - [`kernels`]: SE kernel, its spectral density, the low/high split
//! - [`gp`]: exact GP likelihood, hyperparameter fitting, posteriors
//! - [`butterworth`]: the zero-phase classical baseline
//! - [`signals`] and [`spectrum`]: synthetic benchmarks, FFT analysis
//! - [`timeseries`]: the `time,value` CSV interchange type

pub mod butterworth;
pub mod cerf;
pub mod gp;
pub mod kernels;
mod linalg;
mod optim;
pub mod signals;
pub mod spectrum;
pub mod timeseries;

pub use butterworth::{ButterworthSpec, SosCascade};
pub use gp::{Component, FitConfig, FitResult, PosteriorEstimate};
pub use kernels::{BandLimitedKernelSpec, KernelSelector, SeHyperparams};
pub use signals::{LineSpectraSpec, SubsampleMode};
pub use spectrum::SpectrumEstimate;
pub use timeseries::TimeSeries;
