//! Square-exponential kernel, its spectral density, and the band-limited
//! low/high-frequency split.
//!
//! The low-pass kernel is the inverse Fourier transform of the SE spectral
//! density truncated to `[-b, b]`. In closed form,
//!
//! ```text
//! k_low(t) = sigma^2 exp(-t^2 / 2l^2) Re(erf(sqrt(2) b l pi - i t / (sqrt(2) l)))
//! ```
//!
//! which this module evaluates through the fused, overflow-safe form
//! `sigma^2 [exp(-c^2) - exp(-a^2) Re(e^{2iac} w(c + ia))]` in
//! [`crate::cerf::damped_re_erf`]; the naive product overflows once
//! `t^2 / 2l^2 - 2 pi^2 b^2 l^2` passes ~709 even though the kernel value is
//! tame. The high-frequency kernel is the exact complement `SE - k_low`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cerf;

/// Invalid kernel hyperparameters.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("sigma2 must be positive and finite, got {0}")]
    InvalidSigma2(f64),
    #[error("lengthscale must be positive and finite, got {0}")]
    InvalidLengthscale(f64),
    #[error("noise variance must be non-negative and finite, got {0}")]
    InvalidNoiseVar(f64),
    #[error("cutoff frequency must be positive and finite, got {0}")]
    InvalidCutoff(f64),
}

/// Hyperparameters of the square-exponential observation model: marginal
/// variance, correlation lengthscale in seconds, and observation noise
/// variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeHyperparams {
    pub sigma2: f64,
    pub lengthscale: f64,
    pub noise_var: f64,
}

impl SeHyperparams {
    pub fn new(sigma2: f64, lengthscale: f64, noise_var: f64) -> Result<Self, KernelError> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(KernelError::InvalidSigma2(sigma2));
        }
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(KernelError::InvalidLengthscale(lengthscale));
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(KernelError::InvalidNoiseVar(noise_var));
        }
        Ok(SeHyperparams {
            sigma2,
            lengthscale,
            noise_var,
        })
    }
}

/// SE hyperparameters plus the user-chosen cutoff frequency in Hz.
///
/// Serializes to the flat document
/// `{"sigma2": _, "lengthscale": _, "noise_var": _, "cutoff_b": _}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandLimitedKernelSpec {
    #[serde(flatten)]
    pub se: SeHyperparams,
    pub cutoff_b: f64,
}

impl BandLimitedKernelSpec {
    pub fn new(se: SeHyperparams, cutoff_b: f64) -> Result<Self, KernelError> {
        if !(cutoff_b > 0.0 && cutoff_b.is_finite()) {
            return Err(KernelError::InvalidCutoff(cutoff_b));
        }
        Ok(BandLimitedKernelSpec { se, cutoff_b })
    }

    /// `a = sqrt(2) b l pi`, the real part of the erf argument.
    fn erf_offset(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.cutoff_b * self.se.lengthscale * std::f64::consts::PI
    }
}

/// Which component of the spectral split a Gram matrix is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelSelector {
    /// Full square-exponential kernel.
    Se,
    /// Band-limited low-frequency kernel.
    Low,
    /// High-frequency complement.
    High,
}

/// SE covariance `sigma^2 exp(-tau^2 / 2l^2)`.
pub fn se_kernel(tau: f64, p: &SeHyperparams) -> f64 {
    let u = tau / p.lengthscale;
    p.sigma2 * (-0.5 * u * u).exp()
}

/// Spectral density of the SE kernel, `sigma^2 sqrt(2 pi l^2) exp(-2 pi^2 l^2 xi^2)`,
/// with `xi` in Hz. Integrates to `sigma^2`.
pub fn se_psd(xi: f64, p: &SeHyperparams) -> f64 {
    let pl = std::f64::consts::PI * p.lengthscale * xi;
    p.sigma2 * (2.0 * std::f64::consts::PI).sqrt() * p.lengthscale * (-2.0 * pl * pl).exp()
}

/// Low-frequency kernel: inverse Fourier transform of the SE density
/// truncated to `[-b, b]`. Even in `t`; `k(0) = sigma^2 erf(sqrt(2) b l pi)`.
pub fn lowpass_kernel(t: f64, spec: &BandLimitedKernelSpec) -> f64 {
    let a = spec.erf_offset();
    let c = t / (std::f64::consts::SQRT_2 * spec.se.lengthscale);
    // Valid specs make a > 0 and finite; a non-finite t propagates as NaN,
    // matching `se_kernel`.
    spec.se.sigma2 * cerf::damped_re_erf(a, c).unwrap_or(f64::NAN)
}

/// High-frequency complement `SE(t) - k_low(t)`.
pub fn highpass_kernel(t: f64, spec: &BandLimitedKernelSpec) -> f64 {
    se_kernel(t, &spec.se) - lowpass_kernel(t, spec)
}

fn eval(selector: KernelSelector, tau: f64, spec: &BandLimitedKernelSpec) -> f64 {
    match selector {
        KernelSelector::Se => se_kernel(tau, &spec.se),
        KernelSelector::Low => lowpass_kernel(tau, spec),
        KernelSelector::High => highpass_kernel(tau, spec),
    }
}

/// Gram matrix `G[i, j] = k(ts_a[i] - ts_b[j])` for the selected kernel.
///
/// When both time vectors are the same object the result is built from its
/// lower triangle, making it symmetric to the last bit.
pub fn gram_matrix(
    ts_a: &[f64],
    ts_b: &[f64],
    selector: KernelSelector,
    spec: &BandLimitedKernelSpec,
) -> DMatrix<f64> {
    let same = std::ptr::eq(ts_a, ts_b) || ts_a == ts_b;
    let (n, m) = (ts_a.len(), ts_b.len());
    let mut g = DMatrix::zeros(n, m);
    if same {
        for i in 0..n {
            for j in 0..=i {
                let v = eval(selector, ts_a[i] - ts_b[j], spec);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
    } else {
        for i in 0..n {
            for j in 0..m {
                g[(i, j)] = eval(selector, ts_a[i] - ts_b[j], spec);
            }
        }
    }
    g
}
