//! Synthetic line-spectra signals, sampling and noise protocols, and error
//! metrics for the reproduction experiments.

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::{TimeSeries, TimeSeriesError};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("frequency sets must satisfy max(low) < min(high): {low} >= {high}")]
    BandsOverlap { low: f64, high: f64 },
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("time span must be positive: [{0}, {1}]")]
    BadSpan(f64, f64),
    #[error("frequencies must be positive and finite")]
    BadFrequency,
    #[error("subsample fraction must be in (0, 1], got {0}")]
    BadFraction(f64),
    #[error("noise standard deviation must be non-negative, got {0}")]
    BadSigma(f64),
    #[error("subsampling produced an empty series")]
    EmptyResult,
    #[error("vectors must have equal lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    TimeSeries(#[from] TimeSeriesError),
}

/// Sum-of-cosines test signal: a set of low frequencies, a set of high
/// frequencies (all in Hz, every low strictly below every high), sampled
/// evenly on `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSpectraSpec {
    pub freqs_low: Vec<f64>,
    pub freqs_high: Vec<f64>,
    pub t_start: f64,
    pub t_end: f64,
    pub n_points: usize,
}

impl LineSpectraSpec {
    /// The reproduction defaults: F_low = {0.31, 0.38, 0.48},
    /// F_high = {0.51, 0.64, 0.75}, 5000 points on [-100, 100].
    pub fn reproduction_defaults() -> Self {
        LineSpectraSpec {
            freqs_low: vec![0.31, 0.38, 0.48],
            freqs_high: vec![0.51, 0.64, 0.75],
            t_start: -100.0,
            t_end: 100.0,
            n_points: 5000,
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.n_points < 2 {
            return Err(SignalError::TooFewPoints(self.n_points));
        }
        if self.t_end <= self.t_start {
            return Err(SignalError::BadSpan(self.t_start, self.t_end));
        }
        for &f in self.freqs_low.iter().chain(&self.freqs_high) {
            if !(f > 0.0 && f.is_finite()) {
                return Err(SignalError::BadFrequency);
            }
        }
        let max_low = self
            .freqs_low
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let min_high = self
            .freqs_high
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if !self.freqs_low.is_empty() && !self.freqs_high.is_empty() && max_low >= min_high {
            return Err(SignalError::BandsOverlap {
                low: max_low,
                high: min_high,
            });
        }
        Ok(())
    }

    fn linspace(&self) -> Vec<f64> {
        let n = self.n_points;
        let step = (self.t_end - self.t_start) / (n - 1) as f64;
        (0..n).map(|i| self.t_start + i as f64 * step).collect()
    }

    fn eval(&self, t: f64, low_only: bool) -> f64 {
        let low: f64 = self
            .freqs_low
            .iter()
            .map(|&f| (2.0 * std::f64::consts::PI * f * t).cos())
            .sum();
        if low_only {
            low
        } else {
            low + self
                .freqs_high
                .iter()
                .map(|&f| (2.0 * std::f64::consts::PI * f * t).cos())
                .sum::<f64>()
        }
    }
}

/// Unit-amplitude cosines at every listed frequency, evenly sampled.
pub fn synth_line_spectra(spec: &LineSpectraSpec) -> Result<TimeSeries, SignalError> {
    spec.validate()?;
    let times = spec.linspace();
    let values = times.iter().map(|&t| spec.eval(t, false)).collect();
    Ok(TimeSeries::new(times, values)?)
}

/// Low-frequency part only: the ground truth the low-pass estimates are
/// scored against.
pub fn synth_low_component(spec: &LineSpectraSpec) -> Result<TimeSeries, SignalError> {
    spec.validate()?;
    let times = spec.linspace();
    let values = times.iter().map(|&t| spec.eval(t, true)).collect();
    Ok(TimeSeries::new(times, values)?)
}

/// How to thin a series down to a fraction of its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsampleMode {
    /// Every k-th sample, k = round(1/fraction).
    Even,
    /// Uniform draw without replacement, sorted; deterministic under seed.
    Random,
}

/// Keep a fraction of the samples, evenly or at random.
pub fn subsample(
    ts: &TimeSeries,
    fraction: f64,
    mode: SubsampleMode,
    seed: u64,
) -> Result<TimeSeries, SignalError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SignalError::BadFraction(fraction));
    }
    let n = ts.len();
    let indices: Vec<usize> = match mode {
        SubsampleMode::Even => {
            let k = (1.0 / fraction).round().max(1.0) as usize;
            (0..n).step_by(k).collect()
        }
        SubsampleMode::Random => {
            let keep = ((fraction * n as f64).floor() as usize).min(n);
            if keep == 0 {
                return Err(SignalError::EmptyResult);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample_indices(&mut rng, n, keep).into_vec();
            idx.sort_unstable();
            idx
        }
    };
    if indices.is_empty() {
        return Err(SignalError::EmptyResult);
    }
    let times = indices.iter().map(|&i| ts.times()[i]).collect();
    let values = indices.iter().map(|&i| ts.values()[i]).collect();
    Ok(TimeSeries::new(times, values)?)
}

/// Add i.i.d. zero-mean Gaussian noise to the values; deterministic under
/// seed. `sigma = 0` returns the input unchanged.
pub fn add_noise(ts: &TimeSeries, sigma: f64, seed: u64) -> Result<TimeSeries, SignalError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SignalError::BadSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(ts.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = ts
        .values()
        .iter()
        .map(|&v| {
            let eps: f64 = StandardNormal.sample(&mut rng);
            v + sigma * eps
        })
        .collect();
    Ok(TimeSeries::new(ts.times().to_vec(), values)?)
}

/// Mean squared error between two equal-length vectors.
pub fn mse(a: &[f64], b: &[f64]) -> Result<f64, SignalError> {
    if a.len() != b.len() {
        return Err(SignalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}
