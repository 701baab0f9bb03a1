//! One-sided FFT spectra and band-energy ratios for uniformly sampled
//! series.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::TimeSeries;

/// Relative gap deviation below which a grid counts as uniform.
pub const UNIFORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error(
        "times are not uniformly spaced (relative gap deviation above {UNIFORM_TOL:e}); \
         evaluate the posterior mean on a uniform query grid first"
    )]
    NonUniform,
    #[error("need at least two samples, got {0}")]
    TooShort(usize),
    #[error("cutoff must be positive and finite, got {0}")]
    BadCutoff(f64),
}

/// One-sided spectrum of a uniformly sampled series.
///
/// `magnitude[k]` is the amplitude of a cosine at `freqs[k]` that would
/// produce the same bin (a unit cosine on a bin-centered frequency reads
/// 1.0). `power[k]` is a one-sided spectral density in signal^2 per Hz:
/// `sum(power) * df` equals the mean square of the signal (Parseval).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub freqs: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub power: Vec<f64>,
}

impl SpectrumEstimate {
    pub fn freq_resolution(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Write as `freq_hz,magnitude,power` CSV.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_hz,magnitude,power")?;
        for i in 0..self.freqs.len() {
            writeln!(
                w,
                "{},{},{}",
                self.freqs[i], self.magnitude[i], self.power[i]
            )?;
        }
        Ok(())
    }
}

/// Window applied before the transform. The experiments use long records
/// with many signal cycles, so no window is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    None,
    Hann,
}

/// One-sided FFT spectrum with the frequency axis in Hz.
///
/// Requires a uniform grid; uneven series must first be turned into a dense
/// uniform estimate (e.g. a posterior mean), which is exactly what the
/// error message says.
pub fn fft_spectrum(ts: &TimeSeries) -> Result<SpectrumEstimate, SpectrumError> {
    fft_spectrum_windowed(ts, Window::None)
}

pub fn fft_spectrum_windowed(
    ts: &TimeSeries,
    window: Window,
) -> Result<SpectrumEstimate, SpectrumError> {
    let n = ts.len();
    if n < 2 {
        return Err(SpectrumError::TooShort(n));
    }
    let dt = ts
        .uniform_step(UNIFORM_TOL)
        .ok_or(SpectrumError::NonUniform)?;

    let mut buf: Vec<Complex64> = match window {
        Window::None => ts
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect(),
        Window::Hann => {
            let scale = n as f64 - 1.0;
            ts.values()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / scale).cos();
                    Complex64::new(v * w, 0.0)
                })
                .collect()
        }
    };
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let n_one_sided = n / 2 + 1;
    let df = 1.0 / (n as f64 * dt);
    let mut freqs = Vec::with_capacity(n_one_sided);
    let mut magnitude = Vec::with_capacity(n_one_sided);
    let mut power = Vec::with_capacity(n_one_sided);
    for (k, x) in buf.iter().take(n_one_sided).enumerate() {
        // Bins shared with the negative axis count twice.
        let two_sided = k == 0 || (n.is_multiple_of(2) && k == n / 2);
        let fold = if two_sided { 1.0 } else { 2.0 };
        let amp2 = x.norm_sqr();
        freqs.push(k as f64 * df);
        magnitude.push(fold * amp2.sqrt() / n as f64);
        power.push(fold * amp2 / (n as f64 * n as f64 * df));
    }
    Ok(SpectrumEstimate {
        freqs,
        magnitude,
        power,
    })
}

/// Band-energy ratio together with the policy it was computed under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEnergy {
    pub ratio: f64,
    pub cutoff_hz: f64,
    /// The series mean is removed before the transform; the (then empty)
    /// DC bin is counted in the low band.
    pub mean_removed: bool,
    /// Set when total energy after mean removal is zero (constant input);
    /// the ratio is then defined to be 1.0.
    pub degenerate_constant: bool,
}

/// Fraction of spectral power at frequencies `<= cutoff`, computed after
/// removing the series mean. A constant series has zero remaining energy
/// and returns ratio 1.0 flagged as degenerate.
pub fn band_energy_ratio(ts: &TimeSeries, cutoff: f64) -> Result<BandEnergy, SpectrumError> {
    if !(cutoff > 0.0 && cutoff.is_finite()) {
        return Err(SpectrumError::BadCutoff(cutoff));
    }
    let mean = ts.mean_value();
    let centered = TimeSeries::new(
        ts.times().to_vec(),
        ts.values().iter().map(|&v| v - mean).collect(),
    )
    .expect("centering preserves validity");
    let spec = fft_spectrum(&centered)?;
    let total = spec.total_power();
    if total <= 0.0 || !total.is_finite() {
        return Ok(BandEnergy {
            ratio: 1.0,
            cutoff_hz: cutoff,
            mean_removed: true,
            degenerate_constant: true,
        });
    }
    let low: f64 = spec
        .freqs
        .iter()
        .zip(&spec.power)
        .filter(|(&f, _)| f <= cutoff)
        .map(|(_, &p)| p)
        .sum();
    Ok(BandEnergy {
        ratio: low / total,
        cutoff_hz: cutoff,
        mean_removed: true,
        degenerate_constant: false,
    })
}
