//! Zero-phase Butterworth low-pass filtering, the classical baseline the GP
//! filter is compared against.
//!
//! Design: analog prototype poles, frequency prewarping, bilinear transform,
//! factored into a cascade of second-order sections. An order-10 direct-form
//! polynomial is numerically fragile; the section cascade is not.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("filter order must be at least 1, got {0}")]
    BadOrder(usize),
    #[error("cutoff must satisfy 0 < cutoff < sample_rate / 2, got {cutoff} at fs {fs}")]
    BadCutoff { cutoff: f64, fs: f64 },
    #[error("input of {len} samples is too short for edge padding of {pad}")]
    TooShort { len: usize, pad: usize },
}

/// Low-pass Butterworth design request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ButterworthSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

impl ButterworthSpec {
    pub fn new(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self, FilterError> {
        if order == 0 {
            return Err(FilterError::BadOrder(order));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0 && cutoff_hz.is_finite()) {
            return Err(FilterError::BadCutoff {
                cutoff: cutoff_hz,
                fs: sample_rate_hz,
            });
        }
        Ok(ButterworthSpec {
            order,
            cutoff_hz,
            sample_rate_hz,
        })
    }
}

/// One biquad section `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sos {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Sos {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Both poles strictly inside the unit circle (Jury conditions).
    pub fn is_stable(&self) -> bool {
        let (a1, a2) = (self.a[0], self.a[1]);
        a2 < 1.0 && a1.abs() < 1.0 + a2
    }
}

/// Designed filter: a cascade of second-order sections with unit DC gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosCascade {
    pub spec: ButterworthSpec,
    pub sections: Vec<Sos>,
}

impl SosCascade {
    /// Complex frequency response at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / self.spec.sample_rate_hz;
        let z1 = Complex64::new(w.cos(), -w.sin()); // z^-1
        let z2 = z1 * z1;
        let mut h = Complex64::new(1.0, 0.0);
        for s in &self.sections {
            let num = s.b[0] + s.b[1] * z1 + s.b[2] * z2;
            let den = 1.0 + s.a[0] * z1 + s.a[1] * z2;
            h *= num / den;
        }
        h
    }

    /// Magnitude response in dB.
    pub fn magnitude_db(&self, freq_hz: f64) -> f64 {
        20.0 * self.response(freq_hz).norm().log10()
    }
}

/// Digital Butterworth low-pass as a second-order-section cascade.
///
/// The analog edge is prewarped so the half-power point lands exactly on
/// `cutoff_hz` after the bilinear transform; each section is normalized to
/// unit DC gain.
pub fn design_butterworth(spec: &ButterworthSpec) -> Result<SosCascade, FilterError> {
    let spec = ButterworthSpec::new(spec.order, spec.cutoff_hz, spec.sample_rate_hz)?;
    let n = spec.order;
    let fs = spec.sample_rate_hz;
    // Prewarped analog cutoff (rad/s).
    let warped = 2.0 * fs * (std::f64::consts::PI * spec.cutoff_hz / fs).tan();
    let k = 2.0 * fs;

    // Analog prototype poles on the unit circle, scaled to the warped edge,
    // then mapped through the bilinear transform z = (k + s) / (k - s).
    let mut digital_poles = Vec::with_capacity(n);
    for m in 0..n {
        let theta = std::f64::consts::PI * (2.0 * m as f64 + n as f64 + 1.0) / (2.0 * n as f64);
        let s = warped * Complex64::new(theta.cos(), theta.sin());
        digital_poles.push((Complex64::new(k, 0.0) + s) / (Complex64::new(k, 0.0) - s));
    }
    // Pair each pole with its conjugate: sort by imaginary magnitude so
    // conjugate partners are adjacent, real poles first.
    digital_poles.sort_by(|p, q| {
        p.im.abs()
            .total_cmp(&q.im.abs())
            .then(p.re.total_cmp(&q.re))
    });

    let mut sections = Vec::new();
    let mut idx = 0;
    while idx < n {
        if digital_poles[idx].im.abs() < 1e-12 {
            // Real pole: first-order section, zero at z = -1.
            let p = digital_poles[idx].re;
            let mut s = Sos {
                b: [1.0, 1.0, 0.0],
                a: [-p, 0.0],
            };
            let g = s.dc_gain();
            s.b = [1.0 / g, 1.0 / g, 0.0];
            sections.push(s);
            idx += 1;
        } else {
            // Conjugate pair: biquad with a double zero at z = -1.
            let p = digital_poles[idx];
            let a1 = -2.0 * p.re;
            let a2 = p.norm_sqr();
            let mut s = Sos {
                b: [1.0, 2.0, 1.0],
                a: [a1, a2],
            };
            let g = s.dc_gain();
            s.b = [1.0 / g, 2.0 / g, 1.0 / g];
            sections.push(s);
            idx += 2;
        }
    }
    Ok(SosCascade { spec, sections })
}

/// Steady-state filter state for a unit-level input, so a constant signal
/// passes through a section with no start-up transient (direct form II
/// transposed).
fn section_zi(s: &Sos) -> [f64; 2] {
    // With x = 1 and steady output y = dc_gain:
    //   w2 = b2 - a2 y,  w1 = b1 - a1 y + w2.
    let y = s.dc_gain();
    let w2 = s.b[2] - s.a[1] * y;
    let w1 = s.b[1] - s.a[0] * y + w2;
    [w1, w2]
}

/// Single forward pass of the cascade over `x`, states initialized to the
/// steady state for `x[0]`.
pub fn sosfilt(sections: &[Sos], x: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    // Unit DC gain per section keeps the priming level equal to x[0] at
    // every stage of the cascade.
    let level = if out.is_empty() { 0.0 } else { out[0] };
    for s in sections {
        let zi = section_zi(s);
        let mut w1 = zi[0] * level;
        let mut w2 = zi[1] * level;
        for v in out.iter_mut() {
            let x0 = *v;
            let y = s.b[0] * x0 + w1;
            w1 = s.b[1] * x0 - s.a[0] * y + w2;
            w2 = s.b[2] * x0 - s.a[1] * y;
            *v = y;
        }
    }
    out
}

/// Zero-phase filtering: forward pass, reverse, second pass, reverse again.
///
/// Edge transients are mitigated by odd-reflection padding of length
/// `3 * (order + 1)` plus steady-state initial conditions; the output has
/// exactly the input length and no phase distortion.
pub fn filtfilt(cascade: &SosCascade, x: &[f64]) -> Result<Vec<f64>, FilterError> {
    let pad = 3 * (cascade.spec.order + 1);
    if x.len() <= pad {
        return Err(FilterError::TooShort { len: x.len(), pad });
    }
    // Odd reflection around the end points.
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (1..=pad).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in (n - pad - 1..n - 1).rev() {
        ext.push(2.0 * x[n - 1] - x[i]);
    }

    let mut y = sosfilt(&cascade.sections, &ext);
    y.reverse();
    let mut y = sosfilt(&cascade.sections, &y);
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}
