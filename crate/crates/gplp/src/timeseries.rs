//! Time series container and the `time,value` CSV interchange format.

use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("times and values have different lengths ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("time series must contain at least one sample")]
    Empty,
    #[error("times must be strictly increasing (violation at index {0})")]
    NotIncreasing(usize),
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sampled signal: strictly increasing timestamps in seconds and one value
/// per timestamp. Possibly uneven, possibly noisy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, TimeSeriesError> {
        if times.len() != values.len() {
            return Err(TimeSeriesError::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        if times.is_empty() {
            return Err(TimeSeriesError::Empty);
        }
        for (i, (&t, &v)) in times.iter().zip(&values).enumerate() {
            if !t.is_finite() || !v.is_finite() {
                return Err(TimeSeriesError::NonFinite(i));
            }
            if i > 0 && t <= times[i - 1] {
                return Err(TimeSeriesError::NotIncreasing(i));
            }
        }
        Ok(TimeSeries { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty series
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean_value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn time_span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    /// Mean gap between consecutive samples; zero for a single sample.
    pub fn mean_gap(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        let (t0, t1) = self.time_span();
        (t1 - t0) / (self.times.len() - 1) as f64
    }

    /// Sampling interval if the grid is uniform to `tol` relative gap
    /// deviation, `None` otherwise.
    pub fn uniform_step(&self, tol: f64) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let step = self.mean_gap();
        for w in self.times.windows(2) {
            if ((w[1] - w[0]) - step).abs() > tol * step.abs() {
                return None;
            }
        }
        Some(step)
    }

    /// Write as `time,value` CSV. Floats are printed in shortest
    /// round-trip form, so read-back reproduces the exact bit patterns.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), TimeSeriesError> {
        writeln!(w, "time,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<(), TimeSeriesError> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Parse `time,value` CSV. The header row is required; parse failures
    /// name the offending line (1-based, counting the header).
    pub fn read_csv<R: Read>(r: R) -> Result<Self, TimeSeriesError> {
        let reader = BufReader::new(r);
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut lines = reader.lines().enumerate();
        match lines.next() {
            Some((_, Ok(h))) if h.trim() == "time,value" => {}
            Some((_, Ok(h))) => {
                return Err(TimeSeriesError::Parse {
                    line: 1,
                    message: format!("expected header 'time,value', got '{h}'"),
                })
            }
            Some((_, Err(e))) => return Err(e.into()),
            None => {
                return Err(TimeSeriesError::Parse {
                    line: 1,
                    message: "empty file".into(),
                })
            }
        }
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let (t, v) = match (parts.next(), parts.next(), parts.next()) {
                (Some(t), Some(v), None) => (t, v),
                _ => {
                    return Err(TimeSeriesError::Parse {
                        line: lineno,
                        message: format!("expected two comma-separated fields, got '{line}'"),
                    })
                }
            };
            let t: f64 = t.trim().parse().map_err(|e| TimeSeriesError::Parse {
                line: lineno,
                message: format!("bad time '{t}': {e}"),
            })?;
            let v: f64 = v.trim().parse().map_err(|e| TimeSeriesError::Parse {
                line: lineno,
                message: format!("bad value '{v}': {e}"),
            })?;
            times.push(t);
            values.push(v);
        }
        TimeSeries::new(times, values)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self, TimeSeriesError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}
