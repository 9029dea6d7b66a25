//! Waveforms, PAM modulation, stimuli, eye diagrams and quality metrics.

mod eye;
mod metrics;
mod pam;

pub use eye::{eye_diagram, rail_levels, vertical_opening, EyeDiagram};
pub use metrics::{count_errors, nrmse, q_function, r_squared, wilson_interval, ErrorRateCurve};
pub use pam::{
    bits_to_symbols, demodulate, gray_labels, modulate, random_symbols, symbols_to_bits, symbols_to_drive,
    white_gaussian_stimulus, PamConfig,
};

use crate::error::{invalid, Error, Result};

/// Uniformly sampled real signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    sample_rate: f64,
    samples: Vec<f64>,
}

impl Waveform {
    pub fn new(sample_rate: f64, samples: Vec<f64>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(invalid(format!("sample rate must be positive, got {sample_rate}")));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("waveform samples"));
        }
        Ok(Self { sample_rate, samples })
    }

    pub fn constant(sample_rate: f64, value: f64, n: usize) -> Result<Self> {
        Self::new(sample_rate, vec![value; n])
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// New waveform at the same sample rate.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(self.sample_rate, samples)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        self.with_samples(self.samples.iter().map(|&v| f(v)).collect())
    }

    pub fn mean(&self) -> f64 {
        mean(&self.samples)
    }

    pub fn variance(&self) -> f64 {
        variance(&self.samples)
    }

    /// Two-column CSV body: `time_s,value`.
    pub fn csv_rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let dt = self.dt();
        self.samples.iter().enumerate().map(move |(i, &v)| vec![i as f64 * dt, v])
    }
}

impl AsRef<[f64]> for Waveform {
    fn as_ref(&self) -> &[f64] {
        &self.samples
    }
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}
