//! Differentiable stand-ins for the laser: a second-order Volterra model
//! identified by Lee-Schetzen cross-correlation and a tapped-delay network.

mod tdnn;
mod volterra;

use serde::Serialize;

pub use tdnn::{fit_tdnn, TdnnConfig, TdnnModel};
pub use volterra::{fit_volterra, VolterraModel};

use crate::error::Result;
use crate::signal::{eye_diagram, nrmse, r_squared, white_gaussian_stimulus, EyeDiagram, Waveform};

/// A causal finite-memory map from drive current to optical power with exact
/// input gradients.
pub trait Surrogate: Send + Sync {
    /// Output for every input sample. Samples before the start of the record
    /// are taken to sit at the model's input offset.
    fn eval(&self, x: &[f64]) -> Vec<f64>;

    /// Number of leading outputs that depend on padded history.
    fn warmup(&self) -> usize;

    /// d y(n) / d x(n - tau) for tau = 0..len, with `history[tau] = x(n - tau)`.
    fn window_gradient(&self, history: &[f64]) -> Vec<f64>;

    /// Length of `history` expected by [`Surrogate::window_gradient`].
    fn history_len(&self) -> usize;

    /// Vector-Jacobian product over a whole record: dL/dx from dL/dy.
    fn backprop(&self, x: &[f64], grad_y: &[f64]) -> Vec<f64>;

    fn sample_rate(&self) -> f64;

    fn eval_waveform(&self, x: &Waveform) -> Result<Waveform> {
        x.with_samples(self.eval(x.samples()))
    }
}

/// White Gaussian identification stimulus.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StimulusConfig {
    pub std_ma: f64,
    pub bias_ma: f64,
    pub samples: usize,
    pub sample_rate: f64,
    pub seed: u64,
}

impl StimulusConfig {
    pub fn generate(&self) -> Result<Waveform> {
        white_gaussian_stimulus(self.std_ma, self.bias_ma, self.samples, self.sample_rate, self.seed)
    }

    pub fn describe(&self) -> String {
        format!(
            "white Gaussian, {} mA std at {} mA bias, {} samples at {:.1} GS/s, seed {}",
            self.std_ma,
            self.bias_ma,
            self.samples,
            self.sample_rate * 1e-9,
            self.seed
        )
    }
}

/// Fidelity of a model against the reference on a test drive.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub nrmse: f64,
    pub r_squared: f64,
    pub stimulus: String,
    pub test: String,
}

/// Model and reference outputs on the test drive with their eyes.
#[derive(Clone, Debug)]
pub struct Validation {
    pub report: FitReport,
    pub model_output: Waveform,
    pub reference_output: Waveform,
    pub model_eye: EyeDiagram,
    pub reference_eye: EyeDiagram,
}

/// Compares `model` with `reference` on `drive`, excluding the first
/// `warmup` samples.
pub fn validate(
    model: impl Fn(&Waveform) -> Result<Waveform>,
    warmup: usize,
    reference: impl Fn(&Waveform) -> Result<Waveform>,
    drive: &Waveform,
    sps: usize,
    stimulus: &str,
    test: &str,
) -> Result<Validation> {
    let ym = model(drive)?;
    let yr = reference(drive)?;
    let skip = warmup.min(drive.len());
    let report = FitReport {
        nrmse: nrmse(&ym.samples()[skip..], &yr.samples()[skip..])?,
        r_squared: r_squared(&ym.samples()[skip..], &yr.samples()[skip..])?,
        stimulus: stimulus.into(),
        test: test.into(),
    };
    // eyes start on a symbol boundary after the warm-up
    let start = skip.div_ceil(sps) * sps;
    let cut = |w: &Waveform| w.with_samples(w.samples()[start..].to_vec());
    Ok(Validation {
        model_eye: eye_diagram(&cut(&ym)?, sps, 2)?,
        reference_eye: eye_diagram(&cut(&yr)?, sps, 2)?,
        report,
        model_output: ym,
        reference_output: yr,
    })
}

/// Gradient of a scalar output with respect to its input window.
pub fn surrogate_gradient(model: &dyn Surrogate, history: &[f64]) -> Vec<f64> {
    model.window_gradient(history)
}
