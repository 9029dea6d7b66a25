use std::sync::Arc;

use crate::channel::{fir_same, fir_same_adjoint, FiberParams, Link};
use crate::error::{invalid, Result};
use crate::signal::Waveform;
use crate::surrogate::Surrogate;

/// Map from per-channel-use drive deviations (mA from bias) to the
/// noise-free received waveform, `sps` samples per use.
pub trait Channel: Sync {
    fn sps(&self) -> usize;

    fn transmit(&self, levels: &[f64]) -> Result<Vec<f64>>;

    /// dL/d(levels) given dL/d(received). `None` when the channel is a black
    /// box.
    fn gradient(&self, _levels: &[f64], _grad_rx: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

fn repeat(levels: &[f64], sps: usize, offset: f64) -> Vec<f64> {
    levels.iter().flat_map(|&v| std::iter::repeat_n(offset + v, sps)).collect()
}

fn sum_per_use(g: &[f64], sps: usize) -> Vec<f64> {
    g.chunks(sps).map(|c| c.iter().sum()).collect()
}

/// Rectangular pulses with no distortion; AWGN is added by the caller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdentityLink {
    pub sps: usize,
}

impl Channel for IdentityLink {
    fn sps(&self) -> usize {
        self.sps
    }

    fn transmit(&self, levels: &[f64]) -> Result<Vec<f64>> {
        Ok(repeat(levels, self.sps, 0.0))
    }

    fn gradient(&self, _levels: &[f64], grad_rx: &[f64]) -> Option<Vec<f64>> {
        Some(sum_per_use(grad_rx, self.sps))
    }
}

/// Surrogate laser, Gaussian fiber filter and photodiode; photocurrent in mA.
#[derive(Clone)]
pub struct SurrogateLink {
    pub model: Arc<dyn Surrogate>,
    pub bias_ma: f64,
    pub sps: usize,
    /// Fiber impulse response at the model's sample rate (empty: none).
    pub fiber_taps: Vec<f64>,
    /// Fiber DC gain times photodiode responsivity.
    pub gain: f64,
}

impl SurrogateLink {
    pub fn new(
        model: Arc<dyn Surrogate>,
        bias_ma: f64,
        sps: usize,
        fiber: &FiberParams,
        responsivity: f64,
    ) -> Result<Self> {
        let v = fiber.violations();
        if !v.is_empty() {
            return Err(invalid(v.join("; ")));
        }
        if sps == 0 {
            return Err(invalid("sps must be at least 1"));
        }
        let taps = if fiber.f3db_hz.is_finite() { fiber.taps(model.sample_rate())? } else { Vec::new() };
        Ok(Self { model, bias_ma, sps, fiber_taps: taps, gain: fiber.gain() * responsivity })
    }
}

impl Channel for SurrogateLink {
    fn sps(&self) -> usize {
        self.sps
    }

    fn transmit(&self, levels: &[f64]) -> Result<Vec<f64>> {
        let y = self.model.eval(&repeat(levels, self.sps, self.bias_ma));
        let y = if self.fiber_taps.is_empty() { y } else { fir_same(&y, &self.fiber_taps) };
        Ok(y.into_iter().map(|v| v * self.gain).collect())
    }

    fn gradient(&self, levels: &[f64], grad_rx: &[f64]) -> Option<Vec<f64>> {
        let g: Vec<f64> = grad_rx.iter().map(|v| v * self.gain).collect();
        let g = if self.fiber_taps.is_empty() { g } else { fir_same_adjoint(&g, &self.fiber_taps) };
        let gx = self.model.backprop(&repeat(levels, self.sps, self.bias_ma), &g);
        Some(sum_per_use(&gx, self.sps))
    }
}

/// The full rate-equation link; not differentiable.
#[derive(Clone, Debug)]
pub struct PhysicalLink {
    pub link: Link,
    pub bias_ma: f64,
    pub sps: usize,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Channel for PhysicalLink {
    fn sps(&self) -> usize {
        self.sps
    }

    fn transmit(&self, levels: &[f64]) -> Result<Vec<f64>> {
        let drive = Waveform::new(self.sample_rate, repeat(levels, self.sps, self.bias_ma))?;
        Ok(self.link.simulate(&drive, self.seed)?.into_samples())
    }
}
