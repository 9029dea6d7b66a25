use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{StimulusConfig, Surrogate};
use crate::error::{invalid, Error, Result};
use crate::nncore::{train, Activation, DataSource, Dense, Network, TrainConfig};
use crate::seed;
use crate::signal::{mean, variance, Waveform};

/// Tapped-delay network: `[x(n), ..., x(n-D)]` through one tanh layer to a
/// linear scalar. Inputs and outputs are standardised with the recorded
/// training statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct TdnnModel {
    pub delays: usize,
    pub net: Network,
    pub x_mean: f64,
    pub x_std: f64,
    pub y_mean: f64,
    pub y_std: f64,
    pub sample_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdnnConfig {
    pub delays: usize,
    pub hidden: usize,
    pub train: TrainConfig,
}

impl Default for TdnnConfig {
    fn default() -> Self {
        Self {
            delays: 22,
            hidden: 22,
            train: TrainConfig {
                learning_rate: 3e-3,
                final_learning_rate: Some(5e-4),
                batch_size: 256,
                max_steps: 30_000,
                ..TrainConfig::default()
            },
        }
    }
}

impl TdnnModel {
    pub fn new(delays: usize, net: Network, scaling: [f64; 4], sample_rate: f64) -> Result<Self> {
        let l = net.layers();
        let ok = l.len() == 2
            && l[0].inputs == delays + 1
            && l[0].activation == Activation::Tanh
            && l[1].outputs == 1
            && l[1].activation == Activation::Linear;
        if !ok {
            return Err(invalid("TDNN needs (delays+1) -> tanh -> linear scalar layers"));
        }
        let [x_mean, x_std, y_mean, y_std] = scaling;
        if !(x_std > 0.0 && y_std > 0.0) {
            return Err(invalid("TDNN scaling stds must be positive"));
        }
        Ok(Self { delays, net, x_mean, x_std, y_mean, y_std, sample_rate })
    }

    fn hidden(&self) -> usize {
        self.net.layers()[0].outputs
    }

    /// Standardised history window for output `n`.
    fn window(&self, x: &[f64], n: usize, w: &mut [f64]) {
        for (k, wk) in w.iter_mut().enumerate() {
            *wk = if n >= k { (x[n - k] - self.x_mean) / self.x_std } else { 0.0 };
        }
    }

    /// Standardised output and hidden activations.
    fn forward_raw(&self, w: &[f64], h: &mut [f64]) -> f64 {
        let l0 = &self.net.layers()[0];
        let l1 = &self.net.layers()[1];
        let d = l0.inputs;
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &l0.weights[j * d..(j + 1) * d];
            *hj = (l0.biases[j] + row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).tanh();
        }
        l1.biases[0] + l1.weights.iter().zip(h.iter()).map(|(a, b)| a * b).sum::<f64>()
    }

    /// d(standardised output)/d(standardised window).
    fn backward_raw(&self, h: &[f64], g: f64, out: &mut [f64]) {
        let l0 = &self.net.layers()[0];
        let l1 = &self.net.layers()[1];
        let d = l0.inputs;
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..h.len() {
            let dz = g * l1.weights[j] * (1.0 - h[j] * h[j]);
            if dz == 0.0 {
                continue;
            }
            let row = &l0.weights[j * d..(j + 1) * d];
            out.iter_mut().zip(row).for_each(|(o, w)| *o += dz * w);
        }
    }
}

impl Surrogate for TdnnModel {
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.delays + 1];
        let mut h = vec![0.0; self.hidden()];
        (0..x.len())
            .map(|n| {
                self.window(x, n, &mut w);
                self.y_mean + self.y_std * self.forward_raw(&w, &mut h)
            })
            .collect()
    }

    fn warmup(&self) -> usize {
        self.delays
    }

    fn history_len(&self) -> usize {
        self.delays + 1
    }

    fn window_gradient(&self, history: &[f64]) -> Vec<f64> {
        let w: Vec<f64> = history[..=self.delays].iter().map(|v| (v - self.x_mean) / self.x_std).collect();
        let mut h = vec![0.0; self.hidden()];
        self.forward_raw(&w, &mut h);
        let mut g = vec![0.0; self.delays + 1];
        self.backward_raw(&h, self.y_std / self.x_std, &mut g);
        g
    }

    fn backprop(&self, x: &[f64], grad_y: &[f64]) -> Vec<f64> {
        let mut gx = vec![0.0; x.len()];
        let mut w = vec![0.0; self.delays + 1];
        let mut h = vec![0.0; self.hidden()];
        let mut gw = vec![0.0; self.delays + 1];
        let k = self.y_std / self.x_std;
        for n in 0..x.len() {
            let g = grad_y[n];
            if g == 0.0 {
                continue;
            }
            self.window(x, n, &mut w);
            self.forward_raw(&w, &mut h);
            self.backward_raw(&h, g * k, &mut gw);
            for (lag, v) in gw.iter().enumerate() {
                if n >= lag {
                    gx[n - lag] += v;
                }
            }
        }
        gx
    }

    fn sample_rate(&self) -> f64 {
        self.sample_rate
    }
}

/// Random windows from a standardised input/output record.
struct SeriesWindows {
    x: Vec<f64>,
    y: Vec<f64>,
    delays: usize,
}

impl DataSource for SeriesWindows {
    fn batch(&mut self, size: usize, rng: &mut seed::Rng, inputs: &mut Vec<Vec<f64>>, targets: &mut Vec<Vec<f64>>) {
        inputs.clear();
        targets.clear();
        for _ in 0..size {
            let n = rng.random_range(self.delays..self.x.len());
            inputs.push((0..=self.delays).map(|k| self.x[n - k]).collect());
            targets.push(vec![self.y[n]]);
        }
    }
}

/// Fits a TDNN to `reference` driven by a white Gaussian stimulus. Returns
/// the model and the per-step training loss (standardised MSE).
pub fn fit_tdnn(
    reference: impl Fn(&Waveform) -> Result<Waveform>,
    stim: &StimulusConfig,
    cfg: &TdnnConfig,
) -> Result<(TdnnModel, Vec<f64>)> {
    if cfg.hidden == 0 {
        return Err(invalid("TDNN needs at least one hidden unit"));
    }
    if stim.samples <= cfg.delays + 1 {
        return Err(invalid("stimulus shorter than the delay line"));
    }
    let x = stim.generate()?;
    let y = reference(&x)?;
    if y.len() != x.len() {
        return Err(Error::Shape { expected: x.len(), got: y.len() });
    }
    let (x_mean, y_mean) = (mean(x.samples()), mean(y.samples()));
    let (x_std, y_std) = (variance(x.samples()).sqrt(), variance(y.samples()).sqrt());
    if !(x_std > 0.0 && y_std > 0.0) {
        return Err(invalid("stimulus or response is constant"));
    }
    let mut rng = seed::rng(seed::derive(cfg.train.seed, "tdnn-init"));
    let hidden = Dense::random(cfg.delays + 1, cfg.hidden, Activation::Tanh, &mut rng)?;
    // zero output layer: an untrained model predicts the output mean
    let out = Dense::new(cfg.hidden, 1, vec![0.0; cfg.hidden], vec![0.0], Activation::Linear)?;
    let mut net = Network::new(vec![hidden, out])?;
    let mut data = SeriesWindows {
        x: x.samples().iter().map(|v| (v - x_mean) / x_std).collect(),
        y: y.samples().iter().map(|v| (v - y_mean) / y_std).collect(),
        delays: cfg.delays,
    };
    let trace = train(&mut net, &mut data, &cfg.train)?;
    let model = TdnnModel::new(cfg.delays, net, [x_mean, x_std, y_mean, y_std], stim.sample_rate)?;
    Ok((model, trace))
}
