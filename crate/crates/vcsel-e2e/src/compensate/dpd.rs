use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nncore::{
    train, Activation, DataSource, Dense, Gradients, Loss, Network, Optimizer, OptimizerKind, TrainConfig,
};
use crate::seed;
use crate::signal::{mean, variance, Waveform};
use crate::surrogate::Surrogate;

/// Black-box transmitter, drive samples in and optical samples out.
pub type Transmitter<'a> = dyn Fn(&[f64]) -> Result<Vec<f64>> + Sync + 'a;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpdConfig {
    /// The predistorter sees `2 * half_width + 1` drive samples.
    pub half_width: usize,
    pub hidden: usize,
    /// Largest latency considered when aligning output to input.
    pub max_latency: usize,
    /// Samples per training segment for direct learning.
    pub segment: usize,
    pub train: TrainConfig,
}

impl Default for DpdConfig {
    fn default() -> Self {
        Self {
            half_width: 8,
            hidden: 16,
            max_latency: 40,
            segment: 256,
            train: TrainConfig {
                optimizer: OptimizerKind::Adam,
                learning_rate: 3e-3,
                final_learning_rate: Some(3e-4),
                batch_size: 256,
                max_steps: 8000,
                seed: 0,
                loss: Loss::Mse,
            },
        }
    }
}

impl DpdConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.train.violations();
        if self.hidden == 0 {
            v.push("hidden must be at least 1".into());
        }
        if self.segment == 0 {
            v.push("segment must be at least 1".into());
        }
        v
    }

    fn check(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(invalid(v.join("; ")))
        }
    }
}

/// Desired end-to-end response: `y(n) = y_mean + gain * (x(n - latency) - x_mean)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpdTarget {
    pub latency: usize,
    pub gain: f64,
    pub x_mean: f64,
    pub y_mean: f64,
}

impl DpdTarget {
    /// Latency from the cross-correlation peak and gain from a least-squares
    /// fit at that latency.
    pub fn fit(x: &[f64], y: &[f64], max_latency: usize) -> Result<Self> {
        if x.len() != y.len() || x.len() <= max_latency + 1 {
            return Err(invalid("input and output must have equal length beyond max_latency"));
        }
        let (xm, ym) = (mean(x), mean(y));
        let cov = |d: usize| -> f64 { x[..x.len() - d].iter().zip(&y[d..]).map(|(a, b)| (a - xm) * (b - ym)).sum() };
        let latency = (0..=max_latency).max_by(|&a, &b| cov(a).total_cmp(&cov(b))).expect("non-empty");
        let var: f64 = x[..x.len() - latency].iter().map(|a| (a - xm).powi(2)).sum();
        if !(var > 0.0) {
            return Err(invalid("input has no variance"));
        }
        Ok(Self { latency, gain: cov(latency) / var, x_mean: xm, y_mean: ym })
    }

    pub fn desired(&self, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|n| match n.checked_sub(self.latency) {
                Some(m) => self.y_mean + self.gain * (x[m] - self.x_mean),
                None => self.y_mean,
            })
            .collect()
    }
}

/// Residual power of `y` against the target response, relative to the
/// target's AC power. The first `skip` samples are ignored.
pub fn residual(y: &[f64], x: &[f64], target: &DpdTarget, skip: usize) -> f64 {
    let d = target.desired(x);
    let e: Vec<f64> = y.iter().zip(&d).skip(skip).map(|(a, b)| a - b).collect();
    let p = e.iter().map(|v| v * v).sum::<f64>() / e.len().max(1) as f64;
    p / variance(&d[skip.min(d.len())..])
}

/// Windowed network from drive samples to predistorted drive.
#[derive(Clone, Debug, PartialEq)]
pub struct Predistorter {
    pub net: Network,
    pub half_width: usize,
    /// Drive normalisation; also the pad value outside the record.
    pub x_mean: f64,
    pub x_scale: f64,
}

impl Predistorter {
    /// Passes the drive through unchanged.
    pub fn identity(half_width: usize, x_mean: f64, x_scale: f64) -> Result<Self> {
        let width = 2 * half_width + 1;
        let mut w = vec![0.0; width];
        w[half_width] = 1.0;
        let net = Network::new(vec![Dense::new(width, 1, w, vec![0.0], Activation::Linear)?])?;
        Ok(Self { net, half_width, x_mean, x_scale })
    }

    pub fn width(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Normalised window of `x` centred on `m`.
    fn window(&self, x: &[f64], m: usize, out: &mut Vec<f64>) {
        out.clear();
        let h = self.half_width as isize;
        for j in -h..=h {
            let i = m as isize + j;
            let v = if i >= 0 && (i as usize) < x.len() { x[i as usize] } else { self.x_mean };
            out.push((v - self.x_mean) / self.x_scale);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.width());
        (0..x.len())
            .map(|m| {
                self.window(x, m, &mut w);
                self.x_mean + self.x_scale * self.net.forward(&w).expect("window width")[0]
            })
            .collect()
    }
}

pub fn apply_dpd(p: &Predistorter, x: &Waveform) -> Result<Waveform> {
    x.with_samples(p.apply(x.samples()))
}

fn new_net(cfg: &DpdConfig) -> Result<Network> {
    // zero output layer: training starts from a constant predistorter
    let mut net = Network::random(
        &[2 * cfg.half_width + 1, cfg.hidden, 1],
        &[Activation::Tanh, Activation::Linear],
        seed::derive(cfg.train.seed, "dpd-init"),
    )?;
    net.layers_mut()[1].weights.iter_mut().for_each(|w| *w = 0.0);
    Ok(net)
}

/// Windows of the gain-normalised output around `n + latency` paired with
/// the drive at `n`.
struct PostInverse<'a> {
    y_tilde: &'a [f64],
    x: &'a [f64],
    p: &'a Predistorter,
    latency: usize,
}

impl DataSource for PostInverse<'_> {
    fn batch(&mut self, size: usize, rng: &mut seed::Rng, inputs: &mut Vec<Vec<f64>>, targets: &mut Vec<Vec<f64>>) {
        inputs.clear();
        targets.clear();
        let n_max = self.x.len() - self.latency;
        for _ in 0..size {
            let n = rng.random_range(0..n_max);
            let mut w = Vec::with_capacity(self.p.width());
            self.p.window(self.y_tilde, n + self.latency, &mut w);
            inputs.push(w);
            targets.push(vec![(self.x[n] - self.p.x_mean) / self.p.x_scale]);
        }
    }
}

/// Indirect learning: fits a post-inverse of `tx` and copies it in front.
pub fn train_dpd_ila(tx: &Transmitter<'_>, x: &[f64], cfg: &DpdConfig) -> Result<(Predistorter, DpdTarget, Vec<f64>)> {
    cfg.check()?;
    let y = tx(x)?;
    let target = DpdTarget::fit(x, &y, cfg.max_latency)?;
    let y_tilde: Vec<f64> = y.iter().map(|v| target.x_mean + (v - target.y_mean) / target.gain).collect();
    let mut p = Predistorter {
        net: new_net(cfg)?,
        half_width: cfg.half_width,
        x_mean: target.x_mean,
        x_scale: variance(x).sqrt(),
    };
    let mut net = p.net.clone();
    let trace = {
        let mut data = PostInverse { y_tilde: &y_tilde, x, p: &p, latency: target.latency };
        let tc = TrainConfig { loss: Loss::Mse, ..cfg.train.clone() };
        train(&mut net, &mut data, &tc)?
    };
    p.net = net;
    Ok((p, target, trace))
}

/// Direct learning: trains the predistorter by back-propagating the output
/// error through a frozen differentiable model of the transmitter. Starts
/// from `init` when given.
pub fn train_dpd_dla(
    model: &dyn Surrogate,
    x: &[f64],
    cfg: &DpdConfig,
    init: Option<&Predistorter>,
) -> Result<(Predistorter, DpdTarget, Vec<f64>)> {
    cfg.check()?;
    let target = DpdTarget::fit(x, &model.eval(x), cfg.max_latency)?;
    let mut p = match init {
        Some(p) => p.clone(),
        None => Predistorter {
            net: new_net(cfg)?,
            half_width: cfg.half_width,
            x_mean: target.x_mean,
            x_scale: variance(x).sqrt(),
        },
    };
    let warm = model.warmup() + cfg.half_width;
    let seg = cfg.segment;
    let lead = warm + target.latency;
    if x.len() < lead + seg + cfg.half_width + 1 {
        return Err(invalid("drive record is shorter than one training segment"));
    }
    let segments = (cfg.train.batch_size / seg).max(1);
    let y_scale = (target.gain * p.x_scale).abs();
    let mut rng = seed::rng(cfg.train.seed);
    let mut opt = Optimizer::new(cfg.train.optimizer, cfg.train.learning_rate, p.net.param_count());
    let mut trace = Vec::with_capacity(cfg.train.max_steps);
    let mut w = Vec::with_capacity(p.width());
    for step in 0..cfg.train.max_steps {
        let mut g = Gradients::zeros(&p.net);
        let mut loss = 0.0;
        for _ in 0..segments {
            // loss samples [s, s + seg); predistorted drive from s - warm
            let s = rng.random_range(lead..x.len() - seg - cfg.half_width);
            let base = s - warm;
            let mut traces = Vec::with_capacity(warm + seg);
            let mut xt = Vec::with_capacity(warm + seg);
            for m in base..s + seg {
                p.window(x, m, &mut w);
                let t = p.net.forward_trace(&w)?;
                xt.push(p.x_mean + p.x_scale * t.output()[0]);
                traces.push(t);
            }
            let y = model.eval(&xt);
            let mut gy = vec![0.0; xt.len()];
            for n in s..s + seg {
                let i = n - base;
                let d = target.y_mean + target.gain * (x[n - target.latency] - target.x_mean);
                let e = (y[i] - d) / y_scale;
                loss += e * e;
                gy[i] = 2.0 * e / y_scale;
            }
            let gx = model.backprop(&xt, &gy);
            for (t, gxi) in traces.iter().zip(&gx) {
                if *gxi != 0.0 {
                    p.net.backward(t, &[gxi * p.x_scale], Some(&mut g));
                }
            }
        }
        let count = (segments * seg) as f64;
        loss /= count;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        g.scale(1.0 / count);
        opt.lr = cfg.train.lr_at(step);
        opt.step_network(&mut p.net, &g);
        trace.push(loss);
    }
    Ok((p, target, trace))
}
