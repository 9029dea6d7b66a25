use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::network::{gradients, Gradients, Loss, Network};
use crate::error::{invalid, Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Learning rate used for the last third of training, if set.
    pub final_learning_rate: Option<f64>,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            final_learning_rate: None,
            batch_size: 64,
            max_steps: 1000,
            seed: 0,
            loss: Loss::Mse,
        }
    }
}

impl TrainConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            v.push(format!("learning_rate must be non-negative (got {})", self.learning_rate));
        }
        if let Some(lr) = self.final_learning_rate {
            if !(lr >= 0.0 && lr.is_finite()) {
                v.push(format!("final_learning_rate must be non-negative (got {lr})"));
            }
        }
        if self.batch_size == 0 {
            v.push("batch_size must be at least 1".into());
        }
        v
    }

    /// Learning rate in effect at `step`.
    pub fn lr_at(&self, step: usize) -> f64 {
        match self.final_learning_rate {
            Some(lr) if 3 * step >= 2 * self.max_steps => lr,
            _ => self.learning_rate,
        }
    }
}

/// Adam or plain SGD over a flat parameter vector.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        Self { kind, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn adam(lr: f64, n_params: usize) -> Self {
        Self::new(OptimizerKind::Adam, lr, n_params)
    }

    /// One descent step on `params` given `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        match self.kind {
            OptimizerKind::Sgd => params.iter_mut().zip(grad).for_each(|(p, g)| *p -= self.lr * g),
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - self.beta1.powi(self.t);
                let c2 = 1.0 - self.beta2.powi(self.t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
                }
            }
        }
    }

    /// Step applied to a network; masked weights stay at zero.
    pub fn step_network(&mut self, net: &mut Network, grads: &Gradients) {
        let mut p = net.params();
        self.step(&mut p, &grads.flatten());
        net.set_params(&p).expect("gradient layout matches the network");
    }
}

/// Supplier of training batches.
pub trait DataSource {
    /// Fills `inputs`/`targets` with `size` fresh pairs.
    fn batch(&mut self, size: usize, rng: &mut seed::Rng, inputs: &mut Vec<Vec<f64>>, targets: &mut Vec<Vec<f64>>);
}

/// Fixed in-memory dataset sampled uniformly with replacement.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(invalid("dataset needs equally many non-zero inputs and targets"));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

impl DataSource for Dataset {
    fn batch(&mut self, size: usize, rng: &mut seed::Rng, inputs: &mut Vec<Vec<f64>>, targets: &mut Vec<Vec<f64>>) {
        inputs.clear();
        targets.clear();
        for _ in 0..size {
            let i = rng.random_range(0..self.inputs.len());
            inputs.push(self.inputs[i].clone());
            targets.push(self.targets[i].clone());
        }
    }
}

pub fn train(net: &mut Network, data: &mut dyn DataSource, cfg: &TrainConfig) -> Result<Vec<f64>> {
    train_with(net, data, cfg, |_, _| {})
}

/// Mini-batch training. `after_step(step, net)` runs after every update and
/// may modify the network (pruning uses this). Returns the per-step batch
/// loss.
pub fn train_with(
    net: &mut Network,
    data: &mut dyn DataSource,
    cfg: &TrainConfig,
    mut after_step: impl FnMut(usize, &mut Network),
) -> Result<Vec<f64>> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(invalid(v.join("; ")));
    }
    let mut rng = seed::rng(cfg.seed);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, net.param_count());
    let mut trace = Vec::with_capacity(cfg.max_steps);
    let (mut xs, mut ts) = (Vec::new(), Vec::new());
    for step in 0..cfg.max_steps {
        data.batch(cfg.batch_size, &mut rng, &mut xs, &mut ts);
        let (loss, g) = gradients(net, &xs, &ts, cfg.loss)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        opt.lr = cfg.lr_at(step);
        opt.step_network(net, &g);
        after_step(step, net);
        trace.push(loss);
    }
    Ok(trace)
}

/// Trailing moving average of a loss trace.
pub fn moving_average(trace: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    let mut out = Vec::with_capacity(trace.len());
    let mut acc = 0.0;
    for i in 0..trace.len() {
        acc += trace[i];
        if i >= w {
            acc -= trace[i - w];
        }
        out.push(acc / (i + 1).min(w) as f64);
    }
    out
}
