use serde::{Deserialize, Serialize};

use super::de::{differential_evolution, DeConfig, DeResult};
use crate::compensate::{Detector, SymbolRecord, WindowSampler};
use crate::error::{invalid, Error, Result};
use crate::nncore::{argmax, Activation, DataSource, Gradients, Loss, Network, Optimizer, OptimizerKind, TrainConfig};
use crate::seed;
use crate::signal::q_function;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReceiverConfig {
    /// FIR length K (odd).
    pub taps: usize,
    /// Downsampled FIR outputs seen by the demapper (odd).
    pub demapper_taps: usize,
    /// Hidden tanh units in the demapper; 0 for a single softmax layer.
    pub demapper_hidden: usize,
    /// Sampling instant relative to the symbol centre, samples.
    pub phase: i64,
    pub train_snr_db: f64,
    /// Noisy windows in the fixed DE fitness batch.
    pub fitness_windows: usize,
    /// Half-width of the initial DE population around zero.
    pub init_spread: f64,
    pub de: DeConfig,
    pub backprop: TrainConfig,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            taps: 9,
            demapper_taps: 1,
            demapper_hidden: 0,
            phase: 0,
            train_snr_db: 12.0,
            fitness_windows: 12000,
            init_spread: 1.0,
            de: DeConfig { generations: 2000, ..DeConfig::default() },
            backprop: TrainConfig {
                optimizer: OptimizerKind::Adam,
                learning_rate: 1e-2,
                final_learning_rate: Some(1e-3),
                batch_size: 256,
                max_steps: 3000,
                seed: 0,
                loss: Loss::CrossEntropy,
            },
        }
    }
}

impl ReceiverConfig {
    pub fn violations(&self, sps: usize) -> Vec<String> {
        let mut v = Vec::new();
        if self.taps.is_multiple_of(2) {
            v.push(format!("taps must be odd (got {})", self.taps));
        }
        if self.demapper_taps.is_multiple_of(2) {
            v.push(format!("demapper_taps must be odd (got {})", self.demapper_taps));
        }
        let half = (sps / 2) as i64;
        if self.phase < -half || self.phase > half {
            v.push(format!("phase must lie within +-{half} samples (got {})", self.phase));
        }
        if self.fitness_windows == 0 {
            v.push("fitness_windows must be at least 1".into());
        }
        v.extend(self.backprop.violations());
        v
    }
}

/// FIR filter, downsampler and softmax demapper.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainableReceiver {
    pub fir: Vec<f64>,
    pub sps: usize,
    pub phase: i64,
    pub demapper: Network,
}

impl TrainableReceiver {
    pub fn new(cfg: &ReceiverConfig, sps: usize, order: usize, seed: u64) -> Result<Self> {
        let v = cfg.violations(sps);
        if !v.is_empty() {
            return Err(invalid(v.join("; ")));
        }
        let demapper = if cfg.demapper_hidden > 0 {
            Network::random(
                &[cfg.demapper_taps, cfg.demapper_hidden, order],
                &[Activation::Tanh, Activation::Softmax],
                seed,
            )?
        } else {
            Network::random(&[cfg.demapper_taps, order], &[Activation::Softmax], seed)?
        };
        let mut fir = vec![0.0; cfg.taps];
        fir[cfg.taps / 2] = 1.0;
        Ok(Self { fir, sps, phase: cfg.phase, demapper })
    }

    fn pmax(&self) -> usize {
        self.sps / 2
    }

    /// Window index of the FIR output feeding demapper tap `j`.
    fn sample_index(&self, j: usize) -> usize {
        let d = self.demapper.input_dim();
        let centre = (self.window_len() / 2) as i64;
        (centre + self.phase + (j as i64 - (d / 2) as i64) * self.sps as i64) as usize
    }

    fn features(&self, window: &[f64]) -> Vec<f64> {
        let h = self.fir.len() / 2;
        (0..self.demapper.input_dim())
            .map(|j| {
                let c = self.sample_index(j);
                self.fir.iter().enumerate().map(|(i, f)| f * window[c - h + i]).sum()
            })
            .collect()
    }

    pub fn posterior(&self, window: &[f64]) -> Vec<f64> {
        self.demapper.forward(&self.features(window)).expect("demapper width")
    }

    pub fn param_count(&self) -> usize {
        self.fir.len() + self.demapper.param_count()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.fir.clone();
        p.extend(self.demapper.params());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::Shape { expected: self.param_count(), got: p.len() });
        }
        let k = self.fir.len();
        self.fir.copy_from_slice(&p[..k]);
        self.demapper.set_params(&p[k..])
    }

    /// Mean cross-entropy over windows and, when asked, its gradient in
    /// [`TrainableReceiver::params`] layout.
    pub fn loss(&self, windows: &[Vec<f64>], targets: &[Vec<f64>], want_grad: bool) -> (f64, Vec<f64>) {
        let h = self.fir.len() / 2;
        let mut g = Gradients::zeros(&self.demapper);
        let mut gfir = vec![0.0; self.fir.len()];
        let mut total = 0.0;
        for (w, t) in windows.iter().zip(targets) {
            let z = self.features(w);
            let tr = self.demapper.forward_trace(&z).expect("demapper width");
            let p = tr.output();
            total -=
                p.iter().zip(t).map(|(pi, ti)| if *ti > 0.0 { ti * pi.max(1e-300).ln() } else { 0.0 }).sum::<f64>();
            if want_grad {
                let dz: Vec<f64> = p.iter().zip(t).map(|(pi, ti)| pi - ti).collect();
                let gz = self.demapper.backward_pre(&tr, &dz, Some(&mut g));
                for (j, gj) in gz.iter().enumerate() {
                    let c = self.sample_index(j);
                    gfir.iter_mut().enumerate().for_each(|(i, f)| *f += gj * w[c - h + i]);
                }
            }
        }
        let n = windows.len().max(1) as f64;
        if !want_grad {
            return (total / n, Vec::new());
        }
        let mut grad = gfir;
        grad.extend(g.flatten());
        grad.iter_mut().for_each(|v| *v /= n);
        (total / n, grad)
    }
}

impl Detector for TrainableReceiver {
    fn window_len(&self) -> usize {
        self.fir.len() + (self.demapper.input_dim() - 1) * self.sps + 2 * self.pmax()
    }

    fn decide(&self, window: &[f64]) -> usize {
        argmax(&self.posterior(window))
    }
}

/// Noisy samples around each sampling instant, flattened per window, for
/// allocation-free fitness evaluation.
struct FitnessBatch {
    rows: Vec<f64>,
    stride: usize,
    labels: Vec<usize>,
}

impl FitnessBatch {
    fn new(receiver: &TrainableReceiver, windows: &[Vec<f64>], targets: &[Vec<f64>]) -> Self {
        let k = receiver.fir.len();
        let h = k / 2;
        let d = receiver.demapper.input_dim();
        let mut rows = Vec::with_capacity(windows.len() * k * d);
        for w in windows {
            for j in 0..d {
                let c = receiver.sample_index(j);
                rows.extend_from_slice(&w[c - h..c - h + k]);
            }
        }
        Self { rows, stride: k * d, labels: targets.iter().map(|t| argmax(t)).collect() }
    }

    /// Mean cross-entropy; single-layer demappers take a fast path.
    fn loss(&self, r: &TrainableReceiver) -> f64 {
        let k = r.fir.len();
        let d = r.demapper.input_dim();
        let layers = r.demapper.layers();
        let mut z = vec![0.0; d];
        let mut logits = vec![0.0; r.demapper.output_dim()];
        let mut total = 0.0;
        for (row, &s) in self.rows.chunks(self.stride).zip(&self.labels) {
            for (j, zj) in z.iter_mut().enumerate() {
                *zj = row[j * k..(j + 1) * k].iter().zip(&r.fir).map(|(a, b)| a * b).sum();
            }
            let p_s = if layers.len() == 1 {
                let l = &layers[0];
                for (o, lo) in logits.iter_mut().enumerate() {
                    *lo = l.biases[o] + l.weights[o * d..(o + 1) * d].iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
                }
                let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                total += lse - logits[s];
                continue;
            } else {
                r.demapper.forward(&z).expect("demapper width")[s]
            };
            total -= p_s.max(1e-300).ln();
        }
        total / self.labels.len().max(1) as f64
    }
}

fn fixed_batch(
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    width: usize,
    snr_db: f64,
    n: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut data = WindowSampler { record, range, width, snr_db, regression: None };
    let (mut x, mut t) = (Vec::new(), Vec::new());
    data.batch(n, &mut seed::rng(seed), &mut x, &mut t);
    (x, t)
}

/// Gradient-free training: DE/rand/1/bin over all receiver parameters with
/// the cross-entropy on a fixed noisy batch as fitness.
pub fn de_train(
    receiver: &TrainableReceiver,
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    cfg: &ReceiverConfig,
) -> Result<(TrainableReceiver, DeResult)> {
    let (x, t) = fixed_batch(
        record,
        range,
        receiver.window_len(),
        cfg.train_snr_db,
        cfg.fitness_windows,
        seed::derive(cfg.de.seed, "fitness"),
    );
    let batch = FitnessBatch::new(receiver, &x, &t);
    let centre = vec![0.0; receiver.param_count()];
    let result = differential_evolution(
        |p| {
            let mut r = receiver.clone();
            match r.set_params(p) {
                Ok(()) => batch.loss(&r),
                Err(_) => f64::INFINITY,
            }
        },
        &centre,
        cfg.init_spread,
        &cfg.de,
    )?;
    let mut out = receiver.clone();
    out.set_params(&result.best)?;
    Ok((out, result))
}

/// The same receiver trained with Adam on fresh noisy batches.
pub fn backprop_train(
    receiver: &TrainableReceiver,
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    cfg: &ReceiverConfig,
) -> Result<(TrainableReceiver, Vec<f64>)> {
    let tc = &cfg.backprop;
    let mut r = receiver.clone();
    let mut data = WindowSampler { record, range, width: r.window_len(), snr_db: cfg.train_snr_db, regression: None };
    let mut rng = seed::rng(tc.seed);
    let mut opt = Optimizer::new(tc.optimizer, tc.learning_rate, r.param_count());
    let (mut x, mut t) = (Vec::new(), Vec::new());
    let mut trace = Vec::with_capacity(tc.max_steps);
    for step in 0..tc.max_steps {
        data.batch(tc.batch_size, &mut rng, &mut x, &mut t);
        let (loss, g) = r.loss(&x, &t, true);
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        let mut p = r.params();
        opt.lr = tc.lr_at(step);
        opt.step(&mut p, &g);
        r.set_params(&p)?;
        trace.push(loss);
    }
    Ok((r, trace))
}

/// Symbol error rate of M-PAM with ideal matched filtering under
/// the crate's SNR convention.
pub fn theoretical_ser(order: usize, snr_db: f64) -> f64 {
    let m = order as f64;
    let snr = 10f64.powf(snr_db / 10.0);
    2.0 * (1.0 - 1.0 / m) * q_function((3.0 * snr / (m * m - 1.0)).sqrt())
}
