use serde::{Deserialize, Serialize};

use super::record::{Detector, SymbolRecord, WindowSampler};
use crate::error::{invalid, Result};
use rayon::prelude::*;

use crate::nncore::{
    argmax, batch_loss, prune_step, train, train_with, Activation, DataSource, Loss, Network, OptimizerKind,
    PruneSchedule, TrainConfig,
};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EqualizerConfig {
    /// Received samples seen per decision.
    pub window: usize,
    pub hidden: usize,
    pub train_snr_db: f64,
    pub train: TrainConfig,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            window: 20,
            hidden: 4,
            train_snr_db: 12.0,
            train: TrainConfig {
                optimizer: OptimizerKind::Adam,
                learning_rate: 5e-3,
                final_learning_rate: None,
                batch_size: 256,
                max_steps: 6000,
                seed: 0,
                loss: Loss::CrossEntropy,
            },
        }
    }
}

impl EqualizerConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = self.train.violations();
        if self.window == 0 {
            v.push("window must be at least 1".into());
        }
        if self.hidden == 0 {
            v.push("hidden must be at least 1".into());
        }
        if !self.train_snr_db.is_finite() {
            v.push("train_snr_db must be finite".into());
        }
        v
    }
}

/// Window -> ReLU hidden layer -> softmax over symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct NnEqualizer {
    pub net: Network,
}

impl Detector for NnEqualizer {
    fn window_len(&self) -> usize {
        self.net.input_dim()
    }

    fn decide(&self, window: &[f64]) -> usize {
        argmax(&self.net.forward(window).expect("window length matches"))
    }
}

/// Sliced scalar statistic: `bin_class[b]` is the symbol for the `b`-th
/// interval between sorted `thresholds`.
#[derive(Clone, Debug, PartialEq)]
pub struct Slicer {
    pub thresholds: Vec<f64>,
    pub bin_class: Vec<usize>,
}

impl Slicer {
    /// Thresholds at midpoints between sorted class means.
    pub fn from_class_means(means: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..means.len()).collect();
        order.sort_by(|&a, &b| means[a].total_cmp(&means[b]));
        let thresholds = order.windows(2).map(|w| 0.5 * (means[w[0]] + means[w[1]])).collect();
        Self { thresholds, bin_class: order }
    }

    pub fn slice(&self, z: f64) -> usize {
        self.bin_class[self.thresholds.iter().filter(|&&t| z > t).count()]
    }
}

/// Linear feed-forward equaliser followed by a slicer.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFfe {
    /// Single linear layer, window -> 1.
    pub net: Network,
    pub slicer: Slicer,
}

impl Detector for LinearFfe {
    fn window_len(&self) -> usize {
        self.net.input_dim()
    }

    fn decide(&self, window: &[f64]) -> usize {
        self.slicer.slice(self.net.forward(window).expect("window length matches")[0])
    }
}

/// Unequalised receiver: averages the samples of the current symbol and
/// slices.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegrateDump {
    pub window: usize,
    pub start: usize,
    pub len: usize,
    pub slicer: Slicer,
}

impl IntegrateDump {
    fn statistic(&self, window: &[f64]) -> f64 {
        window[self.start..self.start + self.len].iter().sum::<f64>() / self.len as f64
    }
}

impl Detector for IntegrateDump {
    fn window_len(&self) -> usize {
        self.window
    }

    fn decide(&self, window: &[f64]) -> usize {
        self.slicer.slice(self.statistic(window))
    }
}

/// Mean of `stat` over noise-free windows, per transmitted symbol.
fn class_means(
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    width: usize,
    stat: impl Fn(&[f64]) -> f64,
) -> Vec<f64> {
    let mut sum = vec![0.0; record.order];
    let mut count = vec![0usize; record.order];
    for k in range {
        let s = record.window_start(k, width).expect("usable range");
        sum[record.symbols[k]] += stat(&record.received[s..s + width]);
        count[record.symbols[k]] += 1;
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c.max(1) as f64).collect()
}

fn check_range(record: &SymbolRecord, range: &std::ops::Range<usize>, width: usize) -> Result<()> {
    let usable = record.usable(width);
    if range.is_empty() || range.start < usable.start || range.end > usable.end {
        return Err(invalid(format!("symbol range {range:?} must be non-empty and inside {usable:?}")));
    }
    Ok(())
}

/// Trains the network equaliser with cross-entropy on fresh noisy windows.
/// Returns the equaliser and its loss trace.
pub fn train_equalizer(
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    cfg: &EqualizerConfig,
) -> Result<(NnEqualizer, Vec<f64>)> {
    reject(cfg)?;
    check_range(record, &range, cfg.window)?;
    let mut net = Network::random(
        &[cfg.window, cfg.hidden, record.order],
        &[Activation::Relu, Activation::Softmax],
        seed::derive(cfg.train.seed, "init"),
    )?;
    let mut data = WindowSampler { record, range, width: cfg.window, snr_db: cfg.train_snr_db, regression: None };
    let tc = TrainConfig { loss: Loss::CrossEntropy, ..cfg.train.clone() };
    let trace = train(&mut net, &mut data, &tc)?;
    Ok((NnEqualizer { net }, trace))
}

/// Least-squares-style linear equaliser trained by the same pipeline: a
/// single linear layer regressed onto each symbol's noise-free centre level,
/// then sliced at the midpoints of its class means.
pub fn linear_ffe_baseline(
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    cfg: &EqualizerConfig,
) -> Result<LinearFfe> {
    reject(cfg)?;
    check_range(record, &range, cfg.window)?;
    let centre = cfg.window / 2;
    let levels = class_means(record, range.clone(), cfg.window, |w| w[centre]);
    let mut net = Network::random(&[cfg.window, 1], &[Activation::Linear], seed::derive(cfg.train.seed, "ffe"))?;
    let mut data = WindowSampler {
        record,
        range: range.clone(),
        width: cfg.window,
        snr_db: cfg.train_snr_db,
        regression: Some(levels),
    };
    let tc = TrainConfig { loss: Loss::Mse, ..cfg.train.clone() };
    train(&mut net, &mut data, &tc)?;
    let means = class_means(record, range, cfg.window, |w| net.forward(w).expect("window length")[0]);
    Ok(LinearFfe { net, slicer: Slicer::from_class_means(&means) })
}

/// Threshold receiver without equalisation.
pub fn integrate_dump(record: &SymbolRecord, range: std::ops::Range<usize>, window: usize) -> Result<IntegrateDump> {
    check_range(record, &range, window)?;
    let len = record.sps.min(window);
    let start = (window - len) / 2;
    let mut d = IntegrateDump { window, start, len, slicer: Slicer { thresholds: vec![], bin_class: vec![0] } };
    let means = class_means(record, range, window, |w| d.statistic(w));
    d.slicer = Slicer::from_class_means(&means);
    Ok(d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PruneConfig {
    pub s_final: f64,
    /// Steps over which sparsity ramps from 0 to `s_final`.
    pub prune_steps: usize,
    /// Further training with the final mask held.
    pub finetune_steps: usize,
    /// Independent pruning runs; the one with the lowest validation loss wins.
    pub restarts: usize,
    pub validation_windows: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { s_final: 0.6, prune_steps: 500, finetune_steps: 1500, restarts: 4, validation_windows: 20_000 }
    }
}

impl PruneConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(0.0..1.0).contains(&self.s_final) {
            v.push(format!("s_final must lie in [0, 1) (got {})", self.s_final));
        }
        if self.prune_steps == 0 {
            v.push("prune_steps must be at least 1".into());
        }
        if self.restarts == 0 {
            v.push("restarts must be at least 1".into());
        }
        if self.validation_windows == 0 {
            v.push("validation_windows must be at least 1".into());
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PruneReport {
    pub multiplies_before: usize,
    pub multiplies_after: usize,
    pub sparsity: f64,
    /// Validation cross-entropy of each restart at the training SNR.
    pub validation_loss: Vec<f64>,
    pub chosen: usize,
    pub loss: Vec<f64>,
}

/// Cross-entropy on a fixed noisy draw from `range`.
pub fn validation_loss(
    net: &Network,
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    cfg: &EqualizerConfig,
    windows: usize,
    seed: u64,
) -> Result<f64> {
    let mut data = WindowSampler { record, range, width: cfg.window, snr_db: cfg.train_snr_db, regression: None };
    let mut rng = seed::rng(seed);
    let (mut x, mut t) = (Vec::new(), Vec::new());
    data.batch(windows, &mut rng, &mut x, &mut t);
    batch_loss(net, &x, &t, Loss::CrossEntropy)
}

/// Continues training while pruning each layer by magnitude on a cubic
/// schedule, then fine-tunes with the final mask held. Runs
/// `prune.restarts` independent attempts and keeps the one with the lowest
/// cross-entropy on `validation`.
pub fn prune_equalizer(
    eq: &mut NnEqualizer,
    record: &SymbolRecord,
    train_range: std::ops::Range<usize>,
    validation: std::ops::Range<usize>,
    cfg: &EqualizerConfig,
    prune: &PruneConfig,
) -> Result<PruneReport> {
    reject(cfg)?;
    let v = prune.violations();
    if !v.is_empty() {
        return Err(invalid(v.join("; ")));
    }
    check_range(record, &train_range, cfg.window)?;
    check_range(record, &validation, cfg.window)?;
    let schedule = PruneSchedule::new(0.0, prune.s_final, 0, prune.prune_steps)?;
    let before = eq.net.multiply_count();
    let val_seed = seed::derive(cfg.train.seed, "prune-validation");
    let runs: Vec<Result<(Network, Vec<f64>, f64)>> = (0..prune.restarts)
        .into_par_iter()
        .map(|r| {
            let mut net = eq.net.clone();
            let mut data = WindowSampler {
                record,
                range: train_range.clone(),
                width: cfg.window,
                snr_db: cfg.train_snr_db,
                regression: None,
            };
            let tc = TrainConfig {
                loss: Loss::CrossEntropy,
                max_steps: prune.prune_steps + prune.finetune_steps,
                final_learning_rate: None,
                seed: seed::shard(seed::derive(cfg.train.seed, "prune"), r as u64),
                ..cfg.train.clone()
            };
            let loss = train_with(&mut net, &mut data, &tc, |step, net| prune_step(net, &schedule, step))?;
            let vl = validation_loss(&net, record, validation.clone(), cfg, prune.validation_windows, val_seed)?;
            Ok((net, loss, vl))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let validation_loss: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let chosen =
        (0..runs.len()).min_by(|&a, &b| validation_loss[a].total_cmp(&validation_loss[b])).expect("restarts >= 1");
    let (net, loss, _) = runs.into_iter().nth(chosen).expect("chosen run exists");
    eq.net = net;
    Ok(PruneReport {
        multiplies_before: before,
        multiplies_after: eq.net.multiply_count(),
        sparsity: eq.net.sparsity(),
        validation_loss,
        chosen,
        loss,
    })
}

fn reject(cfg: &EqualizerConfig) -> Result<()> {
    let v = cfg.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(invalid(v.join("; ")))
    }
}
