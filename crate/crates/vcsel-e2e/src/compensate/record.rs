use rand_distr::{Distribution, StandardNormal};

use crate::channel::Link;
use crate::error::{invalid, Result};
use crate::nncore::{one_hot, DataSource};
use crate::seed;
use crate::signal::{count_errors, mean, symbols_to_drive, PamConfig};
use crate::sweep::Tally;

/// Noise-free received record normalised to zero mean and unit AC power,
/// with the transmitted symbol indices and the channel delay.
///
/// Noise for a target SNR is added per draw with per-sample std
/// `sqrt(sps / SNR)`, which is the crate-wide SNR convention applied to a
/// unit-power signal.
#[derive(Clone, Debug)]
pub struct SymbolRecord {
    pub received: Vec<f64>,
    pub symbols: Vec<usize>,
    pub order: usize,
    pub sps: usize,
    /// Samples per channel use for the SNR convention; equals `sps` unless a
    /// symbol spans several channel uses.
    pub samples_per_use: usize,
    /// Samples from a symbol's start to where it arrives.
    pub delay: usize,
    /// AC power of the raw record before normalisation.
    pub p_ac: f64,
    /// Mean of the raw record.
    pub offset: f64,
}

impl SymbolRecord {
    /// Normalises `raw` and estimates the delay from the cross-correlation
    /// with the symbol sequence.
    pub fn new(raw: &[f64], symbols: Vec<usize>, order: usize, sps: usize, max_delay: usize) -> Result<Self> {
        if raw.len() != symbols.len() * sps {
            return Err(invalid("record length must equal symbols * sps"));
        }
        let offset = mean(raw);
        let p_ac = raw.iter().map(|v| (v - offset).powi(2)).sum::<f64>() / raw.len() as f64;
        if !(p_ac > 0.0) {
            return Err(invalid("received record carries no signal"));
        }
        let s = p_ac.sqrt();
        let received: Vec<f64> = raw.iter().map(|v| (v - offset) / s).collect();
        let delay = estimate_delay(&received, &symbols, order, sps, max_delay);
        Ok(Self { received, symbols, order, sps, samples_per_use: sps, delay, p_ac, offset })
    }

    /// Simulates `symbols` over `link` without receiver noise.
    pub fn from_link(link: &Link, pam: &PamConfig, symbols: Vec<usize>, seed: u64) -> Result<Self> {
        let drive = symbols_to_drive(&symbols, pam)?;
        let y = link.simulate(&drive, seed)?;
        Self::new(y.samples(), symbols, pam.order, pam.sps, 8 * pam.sps)
    }

    pub fn noise_std(&self, snr_db: f64) -> f64 {
        (self.samples_per_use as f64 / 10f64.powf(snr_db / 10.0)).sqrt()
    }

    /// Start sample of the `width`-sample window centred on symbol `k`.
    pub fn window_start(&self, k: usize, width: usize) -> Option<usize> {
        let centre = k * self.sps + self.delay + self.sps / 2;
        let start = centre.checked_sub(width / 2)?;
        (start + width <= self.received.len()).then_some(start)
    }

    /// Symbol indices whose window lies inside the record.
    pub fn usable(&self, width: usize) -> std::ops::Range<usize> {
        let first = (0..self.symbols.len()).find(|&k| self.window_start(k, width).is_some()).unwrap_or(0);
        let mut last = self.symbols.len();
        while last > first && self.window_start(last - 1, width).is_none() {
            last -= 1;
        }
        first..last
    }

    /// Noisy window for symbol `k`.
    pub fn noisy_window(&self, k: usize, width: usize, std: f64, rng: &mut seed::Rng, out: &mut Vec<f64>) {
        let start = self.window_start(k, width).expect("window inside record");
        out.clear();
        for &v in &self.received[start..start + width] {
            let z: f64 = StandardNormal.sample(rng);
            out.push(v + std * z);
        }
    }
}

/// Lag maximising the correlation between the received record and the
/// rank-valued symbol sequence.
fn estimate_delay(received: &[f64], symbols: &[usize], order: usize, sps: usize, max_delay: usize) -> usize {
    let centre = (order as f64 - 1.0) / 2.0;
    let tx: Vec<f64> = symbols.iter().flat_map(|&s| std::iter::repeat_n(s as f64 - centre, sps)).collect();
    peak_lag(&tx, received, max_delay)
}

/// Lag in `0..=max_lag` at which `rx(n)` correlates best with `tx(n - lag)`.
pub(crate) fn peak_lag(tx: &[f64], rx: &[f64], max_lag: usize) -> usize {
    let n = tx.len().min(rx.len());
    let mut best = (0, f64::NEG_INFINITY);
    for lag in 0..=max_lag.min(n.saturating_sub(1)) {
        let c: f64 = tx[..n - lag].iter().zip(&rx[lag..n]).map(|(a, b)| a * b).sum();
        if c > best.1 {
            best = (lag, c);
        }
    }
    best.0
}

/// Maps a received window to a symbol index.
pub trait Detector: Sync {
    fn window_len(&self) -> usize;
    fn decide(&self, window: &[f64]) -> usize;
}

/// Bit and symbol errors of `detector` on `range` at `snr_db`.
pub fn detect_chunk(
    detector: &dyn Detector,
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    labels: &[u32],
    snr_db: f64,
    chunk_seed: u64,
    n: usize,
) -> Tally {
    let mut rng = seed::rng(chunk_seed);
    let width = detector.window_len();
    let std = record.noise_std(snr_db);
    let mut w = Vec::with_capacity(width);
    let (mut decided, mut truth) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let span = range.end - range.start;
    // chunks walk the evaluation range from a seed-dependent offset
    let offset = (chunk_seed % span as u64) as usize;
    for i in 0..n {
        let k = range.start + (offset + i) % span;
        record.noisy_window(k, width, std, &mut rng, &mut w);
        decided.push(detector.decide(&w));
        truth.push(record.symbols[k]);
    }
    let (_, bits) = count_errors(&decided, &truth, labels).expect("equal lengths");
    let k = (labels.len().trailing_zeros()) as u64;
    Tally { errors: bits, counted: n as u64 * k, symbols: n as u64 }
}

/// Symbol error counterpart of [`detect_chunk`].
pub fn detect_chunk_ser(
    detector: &dyn Detector,
    record: &SymbolRecord,
    range: std::ops::Range<usize>,
    snr_db: f64,
    chunk_seed: u64,
    n: usize,
) -> Tally {
    let mut rng = seed::rng(chunk_seed);
    let width = detector.window_len();
    let std = record.noise_std(snr_db);
    let mut w = Vec::with_capacity(width);
    let span = range.end - range.start;
    let offset = (chunk_seed % span as u64) as usize;
    let mut errors = 0;
    for i in 0..n {
        let k = range.start + (offset + i) % span;
        record.noisy_window(k, width, std, &mut rng, &mut w);
        errors += (detector.decide(&w) != record.symbols[k]) as u64;
    }
    Tally { errors, counted: n as u64, symbols: n as u64 }
}

/// Training pairs (noisy window, one-hot symbol or level target) drawn from
/// a symbol range of a record.
pub struct WindowSampler<'a> {
    pub record: &'a SymbolRecord,
    pub range: std::ops::Range<usize>,
    pub width: usize,
    pub snr_db: f64,
    /// `None` for one-hot class targets, `Some(levels)` for amplitude
    /// regression onto `levels[symbol]`.
    pub regression: Option<Vec<f64>>,
}

impl DataSource for WindowSampler<'_> {
    fn batch(&mut self, size: usize, rng: &mut seed::Rng, inputs: &mut Vec<Vec<f64>>, targets: &mut Vec<Vec<f64>>) {
        use rand::Rng as _;
        inputs.clear();
        targets.clear();
        let std = self.record.noise_std(self.snr_db);
        for _ in 0..size {
            let k = rng.random_range(self.range.clone());
            let mut w = Vec::with_capacity(self.width);
            self.record.noisy_window(k, self.width, std, rng, &mut w);
            inputs.push(w);
            let s = self.record.symbols[k];
            targets.push(match &self.regression {
                None => one_hot(s, self.record.order),
                Some(levels) => vec![levels[s]],
            });
        }
    }
}
