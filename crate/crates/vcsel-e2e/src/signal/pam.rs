use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::Waveform;
use crate::error::{invalid, Result};
use crate::seed;

/// PAM transmitter settings. Levels are drive-current offsets from the bias
/// in mA, sorted ascending; `labels[i]` is the bit label of level `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PamConfig {
    pub order: usize,
    pub baud: f64,
    pub sps: usize,
    pub bias_ma: f64,
    pub levels: Vec<f64>,
    pub labels: Vec<u32>,
}

/// Binary-reflected Gray code for `order` levels.
pub fn gray_labels(order: usize) -> Vec<u32> {
    (0..order as u32).map(|i| i ^ (i >> 1)).collect()
}

impl PamConfig {
    pub fn new(order: usize, baud: f64, sps: usize, bias_ma: f64, levels: Vec<f64>) -> Result<Self> {
        let cfg = Self { order, baud, sps, bias_ma, levels, labels: gray_labels(order) };
        cfg.check()?;
        Ok(cfg)
    }

    /// Evenly spaced levels spanning `[-swing, swing]`.
    pub fn equidistant(order: usize, baud: f64, sps: usize, bias_ma: f64, swing: f64) -> Result<Self> {
        if order < 2 {
            return Err(invalid("PAM order must be at least 2"));
        }
        let step = 2.0 * swing / (order - 1) as f64;
        let levels = (0..order).map(|i| -swing + step * i as f64).collect();
        Self::new(order, baud, sps, bias_ma, levels)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Self> {
        self.labels = labels;
        self.check()?;
        Ok(self)
    }

    fn check(&self) -> Result<()> {
        if !matches!(self.order, 2 | 4 | 8) {
            return Err(invalid(format!("PAM order must be 2, 4 or 8, got {}", self.order)));
        }
        if self.sps == 0 {
            return Err(invalid("sps must be at least 1"));
        }
        if !(self.baud > 0.0) {
            return Err(invalid("baud must be positive"));
        }
        if self.levels.len() != self.order {
            return Err(invalid(format!("expected {} levels, got {}", self.order, self.levels.len())));
        }
        if self.levels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("levels must be strictly increasing"));
        }
        let mut seen = vec![false; self.order];
        if self.labels.len() != self.order {
            return Err(invalid("bit map must label every level"));
        }
        for &l in &self.labels {
            match seen.get_mut(l as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(invalid("bit map must be a permutation of 0..order")),
            }
        }
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    pub fn sample_rate(&self) -> f64 {
        self.baud * self.sps as f64
    }

    /// Level index carrying bit label `label`.
    pub fn index_of_label(&self, label: u32) -> usize {
        self.labels.iter().position(|&l| l == label).expect("labels form a permutation")
    }

    /// Decision thresholds halfway between adjacent levels.
    pub fn thresholds(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Groups bits MSB-first into level indices.
pub fn bits_to_symbols(bits: &[u8], cfg: &PamConfig) -> Result<Vec<usize>> {
    let k = cfg.bits_per_symbol();
    if !bits.len().is_multiple_of(k) {
        return Err(invalid(format!("{} bits is not a multiple of {k} bits per symbol", bits.len())));
    }
    Ok(bits
        .chunks(k)
        .map(|c| {
            let label = c.iter().fold(0u32, |acc, &b| (acc << 1) | (b & 1) as u32);
            cfg.index_of_label(label)
        })
        .collect())
}

pub fn symbols_to_bits(symbols: &[usize], cfg: &PamConfig) -> Vec<u8> {
    let k = cfg.bits_per_symbol();
    let mut out = Vec::with_capacity(symbols.len() * k);
    for &s in symbols {
        let label = cfg.labels[s];
        for b in (0..k).rev() {
            out.push(((label >> b) & 1) as u8);
        }
    }
    out
}

/// Rectangular pulses: `sps` samples of `bias + level` per symbol.
pub fn symbols_to_drive(symbols: &[usize], cfg: &PamConfig) -> Result<Waveform> {
    let mut out = Vec::with_capacity(symbols.len() * cfg.sps);
    for &s in symbols {
        let level = *cfg.levels.get(s).ok_or_else(|| invalid(format!("symbol {s} out of range")))?;
        out.extend(std::iter::repeat_n(cfg.bias_ma + level, cfg.sps));
    }
    Waveform::new(cfg.sample_rate(), out)
}

pub fn modulate(bits: &[u8], cfg: &PamConfig) -> Result<Waveform> {
    symbols_to_drive(&bits_to_symbols(bits, cfg)?, cfg)
}

/// Slices a drive-domain waveform at symbol centres against midpoint thresholds.
pub fn demodulate(w: &Waveform, cfg: &PamConfig) -> Result<Vec<u8>> {
    if !w.len().is_multiple_of(cfg.sps) {
        return Err(invalid("waveform length is not a whole number of symbols"));
    }
    let th = cfg.thresholds();
    let symbols: Vec<usize> = w
        .samples()
        .chunks(cfg.sps)
        .map(|c| {
            let v = c[cfg.sps / 2] - cfg.bias_ma;
            th.iter().filter(|&&t| v > t).count()
        })
        .collect();
    Ok(symbols_to_bits(&symbols, cfg))
}

/// Uniform i.i.d. symbol indices.
pub fn random_symbols(n: usize, order: usize, seed: u64) -> Vec<usize> {
    let mut rng = seed::rng(seed);
    (0..n).map(|_| rng.random_range(0..order)).collect()
}

/// White Gaussian drive current around a bias.
pub fn white_gaussian_stimulus(std_ma: f64, bias_ma: f64, n: usize, sample_rate: f64, seed: u64) -> Result<Waveform> {
    if !(std_ma >= 0.0) || n == 0 {
        return Err(invalid("stimulus needs std >= 0 and n > 0"));
    }
    if std_ma == 0.0 {
        return Waveform::constant(sample_rate, bias_ma, n);
    }
    let normal = Normal::new(bias_ma, std_ma).map_err(|e| invalid(e.to_string()))?;
    let mut rng = seed::rng(seed);
    Waveform::new(sample_rate, (0..n).map(|_| normal.sample(&mut rng)).collect())
}
