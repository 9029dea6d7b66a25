use super::Waveform;
use crate::error::{invalid, Result};

/// Consecutive non-overlapping windows of `span_ui * sps` samples starting on
/// a symbol boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct EyeDiagram {
    pub sps: usize,
    pub span_ui: usize,
    pub traces: Vec<Vec<f64>>,
}

pub fn eye_diagram(w: &Waveform, sps: usize, span_ui: usize) -> Result<EyeDiagram> {
    let width = sps * span_ui;
    if width == 0 {
        return Err(invalid("eye window must be non-empty"));
    }
    if w.len() < width {
        return Err(invalid(format!("waveform of {} samples is shorter than one {width}-sample window", w.len())));
    }
    let traces = w.samples().chunks_exact(width).map(|c| c.to_vec()).collect();
    Ok(EyeDiagram { sps, span_ui, traces })
}

impl EyeDiagram {
    pub fn width(&self) -> usize {
        self.sps * self.span_ui
    }

    /// All trace values at one sample offset within the window.
    pub fn column(&self, offset: usize) -> Vec<f64> {
        self.traces.iter().map(|t| t[offset]).collect()
    }

    /// CSV matrix: one row per trace.
    pub fn csv_rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        self.traces.iter().cloned()
    }
}

/// One-dimensional k-means with quantile initialisation; returns sorted
/// centres.
pub fn rail_levels(values: &[f64], k: usize) -> Vec<f64> {
    if values.is_empty() || k == 0 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut centres: Vec<f64> = (0..k).map(|i| sorted[((2 * i + 1) * n / (2 * k)).min(n - 1)]).collect();
    for _ in 0..100 {
        let mut sum = vec![0.0; k];
        let mut cnt = vec![0usize; k];
        for &v in &sorted {
            let j = nearest(&centres, v);
            sum[j] += v;
            cnt[j] += 1;
        }
        let next: Vec<f64> = (0..k).map(|j| if cnt[j] > 0 { sum[j] / cnt[j] as f64 } else { centres[j] }).collect();
        if next == centres {
            break;
        }
        centres = next;
    }
    centres.sort_by(f64::total_cmp);
    centres
}

fn nearest(c: &[f64], v: f64) -> usize {
    let mut best = 0;
    for j in 1..c.len() {
        if (c[j] - v).abs() < (c[best] - v).abs() {
            best = j;
        }
    }
    best
}

/// Smallest vertical gap between adjacent symbol classes at the sampling
/// instant `k * sps + offset`. Negative when the eye is closed.
pub fn vertical_opening(samples: &[f64], symbols: &[usize], order: usize, sps: usize, offset: usize) -> f64 {
    let mut lo = vec![f64::INFINITY; order];
    let mut hi = vec![f64::NEG_INFINITY; order];
    for (k, &s) in symbols.iter().enumerate() {
        if let Some(&v) = samples.get(k * sps + offset) {
            lo[s] = lo[s].min(v);
            hi[s] = hi[s].max(v);
        }
    }
    // classes ordered by their mean position so the metric does not depend on
    // whether the channel inverts
    let mut idx: Vec<usize> = (0..order).filter(|&s| lo[s].is_finite()).collect();
    idx.sort_by(|&a, &b| (lo[a] + hi[a]).total_cmp(&(lo[b] + hi[b])));
    idx.windows(2).map(|w| lo[w[1]] - hi[w[0]]).fold(f64::INFINITY, f64::min)
}
