//! Monte-Carlo error-rate sweeps, parallel across SNR points.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed;
use crate::signal::ErrorRateCurve;

/// Stopping rule for one SNR point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budget {
    /// Stop once this many errors have been seen.
    pub min_errors: u64,
    /// Hard cap on simulated symbols.
    pub max_symbols: u64,
    /// Symbols simulated per chunk.
    pub chunk: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self { min_errors: 100, max_symbols: 1_000_000, chunk: 20_000 }
    }
}

/// Outcome of one chunk.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tally {
    pub errors: u64,
    /// Trials the errors are counted against (bits for BER, symbols for SER).
    pub counted: u64,
    pub symbols: u64,
}

/// Runs `trial(snr_db, chunk_seed, chunk_symbols)` per SNR point until the
/// budget stops it. Deterministic for a given `seed` regardless of thread
/// count.
pub fn error_rate_curve(
    snr_db: &[f64],
    budget: &Budget,
    seed: u64,
    trial: impl Fn(f64, u64, usize) -> Tally + Sync,
) -> ErrorRateCurve {
    let points: Vec<Tally> = snr_db
        .par_iter()
        .enumerate()
        .map(|(i, &snr)| {
            let point_seed = seed::shard(seed, i as u64);
            let mut total = Tally::default();
            let mut chunk_idx = 0;
            while total.errors < budget.min_errors && total.symbols < budget.max_symbols {
                let n = (budget.chunk as u64).min(budget.max_symbols - total.symbols) as usize;
                let t = trial(snr, seed::shard(point_seed, chunk_idx), n);
                chunk_idx += 1;
                total.errors += t.errors;
                total.counted += t.counted;
                total.symbols += t.symbols.max(1);
            }
            total
        })
        .collect();
    let mut curve = ErrorRateCurve::default();
    for (&snr, t) in snr_db.iter().zip(points) {
        curve.push(snr, t.errors, t.counted);
    }
    curve
}
