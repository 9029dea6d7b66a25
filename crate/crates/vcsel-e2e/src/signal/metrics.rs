use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};

fn check_pair(test: &[f64], reference: &[f64]) -> Result<()> {
    if test.len() != reference.len() {
        return Err(Error::Shape { expected: reference.len(), got: test.len() });
    }
    if reference.is_empty() {
        return Err(invalid("empty reference"));
    }
    Ok(())
}

/// RMS error normalised by the peak-to-peak span of the reference.
pub fn nrmse(test: impl AsRef<[f64]>, reference: impl AsRef<[f64]>) -> Result<f64> {
    let (t, r) = (test.as_ref(), reference.as_ref());
    check_pair(t, r)?;
    let (lo, hi) = r.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi > lo) {
        return Err(invalid("reference is constant"));
    }
    let mse = t.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / r.len() as f64;
    Ok(mse.sqrt() / (hi - lo))
}

/// Coefficient of determination of `test` against `reference`.
pub fn r_squared(test: impl AsRef<[f64]>, reference: impl AsRef<[f64]>) -> Result<f64> {
    let (t, r) = (test.as_ref(), reference.as_ref());
    check_pair(t, r)?;
    let m = super::mean(r);
    let ss_tot: f64 = r.iter().map(|v| (v - m) * (v - m)).sum();
    if !(ss_tot > 0.0) {
        return Err(invalid("reference is constant"));
    }
    let ss_res: f64 = t.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Symbol and bit errors, bits compared through `labels[level]`.
pub fn count_errors(decided: &[usize], truth: &[usize], labels: &[u32]) -> Result<(u64, u64)> {
    if decided.len() != truth.len() {
        return Err(Error::Shape { expected: truth.len(), got: decided.len() });
    }
    let mut sym = 0;
    let mut bits = 0;
    for (&d, &t) in decided.iter().zip(truth) {
        if d != t {
            sym += 1;
            let (ld, lt) = (labels.get(d), labels.get(t));
            match (ld, lt) {
                (Some(a), Some(b)) => bits += (a ^ b).count_ones() as u64,
                _ => return Err(invalid("symbol index outside the bit map")),
            }
        }
    }
    Ok((sym, bits))
}

/// Gaussian tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// 95% Wilson score interval for `errors` out of `n` trials.
pub fn wilson_interval(errors: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = n as f64;
    let p = errors as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Error rate against SNR with the raw counts behind every point.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ErrorRateCurve {
    pub snr_db: Vec<f64>,
    pub rate: Vec<f64>,
    pub errors: Vec<u64>,
    pub counted: Vec<u64>,
}

impl ErrorRateCurve {
    pub fn push(&mut self, snr_db: f64, errors: u64, counted: u64) {
        self.snr_db.push(snr_db);
        self.errors.push(errors);
        self.counted.push(counted);
        self.rate.push(if counted == 0 { 0.0 } else { errors as f64 / counted as f64 });
    }

    pub fn len(&self) -> usize {
        self.snr_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snr_db.is_empty()
    }

    pub fn interval(&self, i: usize) -> (f64, f64) {
        wilson_interval(self.errors[i], self.counted[i])
    }

    /// SNR where the curve first falls to `target`, interpolating
    /// log10(rate) linearly in dB. Zero-error points count as half an error.
    pub fn snr_at(&self, target: f64) -> Option<f64> {
        let lr = |i: usize| {
            let floor = 0.5 / self.counted[i].max(1) as f64;
            self.rate[i].max(floor).log10()
        };
        let t = target.log10();
        for i in 0..self.len() {
            if lr(i) <= t {
                if i == 0 {
                    return None;
                }
                let (x0, x1) = (self.snr_db[i - 1], self.snr_db[i]);
                let (y0, y1) = (lr(i - 1), lr(i));
                return Some(x0 + (t - y0) * (x1 - x0) / (y1 - y0));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nrmse_hand_value() {
        let v = nrmse([0.1, 1.1], [0.0, 1.0]).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
        assert_eq!(nrmse([1.0, 2.0], [1.0, 2.0]).unwrap(), 0.0);
        assert!(nrmse([1.0, 1.0], [3.0, 3.0]).is_err());
    }

    #[test]
    fn r2_definitions() {
        let r = [1.0, 2.0, 4.0, 7.0];
        assert_eq!(r_squared(r, r).unwrap(), 1.0);
        let m = r.iter().sum::<f64>() / 4.0;
        assert!(r_squared([m; 4], r).unwrap().abs() < 1e-15);
    }

    #[test]
    fn gray_error_counts() {
        let g = super::super::gray_labels(4);
        assert_eq!(count_errors(&[0, 1, 2], &[0, 1, 2], &g).unwrap(), (0, 0));
        assert_eq!(count_errors(&[1], &[2], &g).unwrap(), (1, 1));
        assert_eq!(count_errors(&[0], &[2], &g).unwrap(), (1, 2));
    }

    #[test]
    fn interpolation_between_points() {
        let mut c = ErrorRateCurve::default();
        c.push(10.0, 100, 10_000);
        c.push(12.0, 100, 1_000_000);
        let s = c.snr_at(1e-3).unwrap();
        assert!((s - 11.0).abs() < 1e-9);
        assert!(c.snr_at(1e-7).is_none());
    }

    #[test]
    fn q_reference_values() {
        assert!((q_function(0.0) - 0.5).abs() < 1e-15);
        assert!((q_function(1.0) - 0.158_655_253_931_457_05).abs() < 1e-10, "{}", q_function(1.0));
    }
}
