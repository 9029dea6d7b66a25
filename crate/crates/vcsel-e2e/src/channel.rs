//! Fiber, photodiode and the composed link.
//!
//! SNR convention used across the crate: the ratio of the AC (mean-removed)
//! electrical signal power to the noise power after integrating over one
//! symbol, i.e. per-sample noise variance `sps * P_ac / SNR`.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seed;
use crate::signal::{variance, Waveform};
use crate::vcsel::{integrate_with, IntegrateOptions, VcselParams};

/// Text written into artifact headers to state the SNR reference.
pub const SNR_DEFINITION: &str =
    "decision-input electrical SNR: AC signal power over noise power integrated over one symbol (noise var = sps*P_ac/SNR)";

/// Short multimode fiber as attenuation plus a Gaussian low-pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberParams {
    pub length_m: f64,
    pub attenuation_db_per_km: f64,
    /// -3 dB bandwidth; `inf` disables filtering.
    pub f3db_hz: f64,
}

impl FiberParams {
    pub fn passthrough() -> Self {
        Self { length_m: 0.0, attenuation_db_per_km: 0.0, f3db_hz: f64::INFINITY }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [("length_m", self.length_m), ("attenuation_db_per_km", self.attenuation_db_per_km)] {
            if !(x >= 0.0 && x.is_finite()) {
                v.push(format!("fiber.{name} must be non-negative (got {x})"));
            }
        }
        if !(self.f3db_hz > 0.0) {
            v.push(format!("fiber.f3db_hz must be positive (got {})", self.f3db_hz));
        }
        v
    }

    /// Linear power transmission.
    pub fn gain(&self) -> f64 {
        10f64.powf(-self.attenuation_db_per_km * self.length_m * 1e-3 / 10.0)
    }

    /// Gain-scaled FIR taps at `sample_rate`.
    pub fn taps(&self, sample_rate: f64) -> Result<Vec<f64>> {
        let v = self.violations();
        if !v.is_empty() {
            return Err(invalid(v.join("; ")));
        }
        if self.f3db_hz.is_finite() && sample_rate < 4.0 * self.f3db_hz {
            return Err(invalid(format!(
                "sample rate {sample_rate:.3e} Hz is below 4x the fiber bandwidth {:.3e} Hz",
                self.f3db_hz
            )));
        }
        let g = self.gain();
        Ok(gaussian_taps(self.f3db_hz, sample_rate).into_iter().map(|t| g * t).collect())
    }
}

/// Unit-DC-gain, linear-phase FIR approximating a Gaussian low-pass with
/// magnitude `exp(-ln(sqrt 2) f^2 / f3db^2)`.
pub fn gaussian_taps(f3db_hz: f64, sample_rate: f64) -> Vec<f64> {
    if !f3db_hz.is_finite() {
        return vec![1.0];
    }
    let a = 2f64.sqrt().ln() / (f3db_hz * f3db_hz);
    let sigma_t = (a / 2.0).sqrt() / std::f64::consts::PI;
    let half = (4.0 * sigma_t * sample_rate).ceil() as i64;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|k| {
            let t = k as f64 / sample_rate;
            (-t * t / (2.0 * sigma_t * sigma_t)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Centred FIR with edge samples replicated outside the record.
pub fn fir_same(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = x.len() as i64;
    let half = (taps.len() / 2) as i64;
    if n == 0 {
        return Vec::new();
    }
    (0..n)
        .map(|i| taps.iter().enumerate().map(|(k, &t)| t * x[(i + half - k as i64).clamp(0, n - 1) as usize]).sum())
        .collect()
}

/// Adjoint of [`fir_same`]: maps output gradients to input gradients.
pub fn fir_same_adjoint(grad_y: &[f64], taps: &[f64]) -> Vec<f64> {
    let n = grad_y.len() as i64;
    let half = (taps.len() / 2) as i64;
    let mut gx = vec![0.0; grad_y.len()];
    for i in 0..n {
        let g = grad_y[i as usize];
        if g == 0.0 {
            continue;
        }
        for (k, &t) in taps.iter().enumerate() {
            gx[(i + half - k as i64).clamp(0, n - 1) as usize] += t * g;
        }
    }
    gx
}

pub fn fiber_apply(f: &FiberParams, w: &Waveform) -> Result<Waveform> {
    let taps = f.taps(w.sample_rate())?;
    if taps.len() == 1 {
        return w.map(|v| v * taps[0]);
    }
    w.with_samples(fir_same(w.samples(), &taps))
}

/// Receiver noise setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PdNoise {
    None,
    /// Fixed per-sample std in mA.
    Std(f64),
    /// Noise scaled to reach a target SNR under the crate convention.
    Snr {
        snr_db: f64,
        samples_per_symbol: usize,
    },
}

/// Square-law photodiode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdParams {
    pub responsivity_a_per_w: f64,
    pub noise: PdNoise,
}

impl PdParams {
    pub fn noiseless(responsivity_a_per_w: f64) -> Self {
        Self { responsivity_a_per_w, noise: PdNoise::None }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.responsivity_a_per_w > 0.0) {
            v.push(format!("pd.responsivity_a_per_w must be positive (got {})", self.responsivity_a_per_w));
        }
        match self.noise {
            PdNoise::Std(s) if !(s >= 0.0) => v.push(format!("pd noise std must be non-negative (got {s})")),
            PdNoise::Snr { samples_per_symbol: 0, .. } => v.push("pd samples_per_symbol must be >= 1".into()),
            _ => {}
        }
        v
    }
}

/// Per-sample noise std giving `snr_db` for a signal of AC power `p_ac`.
pub fn noise_std_for_snr(p_ac: f64, snr_db: f64, sps: usize) -> f64 {
    (sps as f64 * p_ac / 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Photocurrent in mA (responsivity times optical power in mW) plus AWGN.
pub fn pd_detect(p: &PdParams, w: &Waveform, seed: u64) -> Result<Waveform> {
    let v = p.violations();
    if !v.is_empty() {
        return Err(invalid(v.join("; ")));
    }
    let mut y: Vec<f64> = w.samples().iter().map(|&x| p.responsivity_a_per_w * x).collect();
    let std = match p.noise {
        PdNoise::None => 0.0,
        PdNoise::Std(s) => s,
        PdNoise::Snr { snr_db, samples_per_symbol } => noise_std_for_snr(variance(&y), snr_db, samples_per_symbol),
    };
    if std > 0.0 {
        let normal = Normal::new(0.0, std).map_err(|e| invalid(e.to_string()))?;
        let mut rng = seed::rng(seed);
        y.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }
    w.with_samples(y)
}

/// Laser, fiber and photodiode with the settings needed to run them.
#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub vcsel: VcselParams,
    pub fiber: FiberParams,
    pub pd: PdParams,
    /// Ambient temperature, K.
    pub t_amb: f64,
    pub integrate: IntegrateOptions,
}

impl Link {
    pub fn simulate(&self, drive: &Waveform, seed: u64) -> Result<Waveform> {
        let light = integrate_with(&self.vcsel, drive, self.t_amb, seed::derive(seed, "rin"), &self.integrate)?;
        let light = fiber_apply(&self.fiber, &light)?;
        pd_detect(&self.pd, &light, seed::derive(seed, "pd"))
    }
}

/// Rate-equation laser, fiber and photodiode in sequence.
pub fn link_simulate(
    vcsel: &VcselParams,
    fiber: &FiberParams,
    pd: &PdParams,
    drive: &Waveform,
    t_amb: f64,
    seed: u64,
) -> Result<Waveform> {
    Link { vcsel: vcsel.clone(), fiber: fiber.clone(), pd: pd.clone(), t_amb, integrate: IntegrateOptions::default() }
        .simulate(drive, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passthrough_is_identity() {
        let w = Waveform::new(1e9, vec![0.0, 1.0, 3.0, -2.0]).unwrap();
        assert_eq!(fiber_apply(&FiberParams::passthrough(), &w).unwrap(), w);
    }

    #[test]
    fn dc_attenuation() {
        let f = FiberParams { length_m: 100.0, attenuation_db_per_km: 2.0, f3db_hz: 20e9 };
        let w = Waveform::constant(200e9, 1.5, 300).unwrap();
        let y = fiber_apply(&f, &w).unwrap();
        // 100 m at 2 dB/km is 0.2 dB
        let expect = 1.5 * 10f64.powf(-0.2 / 10.0);
        for v in y.samples() {
            assert!((v - expect).abs() < 1e-12, "{v} {expect}");
        }
    }

    #[test]
    fn undersampled_rejected() {
        let f = FiberParams { length_m: 0.0, attenuation_db_per_km: 0.0, f3db_hz: 20e9 };
        let w = Waveform::constant(60e9, 1.0, 10).unwrap();
        assert!(fiber_apply(&f, &w).is_err());
    }

    #[test]
    fn adjoint_matches_transpose() {
        let taps = gaussian_taps(15e9, 100e9);
        let x: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        let g: Vec<f64> = (0..40).map(|i| ((i * 13 % 7) as f64) - 3.0).collect();
        let lhs: f64 = fir_same(&x, &taps).iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = fir_same_adjoint(&g, &taps).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
    }
}
