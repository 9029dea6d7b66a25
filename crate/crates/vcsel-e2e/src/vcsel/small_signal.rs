use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::dynamics::{integrate_with, IntegrateOptions, ThermalMode};
use super::params::{VcselParams, C, H, Q};
use super::static_model::{operating_point, power_at};
use crate::error::{invalid, Error, Result};
use crate::signal::Waveform;

/// Two-pole small-signal model linearised at a bias point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallSignal {
    pub bias_ma: f64,
    /// Internal temperature at the bias point, K.
    pub t_int: f64,
    /// Mean photon density, m^-3.
    pub s_bar: f64,
    pub f_r_hz: f64,
    /// Damping rate, 1/s.
    pub gamma_per_s: f64,
    /// Low-frequency gain, W/A.
    pub dc_gain: f64,
}

impl SmallSignal {
    /// Modulation response in W/A.
    pub fn response(&self, f_hz: f64) -> Complex64 {
        let fr2 = self.f_r_hz * self.f_r_hz;
        self.dc_gain * fr2 / Complex64::new(fr2 - f_hz * f_hz, self.gamma_per_s * f_hz / (2.0 * PI))
    }

    /// Normalised response in dB.
    pub fn s21_db(&self, f_hz: f64) -> f64 {
        20.0 * (self.response(f_hz).norm() / self.dc_gain).log10()
    }
}

pub fn small_signal(p: &VcselParams, bias_ma: f64, t_amb: f64) -> Result<SmallSignal> {
    let op = operating_point(p, bias_ma, t_amb)?;
    let threshold = p.threshold_ma(op.t_int);
    if !(bias_ma > threshold) {
        return Err(Error::BelowThreshold { bias_ma, threshold_ma: threshold });
    }
    let at = p.at(op.t_int);
    let s = op.s;
    let f_r = (p.v_g * at.g0 * s / (p.tau_p * (1.0 + p.eps * s))).sqrt() / (2.0 * PI);
    let k = 4.0 * PI * PI * (p.tau_p + p.eps / (p.v_g * at.g0));
    Ok(SmallSignal {
        bias_ma,
        t_int: op.t_int,
        s_bar: s,
        f_r_hz: f_r,
        gamma_per_s: k * f_r * f_r + p.damping_floor(),
        dc_gain: at.eta_d * p.eta_i * H * C / (p.lambda0 * Q),
    })
}

/// Normalised response over a frequency grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct S21Curve {
    pub bias_ma: f64,
    pub freq_hz: Vec<f64>,
    pub s21_db: Vec<f64>,
    /// First -3 dB crossing, linearly interpolated on the grid.
    pub f3db_hz: Option<f64>,
    /// Largest value of the curve, dB.
    pub peaking_db: f64,
}

impl S21Curve {
    fn from_points(bias_ma: f64, freq_hz: Vec<f64>, s21_db: Vec<f64>) -> Self {
        let mut f3db = None;
        for i in 1..freq_hz.len() {
            if s21_db[i] <= -3.0 && s21_db[i - 1] > -3.0 {
                let w = (-3.0 - s21_db[i - 1]) / (s21_db[i] - s21_db[i - 1]);
                f3db = Some(freq_hz[i - 1] + w * (freq_hz[i] - freq_hz[i - 1]));
                break;
            }
        }
        let peaking = s21_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { bias_ma, freq_hz, s21_db, f3db_hz: f3db, peaking_db: peaking }
    }
}

pub fn s21(p: &VcselParams, bias_ma: f64, t_amb: f64, f_grid: &[f64]) -> Result<S21Curve> {
    let ss = small_signal(p, bias_ma, t_amb)?;
    let db = f_grid.iter().map(|&f| ss.s21_db(f)).collect();
    Ok(S21Curve::from_points(bias_ma, f_grid.to_vec(), db))
}

/// Settings for the simulated small-signal measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationOptions {
    /// Tone amplitude as a fraction of the bias.
    pub depth: f64,
    pub sample_rate: f64,
    /// Time allowed for the relaxation transient to decay, s.
    pub settle: f64,
    /// Minimum observation time, s.
    pub observe: f64,
}

impl Default for PerturbationOptions {
    fn default() -> Self {
        Self { depth: 0.01, sample_rate: 500e9, settle: 3e-9, observe: 2e-9 }
    }
}

/// S21 measured by driving the rate equations with a small tone at each
/// frequency and demodulating the output. The internal temperature is held at
/// the bias point; the reference gain is the static slope at that temperature.
pub fn numeric_s21(
    p: &VcselParams,
    bias_ma: f64,
    t_amb: f64,
    f_grid: &[f64],
    opts: &PerturbationOptions,
) -> Result<S21Curve> {
    let op = operating_point(p, bias_ma, t_amb)?;
    let t_int = op.t_int;
    let delta = opts.depth * bias_ma;
    if !(delta > 0.0) {
        return Err(invalid("perturbation depth must be positive"));
    }
    let slope = (power_at(p, bias_ma + delta, t_int) - power_at(p, bias_ma - delta, t_int)) / (2.0 * delta);
    let integ = IntegrateOptions { thermal: ThermalMode::Fixed(t_int), ..Default::default() };
    let fs = opts.sample_rate;
    let mut db = Vec::with_capacity(f_grid.len());
    for &f in f_grid {
        if !(f > 0.0 && f < fs / 4.0) {
            return Err(invalid(format!("tone {f} Hz outside (0, fs/4)")));
        }
        let n_settle = (opts.settle * fs).ceil() as usize;
        let cycles = (opts.observe * f).ceil().max(1.0);
        let n_obs = (cycles / f * fs).round() as usize;
        let drive: Vec<f64> =
            (0..n_settle + n_obs).map(|k| bias_ma + delta * (2.0 * PI * f * k as f64 / fs).sin()).collect();
        let y = integrate_with(p, &Waveform::new(fs, drive)?, t_amb, 0, &integ)?;
        let (mut re, mut im) = (0.0, 0.0);
        for k in n_settle..n_settle + n_obs {
            let ph = 2.0 * PI * f * k as f64 / fs;
            re += y.samples()[k] * ph.sin();
            im += y.samples()[k] * ph.cos();
        }
        let amp = 2.0 * (re * re + im * im).sqrt() / n_obs as f64;
        db.push(20.0 * (amp / (slope * delta)).log10());
    }
    Ok(S21Curve::from_points(bias_ma, f_grid.to_vec(), db))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn below_threshold_rejected() {
        let p = VcselParams::default_850();
        assert!(matches!(small_signal(&p, 0.2, 298.15), Err(Error::BelowThreshold { .. })));
    }

    #[test]
    fn dc_is_zero_db() {
        let p = VcselParams::default_850();
        let c = s21(&p, 6.0, 298.15, &[0.0, 1e9]).unwrap();
        assert_eq!(c.s21_db[0], 0.0);
    }

    #[test]
    fn peak_ratio_at_resonance() {
        let p = VcselParams::default_850();
        let ss = small_signal(&p, 5.0, 298.15).unwrap();
        let ratio = ss.response(ss.f_r_hz).norm() / ss.dc_gain;
        let expect = 2.0 * PI * ss.f_r_hz / ss.gamma_per_s;
        assert!((ratio / expect - 1.0).abs() < 1e-12);
    }
}
