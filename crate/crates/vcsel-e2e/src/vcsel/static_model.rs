use serde::Serialize;

use super::params::VcselParams;
use crate::error::{invalid, Error, Result};

/// Steady-state operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub current_ma: f64,
    /// Carrier density, m^-3.
    pub n: f64,
    /// Photon density, m^-3.
    pub s: f64,
    /// Internal temperature, K.
    pub t_int: f64,
    pub power_mw: f64,
    pub voltage_v: f64,
}

/// Light-current-voltage sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StaticCurve {
    pub current_ma: Vec<f64>,
    pub power_mw: Vec<f64>,
    pub voltage_v: Vec<f64>,
}

/// Static figures of merit extracted from a [`StaticCurve`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FiguresOfMerit {
    pub threshold_ma: f64,
    /// Slope efficiency, W/A.
    pub slope_w_per_a: f64,
    /// Current of peak power, absent when power is still rising at the end.
    pub rollover_ma: Option<f64>,
    /// Local dV/dI per curve point, ohm.
    pub diff_resistance_ohm: Vec<f64>,
}

const MAX_FIXED_POINT_ITERS: usize = 200;

/// Photon density solving dS/dt = 0 for carrier density `n`.
fn photon_density(p: &VcselParams, n: f64, n_tr: f64, g0: f64) -> f64 {
    let gain = p.confinement * p.v_g * g0;
    let spont = p.confinement * p.beta_sp * n / p.tau_n;
    let a = p.eps / p.tau_p;
    let b = 1.0 / p.tau_p - gain * (n - n_tr) - spont * p.eps;
    let c = -spont;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    if b > 0.0 {
        -2.0 * c / (b + disc)
    } else if a > 0.0 {
        (-b + disc) / (2.0 * a)
    } else {
        f64::INFINITY
    }
}

/// Steady (N, S) at fixed internal temperature.
pub(crate) fn steady_ns(p: &VcselParams, i_ma: f64, t_k: f64) -> (f64, f64) {
    if i_ma <= 0.0 {
        return (0.0, 0.0);
    }
    let at = p.at(t_k);
    let src = p.injection(i_ma);
    let (mut lo, mut hi) = (0.0, src * p.tau_n + 1.0);
    for _ in 0..200 {
        let n = 0.5 * (lo + hi);
        let s = photon_density(p, n, at.n_tr, at.g0);
        let g = at.g0 * (n - at.n_tr) / (1.0 + p.eps * s);
        let residual = n / p.tau_n + p.v_g * g * s - src;
        if !(residual <= 0.0) {
            hi = n;
        } else {
            lo = n;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let n = 0.5 * (lo + hi);
    (n, photon_density(p, n, at.n_tr, at.g0))
}

/// Optical power at fixed internal temperature.
pub(crate) fn power_at(p: &VcselParams, i_ma: f64, t_k: f64) -> f64 {
    let (_, s) = steady_ns(p, i_ma, t_k);
    p.power_mw(s, p.at(t_k).eta_d)
}

/// Coupled electrical, optical and thermal steady state.
pub fn operating_point(p: &VcselParams, i_ma: f64, t_amb: f64) -> Result<OperatingPoint> {
    if !(i_ma >= 0.0) {
        return Err(invalid(format!("current must be non-negative, got {i_ma}")));
    }
    let v = p.voltage(i_ma);
    let mut t = t_amb;
    for _ in 0..MAX_FIXED_POINT_ITERS {
        let (n, s) = steady_ns(p, i_ma, t);
        let power = p.power_mw(s, p.at(t).eta_d);
        let t_new = t_amb + p.r_th * (i_ma * v - power);
        if (t_new - t).abs() < 1e-9 {
            return Ok(OperatingPoint { current_ma: i_ma, n, s, t_int: t_new, power_mw: power, voltage_v: v });
        }
        t = 0.5 * (t + t_new);
    }
    Err(Error::NoConvergence { what: "thermal fixed point", iterations: MAX_FIXED_POINT_ITERS })
}

/// Internal temperature reached at a constant drive.
pub fn junction_temperature(p: &VcselParams, i_ma: f64, t_amb: f64) -> Result<f64> {
    Ok(operating_point(p, i_ma.max(0.0), t_amb)?.t_int)
}

pub fn static_iv(p: &VcselParams, currents_ma: &[f64], t_amb: f64) -> Result<StaticCurve> {
    if currents_ma.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("currents must be strictly increasing"));
    }
    let mut c = StaticCurve { current_ma: Vec::new(), power_mw: Vec::new(), voltage_v: Vec::new() };
    for &i in currents_ma {
        let op = operating_point(p, i, t_amb)?;
        c.current_ma.push(i);
        c.power_mw.push(op.power_mw);
        c.voltage_v.push(op.voltage_v);
    }
    Ok(c)
}

impl StaticCurve {
    pub fn csv_rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.current_ma.len()).map(|i| vec![self.current_ma[i], self.power_mw[i], self.voltage_v[i]])
    }
}

/// Bounds of the above-threshold fit region as fractions of peak power.
const FIT_LOW: f64 = 0.05;
const FIT_HIGH: f64 = 0.3;

pub fn figures_of_merit(c: &StaticCurve) -> Result<FiguresOfMerit> {
    let n = c.current_ma.len();
    if n < 3 || c.power_mw.len() != n || c.voltage_v.len() != n {
        return Err(invalid("curve needs at least three consistent points"));
    }
    let peak = (0..n).max_by(|&a, &b| c.power_mw[a].total_cmp(&c.power_mw[b])).unwrap_or(0);
    let p_max = c.power_mw[peak];
    if !(p_max > 0.0) {
        return Err(invalid("curve never lases"));
    }
    let fit: Vec<usize> =
        (0..=peak).filter(|&i| c.power_mw[i] >= FIT_LOW * p_max && c.power_mw[i] <= FIT_HIGH * p_max).collect();
    if fit.len() < 2 {
        return Err(invalid("too few points in the linear region; refine the current grid"));
    }
    let m = fit.len() as f64;
    let mx = fit.iter().map(|&i| c.current_ma[i]).sum::<f64>() / m;
    let my = fit.iter().map(|&i| c.power_mw[i]).sum::<f64>() / m;
    let sxy: f64 = fit.iter().map(|&i| (c.current_ma[i] - mx) * (c.power_mw[i] - my)).sum();
    let sxx: f64 = fit.iter().map(|&i| (c.current_ma[i] - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let threshold = mx - my / slope;
    let rollover = (peak + 1 < n).then(|| c.current_ma[peak]);
    let diff_resistance = (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (c.voltage_v[b] - c.voltage_v[a]) / ((c.current_ma[b] - c.current_ma[a]) * 1e-3)
        })
        .collect();
    Ok(FiguresOfMerit {
        threshold_ma: threshold,
        slope_w_per_a: slope,
        rollover_ma: rollover,
        diff_resistance_ohm: diff_resistance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_current() {
        let p = VcselParams::default_850();
        let op = operating_point(&p, 0.0, 298.15).unwrap();
        assert_eq!(op.power_mw, 0.0);
        assert_eq!(op.voltage_v, p.v_j);
    }

    #[test]
    fn constructed_athermal_curve() {
        let i: Vec<f64> = (0..=20).map(|k| 0.5 * k as f64).collect();
        let c = StaticCurve {
            power_mw: i.iter().map(|&x| (0.5 * (x - 1.0)).max(0.0)).collect(),
            voltage_v: i.iter().map(|&x| 1.6 + x * 1e-3 * 80.0).collect(),
            current_ma: i,
        };
        let f = figures_of_merit(&c).unwrap();
        assert!((f.threshold_ma - 1.0).abs() < 1e-9);
        assert!((f.slope_w_per_a - 0.5).abs() < 1e-12);
        assert!(f.rollover_ma.is_none());
        assert!(f.diff_resistance_ohm.iter().all(|r| (r - 80.0).abs() < 1e-6));
    }

    #[test]
    fn rejects_decreasing_currents() {
        assert!(static_iv(&VcselParams::default_850(), &[1.0, 0.5], 300.0).is_err());
    }
}
