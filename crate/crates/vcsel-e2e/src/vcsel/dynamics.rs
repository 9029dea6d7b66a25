use rand_distr::{Distribution, StandardNormal};

use super::params::VcselParams;
use super::static_model::{power_at, steady_ns};
use crate::error::{Error, Result};
use crate::seed;
use crate::signal::Waveform;

/// Internal state of the laser.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VcselState {
    /// Carrier density, m^-3.
    pub n: f64,
    /// Photon density, m^-3.
    pub s: f64,
    /// Internal temperature, K.
    pub t_int: f64,
}

/// How the internal temperature evolves during integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThermalMode {
    /// First-order thermal low-pass driven by dissipated power.
    Dynamic,
    /// Internal temperature pinned at the given value (K).
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrateOptions {
    /// Largest internal RK4 step, s.
    pub max_step: f64,
    pub thermal: ThermalMode,
    /// Starting state; `None` starts from the steady state of the first
    /// sample with a temperature balanced against the mean dissipation.
    pub initial: Option<VcselState>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self { max_step: 1e-12, thermal: ThermalMode::Dynamic, initial: None }
    }
}

struct Derivative {
    dn: f64,
    ds: f64,
    dt: f64,
}

fn derivative(p: &VcselParams, i_ma: f64, x: &VcselState, t_amb: f64, dynamic: bool) -> Derivative {
    let at = p.at(x.t_int);
    let g = at.g0 * (x.n - at.n_tr) / (1.0 + p.eps * x.s);
    let stim = p.v_g * g * x.s;
    let dn = p.injection(i_ma) - x.n / p.tau_n - stim;
    let ds = p.confinement * stim - x.s / p.tau_p + p.confinement * p.beta_sp * x.n / p.tau_n;
    let dt = if dynamic {
        let dissipated = i_ma * p.voltage(i_ma) - p.power_mw(x.s, at.eta_d);
        (t_amb + p.r_th * dissipated - x.t_int) / p.tau_th
    } else {
        0.0
    };
    Derivative { dn, ds, dt }
}

fn axpy(x: &VcselState, h: f64, d: &Derivative) -> VcselState {
    VcselState { n: x.n + h * d.dn, s: x.s + h * d.ds, t_int: x.t_int + h * d.dt }
}

/// Temperature balancing the mean dissipation of `drive` at quasi-static power.
fn balanced_temperature(p: &VcselParams, drive: &[f64], t_amb: f64) -> f64 {
    if p.r_th == 0.0 || drive.is_empty() {
        return t_amb;
    }
    let stride = (drive.len() / 500).max(1);
    let probe: Vec<f64> = drive.iter().step_by(stride).map(|&i| i.max(0.0)).collect();
    let mut t = t_amb;
    for _ in 0..60 {
        let diss = probe.iter().map(|&i| i * p.voltage(i) - power_at(p, i, t)).sum::<f64>() / probe.len() as f64;
        t = 0.5 * t + 0.5 * (t_amb + p.r_th * diss);
    }
    t
}

/// Initial state used by [`integrate_with`] when none is supplied.
pub fn initial_state(p: &VcselParams, drive: &[f64], t_amb: f64, thermal: ThermalMode) -> VcselState {
    let t_int = match thermal {
        ThermalMode::Dynamic => balanced_temperature(p, drive, t_amb),
        ThermalMode::Fixed(t) => t,
    };
    let (n, s) = steady_ns(p, drive.first().copied().unwrap_or(0.0), t_int);
    VcselState { n, s, t_int }
}

/// Large-signal response to a drive current waveform (mA), returning optical
/// power (mW) at the drive sample rate.
pub fn integrate(p: &VcselParams, drive: &Waveform, t_amb: f64, seed: u64) -> Result<Waveform> {
    integrate_with(p, drive, t_amb, seed, &IntegrateOptions::default())
}

pub fn integrate_with(
    p: &VcselParams,
    drive: &Waveform,
    t_amb: f64,
    seed: u64,
    opts: &IntegrateOptions,
) -> Result<Waveform> {
    let x = drive.samples();
    let dt = drive.dt();
    let sub = (dt / opts.max_step).ceil().max(1.0) as usize;
    let h = dt / sub as f64;
    let dynamic = matches!(opts.thermal, ThermalMode::Dynamic);

    let i_peak = x.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
    let n_bound = 1e3 * (p.injection(i_peak) * p.tau_n + 2.0 * p.n_tr);
    let s_bound = 1e3 * (p.confinement * p.tau_p * p.injection(i_peak) + 1.0);

    let mut state = opts.initial.unwrap_or_else(|| initial_state(p, x, t_amb, opts.thermal));
    let mut out = Vec::with_capacity(x.len());
    for (idx, &i_ma) in x.iter().enumerate() {
        for _ in 0..sub {
            let k1 = derivative(p, i_ma, &state, t_amb, dynamic);
            let k2 = derivative(p, i_ma, &axpy(&state, 0.5 * h, &k1), t_amb, dynamic);
            let k3 = derivative(p, i_ma, &axpy(&state, 0.5 * h, &k2), t_amb, dynamic);
            let k4 = derivative(p, i_ma, &axpy(&state, h, &k3), t_amb, dynamic);
            state.n += h / 6.0 * (k1.dn + 2.0 * k2.dn + 2.0 * k3.dn + k4.dn);
            state.s += h / 6.0 * (k1.ds + 2.0 * k2.ds + 2.0 * k3.ds + k4.ds);
            state.t_int += h / 6.0 * (k1.dt + 2.0 * k2.dt + 2.0 * k3.dt + k4.dt);
            state.n = state.n.max(0.0);
            state.s = state.s.max(0.0);
        }
        if !(state.n <= n_bound && state.s <= s_bound && state.t_int.is_finite()) {
            return Err(Error::Unstable {
                sample: idx,
                detail: format!(
                    "N={:.3e} (bound {n_bound:.3e}), S={:.3e} (bound {s_bound:.3e}), step {h:.3e} s",
                    state.n, state.s
                ),
            });
        }
        out.push(p.power_mw(state.s, p.at(state.t_int).eta_d));
    }

    if p.rin_std > 0.0 {
        let mut rng = seed::rng(seed);
        for v in &mut out {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = (*v * (1.0 + p.rin_std * z)).max(0.0);
        }
    }
    Waveform::new(drive.sample_rate(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_pumping_no_light() {
        let p = VcselParams::default_850();
        let d = Waveform::constant(280e9, 0.0, 200).unwrap();
        let y = integrate(&p, &d, 298.15, 0).unwrap();
        assert!(y.samples().iter().all(|&v| v.abs() < 1e-3));
    }

    #[test]
    fn unstable_step_reported() {
        let p = VcselParams::default_850();
        let d = Waveform::constant(1e9, 8.0, 10).unwrap();
        let opts = IntegrateOptions { max_step: 1e-9, ..Default::default() };
        let start = VcselState { n: 3e24, s: 1e21, t_int: 300.0 };
        let opts = IntegrateOptions { initial: Some(start), ..opts };
        assert!(matches!(integrate_with(&p, &d, 298.15, 0, &opts), Err(Error::Unstable { .. })));
    }
}
