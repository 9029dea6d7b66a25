use serde::{Deserialize, Serialize};

/// Elementary charge, C.
pub const Q: f64 = 1.602e-19;
/// Planck constant, J s.
pub const H: f64 = 6.626e-34;
/// Speed of light, m/s.
pub const C: f64 = 2.998e8;

/// Rate-equation, thermal and efficiency parameters of one VCSEL.
///
/// Currents are in mA, powers in mW and temperatures in K throughout the
/// crate; everything else is SI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcselParams {
    /// Differential quantum efficiency at `t0`.
    pub eta_d: f64,
    /// Lasing wavelength, m.
    pub lambda0: f64,
    /// Injection efficiency.
    pub eta_i: f64,
    /// Group velocity, m/s.
    pub v_g: f64,
    /// Differential gain at `t0`, m^2.
    pub g0: f64,
    /// Gain compression, m^3.
    pub eps: f64,
    /// Photon lifetime, s.
    pub tau_p: f64,
    /// Carrier lifetime, s.
    pub tau_n: f64,
    /// Transparency carrier density at `t0`, m^-3.
    pub n_tr: f64,
    /// Active volume, m^3.
    pub v_a: f64,
    /// Optical confinement factor.
    pub confinement: f64,
    /// Fraction of spontaneous emission coupled into the lasing mode.
    pub beta_sp: f64,
    /// Thermal impedance, K/mW.
    pub r_th: f64,
    /// Thermal time constant, s.
    pub tau_th: f64,
    /// Series resistance, ohm.
    pub r_s: f64,
    /// Junction voltage, V.
    pub v_j: f64,
    /// Quadratic transparency shift, 1/K^2.
    pub a_n: f64,
    /// Linear gain reduction, 1/K.
    pub a_g: f64,
    /// Linear efficiency reduction, 1/K.
    pub a_eta: f64,
    /// Reference temperature, K.
    pub t0: f64,
    /// Relative intensity noise std (fraction of instantaneous power).
    pub rin_std: f64,
    /// Damping floor, 1/s. Defaults to `1/tau_n` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping_floor: Option<f64>,
}

/// Temperature-adjusted quantities.
#[derive(Clone, Copy, Debug)]
pub(crate) struct AtTemperature {
    pub n_tr: f64,
    pub g0: f64,
    pub eta_d: f64,
}

impl VcselParams {
    /// 850 nm device with roll-over near 14 mA at 25 C and a resonance of
    /// roughly 20 GHz at mid bias.
    pub fn default_850() -> Self {
        Self {
            eta_d: 0.6,
            lambda0: 850e-9,
            eta_i: 0.8,
            v_g: C / 3.6,
            g0: 2e-19,
            eps: 9e-23,
            tau_p: 2e-12,
            tau_n: 1e-9,
            n_tr: 2e24,
            v_a: 1e-18,
            confinement: 0.04,
            beta_sp: 1e-4,
            r_th: 3.0,
            tau_th: 5e-7,
            r_s: 80.0,
            v_j: 1.6,
            a_n: 6e-4,
            a_g: 1e-3,
            a_eta: 2.5e-3,
            t0: 298.15,
            rin_std: 0.0,
            damping_floor: None,
        }
    }

    /// Same device with self-heating and all thermal coefficients removed.
    pub fn athermal_850() -> Self {
        Self { r_th: 0.0, a_n: 0.0, a_g: 0.0, a_eta: 0.0, ..Self::default_850() }
    }

    pub fn damping_floor(&self) -> f64 {
        self.damping_floor.unwrap_or(1.0 / self.tau_n)
    }

    /// Violated invariants, empty when the set is physically admissible.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let positive = [
            ("lambda0", self.lambda0),
            ("v_g", self.v_g),
            ("g0", self.g0),
            ("tau_p", self.tau_p),
            ("tau_n", self.tau_n),
            ("tau_th", self.tau_th),
            ("v_a", self.v_a),
            ("t0", self.t0),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be positive (got {x})"));
            }
        }
        for (name, x) in [("eta_d", self.eta_d), ("eta_i", self.eta_i), ("confinement", self.confinement)] {
            if !(x > 0.0 && x <= 1.0) {
                v.push(format!("{name} must lie in (0, 1] (got {x})"));
            }
        }
        let non_negative = [
            ("eps", self.eps),
            ("n_tr", self.n_tr),
            ("r_th", self.r_th),
            ("r_s", self.r_s),
            ("v_j", self.v_j),
            ("a_n", self.a_n),
            ("a_g", self.a_g),
            ("a_eta", self.a_eta),
            ("rin_std", self.rin_std),
        ];
        for (name, x) in non_negative {
            if !(x >= 0.0 && x.is_finite()) {
                v.push(format!("{name} must be non-negative (got {x})"));
            }
        }
        if !(self.beta_sp >= 0.0 && self.beta_sp <= 1.0) {
            v.push(format!("beta_sp must lie in [0, 1] (got {})", self.beta_sp));
        }
        if let Some(g) = self.damping_floor {
            if !(g >= 0.0 && g.is_finite()) {
                v.push(format!("damping_floor must be non-negative (got {g})"));
            }
        }
        v
    }

    pub(crate) fn at(&self, t_k: f64) -> AtTemperature {
        let dt = t_k - self.t0;
        AtTemperature {
            n_tr: self.n_tr * (1.0 + self.a_n * dt * dt),
            g0: (self.g0 * (1.0 - self.a_g * dt)).max(0.0),
            eta_d: (self.eta_d * (1.0 - self.a_eta * dt)).max(0.0),
        }
    }

    /// Output power in mW for photon density `s` at efficiency `eta_d`.
    pub(crate) fn power_mw(&self, s: f64, eta_d: f64) -> f64 {
        eta_d * (H * C / self.lambda0) * (self.v_a / self.confinement) * s / self.tau_p * 1e3
    }

    /// Carrier injection rate per unit volume for `i_ma`.
    pub(crate) fn injection(&self, i_ma: f64) -> f64 {
        self.eta_i * i_ma * 1e-3 / (Q * self.v_a)
    }

    /// Terminal voltage at `i_ma`.
    pub fn voltage(&self, i_ma: f64) -> f64 {
        self.v_j + i_ma * 1e-3 * self.r_s
    }

    /// Threshold carrier density at internal temperature `t_k`.
    pub fn threshold_density(&self, t_k: f64) -> f64 {
        let a = self.at(t_k);
        a.n_tr + 1.0 / (self.confinement * self.v_g * a.g0 * self.tau_p)
    }

    /// Threshold current in mA at internal temperature `t_k`, neglecting
    /// spontaneous coupling.
    pub fn threshold_ma(&self, t_k: f64) -> f64 {
        Q * self.v_a * self.threshold_density(t_k) / (self.eta_i * self.tau_n) * 1e3
    }
}

/// Named parameter sets.
pub fn profiles() -> Vec<(&'static str, VcselParams)> {
    vec![("default", VcselParams::default_850()), ("athermal", VcselParams::athermal_850())]
}

pub fn profile(name: &str) -> Option<VcselParams> {
    profiles().into_iter().find(|(n, _)| *n == name).map(|(_, p)| p)
}
