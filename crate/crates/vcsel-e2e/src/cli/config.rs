use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{FiberParams, Link, PdNoise, PdParams};
use crate::compensate::{DpdConfig, EqualizerConfig, PruneConfig};
use crate::e2e::{AeConfig, ReceiverConfig, TrainableReceiver};
use crate::error::{Error, Result};
use crate::signal::PamConfig;
use crate::surrogate::TdnnConfig;
use crate::sweep::Budget;
use crate::vcsel::{celsius, junction_temperature, profile, IntegrateOptions, ThermalMode, VcselParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Iv,
    S21,
    Eye,
    FitVolterra,
    FitTdnn,
    Equalizer,
    Dpd,
    Ae,
    AeTemp,
    DeReceiver,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Self::Iv,
        Self::S21,
        Self::Eye,
        Self::FitVolterra,
        Self::FitTdnn,
        Self::Equalizer,
        Self::Dpd,
        Self::Ae,
        Self::AeTemp,
        Self::DeReceiver,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Iv => "iv",
            Self::S21 => "s21",
            Self::Eye => "eye",
            Self::FitVolterra => "fit-volterra",
            Self::FitTdnn => "fit-tdnn",
            Self::Equalizer => "equalizer",
            Self::Dpd => "dpd",
            Self::Ae => "ae",
            Self::AeTemp => "ae-temp",
            Self::DeReceiver => "de-receiver",
        }
    }
}

/// How the laser's internal temperature is treated in large-signal runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thermal {
    Dynamic,
    /// Held at the static junction temperature of the bias point.
    Pinned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    pub temperature_c: f64,
    pub bias_ma: f64,
    pub baud: f64,
    pub sps: usize,
    /// PAM levels as drive offsets from the bias, mA, ascending.
    pub levels_ma: Vec<f64>,
    pub fiber: FiberParams,
    pub responsivity_a_per_w: f64,
    pub thermal: Thermal,
    pub max_step_s: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            temperature_c: 25.0,
            bias_ma: 8.0,
            baud: 28e9,
            sps: 10,
            levels_ma: vec![-4.5, -1.5, 1.5, 4.5],
            fiber: FiberParams::passthrough(),
            responsivity_a_per_w: 0.6,
            thermal: Thermal::Dynamic,
            max_step_s: 1e-12,
        }
    }
}

impl LinkConfig {
    pub fn sample_rate(&self) -> f64 {
        self.baud * self.sps as f64
    }

    pub fn order(&self) -> usize {
        self.levels_ma.len()
    }

    pub fn pam(&self) -> Result<PamConfig> {
        PamConfig::new(self.order(), self.baud, self.sps, self.bias_ma, self.levels_ma.clone())
    }

    pub fn t_amb(&self) -> f64 {
        celsius(self.temperature_c)
    }

    pub fn integrate_options(&self, vcsel: &VcselParams) -> Result<IntegrateOptions> {
        let thermal = match self.thermal {
            Thermal::Dynamic => ThermalMode::Dynamic,
            Thermal::Pinned => ThermalMode::Fixed(junction_temperature(vcsel, self.bias_ma, self.t_amb())?),
        };
        Ok(IntegrateOptions { max_step: self.max_step_s, thermal, initial: None })
    }

    pub fn link(&self, vcsel: &VcselParams, noise: PdNoise) -> Result<Link> {
        Ok(Link {
            vcsel: vcsel.clone(),
            fiber: self.fiber.clone(),
            pd: PdParams { responsivity_a_per_w: self.responsivity_a_per_w, noise },
            t_amb: self.t_amb(),
            integrate: self.integrate_options(vcsel)?,
        })
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !self.temperature_c.is_finite() || self.temperature_c <= -273.15 {
            v.push(format!("link.temperature_c must be above absolute zero (got {})", self.temperature_c));
        }
        if !(self.bias_ma > 0.0 && self.bias_ma.is_finite()) {
            v.push(format!("link.bias_ma must be positive (got {})", self.bias_ma));
        }
        if !(self.baud > 0.0 && self.baud.is_finite()) {
            v.push(format!("link.baud must be positive (got {})", self.baud));
        }
        if self.sps == 0 {
            v.push("link.sps must be at least 1".into());
        }
        if !matches!(self.order(), 2 | 4 | 8) {
            v.push(format!("link.levels_ma must hold 2, 4 or 8 levels (got {})", self.order()));
        }
        if self.levels_ma.windows(2).any(|w| !(w[1] > w[0])) {
            v.push("link.levels_ma must be strictly ascending".into());
        }
        if !(self.responsivity_a_per_w > 0.0) {
            v.push(format!("link.responsivity_a_per_w must be positive (got {})", self.responsivity_a_per_w));
        }
        if !(self.max_step_s > 0.0) {
            v.push(format!("link.max_step_s must be positive (got {})", self.max_step_s));
        }
        v.extend(self.fiber.violations().into_iter().map(|s| format!("link.{s}")));
        if self.fiber.f3db_hz.is_finite() && self.sample_rate() < 4.0 * self.fiber.f3db_hz {
            v.push("link.fiber.f3db_hz must be at most a quarter of baud * sps".into());
        }
        v
    }
}

/// Monte-Carlo error-rate sweep settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// SNR grid in dB; empty selects the experiment's own grid.
    pub snr_db: Vec<f64>,
    pub min_errors: u64,
    pub max_symbols: u64,
    pub chunk: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let b = Budget::default();
        Self { snr_db: Vec::new(), min_errors: b.min_errors, max_symbols: b.max_symbols, chunk: b.chunk }
    }
}

impl SweepConfig {
    pub fn budget(&self) -> Budget {
        Budget { min_errors: self.min_errors, max_symbols: self.max_symbols, chunk: self.chunk }
    }

    pub fn grid(&self, lo: f64, hi: f64, step: f64) -> Vec<f64> {
        if !self.snr_db.is_empty() {
            return self.snr_db.clone();
        }
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + step * i as f64).collect()
    }

    fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            v.push("sweep.snr_db must be finite".into());
        }
        if self.snr_db.windows(2).any(|w| !(w[1] > w[0])) {
            v.push("sweep.snr_db must be strictly ascending".into());
        }
        if self.max_symbols == 0 {
            v.push("sweep.max_symbols must be at least 1".into());
        }
        if self.chunk == 0 {
            v.push("sweep.chunk must be at least 1".into());
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IvConfig {
    pub temperatures_c: Vec<f64>,
    pub i_max_ma: f64,
    pub points: usize,
}

impl Default for IvConfig {
    fn default() -> Self {
        Self { temperatures_c: vec![25.0, 55.0, 85.0], i_max_ma: 25.0, points: 251 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct S21Config {
    pub bias_ma: Vec<f64>,
    pub f_max_hz: f64,
    pub points: usize,
    /// Biases re-measured by tone perturbation of the rate equations.
    pub numeric_bias_ma: Vec<f64>,
    /// Tones per numeric curve, spread up to 1.5 f_r.
    pub numeric_points: usize,
}

impl Default for S21Config {
    fn default() -> Self {
        Self {
            bias_ma: vec![2.0, 4.0, 7.0, 10.0],
            f_max_hz: 60e9,
            points: 601,
            numeric_bias_ma: vec![4.0, 7.0],
            numeric_points: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EyeConfig {
    pub symbols: usize,
    pub span_ui: usize,
    /// Leading symbols dropped before folding.
    pub skip_symbols: usize,
    /// Receiver noise at this SNR; absent for a noiseless eye.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

impl Default for EyeConfig {
    fn default() -> Self {
        Self { symbols: 2000, span_ui: 2, skip_symbols: 100, snr_db: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Volterra,
    Tdnn,
}

/// Identification stimulus, model sizes and the PAM test drive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub std_ma: f64,
    pub samples: usize,
    pub lag_start: usize,
    pub memory: usize,
    pub tdnn: TdnnConfig,
    pub test_symbols: usize,
    /// Samples of the test waveforms written out.
    pub export_samples: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            std_ma: 6.0,
            samples: 1_000_000,
            lag_start: 0,
            memory: 32,
            tdnn: TdnnConfig::default(),
            test_symbols: 20_000,
            export_samples: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EqualizerSection {
    /// Symbols in the received record.
    pub symbols: usize,
    pub train_symbols: usize,
    /// Symbols after the training block used to pick the pruned network.
    pub validation_symbols: usize,
    pub network: EqualizerConfig,
    pub prune: PruneConfig,
}

impl Default for EqualizerSection {
    fn default() -> Self {
        Self {
            symbols: 60_000,
            train_symbols: 30_000,
            validation_symbols: 5000,
            network: EqualizerConfig::default(),
            prune: PruneConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpdSection {
    pub train_symbols: usize,
    pub test_symbols: usize,
    pub surrogate: SurrogateKind,
    /// Known linear transmitter used as a sanity check of the ILA loop.
    pub fir_taps: Vec<f64>,
    pub network: DpdConfig,
}

impl Default for DpdSection {
    fn default() -> Self {
        Self {
            train_symbols: 20_000,
            test_symbols: 5000,
            surrogate: SurrogateKind::Volterra,
            fir_taps: vec![1.0, 0.4, 0.1],
            network: DpdConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AeChannel {
    /// TDNN surrogate of the laser plus fiber and photodiode.
    Surrogate,
    /// Rectangular pulses and AWGN only.
    Awgn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AeSection {
    pub channel: AeChannel,
    pub eval_symbols: usize,
    /// Training temperatures of the conditioned models (`ae-temp`).
    pub train_temperatures_c: Vec<f64>,
    /// Temperatures at which `ae-temp` evaluates.
    pub eval_temperatures_c: Vec<f64>,
    pub network: AeConfig,
}

impl Default for AeSection {
    fn default() -> Self {
        Self {
            channel: AeChannel::Surrogate,
            eval_symbols: 100_000,
            train_temperatures_c: vec![5.0, 95.0],
            eval_temperatures_c: vec![5.0, 50.0, 95.0],
            network: AeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeSection {
    pub sps: usize,
    pub levels: Vec<f64>,
    pub symbols: usize,
    pub train_symbols: usize,
    pub receiver: ReceiverConfig,
}

impl Default for DeSection {
    fn default() -> Self {
        Self {
            sps: 4,
            levels: vec![-3.0, -1.0, 1.0, 3.0],
            symbols: 50_000,
            train_symbols: 25_000,
            receiver: ReceiverConfig::default(),
        }
    }
}

/// One experiment run. Parsed strictly: unknown keys anywhere are errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub profile: String,
    /// Root of every random stream in the run.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Overrides applied on top of the named profile.
    #[serde(default)]
    pub vcsel: toml::Table,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub iv: IvConfig,
    #[serde(default)]
    pub s21: S21Config,
    #[serde(default)]
    pub eye: EyeConfig,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub equalizer: EqualizerSection,
    #[serde(default)]
    pub dpd: DpdSection,
    #[serde(default)]
    pub ae: AeSection,
    #[serde(default)]
    pub de: DeSection,
}

/// Command-line overrides.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Symbol cap per SNR point.
    pub budget: Option<u64>,
}

const REQUIRED: [&str; 3] = ["experiment", "profile", "seed"];

fn nested_seeds(table: &toml::Table, path: &str, out: &mut Vec<String>) {
    for (k, v) in table {
        let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
        if let toml::Value::Table(t) = v {
            nested_seeds(t, &here, out);
        } else if k == "seed" && !path.is_empty() {
            out.push(format!("{here}: sub-experiment seeds are derived from the root seed and cannot be set"));
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates TOML text, collecting every violation found.
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Validation(vec![e.to_string()]))?;
        let mut v: Vec<String> = REQUIRED
            .iter()
            .filter(|k| !table.contains_key(**k))
            .map(|k| format!("missing required key `{k}`"))
            .collect();
        nested_seeds(&table, "", &mut v);
        let parsed = if v.iter().any(|m| m.starts_with("missing")) {
            None
        } else {
            match ExperimentConfig::deserialize(toml::Value::Table(table)) {
                Ok(c) => Some(c),
                Err(e) => {
                    v.push(e.to_string().trim().to_string());
                    None
                }
            }
        };
        if let Some(c) = &parsed {
            v.extend(c.violations());
        }
        match parsed {
            Some(c) if v.is_empty() => Ok(c),
            _ => Err(Error::Validation(v)),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.out_dir = Some(out.clone());
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(b) = o.budget {
            self.sweep.max_symbols = b;
        }
    }

    /// The named profile with `[vcsel]` overrides merged in.
    pub fn vcsel_params(&self) -> Result<VcselParams> {
        let base = profile(&self.profile).ok_or_else(|| Error::Validation(vec![unknown_profile(&self.profile)]))?;
        if self.vcsel.is_empty() {
            return Ok(base);
        }
        let mut t = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in &self.vcsel {
            t.insert(k.clone(), v.clone());
        }
        VcselParams::deserialize(toml::Value::Table(t))
            .map_err(|e| Error::Validation(vec![format!("vcsel: {}", e.to_string().trim())]))
    }

    /// Every constraint violated by the configuration. Never simulates.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match self.vcsel_params() {
            Ok(p) => v.extend(p.violations().into_iter().map(|s| format!("vcsel.{s}"))),
            Err(Error::Validation(e)) => v.extend(e),
            Err(e) => v.push(e.to_string()),
        }
        v.extend(self.link.violations());
        v.extend(self.sweep.violations());
        v.extend(self.section_violations());
        v
    }

    fn section_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let tagged = |v: &mut Vec<String>, tag: &str, list: Vec<String>| {
            v.extend(list.into_iter().map(|s| format!("{tag}: {s}")))
        };
        let surrogate = |v: &mut Vec<String>| {
            let s = &self.surrogate;
            if !(s.std_ma > 0.0) {
                v.push(format!("surrogate.std_ma must be positive (got {})", s.std_ma));
            }
            if s.memory == 0 {
                v.push("surrogate.memory must be at least 1".into());
            }
            if s.tdnn.hidden == 0 {
                v.push("surrogate.tdnn.hidden must be at least 1".into());
            }
            if s.samples <= s.tdnn.delays + 1 || s.samples <= s.lag_start + s.memory {
                v.push("surrogate.samples is shorter than the model memory".into());
            }
            if s.test_symbols < 4 {
                v.push("surrogate.test_symbols must be at least 4".into());
            }
            tagged(v, "surrogate.tdnn.train", s.tdnn.train.violations());
        };
        match self.experiment {
            Experiment::Iv => {
                if self.iv.temperatures_c.is_empty() {
                    v.push("iv.temperatures_c must not be empty".into());
                }
                if self.iv.points < 3 {
                    v.push("iv.points must be at least 3".into());
                }
                if !(self.iv.i_max_ma > 0.0) {
                    v.push(format!("iv.i_max_ma must be positive (got {})", self.iv.i_max_ma));
                }
            }
            Experiment::S21 => {
                let s = &self.s21;
                if s.bias_ma.is_empty() || s.bias_ma.iter().any(|b| !(*b > 0.0)) {
                    v.push("s21.bias_ma must list positive currents".into());
                }
                if !(s.f_max_hz > 0.0) || s.points < 2 {
                    v.push("s21 needs f_max_hz > 0 and at least 2 points".into());
                }
                if !s.numeric_bias_ma.is_empty() && s.numeric_points == 0 {
                    v.push("s21.numeric_points must be at least 1".into());
                }
            }
            Experiment::Eye => {
                if self.eye.span_ui == 0 {
                    v.push("eye.span_ui must be at least 1".into());
                }
                if self.eye.symbols < self.eye.skip_symbols + self.eye.span_ui {
                    v.push("eye.symbols must exceed skip_symbols by at least one window".into());
                }
            }
            Experiment::FitVolterra | Experiment::FitTdnn => surrogate(&mut v),
            Experiment::Equalizer => {
                let e = &self.equalizer;
                tagged(&mut v, "equalizer.network", e.network.violations());
                tagged(&mut v, "equalizer.prune", e.prune.violations());
                if e.train_symbols + e.validation_symbols >= e.symbols {
                    v.push("equalizer.symbols must exceed train_symbols + validation_symbols".into());
                }
            }
            Experiment::Dpd => {
                surrogate(&mut v);
                tagged(&mut v, "dpd.network", self.dpd.network.violations());
                if self.dpd.fir_taps.is_empty() || self.dpd.fir_taps[0] == 0.0 {
                    v.push("dpd.fir_taps must start with a non-zero tap".into());
                }
                if self.dpd.test_symbols < 4 {
                    v.push("dpd.test_symbols must be at least 4".into());
                }
            }
            Experiment::Ae | Experiment::AeTemp => {
                if self.ae.channel == AeChannel::Surrogate || self.experiment == Experiment::AeTemp {
                    surrogate(&mut v);
                }
                tagged(&mut v, "ae.network", self.ae.network.violations());
                if !self.ae.network.temperatures_c.is_empty() {
                    v.push("ae.network.temperatures_c is set from ae.train_temperatures_c".into());
                }
                if self.experiment == Experiment::AeTemp {
                    if self.ae.train_temperatures_c.is_empty() || self.ae.eval_temperatures_c.is_empty() {
                        v.push("ae-temp needs train_temperatures_c and eval_temperatures_c".into());
                    }
                    if self.ae.channel == AeChannel::Awgn {
                        v.push("ae-temp needs the surrogate channel".into());
                    }
                }
            }
            Experiment::DeReceiver => {
                let d = &self.de;
                let r = &d.receiver;
                tagged(&mut v, "de.receiver", r.violations(d.sps));
                if !matches!(d.levels.len(), 2 | 4 | 8) {
                    v.push(format!("de.levels must hold 2, 4 or 8 levels (got {})", d.levels.len()));
                }
                if d.sps == 0 {
                    v.push("de.sps must be at least 1".into());
                } else if r.violations(d.sps).is_empty() && d.levels.len() >= 2 {
                    if let Ok(rx) = TrainableReceiver::new(r, d.sps, d.levels.len(), 0) {
                        tagged(&mut v, "de.receiver.de", r.de.violations(rx.param_count()));
                    }
                }
                if d.train_symbols >= d.symbols {
                    v.push("de.symbols must exceed train_symbols".into());
                }
            }
        }
        v
    }
}

fn unknown_profile(name: &str) -> String {
    let known: Vec<&str> = crate::vcsel::profiles().into_iter().map(|(n, _)| n).collect();
    format!("profile `{name}` does not exist (known: {})", known.join(", "))
}
