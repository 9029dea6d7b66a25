//! Named experiments driven by strict TOML configs.
//!
//! A config names the experiment, a laser profile and a root seed; every
//! other section is optional and falls back to the defaults of its type:
//!
//! ```toml
//! experiment = "iv"
//! profile = "default"
//! seed = 1
//!
//! [iv]
//! temperatures_c = [25.0, 55.0, 85.0]
//! ```
//!
//! A run writes CSV tables, `report.json` (metrics) and `manifest.json`
//! (effective config, its hash, seed, version and the hash of every file)
//! into the output directory. Identical configs give byte-identical output.

mod artifacts;
mod config;
mod experiments;

use std::path::{Path, PathBuf};

use serde_json::Value;

pub use artifacts::sha256_hex;
pub use config::{
    AeChannel, AeSection, DeSection, DpdSection, EqualizerSection, Experiment, ExperimentConfig, EyeConfig, IvConfig,
    LinkConfig, Overrides, S21Config, SurrogateConfig, SurrogateKind, SweepConfig, Thermal,
};
pub use experiments::{theoretical_snr_at, DE_TARGETS};

use crate::error::{Error, Result};
use crate::nncore::{from_json, Network};
use crate::vcsel::{profiles, VcselParams};
use artifacts::{Artifacts, Metrics};
use experiments::Run;

/// What a finished run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    /// `(file, sha256)` for every artifact except the manifest.
    pub files: Vec<(String, String)>,
    /// The metrics written to `report.json`.
    pub metrics: Value,
}

fn strip_seeds(t: &mut toml::Table) {
    t.remove("seed");
    for (_, v) in t.iter_mut() {
        if let toml::Value::Table(inner) = v {
            strip_seeds(inner);
        }
    }
}

/// The config as run, in a form [`ExperimentConfig::parse`] accepts. The
/// output directory and the derived sub-seeds are left out so neither
/// enters the hash.
pub fn effective_toml(cfg: &ExperimentConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.out_dir = None;
    let mut t = toml::Table::try_from(&c).map_err(|e| Error::Config(e.to_string()))?;
    for (_, v) in t.iter_mut() {
        if let toml::Value::Table(inner) = v {
            strip_seeds(inner);
        }
    }
    toml::to_string(&t).map_err(|e| Error::Config(e.to_string()))
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()))
}

/// Runs an already validated config.
pub fn run_config(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let text = effective_toml(cfg)?;
    let hash = sha256_hex(text.as_bytes());
    let dir = out_dir(cfg);
    let art = Artifacts::create(&dir, cfg.experiment.name(), hash, cfg.seed)?;
    let mut run = Run { cfg, vcsel: cfg.vcsel_params()?, art, m: Metrics::default() };
    match cfg.experiment {
        Experiment::Iv => experiments::iv(&mut run)?,
        Experiment::S21 => experiments::s21_experiment(&mut run)?,
        Experiment::Eye => experiments::eye(&mut run)?,
        Experiment::FitVolterra => experiments::fit_volterra_experiment(&mut run)?,
        Experiment::FitTdnn => experiments::fit_tdnn_experiment(&mut run)?,
        Experiment::Equalizer => experiments::equalizer(&mut run)?,
        Experiment::Dpd => experiments::dpd(&mut run)?,
        Experiment::Ae => experiments::ae(&mut run)?,
        Experiment::AeTemp => experiments::ae_temp(&mut run)?,
        Experiment::DeReceiver => experiments::de_receiver(&mut run)?,
    }
    let metrics = run.m.0;
    let files = run.art.finish(metrics.clone(), &text)?;
    Ok(RunSummary { out_dir: dir, files, metrics: Value::Object(metrics) })
}

/// Loads `path`, applies command-line overrides and runs it.
pub fn run(path: &Path, overrides: &Overrides) -> Result<RunSummary> {
    let mut cfg = ExperimentConfig::load(path)?;
    cfg.apply(overrides);
    run_config(&cfg)
}

/// Parses and checks a config without simulating anything.
pub fn validate(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}

/// Names and parameters of the built-in laser profiles.
pub fn list_profiles() -> Vec<(&'static str, VcselParams)> {
    profiles()
}

/// Reads a network written by a run (`equalizer.json`, `decoder.json`, ...).
pub fn load_network(path: &Path) -> Result<Network> {
    let text = std::fs::read_to_string(path)?;
    let doc: Value = serde_json::from_str(&text)?;
    let body = doc.get("body").ok_or_else(|| Error::Config(format!("{} has no body", path.display())))?;
    let body = body.get("network").unwrap_or(body);
    from_json(&body.to_string())
}
