use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::channel::SNR_DEFINITION;
use crate::error::Result;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Writes the files of one run into its output directory and records their
/// hashes for the manifest.
pub struct Artifacts {
    dir: PathBuf,
    experiment: &'static str,
    config_hash: String,
    seed: u64,
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn create(dir: &Path, experiment: &'static str, config_hash: String, seed: u64) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), experiment, config_hash, seed, files: Vec::new() })
    }

    fn header_lines(&self, units: &str) -> String {
        format!(
            "# {} {}\n# experiment: {}\n# config_sha256: {}\n# seed: {}\n# snr: {}\n# units: {}\n",
            env!("CARGO_PKG_NAME"),
            env!("CARGO_PKG_VERSION"),
            self.experiment,
            self.config_hash,
            self.seed,
            SNR_DEFINITION,
            units
        )
    }

    fn header_json(&self, units: &str) -> Value {
        json!({
            "experiment": self.experiment,
            "config_sha256": self.config_hash,
            "seed": self.seed,
            "snr": SNR_DEFINITION,
            "units": units,
        })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.files.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    /// Comma-separated table with a `#` comment header and a column row.
    pub fn csv<I>(&mut self, name: &str, units: &str, columns: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut s = self.header_lines(units);
        s.push_str(&columns.join(","));
        s.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len(), "{name}");
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        self.put(name, s.as_bytes())
    }

    /// JSON document with the run header stored under `"header"`.
    pub fn json(&mut self, name: &str, units: &str, body: &impl Serialize) -> Result<()> {
        let mut doc = Map::new();
        doc.insert("header".into(), self.header_json(units));
        doc.insert("body".into(), serde_json::to_value(body)?);
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// Writes `report.json` and `manifest.json`; returns the artifact list.
    pub fn finish(mut self, metrics: Map<String, Value>, config_toml: &str) -> Result<Vec<(String, String)>> {
        let report = json!({ "experiment": self.experiment, "metrics": Value::Object(metrics) });
        self.json("report.json", "see metric names", &report)?;
        let manifest = json!({
            "crate": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": self.experiment,
            "seed": self.seed,
            "config_sha256": self.config_hash,
            "config": config_toml,
            "snr": SNR_DEFINITION,
            "artifacts": self.files.iter().map(|(f, h)| json!({ "file": f, "sha256": h })).collect::<Vec<_>>(),
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(self.files)
    }
}

/// Metric map builder.
#[derive(Default)]
pub struct Metrics(pub Map<String, Value>);

impl Metrics {
    pub fn set(&mut self, key: impl Into<String>, value: impl Serialize) {
        self.0.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}

/// Temperature as it appears in file names: `25C`, `-5C`, `37.5C`.
pub fn temp_tag(t_c: f64) -> String {
    format!("{t_c}C")
}
