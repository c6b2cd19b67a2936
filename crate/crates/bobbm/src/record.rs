//! Run records: every experiment emits a JSON-lines record echoing its
//! configuration and seed, with named estimates (value + standard error) and
//! wall-clock timings. Re-running an echoed config reproduces the estimates
//! bit-for-bit; timings are informational only and excluded from the
//! reproducibility fingerprint.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::{Error, Result};

/// A Monte Carlo (or exact) scalar with its standard error. Exact quantities
/// carry `std_error = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl Estimate {
    pub fn new(value: f64, std_error: f64, samples: u64) -> Self {
        Estimate { value, std_error, samples }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { value, std_error: 0.0, samples: 0 }
    }

    /// |a - b| within `k` combined standard errors.
    pub fn agrees_with(&self, other: &Estimate, k: f64) -> bool {
        let se = (self.std_error.powi(2) + other.std_error.powi(2)).sqrt();
        (self.value - other.value).abs() <= k * se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    #[serde(flatten)]
    pub estimate: Estimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub revision: String,
    pub estimates: Vec<NamedEstimate>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunRecord {
    pub fn new(config: &ExperimentConfig) -> Self {
        RunRecord {
            schema_version: crate::config::SCHEMA_VERSION,
            config: config.clone(),
            seed: config.seed,
            revision: env!("CARGO_PKG_VERSION").to_string(),
            estimates: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, name: &str, estimate: Estimate) {
        self.estimates.push(NamedEstimate { name: name.to_string(), estimate });
    }

    pub fn estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name).map(|e| &e.estimate)
    }

    pub fn time(&mut self, name: &str, ms: f64) {
        self.timings_ms.insert(name.to_string(), ms);
    }

    /// Canonical JSON of the estimates alone; identical configs and seeds
    /// must reproduce this string exactly.
    pub fn estimates_fingerprint(&self) -> String {
        serde_json::to_string(&self.estimates).expect("estimates serialise")
    }

    /// Append as one JSON line.
    pub fn append_jsonl(&self, path: &Path) -> Result<()> {
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::OutputWrite { path: path.display().to_string(), source: e })?;
        let line = serde_json::to_string(self)?;
        writeln!(file, "{line}")
            .map_err(|e| Error::OutputWrite { path: path.display().to_string(), source: e })?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Vec<RunRecord>> {
        let file = std::fs::File::open(path)?;
        let mut out = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line)?);
        }
        Ok(out)
    }
}
