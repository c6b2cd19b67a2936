//! Experiment configuration: a flat `key = value` text format with a
//! mandatory `schema_version`, strict (unknown keys are rejected), and
//! round-trip stable: `parse(to_text(c)) == c`.
//!
//! Grammar: one `key = value` pair per line; blank lines and `#` comments are
//! ignored. Lists are comma-separated. Example:
//!
//! ```text
//! schema_version = 1
//! kind = qi-scan
//! s = 0.25
//! t = 0.1
//! n_list = 64,128,256,512,1024
//! seed = 42
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dynamics::{FlowParams, Method};
use crate::qi::KernelVariant;
use crate::{Error, Result};

/// The single supported schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    QiScan,
    Density,
    ExpMoment,
    Exponents,
    Validate,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(ExperimentKind::Simulate),
            "qi-scan" => Ok(ExperimentKind::QiScan),
            "density" => Ok(ExperimentKind::Density),
            "exp-moment" => Ok(ExperimentKind::ExpMoment),
            "exponents" => Ok(ExperimentKind::Exponents),
            "validate" => Ok(ExperimentKind::Validate),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::QiScan => "qi-scan",
            ExperimentKind::Density => "density",
            ExperimentKind::ExpMoment => "exp-moment",
            ExperimentKind::Exponents => "exponents",
            ExperimentKind::Validate => "validate",
        };
        write!(f, "{name}")
    }
}

/// Flat experiment configuration; every run record echoes one of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    /// Gaussian regularity parameter.
    pub s: f64,
    /// Frequency cutoff; `n_list` supersedes it for sweep kinds.
    pub n: usize,
    pub n_list: Option<Vec<usize>>,
    pub seed: u64,
    pub dt: f64,
    pub method: Method,
    pub max_t: f64,
    pub t: f64,
    /// Integrability index for density norms (`>= 1`).
    pub p: f64,
    /// Energy-ball radius; `0` means "choose so the ball mass is ~0.6".
    pub radius: f64,
    pub lambda: f64,
    pub samples: u64,
    /// The short-time window constant in `p·|t| <= c0/R`; a config input
    /// (reported, never derived).
    pub c0: f64,
    /// Density orientation pinned by the change-of-variables test.
    pub orientation: i8,
    pub variant: KernelVariant,
    pub quad_nodes: usize,
    /// Exponent-schedule inputs (`exponents` kind).
    pub r1: f64,
    pub exp_p: f64,
    pub j_max: u32,
    /// Output path prefix: `<out>.jsonl`, `<out>.csv`, `<out>.svg`.
    pub out: Option<PathBuf>,
    pub plot: bool,
}

impl ExperimentConfig {
    pub fn default_for(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            kind,
            s: 0.75,
            n: 16,
            n_list: None,
            seed: 0,
            dt: 1e-3,
            method: Method::Rk4,
            max_t: 16.0,
            t: 0.1,
            p: 1.0,
            radius: 0.0,
            lambda: 0.1,
            samples: 1000,
            c0: 1.0,
            orientation: -1,
            variant: KernelVariant::Full,
            quad_nodes: 16,
            r1: 1.25,
            exp_p: 2.0,
            j_max: 16,
            out: None,
            plot: false,
        }
    }

    pub fn flow_params(&self) -> FlowParams {
        FlowParams { dt: self.dt, method: self.method, max_t: self.max_t }
    }

    pub fn cutoffs(&self) -> Vec<usize> {
        self.n_list.clone().unwrap_or_else(|| vec![self.n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaMismatch {
                found: self.schema_version,
                supported: SCHEMA_VERSION,
            });
        }
        if self.samples == 0 {
            return Err(Error::InvalidParam("samples must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidParam("n must be at least 1".into()));
        }
        if self.p < 1.0 {
            return Err(Error::InvalidParam(format!("p must be at least 1, got {}", self.p)));
        }
        if self.orientation != 1 && self.orientation != -1 {
            return Err(Error::InvalidParam("orientation must be ±1".into()));
        }
        self.flow_params().validate()?;
        Ok(())
    }

    /// Parse the flat `key = value` text format. Unknown keys and a missing
    /// or wrong `schema_version` are errors; `kind` is mandatory.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kind: Option<ExperimentKind> = None;
        let mut schema: Option<u32> = None;
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ConfigParse(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            match key.as_str() {
                "kind" => kind = Some(value.parse()?),
                "schema_version" => {
                    schema = Some(value.parse().map_err(|_| {
                        Error::ConfigParse(format!("bad schema_version `{value}`"))
                    })?)
                }
                _ => pairs.push((key, value)),
            }
        }
        let schema = schema.ok_or_else(|| Error::ConfigParse("schema_version is mandatory".into()))?;
        if schema != SCHEMA_VERSION {
            return Err(Error::SchemaMismatch { found: schema, supported: SCHEMA_VERSION });
        }
        let kind = kind.ok_or_else(|| Error::ConfigParse("kind is mandatory".into()))?;
        let mut cfg = ExperimentConfig::default_for(kind);
        for (key, value) in pairs {
            cfg.set_key(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::ConfigParse(format!("bad {what} `{value}`"));
        match key {
            "s" => self.s = value.parse().map_err(|_| bad("s"))?,
            "n" => self.n = value.parse().map_err(|_| bad("n"))?,
            "n_list" => {
                let list: std::result::Result<Vec<usize>, _> =
                    value.split(',').map(|v| v.trim().parse()).collect();
                self.n_list = Some(list.map_err(|_| bad("n_list"))?);
            }
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "dt" => self.dt = value.parse().map_err(|_| bad("dt"))?,
            "method" => self.method = value.parse()?,
            "max_t" => self.max_t = value.parse().map_err(|_| bad("max_t"))?,
            "t" => self.t = value.parse().map_err(|_| bad("t"))?,
            "p" => self.p = value.parse().map_err(|_| bad("p"))?,
            "radius" => self.radius = value.parse().map_err(|_| bad("radius"))?,
            "lambda" => self.lambda = value.parse().map_err(|_| bad("lambda"))?,
            "samples" => self.samples = value.parse().map_err(|_| bad("samples"))?,
            "c0" => self.c0 = value.parse().map_err(|_| bad("c0"))?,
            "orientation" => self.orientation = value.parse().map_err(|_| bad("orientation"))?,
            "variant" => self.variant = value.parse()?,
            "quad_nodes" => self.quad_nodes = value.parse().map_err(|_| bad("quad_nodes"))?,
            "r1" => self.r1 = value.parse().map_err(|_| bad("r1"))?,
            "exp_p" => self.exp_p = value.parse().map_err(|_| bad("exp_p"))?,
            "j_max" => self.j_max = value.parse().map_err(|_| bad("j_max"))?,
            "out" => self.out = Some(PathBuf::from(value)),
            "plot" => self.plot = value.parse().map_err(|_| bad("plot"))?,
            other => {
                return Err(Error::ConfigParse(format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    /// Serialise to the flat text format (round-trips through [`parse`]).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("schema_version", self.schema_version.to_string());
        push("kind", self.kind.to_string());
        push("s", format_f64(self.s));
        push("n", self.n.to_string());
        if let Some(list) = &self.n_list {
            push(
                "n_list",
                list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
            );
        }
        push("seed", self.seed.to_string());
        push("dt", format_f64(self.dt));
        push("method", self.method.to_string());
        push("max_t", format_f64(self.max_t));
        push("t", format_f64(self.t));
        push("p", format_f64(self.p));
        push("radius", format_f64(self.radius));
        push("lambda", format_f64(self.lambda));
        push("samples", self.samples.to_string());
        push("c0", format_f64(self.c0));
        push("orientation", self.orientation.to_string());
        push("variant", self.variant.to_string());
        push("quad_nodes", self.quad_nodes.to_string());
        push("r1", format_f64(self.r1));
        push("exp_p", format_f64(self.exp_p));
        push("j_max", self.j_max.to_string());
        if let Some(path) = &self.out {
            push("out", path.display().to_string());
        }
        push("plot", self.plot.to_string());
        out
    }
}

/// Shortest representation that parses back to the same f64.
fn format_f64(x: f64) -> String {
    let mut s = format!("{x}");
    if s.parse::<f64>() != Ok(x) {
        s = format!("{x:e}");
    }
    s
}
