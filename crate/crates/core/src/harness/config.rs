//! Experiment configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithm::{RegularizationMode, StepSizePolicy};
use crate::error::{Error, Result};
use crate::netenv::ProcessKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentBlock,
    #[serde(default)]
    pub algorithm: AlgorithmBlock,
    pub run: RunBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentBlock {
    pub kinds: Vec<ProcessKind>,
    pub j: usize,
    pub k: usize,
    /// Trial `i` uses seed `seed + i`.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialPoint {
    #[default]
    Midpoint,
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmBlock {
    #[serde(default = "default_modes")]
    pub modes: Vec<RegularizationMode>,
    #[serde(default = "default_policy")]
    pub policy: StepSizePolicy,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(default)]
    pub x_init: InitialPoint,
}

fn default_modes() -> Vec<RegularizationMode> {
    vec![RegularizationMode::Double]
}

fn default_policy() -> StepSizePolicy {
    StepSizePolicy::UnknownTauUnknownDelta
}

impl Default for AlgorithmBlock {
    fn default() -> Self {
        AlgorithmBlock {
            modes: default_modes(),
            policy: default_policy(),
            alpha: None,
            eta: None,
            gamma: None,
            x_init: InitialPoint::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub horizon: usize,
    pub taus: Vec<usize>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default = "yes")]
    pub dynamic_benchmark: bool,
    #[serde(default)]
    pub static_benchmark: bool,
    /// Evaluate the regret, violation and queue bounds.
    #[serde(default)]
    pub bounds: bool,
    #[serde(default = "yes")]
    pub lemma_checks: bool,
    /// Horizons reported in the summary. Defaults to `2^6, 2^8, …` up to
    /// the horizon, plus the horizon itself.
    #[serde(default)]
    pub probe_horizons: Vec<usize>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Svg,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Csv, OutputFormat::Svg]
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map_or_else(|| "<document>".to_string(), |s| {
                text[..s.start].lines().count().max(1).to_string()
            });
            Error::config(format!("line {field}"), e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let env = &self.environment;
        if env.kinds.is_empty() {
            return Err(Error::config("environment.kinds", "list at least one environment"));
        }
        if env.j == 0 || env.k == 0 {
            return Err(Error::config("environment.j/k", "node counts must be at least 1"));
        }
        let alg = &self.algorithm;
        if alg.modes.is_empty() {
            return Err(Error::config("algorithm.modes", "list at least one mode"));
        }
        for (name, v) in [("algorithm.alpha", alg.alpha), ("algorithm.eta", alg.eta), ("algorithm.gamma", alg.gamma)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::config(name, "must be finite and nonnegative"));
                }
            }
        }
        if alg.gamma == Some(0.0) {
            return Err(Error::config("algorithm.gamma", "must be positive"));
        }
        let run = &self.run;
        if run.taus.is_empty() {
            return Err(Error::config("run.taus", "list at least one delay"));
        }
        if run.taus.contains(&0) {
            return Err(Error::config("run.taus", "delays must be at least 1"));
        }
        if let Some(t) = run.taus.iter().find(|t| **t > run.horizon) {
            return Err(Error::config("run.horizon", format!("horizon {} is shorter than delay {t}", run.horizon)));
        }
        if run.trials == 0 {
            return Err(Error::config("run.trials", "need at least one trial"));
        }
        if let Some(h) = run.probe_horizons.iter().find(|h| **h == 0 || **h > run.horizon) {
            return Err(Error::config("run.probe_horizons", format!("{h} is outside 1..={}", run.horizon)));
        }
        Ok(())
    }

    pub fn probe_horizons(&self) -> Vec<usize> {
        let t = self.run.horizon;
        let mut out = if self.run.probe_horizons.is_empty() {
            let mut v: Vec<usize> = (0..).map(|i| 64usize << (2 * i)).take_while(|h| *h <= t).collect();
            v.push(t);
            v
        } else {
            self.run.probe_horizons.clone()
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.output.formats.contains(&f)
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.run.trials as u64).map(|i| self.environment.seed.wrapping_add(i))
    }
}
