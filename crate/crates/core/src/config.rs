//! One JSON file describing a whole run. Every section has defaults, unknown keys are
//! rejected, and each command writes the resolved config next to its outputs.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bench::DEFAULT_N;
use crate::model::{ModelConfig, TrainConfig};
use crate::negmine::LlmConfig;
use crate::synth::SynthConfig;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MineMethod {
    Vocab,
    Rule,
    Llm,
}

impl FromStr for MineMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "vocab" => Ok(MineMethod::Vocab),
            "rule" => Ok(MineMethod::Rule),
            "llm" => Ok(MineMethod::Llm),
            _ => Err(format!("unknown mining method {s:?} (expected vocab, rule or llm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    pub method: MineMethod,
    /// Negatives generated per type and caption.
    pub k: usize,
    pub seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig { method: MineMethod::Vocab, k: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Candidates per task in a trial.
    pub n: usize,
    pub seed: u64,
    pub histogram_bins: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { n: DEFAULT_N, seed: 0, histogram_bins: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory holding the corpus, features, split, bundles and trials.
    pub data_dir: PathBuf,
    /// Directory for checkpoints, logs and reports.
    pub out_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig { data_dir: "data".into(), out_dir: "runs".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub mining: MiningConfig,
    pub bench: BenchConfig,
    pub llm: LlmConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self, Error> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    /// `path` when given, otherwise the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, Error> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.synth.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        if self.mining.k == 0 {
            return Err(Error::Config("mining.k must be >= 1".into()));
        }
        if self.bench.n == 0 {
            return Err(Error::Config("bench.n must be >= 1".into()));
        }
        if self.bench.histogram_bins < 2 {
            return Err(Error::Config("bench.histogram_bins must be >= 2".into()));
        }
        if !(self.llm.timeout_secs.is_finite() && self.llm.timeout_secs > 0.0) {
            return Err(Error::Config("llm.timeout_secs must be > 0".into()));
        }
        if self.llm.concurrency == 0 {
            return Err(Error::Config("llm.concurrency must be >= 1".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }

    /// Write `<stage>.config.json` into `dir`, so stages sharing a directory keep their own copy.
    pub fn write_resolved(&self, dir: &Path, stage: &str) -> Result<PathBuf, Error> {
        let path = dir.join(format!("{stage}.config.json"));
        std::fs::write(&path, self.to_json()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_defaults() {
        let c = RunConfig::from_json(r#"{"synth": {"seed": 7}, "mining": {"k": 3}}"#).unwrap();
        assert_eq!(c.synth.seed, 7);
        assert_eq!(c.synth.n_verbs, SynthConfig::default().n_verbs);
        assert_eq!(c.mining.k, 3);
        assert_eq!(c.train, TrainConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in [r#"{"synht": {}}"#, r#"{"synth": {"n_verb": 3}}"#, r#"{"train": {"objective": "nce"}}"#] {
            assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::from_json(r#"{"mining": {"k": 0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bench": {"histogram_bins": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"train": {"batch_size": 1}}"#).is_err());
    }

    #[test]
    fn round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }
}
