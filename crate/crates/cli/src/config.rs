use anyhow::{bail, Context, Result};
use avoidwalk_core::conditioned::BnRule;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Tail,
    Harmonic,
    Ladder,
    Contraction,
    Conditioned,
    Doob,
    Gap,
    Oracle,
    Ratio,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Tail => "tail",
            Experiment::Harmonic => "harmonic",
            Experiment::Ladder => "ladder",
            Experiment::Contraction => "contraction",
            Experiment::Conditioned => "conditioned",
            Experiment::Doob => "doob",
            Experiment::Gap => "gap",
            Experiment::Oracle => "oracle",
            Experiment::Ratio => "ratio",
        }
    }
}

fn default_set() -> String {
    "points{0}".into()
}

fn default_x() -> f64 {
    1.0
}

fn default_seed() -> u64 {
    1
}

/// Everything that determines the numbers an experiment emits. `workers` and
/// `out` only affect wall time and file placement, so they are left out of
/// the hash and of the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub law: String,
    #[serde(default = "default_set")]
    pub set: String,
    #[serde(default = "default_x")]
    pub x: f64,
    #[serde(default)]
    pub n: Option<u64>,
    #[serde(default)]
    pub n_grid: Option<Vec<u64>>,
    #[serde(default)]
    pub reps: Option<u64>,
    #[serde(default)]
    pub cap: Option<u64>,
    /// Path prefix length for the Doob check.
    #[serde(default)]
    pub k: Option<usize>,
    /// Horizon of the limit-gap chains.
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub b_rule: BnRule,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, law: &str) -> Self {
        Self {
            experiment,
            law: law.into(),
            set: default_set(),
            x: default_x(),
            n: None,
            n_grid: None,
            reps: None,
            cap: None,
            k: None,
            horizon: None,
            b_rule: BnRule::default(),
            seed: default_seed(),
            workers: None,
            out: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.x.is_finite() {
            bail!("start x must be finite");
        }
        if self.n == Some(0) {
            bail!("n must be positive");
        }
        if let Some(g) = &self.n_grid {
            if g.is_empty() || g.windows(2).any(|p| p[1] <= p[0]) {
                bail!("n_grid must be strictly increasing and nonempty");
            }
        }
        if self.reps == Some(0) {
            bail!("reps must be positive");
        }
        if self.workers == Some(0) {
            bail!("workers must be positive");
        }
        Ok(())
    }

    /// Canonical JSON of the hashed fields.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`Self::canonical_json`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn n_or(&self, default: u64) -> u64 {
        self.n.unwrap_or(default)
    }

    pub fn reps_or(&self, default: u64) -> u64 {
        self.reps.unwrap_or(default)
    }

    pub fn cap_or(&self, default: u64) -> u64 {
        self.cap.unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workers_and_out_do_not_change_the_hash() {
        let mut a = ExperimentConfig::new(Experiment::Tail, "srw");
        let h = a.hash();
        a.workers = Some(8);
        a.out = Some("/tmp/x".into());
        assert_eq!(a.hash(), h);
        a.seed = 2;
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn json_round_trip_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"experiment":"gap","law":"tent","n":1000}"#).unwrap();
        assert_eq!(cfg.set, "points{0}");
        assert_eq!(cfg.b_rule, BnRule::default());
        let back: ExperimentConfig = serde_json::from_str(&cfg.canonical_json()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment":"gap","law":"tent","bogus":1}"#).is_err());
    }

    #[test]
    fn rejects_bad_grids() {
        let mut c = ExperimentConfig::new(Experiment::Tail, "srw");
        c.n_grid = Some(vec![10, 10]);
        assert!(c.validate().is_err());
    }
}
