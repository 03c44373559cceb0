//! One function per experiment; each fills a [`Findings`] from a config.

mod chains;
mod gap;
mod ladder;
mod tail;

use crate::config::{Experiment, ExperimentConfig};
use crate::report::{Findings, Outcome};
use anyhow::Result;
use avoidwalk_core::sets::AvoidSet;
use avoidwalk_core::walk_core::StepLaw;

/// Parsed inputs shared by all experiments.
pub(crate) struct Inputs<'a> {
    pub cfg: &'a ExperimentConfig,
    pub law: StepLaw,
    pub set: AvoidSet,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let inputs = Inputs { cfg, law: StepLaw::parse(&cfg.law)?, set: AvoidSet::parse(&cfg.set)? };
    let mut f = Findings::default();
    match cfg.experiment {
        Experiment::Tail => tail::tail(&inputs, &mut f)?,
        Experiment::Harmonic => tail::harmonic(&inputs, &mut f)?,
        Experiment::Oracle => tail::oracle(&inputs, &mut f)?,
        Experiment::Ratio => tail::ratio(&inputs, &mut f)?,
        Experiment::Ladder => ladder::ladder(&inputs, &mut f)?,
        Experiment::Contraction => ladder::contraction(&inputs, &mut f)?,
        Experiment::Conditioned => chains::conditioned(&inputs, &mut f)?,
        Experiment::Doob => chains::doob(&inputs, &mut f)?,
        Experiment::Gap => gap::gap(&inputs, &mut f)?,
    }
    Outcome::new(cfg, f)
}

/// `base·2^k` up to `top`, ending exactly at `top`.
pub(crate) fn doubling_grid(base: u64, top: u64) -> Vec<u64> {
    let mut g = Vec::new();
    let mut v = base;
    while v < top {
        g.push(v);
        v *= 2;
    }
    g.push(top);
    g
}
