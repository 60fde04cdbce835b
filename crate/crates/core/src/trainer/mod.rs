//! Two-phase training: Decompose on single-concept games, then Compose on
//! multi-concept phrases from scratch (C/D), from the Decompose checkpoint
//! (CtD), or zero-shot (CtD-ZS).

mod checkpoint;
mod config;
mod phase;
mod report;

pub use checkpoint::Checkpoint;
pub use config::{ExperimentConfig, PhaseSpec, Regime, TrainConfig, CONFIG_VERSION};
pub use phase::{combined_loss, evaluate, init_agents, train_phase, EpochLog, EvalSummary, Evaluation, PhaseLog};
pub use report::{results_csv, RunReport, CSV_COLUMNS, REPORT_SCHEMA};

use std::collections::BTreeSet;

use crate::channels::Protocol;
use crate::error::{CtdError, Result};
use crate::games::Agents;
use crate::metrics::{Corpus, MetricsReport};
use crate::worlds::{build_split, DatasetHeader, DatasetSplit, GameSample, SplitMode, World};

/// Offset separating the Compose data seed from the Decompose one.
const COMPOSE_DATA_SEED: u64 = 0x5eed_c0de;

/// A trained phase with its test-set report.
#[derive(Clone, Debug)]
pub struct PhaseResult {
    pub checkpoint: Checkpoint,
    pub log: PhaseLog,
    pub report: RunReport,
}

/// One configured experiment: a world plus everything needed to run regimes.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub world: World,
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let world = World::new(cfg.dataset, cfg.world_seed);
        Ok(Experiment { cfg, world })
    }

    /// Freshly initialized agents with this experiment's architecture.
    pub fn template(&self) -> Result<Agents> {
        init_agents(&self.cfg.train_config(true), &self.world)
    }

    pub fn load_checkpoint(&self, path: &std::path::Path) -> Result<Checkpoint> {
        Checkpoint::load(path, self.template()?)
    }

    pub fn header(&self, decompose: bool) -> DatasetHeader {
        let c = &self.cfg;
        DatasetHeader {
            world: c.dataset,
            world_seed: c.world_seed,
            schema_hash: self.world.schema.hash(),
            mode: if decompose { SplitMode::Single } else { SplitMode::Composite },
            phrase_length: if decompose { 1 } else { c.compose_length },
            geometry: c.geometry(),
            sizes: if decompose { c.decompose.sizes } else { c.compose.sizes },
            seed: if decompose { c.seed } else { c.seed ^ COMPOSE_DATA_SEED },
            heldout_fraction: c.heldout_fraction,
        }
    }

    pub fn data(&self, decompose: bool) -> Result<DatasetSplit> {
        let h = self.header(decompose);
        build_split(
            &self.world.schema,
            h.phrase_length,
            &h.geometry,
            &h.sizes,
            h.mode,
            h.heldout_fraction,
            h.seed,
        )
    }

    /// Test-set metrics of `agents` with `l`-word messages.
    pub fn test_metrics(&self, agents: &Agents, test: &[GameSample], l: usize) -> Result<(MetricsReport, Corpus)> {
        let ev = evaluate(agents, &self.world, test, l, self.cfg.beta1)?;
        let phrases: Vec<_> = test.iter().map(|s| s.phrase.clone()).collect();
        let corpus = Corpus::from_phrases(ev.messages, &phrases, &self.world.schema)?;
        let report = MetricsReport::compute(&corpus, ev.summary.acc, self.world.schema.n_concepts())?;
        Ok((report, corpus))
    }

    /// Wraps test metrics into a report with the test-set statistics.
    pub fn report(&self, regime: Regime, test: &[GameSample], l: usize, metrics: MetricsReport, phases: Vec<PhaseLog>) -> RunReport {
        let concepts: BTreeSet<usize> = test
            .iter()
            .flat_map(|s| s.phrase.concept_ids(&self.world.schema))
            .collect();
        let phrases: BTreeSet<_> = test.iter().map(|s| &s.phrase).collect();
        RunReport {
            schema: report::REPORT_SCHEMA,
            regime: regime.tag().to_string(),
            dataset: self.cfg.dataset.name().to_uppercase(),
            comm: self.cfg.channel.name().to_string(),
            seed: self.cfg.seed,
            config_hash: self.cfg.hash(),
            n_vocab: self.cfg.channel_config(l).n_words(),
            n_concepts: concepts.len(),
            n_phrases: phrases.len(),
            l,
            phases,
            test: metrics,
        }
    }

    /// Decompose phase on single-concept data.
    pub fn decompose(&self, data: &DatasetSplit) -> Result<PhaseResult> {
        let tc = self.cfg.train_config(true);
        let (ckpt, log) = train_phase(&tc, &self.world, &data.train, &data.val, None, "decompose")?;
        let (m, _) = self.test_metrics(&ckpt.agents, &data.test, 1)?;
        let report = self.report(Regime::D, &data.test, 1, m, vec![log.clone()]);
        Ok(PhaseResult {
            checkpoint: ckpt,
            log,
            report,
        })
    }

    /// Compose phase, from scratch (`init = None`, C/D) or from a Decompose
    /// checkpoint (CtD).
    pub fn compose(&self, data: &DatasetSplit, init: Option<&Checkpoint>) -> Result<PhaseResult> {
        let tc = self.cfg.train_config(false);
        let (regime, agents) = match init {
            Some(c) => (Regime::CTD, Some(c.agents.clone())),
            None => (Regime::CD, None),
        };
        let (ckpt, log) = train_phase(&tc, &self.world, &data.train, &data.val, agents, "compose")?;
        let l = self.cfg.compose_length;
        let (m, _) = self.test_metrics(&ckpt.agents, &data.test, l)?;
        let report = self.report(regime, &data.test, l, m, vec![log.clone()]);
        Ok(PhaseResult {
            checkpoint: ckpt,
            log,
            report,
        })
    }

    /// Evaluates a Decompose checkpoint on Compose data with the message
    /// length raised to the phrase length; no parameter changes.
    pub fn zero_shot(&self, ckpt: &Checkpoint, data: &DatasetSplit) -> Result<RunReport> {
        let m = zero_shot_eval(self, ckpt, &data.test)?;
        Ok(self.report(Regime::CTDZS, &data.test, self.cfg.compose_length, m, Vec::new()))
    }

    /// Runs a full regime from freshly generated data.
    pub fn run_regime(&self, regime: Regime) -> Result<RunReport> {
        match regime {
            Regime::D => Ok(self.decompose(&self.data(true)?)?.report),
            Regime::CD => Ok(self.compose(&self.data(false)?, None)?.report),
            Regime::CTD | Regime::CTDZS => {
                let d = self.decompose(&self.data(true)?)?;
                let compose = self.data(false)?;
                let mut r = if regime == Regime::CTD {
                    self.compose(&compose, Some(&d.checkpoint))?.report
                } else {
                    self.zero_shot(&d.checkpoint, &compose)?
                };
                r.phases.insert(0, d.log);
                Ok(r)
            }
        }
    }

    /// One Decompose run per sender-target count, everything else fixed.
    pub fn ablation_targets_sweep(&self, counts: &[usize]) -> Result<Vec<(usize, RunReport)>> {
        let mut out = Vec::with_capacity(counts.len());
        for &n in counts {
            if n == 0 {
                return Err(CtdError::Invalid("target counts must be at least 1".into()));
            }
            let mut cfg = self.cfg.clone();
            cfg.targets = n;
            let exp = Experiment::new(cfg)?;
            let r = exp.decompose(&exp.data(true)?)?.report;
            log::info!("targets {n}: ACC {:.3} CBM {:.3}", r.test.acc, r.test.cbm);
            out.push((n, r));
        }
        Ok(out)
    }
}

/// Zero-shot metrics of a Decompose checkpoint on compose `test` samples.
pub fn zero_shot_eval(exp: &Experiment, ckpt: &Checkpoint, test: &[GameSample]) -> Result<MetricsReport> {
    if ckpt.agents.channel.protocol != Protocol::Cb {
        return Err(CtdError::Unsupported(format!(
            "zero-shot evaluation needs a codebook channel, not {}",
            ckpt.agents.channel.protocol.name()
        )));
    }
    let mut agents = ckpt.agents.clone();
    agents.channel.length = exp.cfg.compose_length;
    Ok(exp.test_metrics(&agents, test, exp.cfg.compose_length)?.0)
}
