use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channels::{ChannelConfig, CodebookHyper, Protocol};
use crate::error::{CtdError, Result};
use crate::games::{AgentArch, GameConfig, GameKind};
use crate::worlds::{Geometry, SplitSizes, WorldKind};

pub const CONFIG_VERSION: u32 = 1;

/// Optimization settings of one training phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub game: GameConfig,
    pub channel: ChannelConfig,
    pub arch: AgentArch,
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Stop after this many epochs without a better validation loss.
    pub patience: usize,
    /// Weight of the commitment loss.
    pub beta1: f64,
    /// Dead-word re-initialization of the codebook.
    pub reinit: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self, n_concepts: usize) -> Result<()> {
        self.game.validate()?;
        self.channel.validate(n_concepts)?;
        if self.batch_size == 0 {
            return Err(CtdError::Invalid("batch size must be positive".into()));
        }
        if !(self.lr > 0.0) || !self.beta1.is_finite() || self.beta1 < 0.0 {
            return Err(CtdError::Invalid("learning rate and β₁ must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn hash(&self) -> String {
        hash_json(self)
    }
}

pub(crate) fn hash_json<T: Serialize>(v: &T) -> String {
    let bytes = serde_json::to_vec(v).expect("config serializes");
    Sha256::digest(&bytes)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Data and schedule of one phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub sizes: SplitSizes,
    pub epochs: usize,
    pub patience: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Decompose only.
    D,
    /// Compose from scratch.
    CD,
    /// Compose initialized from Decompose.
    CTD,
    /// Decompose checkpoint evaluated on Compose data without training.
    CTDZS,
}

impl Regime {
    pub fn tag(self) -> &'static str {
        match self {
            Regime::D => "D",
            Regime::CD => "C/D",
            Regime::CTD => "CtD",
            Regime::CTDZS => "CtD-ZS",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace(['/', '-', '_'], "").as_str() {
            "D" => Ok(Regime::D),
            "CD" => Ok(Regime::CD),
            "CTD" => Ok(Regime::CTD),
            "CTDZS" => Ok(Regime::CTDZS),
            _ => Err(CtdError::Invalid(format!("unknown regime {s}"))),
        }
    }
}

/// Everything that determines a regime run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub dataset: WorldKind,
    pub world_seed: u64,
    pub channel: Protocol,
    pub game: GameKind,
    /// Sender targets per Decompose sample.
    pub targets: usize,
    pub arch: AgentArch,
    pub code_dim: usize,
    pub tau: f64,
    pub seq_hidden: usize,
    pub seq_embed: usize,
    pub codebook: CodebookHyper,
    pub reinit: bool,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub compose_length: usize,
    pub heldout_fraction: f64,
    pub decompose: PhaseSpec,
    pub compose: PhaseSpec,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            dataset: WorldKind::Thing,
            world_seed: 0,
            channel: Protocol::Cb,
            game: GameKind::Mref,
            targets: 20,
            arch: AgentArch::default(),
            code_dim: 64,
            tau: 1.0,
            seq_hidden: 100,
            seq_embed: 64,
            codebook: CodebookHyper::default(),
            reinit: true,
            batch_size: 10,
            lr: 0.0005,
            beta1: 1.0,
            compose_length: 5,
            heldout_fraction: 0.11,
            decompose: PhaseSpec {
                sizes: SplitSizes::default(),
                epochs: 60,
                patience: 10,
            },
            compose: PhaseSpec {
                sizes: SplitSizes::default(),
                epochs: 60,
                patience: 10,
            },
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(CtdError::Invalid(format!(
                "config version {} (this build reads {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.targets == 0 {
            return Err(CtdError::Invalid("targets must be at least 1".into()));
        }
        if !(self.heldout_fraction > 0.0 && 2.0 * self.heldout_fraction < 1.0) {
            return Err(CtdError::InsufficientPhrases(format!(
                "held-out fraction {} leaves overlapping phrase budgets",
                self.heldout_fraction
            )));
        }
        let n = crate::worlds::World::new(self.dataset, self.world_seed).schema.n_concepts();
        self.train_config(true).validate(n)?;
        self.train_config(false).validate(n)
    }

    pub fn hash(&self) -> String {
        hash_json(self)
    }

    pub fn n_concepts(&self) -> usize {
        crate::worlds::World::new(self.dataset, self.world_seed).schema.n_concepts()
    }

    /// Game geometry of either phase. Compose keeps the Decompose geometry;
    /// for length-5 THING phrases every target is the same object.
    pub fn geometry(&self) -> Geometry {
        let mut g = GameConfig::new(self.game).geometry;
        if self.game != GameKind::Ref && self.game != GameKind::Recon {
            g.sender_targets = self.targets;
        }
        g
    }

    pub fn channel_config(&self, length: usize) -> ChannelConfig {
        let mut c = ChannelConfig::for_concepts(self.channel, self.n_concepts(), length);
        c.code_dim = self.code_dim;
        c.tau = self.tau;
        c.hidden = self.seq_hidden;
        c.embed = self.seq_embed;
        c.codebook = self.codebook;
        c
    }

    pub fn train_config(&self, decompose: bool) -> TrainConfig {
        let (phase, length) = if decompose {
            (&self.decompose, 1)
        } else {
            (&self.compose, self.compose_length)
        };
        TrainConfig {
            game: GameConfig {
                game: self.game,
                geometry: self.geometry(),
            },
            channel: self.channel_config(length),
            arch: self.arch,
            batch_size: self.batch_size,
            lr: self.lr,
            epochs: phase.epochs,
            patience: phase.patience,
            beta1: self.beta1,
            reinit: self.reinit,
            seed: self.seed,
        }
    }
}
