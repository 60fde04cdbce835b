use serde::{Deserialize, Serialize};

use super::sample::{build_sample, GameSample, Geometry};
use super::schema::{enumerate_phrases, AttributeSchema, Phrase};
use crate::diffcore::Rng;
use crate::error::{CtdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Samples split at random; every phrase may appear in every split.
    Single,
    /// Phrases partitioned between splits before sampling.
    Composite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl SplitKind {
    pub const ALL: [SplitKind; 3] = [SplitKind::Train, SplitKind::Val, SplitKind::Test];

    fn stream(self) -> u64 {
        match self {
            SplitKind::Train => 0,
            SplitKind::Val => 1,
            SplitKind::Test => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes {
            train: 10_000,
            val: 1_000,
            test: 1_000,
        }
    }
}

impl SplitSizes {
    pub fn get(&self, k: SplitKind) -> usize {
        match k {
            SplitKind::Train => self.train,
            SplitKind::Val => self.val,
            SplitKind::Test => self.test,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub mode: SplitMode,
    pub train: Vec<GameSample>,
    pub val: Vec<GameSample>,
    pub test: Vec<GameSample>,
}

impl DatasetSplit {
    pub fn get(&self, k: SplitKind) -> &[GameSample] {
        match k {
            SplitKind::Train => &self.train,
            SplitKind::Val => &self.val,
            SplitKind::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, k: SplitKind) -> &mut Vec<GameSample> {
        match k {
            SplitKind::Train => &mut self.train,
            SplitKind::Val => &mut self.val,
            SplitKind::Test => &mut self.test,
        }
    }
}

/// Builds train/val/test samples.
///
/// In composite mode the phrases are shuffled and the validation and test
/// pools each receive `heldout_fraction` of them; training keeps the rest.
/// Each sample then draws its phrase uniformly from its split's pool. Every
/// sample uses its own RNG stream, so regeneration is exact.
pub fn build_split(
    schema: &AttributeSchema,
    phrase_length: usize,
    geometry: &Geometry,
    sizes: &SplitSizes,
    mode: SplitMode,
    heldout_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    let all = enumerate_phrases(schema, phrase_length)?;
    let pools: [Vec<Phrase>; 3] = match mode {
        SplitMode::Single => [all.clone(), all.clone(), all],
        SplitMode::Composite => {
            if !(heldout_fraction > 0.0 && 2.0 * heldout_fraction < 1.0) {
                return Err(CtdError::InsufficientPhrases(format!(
                    "held-out fraction {heldout_fraction} leaves overlapping phrase budgets"
                )));
            }
            let mut phrases = all;
            Rng::split(seed, u64::MAX).shuffle(&mut phrases);
            let n = phrases.len();
            let h = (heldout_fraction * n as f64).round() as usize;
            if h == 0 || 2 * h >= n {
                return Err(CtdError::InsufficientPhrases(format!(
                    "{n} phrases of length {phrase_length} cannot fill three disjoint pools"
                )));
            }
            let test = phrases[..h].to_vec();
            let val = phrases[h..2 * h].to_vec();
            let train = phrases[2 * h..].to_vec();
            [train, val, test]
        }
    };
    let mut out = DatasetSplit {
        mode,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (k, pool) in SplitKind::ALL.into_iter().zip(&pools) {
        let n = sizes.get(k);
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let mut rng = Rng::split(seed, k.stream() << 32 | i as u64);
            let phrase = &pool[rng.below(pool.len())];
            samples.push(build_sample(schema, phrase, geometry, &mut rng)?);
        }
        *out.get_mut(k) = samples;
    }
    Ok(out)
}
