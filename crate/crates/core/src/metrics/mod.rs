//! Compositionality metrics over aligned (message, phrase) corpora.

mod ami;
mod cbm;
mod ci;
mod disent;
mod hungarian;

pub use ami::{ami, expected_mutual_info};
pub use cbm::{cbm, MatchingResult};
pub use ci::{ci, CiResult, CI_DEFAULT_ITERS, CI_TOL};
pub use disent::{bosdis, posdis};
pub use hungarian::{hungarian, hungarian_max};

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CtdError, Result};
use crate::worlds::{AttributeSchema, Phrase};

/// Aligned emergent messages and gold phrases. Phrases are lists of concept
/// ids sorted by attribute; messages keep their word order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub messages: Vec<Vec<usize>>,
    pub phrases: Vec<Vec<usize>>,
}

impl Corpus {
    pub fn new(messages: Vec<Vec<usize>>, phrases: Vec<Vec<usize>>) -> Result<Self> {
        if messages.len() != phrases.len() {
            return Err(CtdError::Invalid(format!(
                "{} messages for {} phrases",
                messages.len(),
                phrases.len()
            )));
        }
        if let Some(first) = messages.first() {
            if messages.iter().any(|m| m.len() != first.len()) {
                return Err(CtdError::Invalid("messages differ in length".into()));
            }
        }
        Ok(Corpus { messages, phrases })
    }

    pub fn from_phrases(messages: Vec<Vec<usize>>, phrases: &[Phrase], schema: &AttributeSchema) -> Result<Self> {
        Self::new(messages, phrases.iter().map(|p| p.concept_ids(schema)).collect())
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.is_empty() {
            Err(CtdError::Invalid("empty corpus".into()))
        } else {
            Ok(())
        }
    }

    /// Distinct concept ids in phrase order position `k` (one variable per position).
    fn phrase_slots(&self) -> usize {
        self.phrases.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// JSON-lines `{"words": [...], "phrase": [...]}`.
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (m, p) in self.messages.iter().zip(&self.phrases) {
            out.push_str(&serde_json::to_string(&serde_json::json!({"words": m, "phrase": p}))?);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load_jsonl(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Line {
            words: Vec<usize>,
            phrase: Vec<usize>,
        }
        let text = std::fs::read_to_string(path)?;
        let mut c = Corpus::default();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let l: Line = serde_json::from_str(line)?;
            c.messages.push(l.words);
            c.phrases.push(l.phrase);
        }
        Corpus::new(c.messages, c.phrases)
    }
}

/// One row of the results table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "ACC")]
    pub acc: f64,
    #[serde(rename = "AMI")]
    pub ami: f64,
    #[serde(rename = "POS")]
    pub pos: f64,
    #[serde(rename = "BOS")]
    pub bos: f64,
    #[serde(rename = "CI")]
    pub ci: f64,
    #[serde(rename = "CBM")]
    pub cbm: f64,
    #[serde(rename = "#w")]
    pub n_words: usize,
    #[serde(rename = "#m")]
    pub n_messages: usize,
    /// `#w / #c`.
    pub ratio: f64,
    pub ci_converged: bool,
    pub ambiguous: f64,
    pub paraphrase: f64,
}

impl MetricsReport {
    /// All metrics of `corpus`; `acc` is supplied by the caller.
    pub fn compute(corpus: &Corpus, acc: f64, n_concepts: usize) -> Result<Self> {
        corpus.require_nonempty()?;
        let (n_words, n_messages) = corpus_stats(corpus);
        let c = ci(corpus, CI_DEFAULT_ITERS)?;
        let m = cbm(corpus)?;
        let total = m.total.max(1) as f64;
        Ok(MetricsReport {
            acc,
            ami: ami(corpus)?,
            pos: posdis(corpus)?,
            bos: bosdis(corpus)?,
            ci: c.value,
            cbm: m.score,
            n_words,
            n_messages,
            ratio: n_words as f64 / n_concepts.max(1) as f64,
            ci_converged: c.converged,
            ambiguous: m.ambiguous as f64 / total,
            paraphrase: m.paraphrase as f64 / total,
        })
    }
}

/// (#distinct words, #distinct messages).
pub fn corpus_stats(corpus: &Corpus) -> (usize, usize) {
    let words: BTreeSet<usize> = corpus.messages.iter().flatten().copied().collect();
    let msgs: BTreeSet<&Vec<usize>> = corpus.messages.iter().collect();
    (words.len(), msgs.len())
}

/// Dense labels for arbitrary hashable keys.
pub(crate) fn encode_labels<K: Ord + Clone>(keys: &[K]) -> (Vec<usize>, usize) {
    let mut map: BTreeMap<K, usize> = BTreeMap::new();
    let labels = keys
        .iter()
        .map(|k| {
            let n = map.len();
            *map.entry(k.clone()).or_insert(n)
        })
        .collect();
    (labels, map.len())
}

pub(crate) fn entropy(labels: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub(crate) fn mutual_info(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut joint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut ma: BTreeMap<usize, usize> = BTreeMap::new();
    let mut mb: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ma.entry(x).or_default() += 1;
        *mb.entry(y).or_default() += 1;
    }
    joint
        .iter()
        .map(|(&(x, y), &c)| {
            let c = c as f64;
            c / n * (c * n / (ma[&x] as f64 * mb[&y] as f64)).ln()
        })
        .sum::<f64>()
        .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_by_inspection() {
        let c = Corpus::new(vec![vec![1, 2], vec![2, 1], vec![1, 2]], vec![vec![0], vec![1], vec![0]]).unwrap();
        assert_eq!(corpus_stats(&c), (2, 2));
        let c = Corpus::new(vec![vec![3, 4]; 4], vec![vec![0]; 4]).unwrap();
        assert_eq!(corpus_stats(&c), (2, 1));
    }
}
