//! Positional and bag-of-symbols disentanglement.

use super::{entropy, mutual_info, Corpus};
use crate::error::Result;

/// Columns of phrase concepts: variable `k` is each phrase's `k`-th concept
/// (a missing slot is its own value).
fn attribute_columns(corpus: &Corpus) -> Vec<Vec<usize>> {
    (0..corpus.phrase_slots())
        .map(|k| {
            corpus
                .phrases
                .iter()
                .map(|p| p.get(k).copied().unwrap_or(usize::MAX))
                .collect()
        })
        .collect()
}

/// Mean over symbol variables of `(I(s, c₁) − I(s, c₂)) / H(s)`, where c₁ and
/// c₂ are the two attributes most informative about `s`. Zero-entropy symbol
/// variables are skipped.
fn gap_score(symbols: &[Vec<usize>], attrs: &[Vec<usize>]) -> f64 {
    let mut total = 0.0;
    let mut used = 0usize;
    for s in symbols {
        let h = entropy(s);
        if h <= 1e-12 {
            continue;
        }
        let mut mis: Vec<f64> = attrs.iter().map(|a| mutual_info(s, a)).collect();
        mis.sort_by(|a, b| b.total_cmp(a));
        let first = mis.first().copied().unwrap_or(0.0);
        let second = mis.get(1).copied().unwrap_or(0.0);
        total += (first - second) / h;
        used += 1;
    }
    if used == 0 {
        0.0
    } else {
        total / used as f64
    }
}

/// Positional disentanglement: symbol variable `j` is the word at position `j`.
pub fn posdis(corpus: &Corpus) -> Result<f64> {
    corpus.require_nonempty()?;
    let len = corpus.messages[0].len();
    let symbols: Vec<Vec<usize>> = (0..len).map(|j| corpus.messages.iter().map(|m| m[j]).collect()).collect();
    Ok(gap_score(&symbols, &attribute_columns(corpus)))
}

/// Bag-of-symbols disentanglement: symbol variable `w` is how often word `w`
/// occurs in the message.
pub fn bosdis(corpus: &Corpus) -> Result<f64> {
    corpus.require_nonempty()?;
    let vocab: std::collections::BTreeSet<usize> = corpus.messages.iter().flatten().copied().collect();
    let symbols: Vec<Vec<usize>> = vocab
        .iter()
        .map(|&w| corpus.messages.iter().map(|m| m.iter().filter(|&&x| x == w).count()).collect())
        .collect();
    Ok(gap_score(&symbols, &attribute_columns(corpus)))
}
