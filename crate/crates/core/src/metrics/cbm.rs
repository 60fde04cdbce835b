//! Concept best matching: a one-to-one word/concept assignment.

use std::collections::BTreeSet;

use super::{hungarian_max, Corpus};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct MatchingResult {
    /// `(word, concept)` pairs of the assignment.
    pub mapping: Vec<(usize, usize)>,
    /// Concept occurrences whose matched word is in the paired message.
    pub matched: usize,
    /// Misses where no unassigned word standing for the concept was used.
    pub ambiguous: usize,
    /// Misses where the concept was expressed by an unassigned synonym.
    pub paraphrase: usize,
    pub total: usize,
    pub score: f64,
}

/// Co-occurrence counts (pairs whose message holds `w` and phrase holds
/// `c`) drive a maximum-weight injective word→concept assignment. The score
/// is the share of concept occurrences whose assigned word appears in the
/// paired message. A miss counts as a paraphrase when the message carries
/// an unassigned word whose most frequent companion concept is the missed
/// one, otherwise as ambiguous.
pub fn cbm(corpus: &Corpus) -> Result<MatchingResult> {
    corpus.require_nonempty()?;
    let words: Vec<usize> = corpus.messages.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let concepts: Vec<usize> = corpus.phrases.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let wi = |w: usize| words.binary_search(&w).unwrap();
    let ci = |c: usize| concepts.binary_search(&c).unwrap();

    let mut co = vec![vec![0.0; concepts.len()]; words.len()];
    let mut bags = Vec::with_capacity(corpus.len());
    for (m, p) in corpus.messages.iter().zip(&corpus.phrases) {
        let ws: BTreeSet<usize> = m.iter().map(|&w| wi(w)).collect();
        let cs: BTreeSet<usize> = p.iter().map(|&c| ci(c)).collect();
        for &w in &ws {
            for &c in &cs {
                co[w][c] += 1.0;
            }
        }
        bags.push((ws, cs));
    }
    let (assign, _) = hungarian_max(&co)?;
    let mut word_of = vec![None; concepts.len()];
    for (w, c) in assign.iter().enumerate() {
        if let Some(c) = *c {
            if co[w][c] > 0.0 {
                word_of[c] = Some(w);
            }
        }
    }
    let assigned: BTreeSet<usize> = word_of.iter().flatten().copied().collect();
    let favourite: Vec<usize> = co
        .iter()
        .map(|row| (0..row.len()).fold(0, |b, c| if row[c] > row[b] { c } else { b }))
        .collect();

    let (mut matched, mut ambiguous, mut paraphrase, mut total) = (0, 0, 0, 0);
    for (ws, cs) in &bags {
        for &c in cs {
            total += 1;
            if word_of[c].is_some_and(|w| ws.contains(&w)) {
                matched += 1;
            } else if ws.iter().any(|w| !assigned.contains(w) && favourite[*w] == c) {
                paraphrase += 1;
            } else {
                ambiguous += 1;
            }
        }
    }
    let mapping = word_of
        .iter()
        .enumerate()
        .filter_map(|(c, w)| w.map(|w| (words[w], concepts[c])))
        .collect();
    Ok(MatchingResult {
        mapping,
        matched,
        ambiguous,
        paraphrase,
        total,
        score: matched as f64 / total.max(1) as f64,
    })
}
