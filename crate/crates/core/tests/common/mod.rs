#![allow(dead_code)]

pub mod checks;
pub mod oracles;

use std::collections::BTreeSet;

use ctd_core::diffcore::Rng;
use ctd_core::metrics::Corpus;

/// Mutual information (nats) of two aligned label vectors.
pub fn mi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![vec![0.0; kb]; ka];
    let mut pa = vec![0.0; ka];
    let mut pb = vec![0.0; kb];
    for (&x, &y) in a.iter().zip(b) {
        joint[x][y] += 1.0;
        pa[x] += 1.0;
        pb[y] += 1.0;
    }
    let mut s = 0.0;
    for x in 0..ka {
        for y in 0..kb {
            let j = joint[x][y];
            if j > 0.0 {
                s += j / n * (j * n / (pa[x] * pb[y])).ln();
            }
        }
    }
    s
}

fn expand(sizes: &[usize]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(k, &s)| std::iter::repeat(k).take(s)).collect()
}

/// E[I] by averaging the mutual information over every permutation of the
/// second labelling (Heap's algorithm).
pub fn exhaustive_emi(a: &[usize], b: &[usize]) -> f64 {
    let u = expand(a);
    let mut v = expand(b);
    assert_eq!(u.len(), v.len());
    let n = v.len();
    let mut c = vec![0usize; n];
    let mut total = mi(&u, &v);
    let mut count = 1.0;
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                v.swap(0, i);
            } else {
                v.swap(c[i], i);
            }
            total += mi(&u, &v);
            count += 1.0;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    total / count
}

/// Best total co-occurrence over injective partial word→concept maps, by
/// dynamic programming over the set of used concepts.
pub fn brute_cbm_matched(corpus: &Corpus) -> usize {
    let words: Vec<usize> = corpus.messages.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let concepts: Vec<usize> = corpus.phrases.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let nc = concepts.len();
    let mut co = vec![vec![0usize; nc]; words.len()];
    for (m, p) in corpus.messages.iter().zip(&corpus.phrases) {
        let ws: BTreeSet<usize> = m.iter().copied().collect();
        let cs: BTreeSet<usize> = p.iter().copied().collect();
        for w in &ws {
            for c in &cs {
                let wi = words.binary_search(w).unwrap();
                let ci = concepts.binary_search(c).unwrap();
                co[wi][ci] += 1;
            }
        }
    }
    let mut best: Vec<Option<usize>> = vec![None; 1 << nc];
    best[0] = Some(0);
    for row in &co {
        let mut next = best.clone();
        for mask in 0..(1usize << nc) {
            let Some(v) = best[mask] else { continue };
            for (c, &x) in row.iter().enumerate() {
                if mask & (1 << c) == 0 {
                    let m2 = mask | (1 << c);
                    next[m2] = Some(next[m2].map_or(v + x, |o| o.max(v + x)));
                }
            }
        }
        best = next;
    }
    best.into_iter().flatten().max().unwrap_or(0)
}

/// Random corpus over at most `max_words` words and `max_concepts` concepts.
/// Phrases hold distinct concepts.
pub fn random_corpus(rng: &mut Rng, max_words: usize, max_concepts: usize) -> Corpus {
    let nw = 1 + rng.below(max_words);
    let nc = 1 + rng.below(max_concepts);
    let len = 1 + rng.below(3);
    let plen = 1 + rng.below(nc.min(3));
    let n = 1 + rng.below(30);
    let mut messages = Vec::new();
    let mut phrases = Vec::new();
    for _ in 0..n {
        messages.push((0..len).map(|_| rng.below(nw)).collect());
        let mut p: Vec<usize> = (0..nc).collect();
        rng.shuffle(&mut p);
        p.truncate(plen);
        p.sort_unstable();
        phrases.push(p);
    }
    Corpus::new(messages, phrases).unwrap()
}

/// Full factorial of `attrs` attributes with `values` values each; concept
/// ids are `attr·values + value`. The message of an object names each value
/// in attribute order through `word(attr, value)`.
pub fn factorial_corpus(attrs: usize, values: usize, word: impl Fn(usize, usize) -> usize) -> Corpus {
    let n = values.pow(attrs as u32);
    let mut messages = Vec::new();
    let mut phrases = Vec::new();
    for o in 0..n {
        let vals: Vec<usize> = (0..attrs).map(|a| (o / values.pow(a as u32)) % values).collect();
        messages.push(vals.iter().enumerate().map(|(a, &v)| word(a, v)).collect());
        phrases.push(vals.iter().enumerate().map(|(a, &v)| a * values + v).collect());
    }
    Corpus::new(messages, phrases).unwrap()
}

/// Central-difference gradient of `f` at `x`.
pub fn fd_grad(x: &[f64], eps: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + eps;
            let up = f(&p);
            p[i] = x[i] - eps;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// `‖a − b‖ / (‖a‖ + ‖b‖)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / n.max(1e-12)
}

pub fn random_vec(rng: &mut Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| (rng.uniform() * 2.0 - 1.0) * scale).collect()
}
