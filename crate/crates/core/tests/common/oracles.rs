#![allow(dead_code)]

use ctd_core::diffcore::Rng;
use ctd_core::metrics::{bosdis, cbm, ci, expected_mutual_info, posdis, Corpus, CI_DEFAULT_ITERS};

use super::{brute_cbm_matched, exhaustive_emi, factorial_corpus, random_corpus};

/// Corpora out of `n` whose CBM matched count differs from brute force.
pub fn cbm_brute_mismatches(seed: u64, n: usize) -> usize {
    let mut rng = Rng::new(seed);
    (0..n)
        .filter(|_| {
            let c = random_corpus(&mut rng, 7, 7);
            let m = cbm(&c).unwrap();
            let brute = brute_cbm_matched(&c);
            m.matched != brute || (m.score - brute as f64 / m.total as f64).abs() > 1e-12
        })
        .count()
}

fn random_sizes(rng: &mut Rng, n: usize) -> Vec<usize> {
    let mut sizes = Vec::new();
    let mut left = n;
    while left > 0 {
        let s = 1 + rng.below(left);
        sizes.push(s);
        left -= s;
    }
    sizes
}

/// Worst |E[I] − exhaustive average| over random cluster sizes with n ≤ 8.
pub fn emi_max_err(seed: u64, cases: usize) -> f64 {
    let mut rng = Rng::new(seed);
    (0..cases)
        .map(|_| {
            let n = 1 + rng.below(8);
            let a = random_sizes(&mut rng, n);
            let b = random_sizes(&mut rng, n);
            (expected_mutual_info(&a, &b) - exhaustive_emi(&a, &b)).abs()
        })
        .fold(0.0, f64::max)
}

/// A random word permutation over `n` ids.
fn perm(rng: &mut Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut p);
    p
}

/// Bijective corpora: single concepts, and full factorials of 2 and 3
/// attributes with words shuffled inside each message.
pub fn bijective_corpora(seed: u64) -> Vec<Corpus> {
    let mut rng = Rng::new(seed);
    let p = perm(&mut rng, 50);
    let single = Corpus::new((0..50).map(|c| vec![p[c]]).collect(), (0..50).map(|c| vec![c]).collect()).unwrap();
    let mut out = vec![single];
    for (attrs, values) in [(2, 5), (3, 4)] {
        let p = perm(&mut rng, attrs * values);
        let mut c = factorial_corpus(attrs, values, |a, v| p[a * values + v]);
        for m in c.messages.iter_mut() {
            rng.shuffle(m);
        }
        out.push(c);
    }
    out
}

/// Worst |CI − 1| over the bijective corpora.
pub fn ci_bijective_err(seed: u64) -> f64 {
    bijective_corpora(seed)
        .iter()
        .map(|c| (ci(c, CI_DEFAULT_ITERS).unwrap().value - 1.0).abs())
        .fold(0.0, f64::max)
}

/// (posdis of a positional corpus, bosdis of a bag corpus).
pub fn disent_constructed(seed: u64) -> (f64, f64) {
    let mut rng = Rng::new(seed);
    let p = perm(&mut rng, 12);
    let positional = factorial_corpus(3, 4, |a, v| p[a * 4 + v]);
    let mut bag = positional.clone();
    for m in bag.messages.iter_mut() {
        rng.shuffle(m);
    }
    (posdis(&positional).unwrap(), bosdis(&bag).unwrap())
}

/// (posdis, bosdis) of 1000 random messages paired with random objects.
pub fn disent_random(seed: u64) -> (f64, f64) {
    let mut rng = Rng::new(seed);
    let full = factorial_corpus(3, 10, |a, v| a * 10 + v);
    let mut messages = Vec::new();
    let mut phrases = Vec::new();
    for _ in 0..1000 {
        messages.push((0..3).map(|_| rng.below(10)).collect());
        phrases.push(full.phrases[rng.below(full.len())].clone());
    }
    let c = Corpus::new(messages, phrases).unwrap();
    (posdis(&c).unwrap(), bosdis(&c).unwrap())
}
