//! Context independence from IBM Model 1 alignments.

use std::collections::BTreeSet;

use super::Corpus;
use crate::error::Result;

pub const CI_DEFAULT_ITERS: usize = 50;
/// EM stops once no probability moves by more than this.
pub const CI_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CiResult {
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// IBM Model 1 translation table `t[f][e] = P(f | e)` estimated by EM from
/// sentence pairs (source `e`, target `f`), uniform start.
fn ibm1(src: &[Vec<usize>], tgt: &[Vec<usize>], ne: usize, nf: usize, iters: usize) -> (Vec<Vec<f64>>, bool, usize) {
    let mut t = vec![vec![1.0 / nf as f64; ne]; nf];
    let mut count = vec![vec![0.0; ne]; nf];
    let mut total = vec![0.0; ne];
    for it in 1..=iters {
        count.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
        total.iter_mut().for_each(|v| *v = 0.0);
        for (es, fs) in src.iter().zip(tgt) {
            for &f in fs {
                let z: f64 = es.iter().map(|&e| t[f][e]).sum();
                if z <= 0.0 {
                    continue;
                }
                for &e in es {
                    let c = t[f][e] / z;
                    count[f][e] += c;
                    total[e] += c;
                }
            }
        }
        let mut delta: f64 = 0.0;
        for f in 0..nf {
            for e in 0..ne {
                let new = if total[e] > 0.0 { count[f][e] / total[e] } else { t[f][e] };
                delta = delta.max((new - t[f][e]).abs());
                t[f][e] = new;
            }
        }
        if delta < CI_TOL {
            return (t, true, it);
        }
    }
    (t, false, iters)
}

fn relabel(xs: &[Vec<usize>]) -> (Vec<Vec<usize>>, Vec<usize>) {
    let vocab: Vec<usize> = xs.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let dense = xs
        .iter()
        .map(|s| s.iter().map(|x| vocab.binary_search(x).unwrap()).collect())
        .collect();
    (dense, vocab)
}

/// `(1/|C|) Σ_c P(w_c|c)·P(c|w_c)` with `w_c = argmax_w P(c|w)`; both
/// conditionals come from IBM Model 1 run in each direction.
pub fn ci(corpus: &Corpus, iters: usize) -> Result<CiResult> {
    corpus.require_nonempty()?;
    let (msgs, words) = relabel(&corpus.messages);
    let (phr, concepts) = relabel(&corpus.phrases);
    let (nw, nc) = (words.len(), concepts.len());
    if nw == 0 || nc == 0 {
        return Ok(CiResult {
            value: 0.0,
            converged: true,
            iterations: 0,
        });
    }
    // P(w|c): concepts generate words; P(c|w): words generate concepts
    let (p_w_c, ok1, it1) = ibm1(&phr, &msgs, nc, nw, iters);
    let (p_c_w, ok2, it2) = ibm1(&msgs, &phr, nw, nc, iters);
    let mut sum = 0.0;
    for c in 0..nc {
        let wc = (0..nw).fold(0, |best, w| if p_c_w[c][w] > p_c_w[c][best] { w } else { best });
        sum += p_w_c[wc][c] * p_c_w[c][wc];
    }
    Ok(CiResult {
        value: sum / nc as f64,
        converged: ok1 && ok2,
        iterations: it1.max(it2),
    })
}
