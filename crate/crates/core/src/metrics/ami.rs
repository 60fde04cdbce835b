//! Adjusted mutual information between whole messages and whole phrases.

use super::{encode_labels, entropy, mutual_info, Corpus};
use crate::error::Result;

fn ln_fact_table(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for i in 1..=n {
        t[i] = t[i - 1] + (i as f64).ln();
    }
    t
}

/// Expected mutual information of two clusterings with the given cluster
/// sizes under the hypergeometric (permutation) model.
pub fn expected_mutual_info(a: &[usize], b: &[usize]) -> f64 {
    let n: usize = a.iter().sum();
    let lf = ln_fact_table(n);
    let nf = n as f64;
    let mut e = 0.0;
    for &ai in a {
        for &bj in b {
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            for k in lo..=hi {
                let kf = k as f64;
                let term = kf / nf * (nf * kf / (ai as f64 * bj as f64)).ln();
                let ln_p = lf[ai] + lf[bj] + lf[n - ai] + lf[n - bj]
                    - lf[n]
                    - lf[k]
                    - lf[ai - k]
                    - lf[bj - k]
                    - lf[n + k - ai - bj];
                e += term * ln_p.exp();
            }
        }
    }
    e
}

fn sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut s = vec![0; k];
    for &l in labels {
        s[l] += 1;
    }
    s
}

/// `(I − E[I]) / (max(H(M), H(L)) − E[I])`. Zero when either side has a
/// single cluster or the denominator vanishes.
pub fn ami(corpus: &Corpus) -> Result<f64> {
    corpus.require_nonempty()?;
    let (m, km) = encode_labels(&corpus.messages);
    let (p, kp) = encode_labels(&corpus.phrases);
    if km < 2 || kp < 2 {
        return Ok(0.0);
    }
    let i = mutual_info(&m, &p);
    let e = expected_mutual_info(&sizes(&m, km), &sizes(&p, kp));
    let h = entropy(&m).max(entropy(&p));
    let den = h - e;
    if den.abs() < 1e-12 {
        return Ok(0.0);
    }
    Ok((i - e) / den)
}
