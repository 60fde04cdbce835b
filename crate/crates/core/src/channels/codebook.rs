//! Vector-quantized codebook: nearest-word lookup, the two-sided
//! commitment loss, EMA usage counts and dead-word re-initialization.

use serde::{Deserialize, Serialize};

use crate::diffcore::{Rng, Tape, Tensor, Var};
use crate::error::{shape_err, CtdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookHyper {
    /// EMA decay of usage counts.
    pub gamma: f64,
    pub delta: f64,
    pub eps: f64,
    /// Weight of the `‖z − sg[w]‖²` term.
    pub beta2: f64,
}

impl Default for CodebookHyper {
    fn default() -> Self {
        CodebookHyper {
            gamma: 0.99,
            delta: 10.0,
            eps: 1e-5,
            beta2: 1.0,
        }
    }
}

/// Code-words (`W × d`) with their usage counts.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    pub words: Tensor,
    pub usage: Vec<f64>,
    pub hyper: CodebookHyper,
}

impl Codebook {
    pub fn new(words: Tensor, hyper: CodebookHyper) -> Result<Self> {
        if words.shape().len() != 2 || words.rows() == 0 {
            return Err(CtdError::Invalid("codebook needs a non-empty W×d matrix".into()));
        }
        let usage = vec![0.0; words.rows()];
        Ok(Codebook { words, usage, hyper })
    }

    pub fn size(&self) -> usize {
        self.words.rows()
    }

    pub fn dim(&self) -> usize {
        self.words.cols()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Ids of the `l` words nearest to `z` in squared L2, ascending by id.
/// Distance ties go to the lower id.
pub fn quantize(words: &Tensor, z: &[f64], l: usize) -> Result<Vec<usize>> {
    let n = words.rows();
    if n == 0 || words.is_empty() {
        return Err(CtdError::Invalid("empty codebook".into()));
    }
    if words.cols() != z.len() {
        return Err(shape_err("quantize", format!("latent of {} vs words of {}", z.len(), words.cols())));
    }
    if l == 0 || l > n {
        return Err(CtdError::Invalid(format!("cannot select {l} of {n} words")));
    }
    let mut d: Vec<(f64, usize)> = (0..n).map(|k| (sq_dist(words.row(k), z), k)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut ids: Vec<usize> = d[..l].iter().map(|&(_, k)| k).collect();
    ids.sort_unstable();
    Ok(ids)
}

/// Row-wise [`quantize`] over a `B × d` latent matrix.
pub fn quantize_batch(words: &Tensor, z: &Tensor, l: usize) -> Result<Vec<Vec<usize>>> {
    (0..z.rows()).map(|i| quantize(words, z.row(i), l)).collect()
}

/// Result of pushing a batch of latents through the codebook on a tape.
pub struct Quantized {
    /// Per-sample word ids, ascending.
    pub ids: Vec<Vec<usize>>,
    /// `B × d` mean of each sample's selected words; gradients pass to `z`
    /// unchanged.
    pub value: Var,
    /// Two-sided commitment loss.
    pub commitment: Var,
}

/// Quantizes `z` (`B × d`) against `words` (a tape node holding `W × d`).
pub fn quantize_on_tape(tape: &mut Tape, z: Var, words: Var, l: usize, beta2: f64) -> Result<Quantized> {
    let ids = quantize_batch(tape.value(words), tape.value(z), l)?;
    let flat: Vec<usize> = ids.iter().flatten().copied().collect();
    let selected = tape.gather(words, &flat)?;
    let mean = group_mean_value(tape.value(selected), l)?;
    let value = tape.straight_through(z, mean)?;
    let commitment = commitment_loss(tape, z, selected, l, beta2)?;
    Ok(Quantized { ids, value, commitment })
}

fn group_mean_value(t: &Tensor, l: usize) -> Result<Tensor> {
    let (r, c) = (t.rows(), t.cols());
    let b = r / l;
    let mut out = vec![0.0; b * c];
    for i in 0..r {
        for (o, v) in out[(i / l) * c..(i / l + 1) * c].iter_mut().zip(t.row(i)) {
            *o += v / l as f64;
        }
    }
    Tensor::matrix(b, c, out)
}

/// `‖sg[z] − w‖² + β₂‖z − sg[w]‖²`, averaged over the `B·l` selected words.
/// `selected` holds the words row by row, `l` consecutive rows per sample.
pub fn commitment_loss(tape: &mut Tape, z: Var, selected: Var, l: usize, beta2: f64) -> Result<Var> {
    let zr = tape.repeat_rows(z, l)?;
    if tape.value(zr).shape() != tape.value(selected).shape() {
        return Err(shape_err(
            "commitment_loss",
            format!("{:?} vs {:?}", tape.value(zr).shape(), tape.value(selected).shape()),
        ));
    }
    let z_sg = tape.detach(zr)?;
    let w_sg = tape.detach(selected)?;
    let dict = tape.sq_dist(z_sg, selected)?;
    let commit = tape.sq_dist(zr, w_sg)?;
    let commit = tape.scale(commit, beta2)?;
    tape.add(dict, commit)
}

/// `N_k ← γN_k + (1 − γ)·n_k/B`.
pub fn ema_update(usage: &mut [f64], counts: &[usize], batch: usize, gamma: f64) -> Result<()> {
    if usage.len() != counts.len() {
        return Err(shape_err("ema_update", format!("{} counts for {} words", counts.len(), usage.len())));
    }
    let b = batch.max(1) as f64;
    for (n, &c) in usage.iter_mut().zip(counts) {
        *n = *n * gamma + (c as f64 / b) * (1.0 - gamma);
    }
    Ok(())
}

/// Word counts over a batch of messages.
pub fn word_counts(ids: &[Vec<usize>], n_words: usize) -> Vec<usize> {
    let mut c = vec![0; n_words];
    for &k in ids.iter().flatten() {
        c[k] += 1;
    }
    c
}

/// Re-initialization weight `α = exp(−N·W·δ/(1 − γ) − ε)`.
pub fn reinit_alpha(usage: f64, n_words: usize, h: &CodebookHyper) -> f64 {
    (-usage * n_words as f64 * h.delta / (1.0 - h.gamma) - h.eps).exp()
}

/// Pulls rarely used words toward anchors sampled from the batch latents
/// with probability proportional to `exp(−‖z_i − w_k‖²)`.
pub fn reinit(words: &mut Tensor, usage: &[f64], latents: &Tensor, h: &CodebookHyper, rng: &mut Rng) -> Result<()> {
    let (n, d) = (words.rows(), words.cols());
    if latents.rows() == 0 {
        return Err(CtdError::Invalid("re-initialization needs a non-empty batch".into()));
    }
    if latents.cols() != d || usage.len() != n {
        return Err(shape_err("reinit", "latents, words and usage disagree"));
    }
    let mut logits = vec![0.0; latents.rows()];
    for k in 0..n {
        let alpha = reinit_alpha(usage[k], n, h);
        // draw unconditionally so the stream does not depend on usage
        let u = rng.uniform();
        if alpha < 1e-300 {
            continue;
        }
        for (i, lg) in logits.iter_mut().enumerate() {
            *lg = -sq_dist(latents.row(i), words.row(k));
        }
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|v| (v - m).exp()).sum();
        let mut acc = 0.0;
        let mut pick = latents.rows() - 1;
        for (i, v) in logits.iter().enumerate() {
            acc += (v - m).exp() / total;
            if u < acc {
                pick = i;
                break;
            }
        }
        let anchor = latents.row(pick).to_vec();
        for (w, a) in words.row_mut(k).iter_mut().zip(anchor) {
            *w = *w * (1.0 - alpha) + a * alpha;
        }
    }
    Ok(())
}
