//! Gumbel-softmax relaxation of categorical words.

use crate::diffcore::{Rng, Tape, Tensor, Var};
use crate::error::{CtdError, Result};

/// `softmax((log π + g)/τ)` with fresh Gumbel noise `g` per entry.
/// `logits` are unnormalized; `log π` is their log-softmax.
pub fn gumbel_softmax(tape: &mut Tape, logits: Var, tau: f64, rng: &mut Rng) -> Result<Var> {
    if !(tau > 0.0) {
        return Err(CtdError::Invalid(format!("temperature must be positive, got {tau}")));
    }
    let shape = tape.value(logits).shape().to_vec();
    let mut noise = Tensor::zeros(&shape);
    for v in noise.data_mut() {
        *v = rng.gumbel();
    }
    let lp = tape.log_softmax_rows(logits)?;
    let g = tape.constant(noise)?;
    let y = tape.add(lp, g)?;
    let y = tape.scale(y, 1.0 / tau)?;
    tape.softmax_rows(y)
}

/// Row-wise argmax; ties go to the lower index.
pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    (0..t.rows())
        .map(|i| {
            t.row(i)
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                .0
        })
        .collect()
}

/// One-hot rows for `ids` over `n` classes.
pub fn one_hot(ids: &[usize], n: usize) -> Tensor {
    let mut t = Tensor::zeros(&[ids.len(), n]);
    for (i, &k) in ids.iter().enumerate() {
        t.row_mut(i)[k] = 1.0;
    }
    t
}
