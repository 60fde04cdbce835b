//! Central finite-difference check of tape gradients.

use super::adam::ParamStore;
use super::tape::{Tape, Var};
use crate::error::{CtdError, Result};

/// Compares tape gradients of `f` with central differences of step `eps`.
///
/// Returns the worst relative error over parameter tensors, each measured as
/// `‖g_fd − g_tape‖ / max(1e-8, ‖g_fd‖ + ‖g_tape‖)`. Comparing whole tensors
/// keeps exact-zero gradients from being swamped by finite-difference noise.
pub fn finite_diff_check<F>(store: &mut ParamStore, eps: f64, mut f: F) -> Result<f64>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars = store.bind(&mut tape)?;
    let out = f(&mut tape, &vars)?;
    if !tape.value(out).item().is_finite() {
        return Err(CtdError::NonFinite("finite_diff_check"));
    }
    let grads = tape.backward(out)?;
    let analytic: Vec<_> = vars
        .iter()
        .zip(store.params())
        .map(|(&v, p)| grads.get_or_zeros(v, &p.value))
        .collect();

    let mut eval = |store: &ParamStore| -> Result<f64> {
        let mut t = Tape::new();
        let vs = store.bind(&mut t)?;
        let o = f(&mut t, &vs)?;
        let v = t.value(o).item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CtdError::NonFinite("finite_diff_check"))
        }
    };

    let mut worst: f64 = 0.0;
    for (pi, g_tape) in analytic.iter().enumerate() {
        let mut diff2 = 0.0;
        let mut fd2 = 0.0;
        for k in 0..g_tape.len() {
            let orig = store.value(pi).data()[k];
            store.value_mut(pi).data_mut()[k] = orig + eps;
            let up = eval(store)?;
            store.value_mut(pi).data_mut()[k] = orig - eps;
            let down = eval(store)?;
            store.value_mut(pi).data_mut()[k] = orig;
            let fd = (up - down) / (2.0 * eps);
            diff2 += (fd - g_tape.data()[k]).powi(2);
            fd2 += fd * fd;
        }
        let rel = diff2.sqrt() / (fd2.sqrt() + g_tape.norm()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
