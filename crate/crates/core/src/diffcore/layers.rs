//! Dense and LSTM layers over a [`ParamStore`].

use super::adam::ParamStore;
use super::rng::Rng;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{shape_err, Result};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) tensor.
pub fn uniform_init(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    let a = 1.0 / (fan_in.max(1) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = (2.0 * rng.uniform() - 1.0) * a;
    }
    t
}

/// `y = x·W + b` with `W` stored `[in × out]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Self> {
        let w = store.add(format!("{name}.w"), uniform_init(&[fan_in, fan_out], fan_in, rng))?;
        let b = store.add(format!("{name}.b"), uniform_init(&[fan_out], fan_in, rng))?;
        Ok(Linear { w, b, fan_in, fan_out })
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        tape.matmul_add(x, vars[self.w], vars[self.b])
    }
}

/// Gate weights of one LSTM cell, already bound to a tape. Columns of the
/// `4H`-wide matrices are ordered input, forget, candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub wx: Var,
    pub wh: Var,
    pub b: Var,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lstm {
    pub wx: usize,
    pub wh: usize,
    pub b: usize,
    pub input: usize,
    pub hidden: usize,
}

impl Lstm {
    /// Forget-gate biases start at 1.0, all else uniform(±1/sqrt(H)).
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        let wx = store.add(format!("{name}.wx"), uniform_init(&[input, 4 * hidden], hidden, rng))?;
        let wh = store.add(format!("{name}.wh"), uniform_init(&[hidden, 4 * hidden], hidden, rng))?;
        let mut bias = uniform_init(&[4 * hidden], hidden, rng);
        bias.data_mut()[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let b = store.add(format!("{name}.b"), bias)?;
        Ok(Lstm { wx, wh, b, input, hidden })
    }

    pub fn vars(&self, vars: &[Var]) -> LstmVars {
        LstmVars {
            wx: vars[self.wx],
            wh: vars[self.wh],
            b: vars[self.b],
        }
    }
}

/// One LSTM step; returns `(h', c')`.
pub fn lstm_step(tape: &mut Tape, x: Var, h: Var, c: Var, p: &LstmVars) -> Result<(Var, Var)> {
    let hidden = tape.value(h).cols();
    if tape.value(p.wh).rows() != hidden || tape.value(p.wh).cols() != 4 * hidden || tape.value(c).cols() != hidden {
        return Err(shape_err("lstm_step", "hidden size does not match parameters"));
    }
    let gx = tape.matmul(x, p.wx)?;
    let gh = tape.matmul(h, p.wh)?;
    let pre = tape.add(gx, gh)?;
    let pre = tape.add_row(pre, p.b)?;
    let i = tape.slice_cols(pre, 0, hidden)?;
    let f = tape.slice_cols(pre, hidden, hidden)?;
    let g = tape.slice_cols(pre, 2 * hidden, hidden)?;
    let o = tape.slice_cols(pre, 3 * hidden, hidden)?;
    let i = tape.sigmoid(i)?;
    let f = tape.sigmoid(f)?;
    let g = tape.tanh(g)?;
    let o = tape.sigmoid(o)?;
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c2 = tape.add(fc, ig)?;
    let tc = tape.tanh(c2)?;
    let h2 = tape.mul(o, tc)?;
    Ok((h2, c2))
}
