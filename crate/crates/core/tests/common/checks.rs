#![allow(dead_code)]

use ctd_core::channels::{commitment_loss, ema_update, quantize_batch, quantize_on_tape, round_bits, round_st};
use ctd_core::diffcore::{finite_diff_check, lstm_step, Linear, Lstm, ParamStore, Rng, Tape, Tensor, Var};

use super::{fd_grad, random_vec, rel_err};

const EPS: f64 = 1e-6;

fn input(rng: &mut Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, random_vec(rng, rows * cols, 1.0)).unwrap()
}

/// Two-layer ReLU MLP under softmax cross-entropy.
pub fn fd_mlp(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut store = ParamStore::new();
    let l1 = Linear::new(&mut store, "l1", 6, 5, &mut rng).unwrap();
    let l2 = Linear::new(&mut store, "l2", 5, 3, &mut rng).unwrap();
    let x = input(&mut rng, 4, 6);
    let targets = [0, 2, 1, 2];
    finite_diff_check(&mut store, EPS, |t: &mut Tape, v: &[Var]| {
        let xi = t.constant(x.clone())?;
        let h = l1.forward(t, v, xi)?;
        let h = t.relu(h)?;
        let o = l2.forward(t, v, h)?;
        t.softmax_cross_entropy(o, &targets)
    })
    .unwrap()
}

/// Three LSTM steps followed by a linear read-out under MSE.
pub fn fd_lstm(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let mut store = ParamStore::new();
    let cell = Lstm::new(&mut store, "cell", 4, 5, &mut rng).unwrap();
    let out = Linear::new(&mut store, "out", 5, 3, &mut rng).unwrap();
    let xs: Vec<Tensor> = (0..3).map(|_| input(&mut rng, 2, 4)).collect();
    let target = input(&mut rng, 2, 3);
    finite_diff_check(&mut store, EPS, |t: &mut Tape, v: &[Var]| {
        let p = cell.vars(v);
        let mut h = t.constant(Tensor::zeros(&[2, 5]))?;
        let mut c = t.constant(Tensor::zeros(&[2, 5]))?;
        for x in &xs {
            let xi = t.constant(x.clone())?;
            (h, c) = lstm_step(t, xi, h, c, &p)?;
        }
        let o = out.forward(t, v, h)?;
        let y = t.constant(target.clone())?;
        t.mse(o, y)
    })
    .unwrap()
}

#[derive(Clone, Copy, Debug)]
pub enum Head {
    Ce,
    Bce,
    Mse,
}

/// One linear layer under the given loss.
pub fn fd_head(seed: u64, head: Head) -> f64 {
    let mut rng = Rng::new(seed);
    let mut store = ParamStore::new();
    let lin = Linear::new(&mut store, "lin", 5, 4, &mut rng).unwrap();
    let x = input(&mut rng, 3, 5);
    let labels: Vec<f64> = (0..12).map(|_| rng.below(2) as f64).collect();
    let target = input(&mut rng, 3, 4);
    finite_diff_check(&mut store, EPS, |t: &mut Tape, v: &[Var]| {
        let xi = t.constant(x.clone())?;
        let o = lin.forward(t, v, xi)?;
        match head {
            Head::Ce => t.softmax_cross_entropy(o, &[3, 0, 1]),
            Head::Bce => t.bce_with_logits(o, &labels),
            Head::Mse => {
                let y = t.constant(target.clone())?;
                t.mse(o, y)
            }
        }
    })
    .unwrap()
}

fn ce_of(t: &mut Tape, h: Var, w: &Tensor, targets: &[usize]) -> Var {
    let wv = t.constant(w.clone()).unwrap();
    let o = t.matmul(h, wv).unwrap();
    t.softmax_cross_entropy(o, targets).unwrap()
}

/// Codebook straight-through path: the tape gradient of the task loss with
/// respect to `z` against central differences of the frozen-selection
/// surrogate `mean(words[ids(z₀)]) + (z − z₀)`.
pub fn fd_codebook_st(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (b, d, n, l) = (4, 6, 9, 2);
    let z0 = input(&mut rng, b, d);
    let words = input(&mut rng, n, d);
    let w = input(&mut rng, d, 3);
    let targets = [0, 1, 2, 1];

    let mut t = Tape::new();
    let z = t.variable(z0.clone()).unwrap();
    let wv = t.constant(words.clone()).unwrap();
    let q = quantize_on_tape(&mut t, z, wv, l, 0.25).unwrap();
    let loss = ce_of(&mut t, q.value, &w, &targets);
    let g = t.backward(loss).unwrap().get_or_zeros(z, &z0);

    let ids = quantize_batch(&words, &z0, l).unwrap();
    let mut base = Tensor::zeros(&[b, d]);
    for (i, sel) in ids.iter().enumerate() {
        for &k in sel {
            for (o, v) in base.row_mut(i).iter_mut().zip(words.row(k)) {
                *o += v / l as f64;
            }
        }
    }
    let fd = fd_grad(z0.data(), EPS, |zz| {
        let mut t = Tape::new();
        let v: Vec<f64> = base.data().iter().zip(zz).zip(z0.data()).map(|((m, a), a0)| m + (a - a0)).collect();
        let h = t.constant(Tensor::matrix(b, d, v).unwrap()).unwrap();
        let o = ce_of(&mut t, h, &w, &targets);
        t.value(o).item()
    });
    rel_err(g.data(), &fd)
}

/// Quantized straight-through path: rounded sigmoids against the surrogate
/// `round(p₀) + (σ(x) − p₀)`.
pub fn fd_quantized_st(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (b, k) = (3, 5);
    let x0 = input(&mut rng, b, k);
    let w = input(&mut rng, k, 4);
    let targets = [1, 3, 0];

    let mut t = Tape::new();
    let x = t.variable(x0.clone()).unwrap();
    let p = t.sigmoid(x).unwrap();
    let bits = round_st(&mut t, p).unwrap();
    let loss = ce_of(&mut t, bits, &w, &targets);
    let g = t.backward(loss).unwrap().get_or_zeros(x, &x0);

    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let p0 = x0.map(sig);
    let r0 = round_bits(&p0);
    let fd = fd_grad(x0.data(), EPS, |xx| {
        let mut t = Tape::new();
        let v: Vec<f64> = xx
            .iter()
            .zip(r0.data().iter().zip(p0.data()))
            .map(|(&a, (&r, &q))| r + sig(a) - q)
            .collect();
        let h = t.constant(Tensor::matrix(b, k, v).unwrap()).unwrap();
        let o = ce_of(&mut t, h, &w, &targets);
        t.value(o).item()
    });
    rel_err(g.data(), &fd)
}

/// Largest deviation of repeated EMA updates from
/// `N_T = γ^T N₀ + Σ_t γ^{T−t}(1 − γ) n_t / B`.
pub fn ema_closed_form_err(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (words, batch, steps, gamma) = (7, 10, 40, 0.99);
    let n0 = random_vec(&mut rng, words, 1.0).into_iter().map(f64::abs).collect::<Vec<_>>();
    let counts: Vec<Vec<usize>> = (0..steps).map(|_| (0..words).map(|_| rng.below(batch + 1)).collect()).collect();
    let mut usage = n0.clone();
    for c in &counts {
        ema_update(&mut usage, c, batch, gamma).unwrap();
    }
    let mut worst: f64 = 0.0;
    for k in 0..words {
        let mut expect = gamma.powi(steps as i32) * n0[k];
        for (t, c) in counts.iter().enumerate() {
            let age = (steps - 1 - t) as i32;
            expect += gamma.powi(age) * (1.0 - gamma) * c[k] as f64 / batch as f64;
        }
        worst = worst.max((expect - usage[k]).abs());
    }
    worst
}

/// Largest deviation of the commitment loss value and its two gradients
/// from the hand rules
/// `L = Σ_{i,j} (1 + β₂)‖z_i − w_ij‖² / (B·l)`,
/// `∂L/∂z_i = Σ_j 2β₂(z_i − w_ij)/(B·l)`, `∂L/∂w_ij = −2(z_i − w_ij)/(B·l)`.
pub fn commitment_hand_err(seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let (b, d, l, beta2) = (3, 4, 2, 0.25);
    let z0 = input(&mut rng, b, d);
    let sel0 = input(&mut rng, b * l, d);
    let mut t = Tape::new();
    let z = t.variable(z0.clone()).unwrap();
    let s = t.variable(sel0.clone()).unwrap();
    let loss = commitment_loss(&mut t, z, s, l, beta2).unwrap();
    let value = t.value(loss).item();
    let g = t.backward(loss).unwrap();
    let gz = g.get_or_zeros(z, &z0);
    let gs = g.get_or_zeros(s, &sel0);

    let bl = (b * l) as f64;
    let mut worst: f64 = 0.0;
    let mut expect = 0.0;
    for i in 0..b {
        for j in 0..l {
            let r = i * l + j;
            for c in 0..d {
                let diff = z0.get(i, c) - sel0.get(r, c);
                expect += (1.0 + beta2) * diff * diff / bl;
                worst = worst.max((gs.get(r, c) + 2.0 * diff / bl).abs());
            }
        }
        for c in 0..d {
            let want: f64 = (0..l).map(|j| 2.0 * beta2 * (z0.get(i, c) - sel0.get(i * l + j, c)) / bl).sum();
            worst = worst.max((gz.get(i, c) - want).abs());
        }
    }
    worst.max((expect - value).abs())
}
