//! Fixtures shared by the benchmarks.

use ctd_core::diffcore::{Rng, Tensor};
use ctd_core::games::Agents;
use ctd_core::metrics::Corpus;
use ctd_core::trainer::{Experiment, ExperimentConfig};
use ctd_core::worlds::GameSample;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = Rng::new(seed);
    let data = (0..rows * cols).map(|_| rng.uniform() * 2.0 - 1.0).collect();
    Tensor::matrix(rows, cols, data).expect("shape matches data")
}

/// Default THING experiment with fresh Decompose agents and `n` training samples.
pub fn thing_batch(n: usize) -> (Experiment, Agents, Vec<GameSample>) {
    let mut cfg = ExperimentConfig::default();
    cfg.decompose.sizes.train = n;
    cfg.decompose.sizes.val = 10;
    cfg.decompose.sizes.test = 10;
    let exp = Experiment::new(cfg).expect("default config is valid");
    let agents = exp.template().expect("agents build");
    let data = exp.data(true).expect("data generates");
    (exp, agents, data.train)
}

/// A bag-of-words corpus of `n` samples over `concepts` concepts, with a
/// fraction `noise` of words replaced at random.
pub fn noisy_corpus(n: usize, concepts: usize, len: usize, noise: f64, seed: u64) -> Corpus {
    let mut rng = Rng::new(seed);
    let mut messages = Vec::with_capacity(n);
    let mut phrases = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p: Vec<usize> = (0..concepts).collect();
        rng.shuffle(&mut p);
        p.truncate(len);
        p.sort_unstable();
        let m = p
            .iter()
            .map(|&c| if rng.uniform() < noise { rng.below(concepts) } else { c })
            .collect();
        messages.push(m);
        phrases.push(p);
    }
    Corpus::new(messages, phrases).expect("aligned corpus")
}
