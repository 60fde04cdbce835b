use ctd_core::diffcore::{Rng, Tape};
use ctd_core::games::{receiver_score, sender_aggregate, Activation, AgentArch};
use ctd_core::trainer::{Experiment, ExperimentConfig};
use ctd_core::worlds::WorldKind;
use proptest::prelude::*;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn experiment(dataset: WorldKind, activation: Activation, seed: u64) -> Experiment {
    let cfg = ExperimentConfig {
        dataset,
        seed,
        arch: AgentArch {
            hidden: 12,
            latent: 9,
            activation,
        },
        ..ExperimentConfig::default()
    };
    Experiment::new(cfg).unwrap()
}

fn objects(rng: &mut Rng, n: usize) -> Vec<ctd_core::ObjectId> {
    (0..n).map(|_| ctd_core::ObjectId(rng.below(100_000) as u32)).collect()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pooled_sender_equals_mean_of_encodings(seed in any::<u64>(), relu in any::<bool>(), qrc in any::<bool>()) {
        let act = if relu { Activation::Relu } else { Activation::Identity };
        let exp = experiment(if qrc { WorldKind::Qrc } else { WorldKind::Thing }, act, seed);
        let agents = exp.template().unwrap();
        let mut rng = Rng::new(seed);
        let (b, g) = (3, 4);
        let x = exp.world.encode_batch(&objects(&mut rng, b * g));
        let mut t = Tape::new();
        let vars = agents.store.bind_frozen(&mut t).unwrap();
        let xv = t.constant(x).unwrap();
        let pooled = agents.pooled_sender(&mut t, &vars, xv, g).unwrap();
        let enc = agents.encode_sender(&mut t, &vars, xv).unwrap();
        let enc = t.value(enc).clone();
        for i in 0..b {
            let rows: Vec<f64> = enc.data()[i * g * 9..(i + 1) * g * 9].to_vec();
            let block = ctd_core::Tensor::matrix(g, 9, rows).unwrap();
            let mean = sender_aggregate(&block).unwrap();
            prop_assert!(max_abs(&mean, t.value(pooled).row(i)) < 1e-12);
        }
    }

    #[test]
    fn folded_receiver_scores_equal_dot_products(seed in any::<u64>(), relu in any::<bool>()) {
        let act = if relu { Activation::Relu } else { Activation::Identity };
        let exp = experiment(WorldKind::Thing, act, seed);
        let agents = exp.template().unwrap();
        let mut rng = Rng::new(seed ^ 1);
        let (b, n) = (2, 5);
        let x = exp.world.encode_batch(&objects(&mut rng, b * n));
        let zr_data: Vec<f64> = (0..b * 9).map(|_| rng.uniform() - 0.5).collect();
        let zr_t = ctd_core::Tensor::matrix(b, 9, zr_data).unwrap();
        let mut t = Tape::new();
        let vars = agents.store.bind_frozen(&mut t).unwrap();
        let xv = t.constant(x).unwrap();
        let zr = t.constant(zr_t.clone()).unwrap();
        let s = agents.receiver_scores(&mut t, &vars, zr, xv).unwrap();
        let enc = agents.encode_receiver(&mut t, &vars, xv).unwrap();
        let enc = t.value(enc).clone();
        for i in 0..b {
            let cands = ctd_core::Tensor::matrix(n, 9, enc.data()[i * n * 9..(i + 1) * n * 9].to_vec()).unwrap();
            let direct = receiver_score(zr_t.row(i), &cands).unwrap();
            let folded = &t.value(s).data()[i * n..(i + 1) * n];
            prop_assert!(max_abs(&direct, folded) < 1e-10);
        }
    }
}
