use criterion::{criterion_group, criterion_main, Criterion};
use ctd_bench::thing_batch;
use ctd_core::channels::Mode;
use ctd_core::diffcore::Rng;
use ctd_core::games::play_episode;

fn episode(c: &mut Criterion) {
    let (exp, agents, samples) = thing_batch(10);
    let beta1 = exp.cfg.beta1;
    c.bench_function("thing_episode_eval_b10", |b| {
        b.iter(|| play_episode(&agents, &exp.world, &samples, 1, beta1, Mode::Eval).unwrap().loss_value())
    });
    c.bench_function("thing_episode_train_step_b10", |b| {
        let mut rng = Rng::new(0);
        b.iter(|| {
            let ep = play_episode(&agents, &exp.world, &samples, 1, beta1, Mode::Train(&mut rng)).unwrap();
            ep.tape.backward(ep.loss).unwrap()
        })
    });
}

criterion_group!(benches, episode);
criterion_main!(benches);
