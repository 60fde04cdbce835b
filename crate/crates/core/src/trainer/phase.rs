use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use crate::channels::{ema_update, reinit, word_counts, Mode, Protocol};
use crate::diffcore::{Adam, Rng, Tensor};
use crate::error::{CtdError, Result};
use crate::games::{evaluate_accuracy, play_episode, Agents, Prediction};
use crate::worlds::{GameSample, World};

// RNG stream ids under the run seed
const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_EPOCH: u64 = 1 << 40;

const EVAL_BATCH: usize = 100;
const DIVERGENCE: f64 = 1e6;

/// Losses and accuracy over a set of samples.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub task: f64,
    pub commitment: f64,
    pub combined: f64,
    pub acc: f64,
}

/// Full evaluation output, including the emitted messages.
pub struct Evaluation {
    pub summary: EvalSummary,
    pub messages: Vec<Vec<usize>>,
    pub predictions: Vec<Prediction>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train: EvalSummary,
    pub val: EvalSummary,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseLog {
    pub phase: String,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Evaluates frozen agents with `l`-word messages.
pub fn evaluate(agents: &Agents, world: &World, samples: &[GameSample], l: usize, beta1: f64) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(CtdError::Invalid("nothing to evaluate".into()));
    }
    let mut s = EvalSummary::default();
    let mut messages = Vec::with_capacity(samples.len());
    let mut predictions = Vec::with_capacity(samples.len());
    for chunk in samples.chunks(EVAL_BATCH) {
        let ep = play_episode(agents, world, chunk, l, beta1, Mode::Eval)?;
        let w = chunk.len() as f64;
        s.task += ep.task_value() * w;
        s.commitment += ep.commitment_value() * w;
        messages.extend(ep.ids);
        predictions.extend(ep.predictions);
    }
    let n = samples.len() as f64;
    s.task /= n;
    s.commitment /= n;
    s.combined = combined_loss(s.task, s.commitment, beta1)?;
    s.acc = evaluate_accuracy(&predictions)?;
    Ok(Evaluation {
        summary: s,
        messages,
        predictions,
    })
}

/// `L_t + β₁·L_c`.
pub fn combined_loss(task: f64, commitment: f64, beta1: f64) -> Result<f64> {
    if !task.is_finite() || !commitment.is_finite() {
        return Err(CtdError::NonFinite("combined_loss"));
    }
    Ok(task + beta1 * commitment)
}

/// Fresh agents for `cfg`, initialized from the run seed.
pub fn init_agents(cfg: &TrainConfig, world: &World) -> Result<Agents> {
    let mut rng = Rng::split(cfg.seed, STREAM_INIT);
    Agents::new(world.input_dim(), cfg.game, cfg.channel.clone(), cfg.arch, &mut rng)
}

/// Trains on `train`, validating after every epoch (and once before the
/// first), and returns the checkpoint with the lowest combined validation
/// loss. `init` continues from earlier agents; their Adam moments are reset.
pub fn train_phase(
    cfg: &TrainConfig,
    world: &World,
    train: &[GameSample],
    val: &[GameSample],
    init: Option<Agents>,
    phase: &str,
) -> Result<(Checkpoint, PhaseLog)> {
    cfg.validate(world.schema.n_concepts())?;
    let mut agents = match init {
        Some(mut a) => {
            if a.channel.protocol != cfg.channel.protocol {
                return Err(CtdError::Protocol {
                    expected: cfg.channel.protocol.name().into(),
                    found: a.channel.protocol.name().into(),
                });
            }
            a.channel.length = cfg.channel.length;
            a.game = cfg.game;
            for p in a.store.params_mut() {
                p.m1 = Tensor::zeros(p.value.shape());
                p.m2 = Tensor::zeros(p.value.shape());
            }
            a
        }
        None => init_agents(cfg, world)?,
    };
    let l = cfg.channel.length;
    let mut adam = Adam::new(cfg.lr);
    let mut rng = Rng::split(cfg.seed, STREAM_TRAIN);
    let config_hash = cfg.hash();

    let v0 = evaluate(&agents, world, val, l, cfg.beta1)?.summary;
    let mut log = PhaseLog {
        phase: phase.to_string(),
        epochs: vec![EpochLog {
            epoch: 0,
            train: EvalSummary::default(),
            val: v0.clone(),
        }],
        best_epoch: 0,
        stopped_early: false,
    };
    let mut best = Checkpoint::capture(&agents, &adam, &rng, 0, &v0, &config_hash);
    let mut since_best = 0;

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        Rng::split(cfg.seed, STREAM_EPOCH + epoch as u64).shuffle(&mut order);
        let mut tr = EvalSummary::default();
        let mut correct = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<GameSample> = idx.iter().map(|&i| train[i].clone()).collect();
            let ep = play_episode(&agents, world, &batch, l, cfg.beta1, Mode::Train(&mut rng))?;
            let loss = ep.loss_value();
            if !loss.is_finite() || loss > DIVERGENCE {
                return Err(CtdError::Divergence { epoch, batch: bi, loss });
            }
            let w = batch.len() as f64;
            tr.task += ep.task_value() * w;
            tr.commitment += ep.commitment_value() * w;
            correct += ep.predictions.iter().map(|p| p.correct).sum::<f64>();

            let grads = ep.tape.backward(ep.loss)?;
            let g = agents.store.collect_grads(&grads, &ep.vars);
            adam.step(&mut agents.store, &g)?;

            if agents.channel.protocol == Protocol::Cb {
                let k = agents.codebook_index().expect("CB agents own a codebook");
                let counts = word_counts(&ep.ids, agents.channel.vocab);
                ema_update(&mut agents.usage, &counts, batch.len(), agents.channel.codebook.gamma)?;
                if cfg.reinit {
                    let latents = ep.latents.as_ref().expect("CB sender exposes latents");
                    let hyper = agents.channel.codebook;
                    let usage = agents.usage.clone();
                    reinit(agents.store.value_mut(k), &usage, latents, &hyper, &mut rng)?;
                }
            }
        }
        let n = train.len().max(1) as f64;
        tr.task /= n;
        tr.commitment /= n;
        tr.combined = combined_loss(tr.task, tr.commitment, cfg.beta1)?;
        tr.acc = correct / n;

        let v = evaluate(&agents, world, val, l, cfg.beta1)?.summary;
        log::info!(
            "{phase} epoch {epoch}: train loss {:.4} acc {:.3} | val loss {:.4} (task {:.4}, commit {:.4}) acc {:.3}",
            tr.combined,
            tr.acc,
            v.combined,
            v.task,
            v.commitment,
            v.acc
        );
        let improved = v.combined < best.val.combined;
        log.epochs.push(EpochLog {
            epoch,
            train: tr,
            val: v.clone(),
        });
        if improved {
            best = Checkpoint::capture(&agents, &adam, &rng, epoch, &v, &config_hash);
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, log))
}
