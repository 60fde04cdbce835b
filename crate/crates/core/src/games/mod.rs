//! Coordination games: Ref, Recon, Diff and multi-target Mref.
//!
//! The sender averages the encodings of its targets (Diff also appends the
//! average of its distractors), sends a message, and the receiver scores each
//! candidate by the dot product of its decoded message with the candidate's
//! encoding.

mod agents;

pub use agents::{Activation, AgentArch, Agents};

use serde::{Deserialize, Serialize};

use crate::channels::{Mode, Protocol};
use crate::diffcore::{Tape, Tensor, Var};
use crate::error::{shape_err, CtdError, Result};
use crate::worlds::{GameSample, Geometry, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GameKind {
    Ref,
    Recon,
    Diff,
    Mref,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Ce,
    Mse,
    Bce,
}

impl GameKind {
    pub fn loss(self) -> LossKind {
        match self {
            GameKind::Ref | GameKind::Mref => LossKind::Ce,
            GameKind::Recon => LossKind::Mse,
            GameKind::Diff => LossKind::Bce,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub game: GameKind,
    pub geometry: Geometry,
}

impl GameConfig {
    pub fn new(game: GameKind) -> Self {
        let single = Geometry {
            sender_targets: 1,
            sender_distractors: 0,
            receiver_targets: 1,
            receiver_distractors: 20,
        };
        let geometry = match game {
            GameKind::Ref | GameKind::Recon => single,
            GameKind::Mref => Geometry::mref(),
            GameKind::Diff => Geometry {
                sender_targets: 20,
                sender_distractors: 20,
                receiver_targets: 20,
                receiver_distractors: 20,
            },
        };
        GameConfig { game, geometry }
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        let bad = |m: &str| Err(CtdError::Invalid(format!("{:?} game: {m}", self.game)));
        if g.sender_targets == 0 {
            return bad("needs at least one sender target");
        }
        match self.game {
            GameKind::Ref | GameKind::Recon if g.sender_targets != 1 || g.sender_distractors != 0 => {
                bad("sender sees exactly one target")
            }
            GameKind::Ref | GameKind::Recon | GameKind::Mref if g.receiver_targets != 1 => {
                bad("receiver sees exactly one target")
            }
            GameKind::Mref if g.sender_distractors != 0 => bad("sender sees no distractors"),
            GameKind::Diff if g.sender_distractors == 0 => bad("sender needs distractors"),
            _ if g.n_candidates() == 0 => bad("receiver needs candidates"),
            _ => Ok(()),
        }
    }
}

/// Receiver output for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub scores: Vec<f64>,
    /// Target flags of the candidates, in presentation order.
    pub labels: Vec<bool>,
    pub predicted: usize,
    /// 0/1 for single-target games; per-candidate mean correctness for Diff.
    pub correct: f64,
}

/// Mean of the rows of `u` (one row per target).
pub fn sender_aggregate(u: &Tensor) -> Result<Vec<f64>> {
    if u.rows() == 0 || u.is_empty() {
        return Err(CtdError::Invalid("no targets to aggregate".into()));
    }
    let mut out = vec![0.0; u.cols()];
    for i in 0..u.rows() {
        for (o, v) in out.iter_mut().zip(u.row(i)) {
            *o += v;
        }
    }
    let n = u.rows() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// Target mean followed by distractor mean.
pub fn diff_sender_aggregate(targets: &Tensor, distractors: &Tensor) -> Result<Vec<f64>> {
    let mut t = sender_aggregate(targets)?;
    t.extend(sender_aggregate(distractors)?);
    Ok(t)
}

/// `score_i = z · u_i`.
pub fn receiver_score(z: &[f64], candidates: &Tensor) -> Result<Vec<f64>> {
    if candidates.cols() != z.len() {
        return Err(shape_err("receiver_score", format!("{} vs {}", z.len(), candidates.cols())));
    }
    Ok((0..candidates.rows())
        .map(|i| candidates.row(i).iter().zip(z).map(|(a, b)| a * b).sum())
        .collect())
}

fn argmax(xs: &[f64]) -> usize {
    xs.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best })
        .0
}

/// Scores a prediction for a single-target game (argmax) or Diff
/// (per-candidate threshold at logit 0).
pub fn judge(game: GameKind, scores: Vec<f64>, labels: Vec<bool>) -> Prediction {
    let predicted = argmax(&scores);
    let correct = if game == GameKind::Diff {
        let hits = scores.iter().zip(&labels).filter(|(s, &y)| (**s > 0.0) == y).count();
        hits as f64 / labels.len().max(1) as f64
    } else if labels[predicted] {
        1.0
    } else {
        0.0
    };
    Prediction {
        scores,
        labels,
        predicted,
        correct,
    }
}

/// Fraction of correct predictions (Diff: mean per-candidate correctness).
pub fn evaluate_accuracy(preds: &[Prediction]) -> Result<f64> {
    if preds.is_empty() {
        return Err(CtdError::Invalid("no episodes to evaluate".into()));
    }
    Ok(preds.iter().map(|p| p.correct).sum::<f64>() / preds.len() as f64)
}

/// One batch of games recorded on a tape.
pub struct Episode {
    pub tape: Tape,
    pub vars: Vec<Var>,
    pub task_loss: Var,
    pub commitment: Option<Var>,
    /// `task + β₁·commitment`.
    pub loss: Var,
    pub ids: Vec<Vec<usize>>,
    pub predictions: Vec<Prediction>,
    pub latents: Option<Tensor>,
}

impl Episode {
    pub fn task_value(&self) -> f64 {
        self.tape.value(self.task_loss).item()
    }

    pub fn commitment_value(&self) -> f64 {
        self.commitment.map_or(0.0, |c| self.tape.value(c).item())
    }

    pub fn loss_value(&self) -> f64 {
        self.tape.value(self.loss).item()
    }
}

/// Plays `samples` as one batch with messages of `l` words.
pub fn play_episode(
    agents: &Agents,
    world: &World,
    samples: &[GameSample],
    l: usize,
    beta1: f64,
    mode: Mode<'_>,
) -> Result<Episode> {
    let cfg = &agents.game;
    let g = cfg.geometry;
    if samples.is_empty() {
        return Err(CtdError::Invalid("empty batch".into()));
    }
    for s in samples {
        let sg = s.geometry();
        let ok = sg.sender_targets == g.sender_targets
            && sg.sender_distractors == g.sender_distractors
            && sg.n_candidates() == g.n_candidates()
            && (cfg.game == GameKind::Diff || sg.receiver_targets == 1);
        if !ok {
            return Err(CtdError::Invalid(format!(
                "sample geometry {sg:?} does not fit the {:?} game",
                cfg.game
            )));
        }
    }
    let training = matches!(mode, Mode::Train(_));
    let mut tape = Tape::new();
    let vars = if training {
        agents.store.bind(&mut tape)?
    } else {
        agents.store.bind_frozen(&mut tape)?
    };

    let targets: Vec<_> = samples.iter().flat_map(|s| s.sender_targets.iter().copied()).collect();
    let xt = tape.constant(world.encode_batch(&targets))?;
    let mut u = agents.pooled_sender(&mut tape, &vars, xt, g.sender_targets)?;
    if cfg.game == GameKind::Diff {
        let ds: Vec<_> = samples.iter().flat_map(|s| s.sender_distractors.iter().copied()).collect();
        let xd = tape.constant(world.encode_batch(&ds))?;
        let ud = agents.pooled_sender(&mut tape, &vars, xd, g.sender_distractors)?;
        u = tape.concat_cols(&[u, ud])?;
    }

    let sent = agents.sender.forward(&mut tape, &vars, u, &agents.channel, l, mode)?;
    let zr = agents.receiver.forward(&mut tape, &vars, &sent.signal)?;

    let n = g.n_candidates();
    let mut cands = Vec::with_capacity(samples.len() * n);
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        let (c, y) = s.receiver_candidates();
        cands.extend(c);
        labels.push(y);
    }

    let (task_loss, scores) = match cfg.game {
        GameKind::Recon => {
            let head = agents.recon_head.ok_or_else(|| CtdError::Invalid("agents lack a reconstruction head".into()))?;
            let rec = head.forward(&mut tape, &vars, zr)?;
            let xs = world.encode_batch(&samples.iter().map(|s| s.sender_targets[0]).collect::<Vec<_>>());
            let tgt = tape.constant(xs)?;
            let loss = tape.mse(rec, tgt)?;
            let xc = world.encode_batch(&cands);
            let r = tape.value(rec);
            let mut scores = Tensor::zeros(&[samples.len(), n]);
            for i in 0..samples.len() {
                let q = r.row(i);
                let qn = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                for j in 0..n {
                    let c = xc.row(i * n + j);
                    let cn = c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                    scores.row_mut(i)[j] = q.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() / (qn * cn);
                }
            }
            (loss, scores)
        }
        _ => {
            let xc = tape.constant(world.encode_batch(&cands))?;
            let s = agents.receiver_scores(&mut tape, &vars, zr, xc)?;
            let loss = if cfg.game == GameKind::Diff {
                let y: Vec<f64> = labels.iter().flatten().map(|&b| if b { 1.0 } else { 0.0 }).collect();
                tape.bce_with_logits(s, &y)?
            } else {
                let gold: Vec<usize> = labels.iter().map(|y| y.iter().position(|&b| b).unwrap_or(0)).collect();
                tape.softmax_cross_entropy(s, &gold)?
            };
            let scores = tape.value(s).clone();
            (loss, scores)
        }
    };

    let predictions = labels
        .into_iter()
        .enumerate()
        .map(|(i, y)| judge(cfg.game, scores.row(i).to_vec(), y))
        .collect();

    let loss = match sent.commitment {
        Some(c) if agents.channel.protocol == Protocol::Cb => {
            let w = tape.scale(c, beta1)?;
            tape.add(task_loss, w)?
        }
        _ => task_loss,
    };
    Ok(Episode {
        tape,
        vars,
        task_loss,
        commitment: sent.commitment,
        loss,
        ids: sent.ids,
        predictions,
        latents: sent.latents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_mean() {
        let u = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(sender_aggregate(&u).unwrap(), vec![0.5, 0.5]);
        let one = Tensor::from_rows(&[vec![3.0, -1.0]]).unwrap();
        assert_eq!(sender_aggregate(&one).unwrap(), vec![3.0, -1.0]);
        assert!(sender_aggregate(&Tensor::zeros(&[0, 2])).is_err());
        let d = Tensor::from_rows(&[vec![2.0, 2.0]]).unwrap();
        assert_eq!(diff_sender_aggregate(&one, &d).unwrap(), vec![3.0, -1.0, 2.0, 2.0]);
    }

    #[test]
    fn scoring() {
        let c = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(receiver_score(&[0.0, 1.0], &c).unwrap(), vec![0.0, 1.0, 0.0]);
        assert!(receiver_score(&[1.0], &c).is_err());
    }

    #[test]
    fn diff_accuracy_counts_candidates() {
        let labels: Vec<bool> = (0..40).map(|i| i < 20).collect();
        let p = judge(GameKind::Diff, vec![-1.0; 40], labels);
        assert_eq!(p.correct, 0.5);
        let labels = vec![true, false];
        let p = judge(GameKind::Diff, vec![40.0, -40.0], labels);
        assert_eq!(p.correct, 1.0);
    }
}
