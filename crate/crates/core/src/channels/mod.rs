//! Discrete message channels: codebook (CB), Gumbel-softmax (GS) and
//! quantized binary words (QT).

mod codebook;
mod export;
mod gumbel;
mod quantized;

pub use codebook::{
    commitment_loss, ema_update, quantize, quantize_batch, quantize_on_tape, reinit, reinit_alpha, word_counts,
    Codebook, CodebookHyper, Quantized,
};
pub use export::{CodebookExport, CodebookMeta};
pub use gumbel::{argmax_rows, gumbel_softmax, one_hot};
pub use quantized::{bits_for, bits_to_id, round_bits, round_st};

use serde::{Deserialize, Serialize};

use crate::diffcore::{lstm_step, uniform_init, Linear, Lstm, ParamStore, Rng, Tape, Tensor, Var};
use crate::error::{CtdError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Cb,
    Gs,
    Qt,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Cb => "CB",
            Protocol::Gs => "GS",
            Protocol::Qt => "QT",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub protocol: Protocol,
    /// Codebook size (CB) or number of categorical words (GS). QT uses `2^word_bits`.
    pub vocab: usize,
    /// Words per message.
    pub length: usize,
    /// Dimension of CB code-words.
    pub code_dim: usize,
    /// GS temperature.
    pub tau: f64,
    /// QT bits per word.
    pub word_bits: usize,
    /// LSTM hidden size (GS, QT).
    pub hidden: usize,
    /// Word embedding size (GS, QT).
    pub embed: usize,
    pub codebook: CodebookHyper,
}

impl ChannelConfig {
    /// Vocabulary sized to `n_concepts` for the chosen protocol.
    pub fn for_concepts(protocol: Protocol, n_concepts: usize, length: usize) -> Self {
        ChannelConfig {
            protocol,
            vocab: n_concepts,
            length,
            code_dim: 64,
            tau: 1.0,
            word_bits: bits_for(n_concepts),
            hidden: 100,
            embed: 64,
            codebook: CodebookHyper::default(),
        }
    }

    pub fn n_words(&self) -> usize {
        match self.protocol {
            Protocol::Qt => 1 << self.word_bits,
            _ => self.vocab,
        }
    }

    pub fn validate(&self, n_concepts: usize) -> Result<()> {
        if self.length == 0 {
            return Err(CtdError::Invalid("message length must be positive".into()));
        }
        match self.protocol {
            Protocol::Cb if self.length > self.vocab => {
                Err(CtdError::Invalid("CB messages cannot repeat words; length exceeds codebook".into()))
            }
            Protocol::Gs if !(self.tau > 0.0) => Err(CtdError::Invalid("GS temperature must be positive".into())),
            Protocol::Qt if (1usize << self.word_bits) < n_concepts => Err(CtdError::Invalid(format!(
                "{} bits cannot name {n_concepts} concepts",
                self.word_bits
            ))),
            _ => Ok(()),
        }
    }
}

/// Whether a forward pass samples (training) or decides greedily.
pub enum Mode<'a> {
    Train(&'a mut Rng),
    Eval,
}

/// What travels from sender to receiver on the tape.
pub enum Signal {
    /// Mean of the selected code-words, `B × code_dim`.
    Cb(Var),
    /// One `B × width` row block per word position.
    Seq(Vec<Var>),
}

pub struct SenderOutput {
    /// Word ids per sample (ascending for CB, positional otherwise).
    pub ids: Vec<Vec<usize>>,
    pub signal: Signal,
    /// CB only.
    pub commitment: Option<Var>,
    /// Pre-quantization latents, CB only (anchors for re-initialization).
    pub latents: Option<Tensor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SenderChannel {
    Cb {
        proj: Linear,
        words: usize,
    },
    Gs {
        init: Linear,
        sos: usize,
        cell: Lstm,
        out: Linear,
        embed: usize,
    },
    Qt {
        init: Linear,
        sos: usize,
        cell: Lstm,
        out: Linear,
        embed: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReceiverChannel {
    Cb { map: Linear },
    Seq { protocol: Protocol, embed: usize, cell: Lstm, out: Linear },
}

impl SenderChannel {
    /// Registers the sender-side channel parameters. `input` is the width of
    /// the aggregated target representation.
    pub fn new(store: &mut ParamStore, cfg: &ChannelConfig, input: usize, rng: &mut Rng) -> Result<Self> {
        Ok(match cfg.protocol {
            Protocol::Cb => {
                let proj = Linear::new(store, "sender.proj", input, cfg.code_dim, rng)?;
                let words = store.add(
                    "codebook.words",
                    uniform_init(&[cfg.vocab, cfg.code_dim], cfg.code_dim, rng),
                )?;
                SenderChannel::Cb { proj, words }
            }
            Protocol::Gs | Protocol::Qt => {
                let width = if cfg.protocol == Protocol::Gs { cfg.vocab } else { cfg.word_bits };
                let init = Linear::new(store, "sender.init", input, cfg.hidden, rng)?;
                let sos = store.add("sender.sos", uniform_init(&[1, cfg.embed], cfg.embed, rng))?;
                let cell = Lstm::new(store, "sender.cell", cfg.embed, cfg.hidden, rng)?;
                let out = Linear::new(store, "sender.out", cfg.hidden, width, rng)?;
                let embed = store.add("sender.embed", uniform_init(&[width, cfg.embed], width, rng))?;
                if cfg.protocol == Protocol::Gs {
                    SenderChannel::Gs { init, sos, cell, out, embed }
                } else {
                    SenderChannel::Qt { init, sos, cell, out, embed }
                }
            }
        })
    }

    pub fn protocol(&self) -> Protocol {
        match self {
            SenderChannel::Cb { .. } => Protocol::Cb,
            SenderChannel::Gs { .. } => Protocol::Gs,
            SenderChannel::Qt { .. } => Protocol::Qt,
        }
    }

    /// Encodes the aggregated targets `u` (`B × input`) into `l`-word messages.
    pub fn forward(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        u: Var,
        cfg: &ChannelConfig,
        l: usize,
        mode: Mode<'_>,
    ) -> Result<SenderOutput> {
        match *self {
            SenderChannel::Cb { proj, words } => {
                let z = proj.forward(tape, vars, u)?;
                let q = quantize_on_tape(tape, z, vars[words], l, cfg.codebook.beta2)?;
                Ok(SenderOutput {
                    ids: q.ids,
                    signal: Signal::Cb(q.value),
                    commitment: Some(q.commitment),
                    latents: Some(tape.value(z).clone()),
                })
            }
            SenderChannel::Gs { init, sos, cell, out, embed } | SenderChannel::Qt { init, sos, cell, out, embed } => {
                let gs = matches!(self, SenderChannel::Gs { .. });
                let b = tape.value(u).rows();
                let h0 = init.forward(tape, vars, u)?;
                let mut h = tape.tanh(h0)?;
                let mut c = tape.constant(Tensor::zeros(&[b, cfg.hidden]))?;
                let mut x = tape.repeat_rows(vars[sos], b)?;
                let p = cell.vars(vars);
                let mut ids = vec![Vec::with_capacity(l); b];
                let mut tokens = Vec::with_capacity(l);
                let mut mode = mode;
                for _ in 0..l {
                    (h, c) = lstm_step(tape, x, h, c, &p)?;
                    let logits = out.forward(tape, vars, h)?;
                    let y = if gs {
                        match &mut mode {
                            Mode::Train(rng) => gumbel_softmax(tape, logits, cfg.tau, rng)?,
                            Mode::Eval => {
                                let hard = one_hot(&argmax_rows(tape.value(logits)), cfg.vocab);
                                tape.constant(hard)?
                            }
                        }
                    } else {
                        let s = tape.sigmoid(logits)?;
                        round_st(tape, s)?
                    };
                    let step_ids: Vec<usize> = if gs {
                        argmax_rows(tape.value(y))
                    } else {
                        (0..b).map(|i| bits_to_id(tape.value(y).row(i))).collect()
                    };
                    for (m, k) in ids.iter_mut().zip(step_ids) {
                        m.push(k);
                    }
                    x = tape.matmul(y, vars[embed])?;
                    tokens.push(y);
                }
                Ok(SenderOutput {
                    ids,
                    signal: Signal::Seq(tokens),
                    commitment: None,
                    latents: None,
                })
            }
        }
    }
}

impl ReceiverChannel {
    pub fn new(store: &mut ParamStore, cfg: &ChannelConfig, output: usize, rng: &mut Rng) -> Result<Self> {
        Ok(match cfg.protocol {
            Protocol::Cb => ReceiverChannel::Cb {
                map: Linear::new(store, "receiver.map", cfg.code_dim, output, rng)?,
            },
            Protocol::Gs | Protocol::Qt => {
                let width = if cfg.protocol == Protocol::Gs { cfg.vocab } else { cfg.word_bits };
                let embed = store.add("receiver.embed", uniform_init(&[width, cfg.embed], width, rng))?;
                let cell = Lstm::new(store, "receiver.cell", cfg.embed, cfg.hidden, rng)?;
                let out = Linear::new(store, "receiver.out", cfg.hidden, output, rng)?;
                ReceiverChannel::Seq {
                    protocol: cfg.protocol,
                    embed,
                    cell,
                    out,
                }
            }
        })
    }

    /// Maps a message to the receiver's target estimate `z^r` (`B × output`).
    ///
    /// A CB message is the mean of its code-words, so the linear map sees the
    /// same kind of input for any message length and any word order.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], signal: &Signal) -> Result<Var> {
        match (self, signal) {
            (ReceiverChannel::Cb { map }, Signal::Cb(v)) => map.forward(tape, vars, *v),
            (ReceiverChannel::Seq { embed, cell, out, .. }, Signal::Seq(tokens)) => {
                let first = tokens.first().ok_or_else(|| CtdError::Invalid("empty message".into()))?;
                let b = tape.value(*first).rows();
                let hidden = cell.hidden;
                let mut h = tape.constant(Tensor::zeros(&[b, hidden]))?;
                let mut c = tape.constant(Tensor::zeros(&[b, hidden]))?;
                let p = cell.vars(vars);
                for &y in tokens {
                    let x = tape.matmul(y, vars[*embed])?;
                    (h, c) = lstm_step(tape, x, h, c, &p)?;
                }
                out.forward(tape, vars, h)
            }
            (ReceiverChannel::Cb { .. }, _) => Err(CtdError::Protocol {
                expected: "CB".into(),
                found: "sequence".into(),
            }),
            (ReceiverChannel::Seq { protocol, .. }, _) => Err(CtdError::Protocol {
                expected: protocol.name().into(),
                found: "CB".into(),
            }),
        }
    }
}
