use serde::{Deserialize, Serialize};

use super::{GameConfig, GameKind};
use crate::channels::{ChannelConfig, Protocol, ReceiverChannel, SenderChannel};
use crate::diffcore::{Linear, ParamStore, Rng, Tape, Var};
use crate::error::Result;

/// Hidden-layer nonlinearity of the object encoders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    #[default]
    Identity,
}

/// Sizes of the object encoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentArch {
    pub hidden: usize,
    /// Width of object encodings and of the receiver's decoded message.
    pub latent: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl Default for AgentArch {
    fn default() -> Self {
        AgentArch {
            hidden: 100,
            latent: 1000,
            activation: Activation::Identity,
        }
    }
}

/// Sender and receiver parameters of one run, in a single store.
#[derive(Clone, Debug, PartialEq)]
pub struct Agents {
    pub game: GameConfig,
    pub channel: ChannelConfig,
    pub arch: AgentArch,
    pub store: ParamStore,
    pub sender_enc: [Linear; 2],
    pub receiver_enc: [Linear; 2],
    pub sender: SenderChannel,
    pub receiver: ReceiverChannel,
    pub recon_head: Option<Linear>,
    /// EMA usage counts of the code-words (CB only).
    pub usage: Vec<f64>,
}

impl Agents {
    pub fn new(input: usize, game: GameConfig, channel: ChannelConfig, arch: AgentArch, rng: &mut Rng) -> Result<Self> {
        game.validate()?;
        let mut store = ParamStore::new();
        let sender_enc = [
            Linear::new(&mut store, "sender.enc1", input, arch.hidden, rng)?,
            Linear::new(&mut store, "sender.enc2", arch.hidden, arch.latent, rng)?,
        ];
        let receiver_enc = [
            Linear::new(&mut store, "receiver.enc1", input, arch.hidden, rng)?,
            Linear::new(&mut store, "receiver.enc2", arch.hidden, arch.latent, rng)?,
        ];
        let sender_in = if game.game == GameKind::Diff { 2 * arch.latent } else { arch.latent };
        let sender = SenderChannel::new(&mut store, &channel, sender_in, rng)?;
        let receiver = ReceiverChannel::new(&mut store, &channel, arch.latent, rng)?;
        let recon_head = if game.game == GameKind::Recon {
            Some(Linear::new(&mut store, "receiver.recon", arch.latent, input, rng)?)
        } else {
            None
        };
        let usage = if channel.protocol == Protocol::Cb { vec![0.0; channel.vocab] } else { Vec::new() };
        Ok(Agents {
            game,
            channel,
            arch,
            store,
            sender_enc,
            receiver_enc,
            sender,
            receiver,
            recon_head,
            usage,
        })
    }

    fn hidden(&self, tape: &mut Tape, vars: &[Var], layer: Linear, x: Var) -> Result<Var> {
        let h = layer.forward(tape, vars, x)?;
        match self.arch.activation {
            Activation::Relu => tape.relu(h),
            Activation::Identity => Ok(h),
        }
    }

    pub fn encode_sender(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let h = self.hidden(tape, vars, self.sender_enc[0], x)?;
        self.sender_enc[1].forward(tape, vars, h)
    }

    pub fn encode_receiver(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let h = self.hidden(tape, vars, self.receiver_enc[0], x)?;
        self.receiver_enc[1].forward(tape, vars, h)
    }

    /// Mean sender encoding over consecutive groups of `group` rows of `x`.
    /// The mean is taken before the output layer, which is affine, so this
    /// equals averaging [`Agents::encode_sender`] at a fraction of the cost.
    pub fn pooled_sender(&self, tape: &mut Tape, vars: &[Var], x: Var, group: usize) -> Result<Var> {
        let h = self.hidden(tape, vars, self.sender_enc[0], x)?;
        let h = tape.group_mean(h, group)?;
        self.sender_enc[1].forward(tape, vars, h)
    }

    /// Scores `z_r · u_φ(x)` of each sample's candidates (`B·n` rows of `x`).
    /// The receiver's output layer is folded into the query, which gives the
    /// same numbers as a `row_dot` against [`Agents::encode_receiver`].
    pub fn receiver_scores(&self, tape: &mut Tape, vars: &[Var], zr: Var, x: Var) -> Result<Var> {
        let [l1, l2] = self.receiver_enc;
        let h = self.hidden(tape, vars, l1, x)?;
        let rows = tape.value(h).rows();
        let q = tape.matmul_t(zr, vars[l2.w])?;
        let q = tape.concat_cols(&[q, zr])?;
        let bias = tape.repeat_rows(vars[l2.b], rows)?;
        let keys = tape.concat_cols(&[h, bias])?;
        tape.row_dot(q, keys)
    }

    /// Parameter index of the code-words (CB only).
    pub fn codebook_index(&self) -> Option<usize> {
        match self.sender {
            SenderChannel::Cb { words, .. } => Some(words),
            _ => None,
        }
    }
}
