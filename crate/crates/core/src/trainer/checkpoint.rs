use std::path::Path;

use super::phase::EvalSummary;
use crate::channels::{Codebook, CodebookExport, CodebookMeta, Protocol};
use crate::diffcore::{Adam, CheckpointFile, Rng, Tensor};
use crate::error::{CtdError, Result};
use crate::games::Agents;

/// Agents at one epoch, with everything needed to resume or re-evaluate.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub agents: Agents,
    pub epoch: usize,
    pub val: EvalSummary,
    pub adam_t: u64,
    pub rng_state: Vec<f64>,
    pub config_hash: String,
}

const PROTOCOLS: [Protocol; 3] = [Protocol::Cb, Protocol::Gs, Protocol::Qt];

fn hash_limbs(h: &str) -> Vec<f64> {
    h.as_bytes()
        .chunks(2)
        .map(|c| u16::from_str_radix(std::str::from_utf8(c).unwrap_or("0"), 16).unwrap_or(0) as f64)
        .collect()
}

fn limbs_hash(v: &[f64]) -> String {
    v.iter().map(|&x| format!("{:02x}", x as u16)).collect()
}

impl Checkpoint {
    pub fn capture(agents: &Agents, adam: &Adam, rng: &Rng, epoch: usize, val: &EvalSummary, config_hash: &str) -> Self {
        Checkpoint {
            agents: agents.clone(),
            epoch,
            val: val.clone(),
            adam_t: adam.t,
            rng_state: rng.state(),
            config_hash: config_hash.to_string(),
        }
    }

    pub fn to_file(&self) -> CheckpointFile {
        let mut f = CheckpointFile::default();
        f.push_store("", &self.agents.store);
        f.push("codebook.usage", Tensor::vector(self.agents.usage.clone()));
        f.push("__rng", Tensor::vector(self.rng_state.clone()));
        f.push("__adam_t", Tensor::scalar(self.adam_t as f64));
        f.push("__epoch", Tensor::scalar(self.epoch as f64));
        f.push(
            "__val",
            Tensor::vector(vec![self.val.task, self.val.commitment, self.val.combined, self.val.acc]),
        );
        f.push("__config", Tensor::vector(hash_limbs(&self.config_hash)));
        let p = PROTOCOLS.iter().position(|&p| p == self.agents.channel.protocol).unwrap_or(0);
        f.push("__protocol", Tensor::scalar(p as f64));
        f
    }

    /// Restores into `template`, which must have the checkpoint's architecture.
    pub fn from_file(file: &CheckpointFile, mut template: Agents) -> Result<Self> {
        let found = Self::protocol_of(file)?;
        if found != template.channel.protocol {
            return Err(CtdError::Protocol {
                expected: template.channel.protocol.name().into(),
                found: found.name().into(),
            });
        }
        file.load_store("", &mut template.store)?;
        let usage = file.require("codebook.usage")?;
        if usage.len() != template.usage.len() {
            return Err(CtdError::Format {
                what: "checkpoint",
                detail: "codebook size does not match".into(),
            });
        }
        template.usage = usage.data().to_vec();
        let val = file.require("__val")?.data().to_vec();
        if val.len() != 4 {
            return Err(CtdError::Format {
                what: "checkpoint",
                detail: "validation record".into(),
            });
        }
        Ok(Checkpoint {
            agents: template,
            epoch: file.require("__epoch")?.item() as usize,
            val: EvalSummary {
                task: val[0],
                commitment: val[1],
                combined: val[2],
                acc: val[3],
            },
            adam_t: file.require("__adam_t")?.item() as u64,
            rng_state: file.require("__rng")?.data().to_vec(),
            config_hash: limbs_hash(file.require("__config")?.data()),
        })
    }

    /// Channel protocol a checkpoint file was trained with.
    pub fn protocol_of(file: &CheckpointFile) -> Result<Protocol> {
        let k = file.require("__protocol")?.item();
        PROTOCOLS.get(k as usize).copied().ok_or_else(|| CtdError::Format {
            what: "checkpoint",
            detail: format!("unknown protocol tag {k}"),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.to_file().to_bytes()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_file().save(path)
    }

    pub fn load(path: &Path, template: Agents) -> Result<Self> {
        Self::from_file(&CheckpointFile::load(path)?, template)
    }

    /// The trained codebook, when the channel has one.
    pub fn codebook(&self) -> Option<Codebook> {
        let k = self.agents.codebook_index()?;
        Some(Codebook {
            words: self.agents.store.value(k).clone(),
            usage: self.agents.usage.clone(),
            hyper: self.agents.channel.codebook,
        })
    }

    pub fn codebook_export(&self, dataset_hash: &str, phase: &str, seed: u64) -> Option<CodebookExport> {
        self.codebook().map(|cb| {
            CodebookExport::new(
                &cb,
                CodebookMeta {
                    dataset_hash: dataset_hash.to_string(),
                    phase: phase.to_string(),
                    config_hash: self.config_hash.clone(),
                    seed,
                },
            )
        })
    }
}
