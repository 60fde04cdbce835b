//! JSON hand-off of a trained codebook.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::codebook::{Codebook, CodebookHyper};
use crate::diffcore::Tensor;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookMeta {
    pub dataset_hash: String,
    pub phase: String,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookExport {
    /// Row-major, one code-word per row.
    pub words: Vec<Vec<f64>>,
    pub usage: Vec<f64>,
    pub hyper: CodebookHyper,
    pub meta: CodebookMeta,
}

impl CodebookExport {
    pub fn new(cb: &Codebook, meta: CodebookMeta) -> Self {
        CodebookExport {
            words: (0..cb.words.rows()).map(|k| cb.words.row(k).to_vec()).collect(),
            usage: cb.usage.clone(),
            hyper: cb.hyper,
            meta,
        }
    }

    pub fn codebook(&self) -> Result<Codebook> {
        let mut cb = Codebook::new(Tensor::from_rows(&self.words)?, self.hyper)?;
        cb.usage = self.usage.clone();
        Ok(cb)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
