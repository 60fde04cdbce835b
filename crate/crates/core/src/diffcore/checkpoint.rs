//! Binary checkpoint records.
//!
//! Layout: `b"CTD1"`, `u32` version, then per record a `u32` name length,
//! the UTF-8 name, a `u32` rank, `rank` `u64` dimensions and the values as
//! little-endian `f64`. Everything little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::adam::ParamStore;
use super::tensor::Tensor;
use crate::error::{CtdError, Result};

const MAGIC: &[u8; 4] = b"CTD1";
const VERSION: u32 = 1;

/// Ordered named tensors as stored on disk.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckpointFile {
    pub records: Vec<(String, Tensor)>,
}

fn fmt_err(detail: impl Into<String>) -> CtdError {
    CtdError::Format {
        what: "checkpoint",
        detail: detail.into(),
    }
}

impl CheckpointFile {
    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.records.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.records.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| fmt_err(format!("missing record {name}")))
    }

    /// Appends every parameter of `store` (prefixed) with its Adam moments.
    pub fn push_store(&mut self, prefix: &str, store: &ParamStore) {
        for p in store.params() {
            let name = format!("{prefix}{}", p.name);
            self.push(format!("{name}.m1"), p.m1.clone());
            self.push(format!("{name}.m2"), p.m2.clone());
            self.push(name, p.value.clone());
        }
    }

    /// Overwrites values and moments of `store` from matching records.
    pub fn load_store(&self, prefix: &str, store: &mut ParamStore) -> Result<()> {
        for p in store.params_mut() {
            let name = format!("{prefix}{}", p.name);
            for (slot, key) in [
                (&mut p.value, name.clone()),
                (&mut p.m1, format!("{name}.m1")),
                (&mut p.m2, format!("{name}.m2")),
            ] {
                let t = self.require(&key)?;
                if t.shape() != slot.shape() {
                    return Err(fmt_err(format!("{key}: shape {:?} vs {:?}", t.shape(), slot.shape())));
                }
                *slot = t.clone();
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for (name, t) in &self.records {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if r.len() < n {
                return Err(fmt_err("truncated"));
            }
            let (a, b) = r.split_at(n);
            r = b;
            Ok(a)
        };
        if take(4)? != MAGIC {
            return Err(fmt_err("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(fmt_err(format!("unsupported version {version}")));
        }
        let mut file = CheckpointFile::default();
        loop {
            let Ok(len) = take(4) else { break };
            let len = u32::from_le_bytes(len.try_into().unwrap()) as usize;
            let name = String::from_utf8(take(len)?.to_vec()).map_err(|_| fmt_err("name is not UTF-8"))?;
            let rank = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize);
            }
            let n: usize = shape.iter().product();
            let raw = take(n.checked_mul(8).ok_or_else(|| fmt_err("oversized record"))?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            file.push(name, Tensor::new(shape, data)?);
        }
        Ok(file)
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
