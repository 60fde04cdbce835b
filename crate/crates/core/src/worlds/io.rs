//! JSON-lines dataset files: one header line, then one sample per line.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sample::{GameSample, Geometry};
use super::schema::{ObjectId, Phrase};
use super::split::{build_split, DatasetSplit, SplitKind, SplitMode, SplitSizes};
use super::{World, WorldKind};
use crate::error::{CtdError, Result};

/// Everything needed to regenerate a dataset exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub world: WorldKind,
    pub world_seed: u64,
    pub schema_hash: String,
    pub mode: SplitMode,
    pub phrase_length: usize,
    pub geometry: Geometry,
    pub sizes: SplitSizes,
    pub seed: u64,
    pub heldout_fraction: f64,
}

impl DatasetHeader {
    pub fn world(&self) -> World {
        World::new(self.world, self.world_seed)
    }

    pub fn generate(&self) -> Result<DatasetSplit> {
        let world = self.world();
        if world.schema.hash() != self.schema_hash {
            return Err(CtdError::Format {
                what: "dataset header",
                detail: "schema hash does not match this build".into(),
            });
        }
        build_split(
            &world.schema,
            self.phrase_length,
            &self.geometry,
            &self.sizes,
            self.mode,
            self.heldout_fraction,
            self.seed,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct Line {
    split: SplitKind,
    phrase: Vec<usize>,
    st: Vec<u32>,
    sd: Vec<u32>,
    rt: Vec<u32>,
    rd: Vec<u32>,
    order: u64,
}

fn ids(v: &[ObjectId]) -> Vec<u32> {
    v.iter().map(|o| o.0).collect()
}

fn objs(v: Vec<u32>) -> Vec<ObjectId> {
    v.into_iter().map(ObjectId).collect()
}

pub fn write_dataset(path: &Path, header: &DatasetHeader, data: &DatasetSplit) -> Result<()> {
    let schema = header.world().schema;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for k in SplitKind::ALL {
        for s in data.get(k) {
            let line = Line {
                split: k,
                phrase: s.phrase.concept_ids(&schema),
                st: ids(&s.sender_targets),
                sd: ids(&s.sender_distractors),
                rt: ids(&s.receiver_targets),
                rd: ids(&s.receiver_distractors),
                order: s.order_seed,
            };
            serde_json::to_writer(&mut w, &line)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, DatasetSplit)> {
    let mut lines = BufReader::new(std::fs::File::open(path)?).lines();
    let first = lines.next().ok_or_else(|| CtdError::Format {
        what: "dataset",
        detail: "empty file".into(),
    })??;
    let header: DatasetHeader = serde_json::from_str(&first)?;
    let schema = header.world().schema;
    let mut data = DatasetSplit {
        mode: header.mode,
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(&line)?;
        data.get_mut(l.split).push(GameSample {
            phrase: Phrase::from_concept_ids(&schema, &l.phrase)?,
            sender_targets: objs(l.st),
            sender_distractors: objs(l.sd),
            receiver_targets: objs(l.rt),
            receiver_distractors: objs(l.rd),
            order_seed: l.order,
        });
    }
    Ok((header, data))
}
