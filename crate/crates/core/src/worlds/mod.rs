//! Synthetic worlds, labeling phrases, game samples and dataset splits.

mod io;
mod qrc;
mod sample;
mod schema;
mod split;

pub use io::{read_dataset, write_dataset, DatasetHeader};
pub use qrc::{encode_qrc, QrcImage, QRC_BITS, QRC_SIDE};
pub use sample::{build_sample, GameSample, Geometry};
pub use schema::{enumerate_phrases, AttributeSchema, Concept, ObjectId, Phrase, SPECIAL_TOKENS};
pub use split::{build_split, DatasetSplit, SplitKind, SplitMode, SplitSizes};

use serde::{Deserialize, Serialize};

use crate::diffcore::Tensor;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorldKind {
    Thing,
    Qrc,
}

impl WorldKind {
    pub fn name(self) -> &'static str {
        match self {
            WorldKind::Thing => "thing",
            WorldKind::Qrc => "qrc",
        }
    }
}

/// A schema plus the surface encoding of its objects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct World {
    pub kind: WorldKind,
    /// Key of the QRC bit grids; unused for THING.
    pub seed: u64,
    pub schema: AttributeSchema,
}

/// THING one-hot layout: attribute block `i` spans `4 + n_concepts` slots and
/// sets the slot of the value's global id `4 + concept_id`.
pub fn encode_thing(schema: &AttributeSchema, values: &[usize]) -> Result<Vec<f64>> {
    schema.object(values)?;
    let width = SPECIAL_TOKENS + schema.n_concepts();
    let mut out = vec![0.0; width * schema.n_attributes()];
    for (i, &v) in values.iter().enumerate() {
        let c = Concept::new(i, v);
        out[width * i + SPECIAL_TOKENS + schema.concept_id(c)] = 1.0;
    }
    Ok(out)
}

impl World {
    pub fn thing() -> Self {
        World {
            kind: WorldKind::Thing,
            seed: 0,
            schema: AttributeSchema::thing(),
        }
    }

    pub fn qrc(seed: u64) -> Self {
        World {
            kind: WorldKind::Qrc,
            seed,
            schema: AttributeSchema::thing(),
        }
    }

    pub fn new(kind: WorldKind, seed: u64) -> Self {
        match kind {
            WorldKind::Thing => Self::thing(),
            WorldKind::Qrc => Self::qrc(seed),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self.kind {
            WorldKind::Thing => (SPECIAL_TOKENS + self.schema.n_concepts()) * self.schema.n_attributes(),
            WorldKind::Qrc => QRC_BITS,
        }
    }

    pub fn encode(&self, o: ObjectId) -> Vec<f64> {
        match self.kind {
            WorldKind::Thing => encode_thing(&self.schema, &self.schema.values(o)).expect("valid object id"),
            WorldKind::Qrc => encode_qrc(o, self.seed).to_vec(),
        }
    }

    /// One row per object.
    pub fn encode_batch(&self, objs: &[ObjectId]) -> Tensor {
        let d = self.input_dim();
        let mut data = Vec::with_capacity(objs.len() * d);
        for &o in objs {
            data.extend(self.encode(o));
        }
        Tensor::matrix(objs.len(), d, data).expect("rows of input_dim")
    }
}
