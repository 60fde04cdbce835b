use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CtdError, Result};

/// Number of reserved word ids (SOS, EOS, PAD, UNK) ahead of the value ids.
pub const SPECIAL_TOKENS: usize = 4;

/// Ordered attributes, each with its value names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attributes: Vec<(String, Vec<String>)>,
}

/// One feature-value pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Concept {
    pub attribute: usize,
    pub value: usize,
}

impl Concept {
    pub fn new(attribute: usize, value: usize) -> Self {
        Concept { attribute, value }
    }
}

/// Object index in mixed radix over the schema's value counts, first
/// attribute most significant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

const THING: [(&str, [&str; 10]); 5] = [
    (
        "shape",
        ["circle", "ellipse", "square", "rectangle", "triangle", "oval", "pentagon", "hexagon", "star", "heart"],
    ),
    (
        "color",
        ["red", "blue", "green", "yellow", "white", "gray", "orange", "purple", "pink", "brown"],
    ),
    (
        "size",
        ["petite", "tiny", "small", "medium", "large", "huge", "miniature", "gigantic", "massive", "enormous"],
    ),
    (
        "age",
        ["new", "vintage", "antique", "modern", "classic", "retro", "contemporary", "historic", "preowned", "timeless"],
    ),
    (
        "material",
        ["wood", "metal", "plastic", "glass", "fabric", "ceramic", "paper", "leather", "stone", "rubber"],
    ),
];

impl AttributeSchema {
    pub fn new(attributes: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (_, vals) in &attributes {
            if vals.is_empty() {
                return Err(CtdError::Invalid("attribute without values".into()));
            }
            for v in vals {
                if !seen.insert(v.clone()) {
                    return Err(CtdError::Invalid(format!("value name {v} is not unique")));
                }
            }
        }
        if attributes.is_empty() {
            return Err(CtdError::Invalid("schema without attributes".into()));
        }
        let total: u64 = attributes.iter().map(|(_, v)| v.len() as u64).product();
        if total > u32::MAX as u64 {
            return Err(CtdError::Invalid("too many objects".into()));
        }
        Ok(AttributeSchema { attributes })
    }

    /// Five attributes of ten values each.
    pub fn thing() -> Self {
        let attributes = THING
            .iter()
            .map(|(a, vs)| (a.to_string(), vs.iter().map(|v| v.to_string()).collect()))
            .collect();
        AttributeSchema { attributes }
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn n_values(&self, attribute: usize) -> usize {
        self.attributes[attribute].1.len()
    }

    pub fn n_concepts(&self) -> usize {
        self.attributes.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn n_objects(&self) -> usize {
        self.attributes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn check(&self, c: Concept) -> Result<()> {
        if c.attribute >= self.n_attributes() {
            return Err(CtdError::Index {
                what: "attribute",
                index: c.attribute,
                len: self.n_attributes(),
            });
        }
        if c.value >= self.n_values(c.attribute) {
            return Err(CtdError::Index {
                what: "attribute value",
                index: c.value,
                len: self.n_values(c.attribute),
            });
        }
        Ok(())
    }

    /// Dense concept index in `0..n_concepts`.
    pub fn concept_id(&self, c: Concept) -> usize {
        self.attributes[..c.attribute].iter().map(|(_, v)| v.len()).sum::<usize>() + c.value
    }

    pub fn concept_from_id(&self, mut id: usize) -> Result<Concept> {
        for (a, (_, vals)) in self.attributes.iter().enumerate() {
            if id < vals.len() {
                return Ok(Concept::new(a, id));
            }
            id -= vals.len();
        }
        Err(CtdError::Index {
            what: "concept id",
            index: id,
            len: self.n_concepts(),
        })
    }

    pub fn concept_name(&self, c: Concept) -> &str {
        &self.attributes[c.attribute].1[c.value]
    }

    pub fn concept_by_name(&self, name: &str) -> Option<Concept> {
        self.attributes.iter().enumerate().find_map(|(a, (_, vals))| {
            vals.iter().position(|v| v == name).map(|v| Concept::new(a, v))
        })
    }

    pub fn object(&self, values: &[usize]) -> Result<ObjectId> {
        if values.len() != self.n_attributes() {
            return Err(CtdError::Invalid(format!(
                "object needs {} values, got {}",
                self.n_attributes(),
                values.len()
            )));
        }
        let mut id = 0usize;
        for (a, &v) in values.iter().enumerate() {
            self.check(Concept::new(a, v))?;
            id = id * self.n_values(a) + v;
        }
        Ok(ObjectId(id as u32))
    }

    pub fn values(&self, o: ObjectId) -> Vec<usize> {
        let mut id = o.0 as usize;
        let mut out = vec![0; self.n_attributes()];
        for a in (0..self.n_attributes()).rev() {
            out[a] = id % self.n_values(a);
            id /= self.n_values(a);
        }
        out
    }

    /// Short content hash used to tie data files to a schema.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        let digest = Sha256::digest(&bytes);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Conjunction of concepts on distinct attributes, sorted by attribute.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Phrase {
    concepts: Vec<Concept>,
}

impl Phrase {
    pub fn new(mut concepts: Vec<Concept>) -> Result<Self> {
        if concepts.is_empty() {
            return Err(CtdError::Invalid("empty phrase".into()));
        }
        concepts.sort();
        if concepts.windows(2).any(|w| w[0].attribute == w[1].attribute) {
            return Err(CtdError::Invalid("phrase repeats an attribute".into()));
        }
        Ok(Phrase { concepts })
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Labeling function: true iff the object agrees with every concept.
    pub fn matches(&self, values: &[usize]) -> bool {
        self.concepts.iter().all(|c| values.get(c.attribute) == Some(&c.value))
    }

    pub fn concept_ids(&self, schema: &AttributeSchema) -> Vec<usize> {
        self.concepts.iter().map(|&c| schema.concept_id(c)).collect()
    }

    pub fn from_concept_ids(schema: &AttributeSchema, ids: &[usize]) -> Result<Self> {
        let cs = ids.iter().map(|&i| schema.concept_from_id(i)).collect::<Result<Vec<_>>>()?;
        Phrase::new(cs)
    }

    pub fn display(&self, schema: &AttributeSchema) -> String {
        self.concepts
            .iter()
            .map(|&c| schema.concept_name(c))
            .collect::<Vec<_>>()
            .join(".")
    }
}

impl fmt::Display for Phrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .concepts
            .iter()
            .map(|c| format!("{}:{}", c.attribute, c.value))
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// Every phrase with exactly `length` concepts, ordered by attribute subset
/// (lexicographic) and then by values.
pub fn enumerate_phrases(schema: &AttributeSchema, length: usize) -> Result<Vec<Phrase>> {
    let n = schema.n_attributes();
    if length == 0 || length > n {
        return Err(CtdError::Invalid(format!("phrase length {length} outside 1..={n}")));
    }
    let mut out = Vec::new();
    let mut subset: Vec<usize> = (0..length).collect();
    loop {
        let mut vals = vec![0usize; length];
        'values: loop {
            let cs = subset.iter().zip(&vals).map(|(&a, &v)| Concept::new(a, v)).collect();
            out.push(Phrase { concepts: cs });
            for k in (0..length).rev() {
                vals[k] += 1;
                if vals[k] < schema.n_values(subset[k]) {
                    continue 'values;
                }
                vals[k] = 0;
            }
            break;
        }
        // next combination
        let mut k = length;
        while k > 0 && subset[k - 1] == n - length + k - 1 {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        subset[k - 1] += 1;
        for j in k..length {
            subset[j] = subset[j - 1] + 1;
        }
    }
    Ok(out)
}
