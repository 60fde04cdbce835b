use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::schema::{AttributeSchema, ObjectId, Phrase};
use crate::diffcore::Rng;
use crate::error::{CtdError, Result};

/// Object counts shown to each agent in one game turn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub sender_targets: usize,
    pub sender_distractors: usize,
    pub receiver_targets: usize,
    pub receiver_distractors: usize,
}

impl Geometry {
    /// 20 sender targets, no sender distractors, 1 receiver target among 20 distractors.
    pub fn mref() -> Self {
        Geometry {
            sender_targets: 20,
            sender_distractors: 0,
            receiver_targets: 1,
            receiver_distractors: 20,
        }
    }

    pub fn with_sender_targets(mut self, n: usize) -> Self {
        self.sender_targets = n;
        self
    }

    pub fn n_candidates(&self) -> usize {
        self.receiver_targets + self.receiver_distractors
    }
}

/// One game turn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameSample {
    pub sender_targets: Vec<ObjectId>,
    pub sender_distractors: Vec<ObjectId>,
    pub receiver_targets: Vec<ObjectId>,
    pub receiver_distractors: Vec<ObjectId>,
    pub phrase: Phrase,
    /// Seeds the order in which the receiver sees its candidates.
    pub order_seed: u64,
}

impl GameSample {
    /// Receiver candidates in presentation order with their target flags.
    pub fn receiver_candidates(&self) -> (Vec<ObjectId>, Vec<bool>) {
        let mut tagged: Vec<(ObjectId, bool)> = self
            .receiver_targets
            .iter()
            .map(|&o| (o, true))
            .chain(self.receiver_distractors.iter().map(|&o| (o, false)))
            .collect();
        Rng::new(self.order_seed).shuffle(&mut tagged);
        tagged.into_iter().unzip()
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            sender_targets: self.sender_targets.len(),
            sender_distractors: self.sender_distractors.len(),
            receiver_targets: self.receiver_targets.len(),
            receiver_distractors: self.receiver_distractors.len(),
        }
    }

    /// True iff every target satisfies the phrase and every distractor violates it.
    pub fn is_consistent(&self, schema: &AttributeSchema) -> bool {
        let sat = |o: &ObjectId| self.phrase.matches(&schema.values(*o));
        self.sender_targets.iter().all(sat)
            && self.receiver_targets.iter().all(sat)
            && !self.sender_distractors.iter().any(sat)
            && !self.receiver_distractors.iter().any(sat)
    }
}

fn satisfier(schema: &AttributeSchema, phrase: &Phrase, rng: &mut Rng) -> ObjectId {
    let mut values: Vec<usize> = (0..schema.n_attributes()).map(|a| rng.below(schema.n_values(a))).collect();
    for c in phrase.concepts() {
        values[c.attribute] = c.value;
    }
    schema.object(&values).expect("values within schema")
}

fn violator(schema: &AttributeSchema, phrase: &Phrase, rng: &mut Rng) -> ObjectId {
    loop {
        let o = ObjectId(rng.below(schema.n_objects()) as u32);
        if !phrase.matches(&schema.values(o)) {
            return o;
        }
    }
}

/// Targets are drawn uniformly (with replacement) from the phrase's
/// satisfiers, distractors uniformly from its violators; sender and receiver
/// draws are independent.
pub fn build_sample(schema: &AttributeSchema, phrase: &Phrase, g: &Geometry, rng: &mut Rng) -> Result<GameSample> {
    for &c in phrase.concepts() {
        schema.check(c)?;
    }
    if g.sender_targets == 0 {
        return Err(CtdError::Unsatisfiable("the sender needs at least one target".into()));
    }
    if g.n_candidates() == 0 {
        return Err(CtdError::Unsatisfiable("the receiver needs at least one candidate".into()));
    }
    let fixed: usize = phrase.concepts().iter().map(|c| schema.n_values(c.attribute)).product();
    if (g.sender_distractors > 0 || g.receiver_distractors > 0) && fixed == 1 {
        return Err(CtdError::Unsatisfiable(format!("no object violates {phrase}")));
    }
    let sender_targets = (0..g.sender_targets).map(|_| satisfier(schema, phrase, rng)).collect();
    let sender_distractors = (0..g.sender_distractors).map(|_| violator(schema, phrase, rng)).collect();
    let receiver_targets = (0..g.receiver_targets).map(|_| satisfier(schema, phrase, rng)).collect();
    let receiver_distractors = (0..g.receiver_distractors).map(|_| violator(schema, phrase, rng)).collect();
    Ok(GameSample {
        sender_targets,
        sender_distractors,
        receiver_targets,
        receiver_distractors,
        phrase: phrase.clone(),
        order_seed: rng.next_u64(),
    })
}
