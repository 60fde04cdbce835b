//! Emergent-communication laboratory: agents learn a discrete codebook of
//! single concepts in a multi-target game and then compose those code-words
//! to describe unseen objects.
//!
//! Module map:
//!
//! * [`diffcore`]: dense tensors, a reverse-mode tape, layers, losses, Adam, RNG
//! * [`worlds`]: THING and QRC worlds, phrases, game samples, dataset splits
//! * [`channels`]: codebook, Gumbel-softmax and quantized message channels
//! * [`games`]: Ref / Recon / Diff / Mref mechanics and accuracy
//! * [`metrics`]: AMI, positional and bag-of-symbols disentanglement, context
//!   independence and concept best matching
//! * [`trainer`]: Decompose / Compose phases, regimes, ablations, reports

pub mod channels;
pub mod diffcore;
pub mod error;
pub mod games;
pub mod metrics;
pub mod trainer;
pub mod worlds;

pub use diffcore::{Param, ParamStore, Rng, Tape, Tensor, Var};
pub use error::{CtdError, Result};
pub use metrics::{Corpus, MatchingResult, MetricsReport};
pub use worlds::{AttributeSchema, Concept, GameSample, ObjectId, Phrase, World};
