//! Dense tensors, a reverse-mode gradient tape, layers, Adam, seeded RNG and
//! the binary checkpoint format.

mod adam;
mod checkpoint;
mod gradcheck;
mod layers;
mod rng;
mod tape;
mod tensor;

pub use adam::{Adam, Param, ParamStore};
pub use checkpoint::CheckpointFile;
pub use gradcheck::finite_diff_check;
pub use layers::{lstm_step, uniform_init, Linear, Lstm, LstmVars};
pub use rng::Rng;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
