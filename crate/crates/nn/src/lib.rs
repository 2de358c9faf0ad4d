//! Dense f64 matrices, a reverse-mode tape, and the layers needed by the
//! routing policy: affine embeddings, an LSTM cell, additive attention,
//! masked softmax, Adam and a finite-difference gradient checker.

pub mod adam;
pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod matrix;
pub mod params;
pub mod tape;

pub use adam::Adam;
pub use checkpoint::{Checkpoint, NamedTensor};
pub use error::NnError;
pub use gradcheck::{check_gradients, relative_error, sample_entries, GradCheckReport};
pub use layers::{Attention, Linear, LstmCell, LstmState};
pub use matrix::Matrix;
pub use params::{ParamId, ParamStore};
pub use tape::{masked_softmax, sigmoid, Tape, Var};
