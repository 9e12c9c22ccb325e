//! Minimal deterministic neural-network kernel.
//!
//! Everything is `f64`. Layers keep their weights in [`ParamTensor`]s and
//! operate on batches stored as row-major [`Matrix`] values, one row per
//! example. Recurrent layers take their input sequence stacked step-major:
//! rows `t*B .. (t+1)*B` hold timestep `t` for a batch of `B`.

mod adam;
mod dense;
mod embedding;
mod gradcheck;
mod gru;
pub mod init;
mod loss;
mod lstm;
mod matrix;
mod param;

pub use adam::{Adam, AdamConfig};
pub use dense::{dense_forward, Activation, Dense, DenseCache};
pub use embedding::{embedding_lookup, Embedding};
pub use gradcheck::{grad_check, GradCheckReport};
pub use gru::{gru_step, Gru, GruCache};
pub use loss::{sigmoid, sigmoid_bce, sigmoid_bce_batch, softmax_cross_entropy, softmax_cross_entropy_batch};
pub use lstm::{lstm_step, Lstm, LstmCache};
pub use matrix::Matrix;
pub(crate) use param::prefixed;
pub use param::{Gradients, ParamTensor, Parameterized};
