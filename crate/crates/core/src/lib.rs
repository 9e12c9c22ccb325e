//! Content-based purchase-intent prediction for session clickstreams.
//!
//! Items are embedded from their title and description text by a
//! category-supervised recurrent encoder; frozen item vectors then feed a
//! recurrent purchase predictor. Because the encoder never looks at item ids,
//! items unseen during training (the item cold-start case) still get
//! meaningful inputs.
//!
//! Modules:
//! - [`nn`]: matrices, GRU/LSTM/dense layers with backpropagation, Adam and
//!   finite-difference gradient checking.
//! - [`data`]: tokenizer, vocabulary, catalog and event ingestion,
//!   sessionization, padding/pruning and chronological splits.
//! - [`models`]: the embedding component and the content, integrated and
//!   id-only predictors.
//! - [`metrics`]: ROC, AUC, average precision and DeLong's test.
//! - [`experiments`]: all-data, cold-start and random-removal protocols.
//! - [`synth`]: seeded synthetic catalog/clickstream generator with a planted
//!   content signal.

pub mod data;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod parallel;
pub mod serial;
pub mod synth;

pub use error::{Error, Result};
