//! Cross-modal entity matching for visually rich documents.
//!
//! The engine maps text spans in a document to semantically similar tuples in
//! a relational table by aligning both on a shared embedding space:
//!
//! * [`doc_model`] — documents (hOCR / canonical JSON) and relational tables.
//! * [`encoders`] — fixed-length span and tuple representations behind a
//!   pluggable provider (deterministic hash provider, file-backed provider).
//! * [`alignment`] — shared-space projections, min-over-pairs distances, the
//!   triplet objective with analytic subgradients, and the training loop.
//! * [`attention_index`] — DBSCAN-compressed vector stores and k-max weighted
//!   attention for pruning candidate pairs.
//! * [`pipeline`] — end-to-end matching with majority-vote aggregation.
//! * [`eval`] — precision/F1@k metrics, label-efficiency curves, and
//!   pruning benchmarks.
//! * [`synth`] — seeded synthetic corpus generator for benchmarks and tests.

pub mod alignment;
pub mod attention_index;
pub mod doc_model;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod pipeline;
pub mod synth;
#[cfg(test)]
mod test_util;
mod wire;

pub use error::{Error, Result};
pub use matrix::Matrix;
