//! File-backed provider for externally precomputed embeddings.
//!
//! Carries real-model vectors exported to two JEMB files: span matrices keyed
//! by `"{doc_id}#{word_index}"` and tuple matrices keyed by tuple id.

use std::collections::BTreeMap;
use std::path::Path;

use super::jemb::read_embedding_file;
use super::{span_record_id, EmbeddingProvider, SpanEmbedding, TupleEmbedding, SPAN_ROWS};
use crate::doc_model::{Document, Schema, Tuple};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug)]
pub struct FileProvider {
    dim: usize,
    spans: BTreeMap<String, Matrix>,
    tuples: BTreeMap<String, Matrix>,
}

impl FileProvider {
    pub fn from_files(
        spans_path: impl AsRef<Path>,
        tuples_path: impl AsRef<Path>,
        expected_dim: usize,
    ) -> Result<Self> {
        let (span_d, spans) = read_embedding_file(spans_path)?;
        let (tuple_d, tuples) = read_embedding_file(tuples_path)?;
        for (name, d) in [("span", span_d), ("tuple", tuple_d)] {
            if d != expected_dim {
                return Err(Error::Embedding(format!(
                    "{name} embedding file has d={d}, engine configured for d={expected_dim}"
                )));
            }
        }
        Ok(FileProvider { dim: expected_dim, spans, tuples })
    }

    /// Build directly from in-memory maps (tests, adapters).
    pub fn from_maps(
        dim: usize,
        spans: BTreeMap<String, Matrix>,
        tuples: BTreeMap<String, Matrix>,
    ) -> Self {
        FileProvider { dim, spans, tuples }
    }
}

impl EmbeddingProvider for FileProvider {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn span_embedding(&self, doc: &Document, word_index: usize) -> Result<SpanEmbedding> {
        if word_index >= doc.word_count() {
            return Err(Error::Embedding(format!(
                "word index {word_index} out of range for document {:?}",
                doc.doc_id
            )));
        }
        let key = span_record_id(&doc.doc_id, word_index);
        let rows = self
            .spans
            .get(&key)
            .ok_or_else(|| Error::Embedding(format!("no span record {key:?}")))?;
        if rows.rows() != SPAN_ROWS {
            return Err(Error::Embedding(format!(
                "span record {key:?} has {} rows, expected {SPAN_ROWS}",
                rows.rows()
            )));
        }
        Ok(SpanEmbedding { doc_id: doc.doc_id.clone(), word_index, rows: rows.clone() })
    }

    fn tuple_embedding(&self, schema: &Schema, tuple: &Tuple) -> Result<TupleEmbedding> {
        let rows = self
            .tuples
            .get(&tuple.id)
            .ok_or_else(|| Error::Embedding(format!("no tuple record {:?}", tuple.id)))?;
        if rows.rows() != schema.arity() {
            return Err(Error::Embedding(format!(
                "tuple record {:?} has {} rows, schema arity is {}",
                tuple.id,
                rows.rows(),
                schema.arity()
            )));
        }
        Ok(TupleEmbedding { tuple_id: tuple.id.clone(), rows: rows.clone() })
    }
}
