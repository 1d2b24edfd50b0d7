//! Fixed-length span and tuple representations behind a pluggable provider.
//!
//! A span embedding is a 4 x d matrix: word, bigram, trigram, and a
//! document-level visual row. A tuple embedding is an n x d matrix, one row
//! per schema attribute. Two providers exist: a deterministic hash provider
//! (character-trigram feature hashing) and a file-backed provider for
//! externally precomputed vectors in the JEMB format.

mod file;
mod hash;
mod jemb;

pub use file::FileProvider;
pub use hash::{embed_text, fnv1a64, HashProvider};
pub use jemb::{read_embedding_file, write_embedding_file};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::doc_model::{AttrValue, Document, Schema, Tuple};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Rows in a span embedding: word, bigram, trigram, visual.
pub const SPAN_ROWS: usize = 4;

/// Smallest supported embedding dimension.
pub const MIN_DIMENSION: usize = 8;

/// Dimension of the reference pretrained encoders.
pub const DEFAULT_DIMENSION: usize = 768;

/// Imputation token for missing attribute values.
pub const UNK_TOKEN: &str = "[UNK]";

/// Sentinel token for the hash provider's document-level visual row.
pub const VISUAL_TOKEN: &str = "VIS";

/// Fixed-length encoding of one text span (4 x d).
#[derive(Debug, Clone, PartialEq)]
pub struct SpanEmbedding {
    pub doc_id: String,
    pub word_index: usize,
    pub rows: Matrix,
}

/// Fixed-length encoding of one tuple (n x d).
#[derive(Debug, Clone, PartialEq)]
pub struct TupleEmbedding {
    pub tuple_id: String,
    pub rows: Matrix,
}

/// Record id under which a span's matrix is stored in a JEMB file.
pub fn span_record_id(doc_id: &str, word_index: usize) -> String {
    format!("{doc_id}#{word_index}")
}

/// Token sequence for attribute `i` of a tuple: the attribute name followed
/// by the value tokens; missing values map to the `[UNK]` token and
/// multi-valued attributes are linearized in order.
pub fn attribute_tokens(schema: &Schema, tuple: &Tuple, i: usize) -> Vec<String> {
    let mut tokens = vec![schema.attribute(i).to_string()];
    match &tuple.values[i] {
        AttrValue::Missing => tokens.push(UNK_TOKEN.to_string()),
        AttrValue::Single(v) => tokens.extend(v.split_whitespace().map(str::to_string)),
        AttrValue::Multi(vs) => {
            for v in vs {
                tokens.extend(v.split_whitespace().map(str::to_string));
            }
        }
    }
    tokens
}

/// Provider kind selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Hash,
    File,
}

/// Configuration for building an embedding provider.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingProviderConfig {
    pub kind: ProviderKind,
    pub dimension: usize,
    /// JEMB file with span matrices (file provider only).
    pub spans_path: Option<PathBuf>,
    /// JEMB file with tuple matrices (file provider only).
    pub tuples_path: Option<PathBuf>,
}

impl EmbeddingProviderConfig {
    pub fn hash(dimension: usize) -> Self {
        EmbeddingProviderConfig { kind: ProviderKind::Hash, dimension, spans_path: None, tuples_path: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < MIN_DIMENSION {
            return Err(Error::Config(format!(
                "embedding dimension {} below minimum {MIN_DIMENSION}",
                self.dimension
            )));
        }
        if self.kind == ProviderKind::File
            && (self.spans_path.is_none() || self.tuples_path.is_none())
        {
            return Err(Error::Config(
                "file provider requires spans_path and tuples_path".into(),
            ));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        self.validate()?;
        match self.kind {
            ProviderKind::Hash => Ok(Box::new(HashProvider::new(self.dimension)?)),
            ProviderKind::File => {
                let provider = FileProvider::from_files(
                    self.spans_path.as_ref().expect("validated"),
                    self.tuples_path.as_ref().expect("validated"),
                    self.dimension,
                )?;
                Ok(Box::new(provider))
            }
        }
    }
}

/// Source of span and tuple embeddings. Implementations are read-only after
/// construction and safe to share across threads.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// The 4 x d matrix for the word at `word_index` in reading order.
    fn span_embedding(&self, doc: &Document, word_index: usize) -> Result<SpanEmbedding>;

    /// The n x d matrix for `tuple` under `schema`.
    fn tuple_embedding(&self, schema: &Schema, tuple: &Tuple) -> Result<TupleEmbedding>;
}

impl EmbeddingProvider for Box<dyn EmbeddingProvider> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }

    fn span_embedding(&self, doc: &Document, word_index: usize) -> Result<SpanEmbedding> {
        (**self).span_embedding(doc, word_index)
    }

    fn tuple_embedding(&self, schema: &Schema, tuple: &Tuple) -> Result<TupleEmbedding> {
        (**self).tuple_embedding(schema, tuple)
    }
}
