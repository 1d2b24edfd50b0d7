//! Deterministic hash provider: character-trigram feature hashing.
//!
//! Stand-in for pretrained text encoders at desk scale. Tokens are
//! lowercased, wrapped in `^`...`$` boundary markers, and every character
//! trigram is hashed with FNV-1a-64; the hash picks an index (`h mod d`) and
//! a sign (top bit), the accumulated vector is L2-normalized.

use super::{
    attribute_tokens, EmbeddingProvider, SpanEmbedding, TupleEmbedding, MIN_DIMENSION, SPAN_ROWS,
    VISUAL_TOKEN,
};
use crate::doc_model::{Document, Schema, Tuple};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hash a token sequence into a unit-norm d-vector (all-zero stays all-zero).
///
/// Deterministic and platform-independent; an empty token sequence yields the
/// zero vector.
pub fn embed_text<S: AsRef<str>>(tokens: &[S], d: usize) -> Vec<f64> {
    assert!(d >= MIN_DIMENSION, "embedding dimension {d} below minimum {MIN_DIMENSION}");
    let mut acc = vec![0.0f64; d];
    let mut buf = String::new();
    for token in tokens {
        buf.clear();
        buf.push('^');
        for ch in token.as_ref().chars() {
            buf.extend(ch.to_lowercase());
        }
        buf.push('$');
        let chars: Vec<char> = buf.chars().collect();
        let mut trigram = String::new();
        for window in chars.windows(3) {
            trigram.clear();
            trigram.extend(window);
            let h = fnv1a64(trigram.as_bytes());
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            acc[(h % d as u64) as usize] += sign;
        }
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut acc {
            *v /= norm;
        }
    }
    acc
}

/// Deterministic trigram-hashing provider.
#[derive(Debug, Clone)]
pub struct HashProvider {
    dim: usize,
}

impl HashProvider {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < MIN_DIMENSION {
            return Err(Error::Config(format!(
                "embedding dimension {dim} below minimum {MIN_DIMENSION}"
            )));
        }
        Ok(HashProvider { dim })
    }
}

impl EmbeddingProvider for HashProvider {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn span_embedding(&self, doc: &Document, word_index: usize) -> Result<SpanEmbedding> {
        if word_index >= doc.word_count() {
            return Err(Error::Embedding(format!(
                "word index {word_index} out of range for document {:?} ({} words)",
                doc.doc_id,
                doc.word_count()
            )));
        }
        let (line, offset) = doc
            .line_of(word_index)
            .ok_or_else(|| Error::Embedding(format!("word {word_index} not on any line")))?;
        // Forward n-grams, clipped at the text-line boundary.
        let gram = |n: usize| -> &[&str] { &line[offset..line.len().min(offset + n)] };
        let mut rows = Matrix::zeros(SPAN_ROWS, self.dim);
        rows.row_mut(0).copy_from_slice(&embed_text(gram(1), self.dim));
        rows.row_mut(1).copy_from_slice(&embed_text(gram(2), self.dim));
        rows.row_mut(2).copy_from_slice(&embed_text(gram(3), self.dim));
        let visual = embed_text(&[VISUAL_TOKEN, doc.doc_id.as_str()], self.dim);
        rows.row_mut(3).copy_from_slice(&visual);
        Ok(SpanEmbedding { doc_id: doc.doc_id.clone(), word_index, rows })
    }

    fn tuple_embedding(&self, schema: &Schema, tuple: &Tuple) -> Result<TupleEmbedding> {
        if tuple.values.len() != schema.arity() {
            return Err(Error::Embedding(format!(
                "tuple {:?} has {} values, schema arity is {}",
                tuple.id,
                tuple.values.len(),
                schema.arity()
            )));
        }
        let mut rows = Matrix::zeros(schema.arity(), self.dim);
        for i in 0..schema.arity() {
            let tokens = attribute_tokens(schema, tuple, i);
            rows.row_mut(i).copy_from_slice(&embed_text(&tokens, self.dim));
        }
        Ok(TupleEmbedding { tuple_id: tuple.id.clone(), rows })
    }
}
