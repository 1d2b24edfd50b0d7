//! End-to-end matching: prune spans and tuples through the attention index,
//! run pairwise alignment on the survivors, and aggregate span-level winners
//! to a document-level ranking by majority vote.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{align_distance, Alignment, ProjectionModel};
use crate::attention_index::{
    attend_spans, attend_tuples, AttentionIndex, DEFAULT_K_SPANS, DEFAULT_K_TUPLES,
};
use crate::doc_model::{Document, Table};
use crate::encoders::EmbeddingProvider;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Matching options; defaults follow the k-max attention defaults (25 spans,
/// 100 tuples) with pruning and visual features enabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub k_spans: usize,
    pub k_tuples: usize,
    /// Document-level ranking prefix to return (None = full ranking).
    pub top_k: Option<usize>,
    pub use_attention: bool,
    pub use_visual: bool,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            k_spans: DEFAULT_K_SPANS,
            k_tuples: DEFAULT_K_TUPLES,
            top_k: None,
            use_attention: true,
            use_visual: true,
        }
    }
}

/// The whole table encoded and projected once, shared across documents.
#[derive(Debug, Clone)]
pub struct ProjectedTable {
    pub ids: Vec<String>,
    pub projected: Vec<Matrix>,
    /// Per tuple, per attribute: is the value missing?
    pub missing: Vec<Vec<bool>>,
}

impl ProjectedTable {
    pub fn prepare(
        table: &Table,
        provider: &dyn EmbeddingProvider,
        model: &ProjectionModel,
    ) -> Result<Self> {
        let mut ids = Vec::with_capacity(table.tuples.len());
        let mut projected = Vec::with_capacity(table.tuples.len());
        let mut missing = Vec::with_capacity(table.tuples.len());
        for tuple in &table.tuples {
            let raw = provider.tuple_embedding(&table.schema, tuple)?;
            projected.push(model.project_tuple(&raw.rows)?);
            ids.push(tuple.id.clone());
            missing.push(tuple.values.iter().map(|v| v.is_missing()).collect());
        }
        Ok(ProjectedTable { ids, projected, missing })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Winner of one span's alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanMatch {
    pub span_index: usize,
    pub tuple_id: String,
    pub distance: f64,
    pub span_row: usize,
    pub attribute: usize,
}

/// One entry of the document-level ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub tuple_id: String,
    pub votes: usize,
    /// Best (smallest) span distance seen for this tuple.
    pub distance: f64,
}

/// Document-level match output. The JSON-lines wire format carries `doc_id`,
/// `ranking`, `comparisons` and `latency_ms`; per-span winners stay in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub doc_id: String,
    pub ranking: Vec<RankEntry>,
    #[serde(skip)]
    pub winners: Vec<SpanMatch>,
    pub comparisons: usize,
    pub latency_ms: f64,
}

/// Match one document against the prepared table.
///
/// With attention enabled, spans are pruned through `A_D`, then per retained
/// span the tuples are pruned through `A_T` and the survivors compared
/// pairwise; the per-tuple centroid view is resolved once per document.
/// `use_attention = false` bypasses pruning entirely; `use_visual = false`
/// zeroes the visual row of every span matrix.
pub fn match_document(
    doc: &Document,
    provider: &dyn EmbeddingProvider,
    model: &ProjectionModel,
    table: &ProjectedTable,
    index: Option<&AttentionIndex>,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    let start = Instant::now();
    if table.is_empty() {
        return Err(Error::Match("cannot match against an empty table".into()));
    }
    let index = match (opts.use_attention, index) {
        (true, Some(index)) => Some(index),
        (true, None) => {
            return Err(Error::Match("attention enabled but no index provided".into()))
        }
        (false, _) => None,
    };

    let word_count = doc.word_count();
    let mut spans = Vec::with_capacity(word_count);
    for w in 0..word_count {
        let mut emb = provider.span_embedding(doc, w)?;
        if !opts.use_visual {
            emb.rows.row_mut(3).fill(0.0);
        }
        spans.push(emb.rows);
    }
    if spans.is_empty() {
        return Ok(MatchResult {
            doc_id: doc.doc_id.clone(),
            ranking: Vec::new(),
            winners: Vec::new(),
            comparisons: 0,
            latency_ms: elapsed_ms(start),
        });
    }

    let mut comparisons = 0usize;
    let mut winners = Vec::new();
    match index {
        Some(index) => {
            let span_flats: Vec<Vec<f64>> = spans.iter().map(Matrix::flattened).collect();
            let retained_spans = attend_spans(&span_flats, index, opts.k_spans)?.retained;
            let resolved = index.resolve_tuples(&table.ids)?;
            for span_index in retained_spans {
                let span_proj = model.project_span(&spans[span_index])?;
                let survivors = attend_tuples(&span_proj, &resolved, opts.k_tuples)?.retained;
                comparisons += survivors.len();
                if let Some(m) = best_over(&span_proj, table, survivors.iter().copied())? {
                    winners.push(with_span_index(m, span_index));
                }
            }
        }
        None => {
            for (span_index, span) in spans.iter().enumerate() {
                let span_proj = model.project_span(span)?;
                comparisons += table.len();
                if let Some(m) = best_over(&span_proj, table, 0..table.len())? {
                    winners.push(with_span_index(m, span_index));
                }
            }
        }
    }

    let mut ranking = aggregate(&winners);
    if let Some(top_k) = opts.top_k {
        ranking.truncate(top_k);
    }
    Ok(MatchResult {
        doc_id: doc.doc_id.clone(),
        ranking,
        winners,
        comparisons,
        latency_ms: elapsed_ms(start),
    })
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn with_span_index(m: (String, Alignment), span_index: usize) -> SpanMatch {
    SpanMatch {
        span_index,
        tuple_id: m.0,
        distance: m.1.distance,
        span_row: m.1.span_row,
        attribute: m.1.attribute,
    }
}

/// Minimum-distance tuple over the given candidate indices, ties broken by
/// lexicographically smallest tuple id.
fn best_over(
    span_proj: &Matrix,
    table: &ProjectedTable,
    candidates: impl Iterator<Item = usize>,
) -> Result<Option<(String, Alignment)>> {
    let mut best: Option<(String, Alignment)> = None;
    for idx in candidates {
        let a = align_distance(span_proj, &table.projected[idx])?;
        let id = &table.ids[idx];
        let better = match &best {
            None => true,
            Some((best_id, b)) => {
                a.distance < b.distance || (a.distance == b.distance && id < best_id)
            }
        };
        if better {
            best = Some((id.clone(), a));
        }
    }
    Ok(best)
}

/// Majority vote over span winners: votes descending, ties by smaller summed
/// distance, then tuple id. The reported distance is the best span distance.
pub fn aggregate(winners: &[SpanMatch]) -> Vec<RankEntry> {
    struct Tally {
        votes: usize,
        sum: f64,
        best: f64,
    }
    let mut tallies: BTreeMap<&str, Tally> = BTreeMap::new();
    for w in winners {
        let t = tallies
            .entry(&w.tuple_id)
            .or_insert(Tally { votes: 0, sum: 0.0, best: f64::INFINITY });
        t.votes += 1;
        t.sum += w.distance;
        t.best = t.best.min(w.distance);
    }
    let mut entries: Vec<(&str, Tally)> = tallies.into_iter().collect();
    entries.sort_by(|(id_a, a), (id_b, b)| {
        b.votes
            .cmp(&a.votes)
            .then_with(|| a.sum.partial_cmp(&b.sum).expect("finite distances"))
            .then_with(|| id_a.cmp(id_b))
    });
    entries
        .into_iter()
        .map(|(id, t)| RankEntry { tuple_id: id.to_string(), votes: t.votes, distance: t.best })
        .collect()
}

/// Match a corpus: documents sorted by id, matched independently (in
/// parallel), results in sorted order. Output is deterministic for any
/// thread count.
pub fn match_corpus(
    docs: &[Document],
    provider: &(dyn EmbeddingProvider),
    model: &ProjectionModel,
    table: &ProjectedTable,
    index: Option<&AttentionIndex>,
    opts: &MatchOptions,
) -> Result<Vec<MatchResult>> {
    let mut order: Vec<&Document> = docs.iter().collect();
    order.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    order
        .par_iter()
        .map(|doc| match_document(doc, provider, model, table, index, opts))
        .collect()
}

/// Serialize results as JSON-lines in the wire schema.
pub fn write_match_results(results: &[MatchResult], w: &mut impl std::io::Write) -> Result<()> {
    for r in results {
        serde_json::to_writer(&mut *w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Parse JSON-lines match results (winners are not part of the wire format).
pub fn read_match_results(reader: impl std::io::BufRead) -> Result<Vec<MatchResult>> {
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
