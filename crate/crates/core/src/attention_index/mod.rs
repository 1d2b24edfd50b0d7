//! Bi-directional attention structures for pruning candidate pairs.
//!
//! Two vector stores, keyed by the schema attribute that won the alignment
//! for each training match: `V_D` holds flattened raw span matrices, `V_T`
//! holds projected tuple-attribute rows. Both are compressed to DBSCAN
//! cluster centroids (noise points kept as singletons). Likelihood scores
//! normalize min-centroid distances to [0, 1] and k-max weighted attention
//! retains the top-k candidates.

mod dbscan;
mod jidx;

pub use dbscan::{cluster_dbscan, ClusterLabel};
pub use jidx::{load_index, save_index};

use std::collections::BTreeMap;

use crate::alignment::row_distance;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Default spans retained per document.
pub const DEFAULT_K_SPANS: usize = 25;

/// Default tuples retained per span.
pub const DEFAULT_K_TUPLES: usize = 100;

/// Default DBSCAN core threshold.
pub const DEFAULT_MIN_PTS: usize = 2;

/// Attribute-keyed centroid collections.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorStore {
    centroids: BTreeMap<usize, Vec<Vec<f64>>>,
}

impl VectorStore {
    pub fn keys(&self) -> impl Iterator<Item = usize> + '_ {
        self.centroids.keys().copied()
    }

    pub fn centroids(&self, key: usize) -> Option<&[Vec<f64>]> {
        self.centroids.get(&key).map(Vec::as_slice)
    }

    pub fn all_centroids(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.centroids.values().flatten()
    }

    pub fn centroid_count(&self) -> usize {
        self.centroids.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

/// DBSCAN build parameters. Without an explicit `eps`, each key uses half the
/// median pairwise distance of its point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexParams {
    pub eps: Option<f64>,
    pub min_pts: usize,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams { eps: None, min_pts: DEFAULT_MIN_PTS }
    }
}

/// Build provenance, kept in memory (not part of the JIDX wire format).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IndexMetadata {
    pub eps_override: Option<f64>,
    pub min_pts: usize,
    pub model_checksum: u64,
}

/// One training match feeding the index: the span's raw flattened matrix, the
/// matched tuple's projected winning-attribute row, and that attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMatch {
    pub span_flat: Vec<f64>,
    pub tuple_row: Vec<f64>,
    pub attribute: usize,
}

/// The built attention index: both stores plus the tuple-to-centroid
/// assignment table cached at build time.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionIndex {
    dim: usize,
    pub v_doc: VectorStore,
    pub v_tup: VectorStore,
    /// tuple id -> (attribute key, centroid ordinal in that key's list).
    pub assignments: BTreeMap<String, Vec<(usize, usize)>>,
    pub metadata: IndexMetadata,
}

/// Attention scores aligned to spans or tuples, plus the retained indices
/// selected by k-max (ascending).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionVector {
    pub scores: Vec<f64>,
    pub retained: Vec<usize>,
}

/// `A = 1 - (C - min) / (max - min)`; all ones when max equals min (including
/// singleton input), preferring recall over arbitrary pruning.
pub fn normalize_distances(distances: &[f64]) -> Vec<f64> {
    let Some(min) = distances.iter().copied().reduce(f64::min) else {
        return Vec::new();
    };
    let max = distances.iter().copied().reduce(f64::max).expect("non-empty");
    if max > min {
        distances.iter().map(|c| 1.0 - (c - min) / (max - min)).collect()
    } else {
        vec![1.0; distances.len()]
    }
}

/// Keep the `k` largest scores (ties toward the smaller index), zero the
/// rest.
pub fn k_max_attention(scores: &[f64], k: usize) -> Vec<f64> {
    k_max_selection(scores, k).scores
}

/// k-max with the selected index set (ascending). The selection may include
/// zero scores: it is the top-k set, not the nonzero set.
pub fn k_max_selection(scores: &[f64], k: usize) -> AttentionVector {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).expect("scores are finite").then(a.cmp(&b))
    });
    let mut retained: Vec<usize> = order.into_iter().take(k).collect();
    retained.sort_unstable();
    let mut masked = vec![0.0; scores.len()];
    for &i in &retained {
        masked[i] = scores[i];
    }
    AttentionVector { scores: masked, retained }
}

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// eps heuristic for one key's point set: half the median pairwise distance.
fn default_eps(points: &[Vec<f64>]) -> f64 {
    let mut dists = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            dists.push(row_distance(p, q));
        }
    }
    median(dists).map_or(1.0, |m| m * 0.5).max(1e-12)
}

/// Cluster one key's points and return the centroid list: cluster means in
/// cluster-id order, then noise points as singletons in scan order.
fn cluster_centroids(points: &[Vec<f64>], params: IndexParams) -> Vec<Vec<f64>> {
    let eps = params.eps.unwrap_or_else(|| default_eps(points));
    let labels = cluster_dbscan(points, eps, params.min_pts);
    let cluster_count = labels.iter().filter_map(ClusterLabel::cluster).max().map_or(0, |c| c + 1);
    let width = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; width]; cluster_count];
    let mut counts = vec![0usize; cluster_count];
    let mut noise = Vec::new();
    for (point, label) in points.iter().zip(&labels) {
        match label {
            ClusterLabel::Cluster(c) => {
                for (s, v) in sums[*c].iter_mut().zip(point) {
                    *s += v;
                }
                counts[*c] += 1;
            }
            ClusterLabel::Noise => noise.push(point.clone()),
        }
    }
    let mut centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(counts)
        .map(|(sum, count)| sum.into_iter().map(|s| s / count as f64).collect())
        .collect();
    centroids.extend(noise);
    centroids
}

/// Build both stores from the training matches and cache every tuple's
/// nearest-centroid assignment under each key (missing attributes skipped).
///
/// `projected_tuples` carries the whole table in order: `(tuple id, F'_t)`
/// together with per-attribute missingness flags.
pub fn build_index(
    matches: &[TrainingMatch],
    projected_tuples: &[(String, Matrix, Vec<bool>)],
    dim: usize,
    params: IndexParams,
    model_checksum: u64,
) -> Result<AttentionIndex> {
    if matches.is_empty() {
        return Err(Error::Index("cannot build an attention index from zero training matches".into()));
    }
    let flat_dim = 4 * dim;
    let mut span_groups: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    let mut tuple_groups: BTreeMap<usize, Vec<Vec<f64>>> = BTreeMap::new();
    for m in matches {
        if m.span_flat.len() != flat_dim {
            return Err(Error::Dimension { expected: flat_dim, got: m.span_flat.len() });
        }
        if m.tuple_row.len() != dim {
            return Err(Error::Dimension { expected: dim, got: m.tuple_row.len() });
        }
        span_groups.entry(m.attribute).or_default().push(m.span_flat.clone());
        tuple_groups.entry(m.attribute).or_default().push(m.tuple_row.clone());
    }
    let v_doc = VectorStore {
        centroids: span_groups
            .into_iter()
            .map(|(key, points)| (key, cluster_centroids(&points, params)))
            .collect(),
    };
    let v_tup = VectorStore {
        centroids: tuple_groups
            .into_iter()
            .map(|(key, points)| (key, cluster_centroids(&points, params)))
            .collect(),
    };

    let mut assignments = BTreeMap::new();
    for (id, rows, missing) in projected_tuples {
        if rows.cols() != dim {
            return Err(Error::Dimension { expected: dim, got: rows.cols() });
        }
        let mut assigned = Vec::new();
        for (key, centroids) in &v_tup.centroids {
            if *key >= rows.rows() {
                return Err(Error::Index(format!(
                    "store key {key} out of range for tuple {id:?} with {} attributes",
                    rows.rows()
                )));
            }
            if missing.get(*key).copied().unwrap_or(false) {
                continue;
            }
            let row = rows.row(*key);
            let mut best = (f64::INFINITY, 0usize);
            for (ordinal, centroid) in centroids.iter().enumerate() {
                let d = row_distance(row, centroid);
                if d < best.0 {
                    best = (d, ordinal);
                }
            }
            assigned.push((*key, best.1));
        }
        if assignments.insert(id.clone(), assigned).is_some() {
            return Err(Error::Index(format!("duplicate tuple id {id:?}")));
        }
    }

    Ok(AttentionIndex {
        dim,
        v_doc,
        v_tup,
        assignments,
        metadata: IndexMetadata {
            eps_override: params.eps,
            min_pts: params.min_pts,
            model_checksum,
        },
    })
}

impl AttentionIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Resolve the assignment table against a concrete tuple ordering, so the
    /// per-span scoring loop is free of map lookups.
    pub fn resolve_tuples(&self, tuple_ids: &[String]) -> Result<ResolvedTupleIndex> {
        let mut offsets = BTreeMap::new();
        let mut centroids: Vec<&Vec<f64>> = Vec::new();
        for (key, list) in &self.v_tup.centroids {
            offsets.insert(*key, centroids.len());
            centroids.extend(list.iter());
        }
        let per_tuple = tuple_ids
            .iter()
            .map(|id| {
                self.assignments
                    .get(id)
                    .map(|assigned| {
                        assigned.iter().map(|(key, ordinal)| offsets[key] + ordinal).collect()
                    })
                    .ok_or_else(|| Error::Index(format!("tuple {id:?} not in the index")))
            })
            .collect::<Result<Vec<Vec<usize>>>>()?;
        Ok(ResolvedTupleIndex {
            centroids: centroids.into_iter().cloned().collect(),
            per_tuple,
        })
    }
}

/// Flattened view of `V_T` for one table ordering.
#[derive(Debug, Clone)]
pub struct ResolvedTupleIndex {
    centroids: Vec<Vec<f64>>,
    per_tuple: Vec<Vec<usize>>,
}

impl ResolvedTupleIndex {
    pub fn tuple_count(&self) -> usize {
        self.per_tuple.len()
    }
}

/// Score every span of a document against `V_D`: the distance is the minimum
/// mean-abs distance from the flattened raw span matrix to any centroid
/// across all keys.
pub fn attend_spans(
    span_flats: &[Vec<f64>],
    index: &AttentionIndex,
    k_spans: usize,
) -> Result<AttentionVector> {
    if index.v_doc.is_empty() {
        return Err(Error::Index("attention index has no span centroids".into()));
    }
    let distances: Vec<f64> = span_flats
        .iter()
        .map(|flat| {
            index
                .v_doc
                .all_centroids()
                .map(|c| row_distance(flat, c))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(k_max_selection(&normalize_distances(&distances), k_spans))
}

/// Score every tuple against one projected span matrix: per centroid the
/// minimum over the four span rows, per tuple the minimum over its assigned
/// centroids. Tuples with no assignment (all indexed attributes missing) get
/// the worst observed distance and are prunable.
pub fn attend_tuples(
    span_proj: &Matrix,
    resolved: &ResolvedTupleIndex,
    k_tuples: usize,
) -> Result<AttentionVector> {
    if resolved.centroids.is_empty() {
        return Err(Error::Index("attention index has no tuple centroids".into()));
    }
    let per_centroid: Vec<f64> = resolved
        .centroids
        .iter()
        .map(|centroid| {
            (0..span_proj.rows())
                .map(|j| row_distance(span_proj.row(j), centroid))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let worst = per_centroid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let distances: Vec<f64> = resolved
        .per_tuple
        .iter()
        .map(|assigned| {
            assigned.iter().map(|&c| per_centroid[c]).fold(f64::INFINITY, f64::min)
        })
        .map(|d| if d.is_finite() { d } else { worst })
        .collect();
    Ok(k_max_selection(&normalize_distances(&distances), k_tuples))
}
