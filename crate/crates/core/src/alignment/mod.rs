//! Shared-space alignment: per-modality affine projections, min-over-pairs
//! distances, and the triplet objective with analytic subgradients.
//!
//! The distance between a projected span matrix and a projected tuple matrix
//! is the minimum over all (span row, attribute row) pairs of the mean
//! absolute difference; matching minimizes that distance over the whole
//! table. Training pulls a span toward its matching tuple and pushes it away
//! from a sampled non-match, weighted by `lambda`.

mod checkpoint;
mod train;

pub use checkpoint::{load_model, model_checksum, save_model};
pub use train::{
    sample_negative, train, EpochRecord, TrainConfig, TrainExample, TrainOutcome, TrainingTriplet,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-modality affine maps defining the shared embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    dim: usize,
    pub w_doc: Matrix,
    pub b_doc: Vec<f64>,
    pub w_tup: Matrix,
    pub b_tup: Vec<f64>,
}

impl ProjectionModel {
    /// Exact identity maps: projection is a no-op.
    pub fn identity(dim: usize) -> Self {
        ProjectionModel {
            dim,
            w_doc: Matrix::identity(dim),
            b_doc: vec![0.0; dim],
            w_tup: Matrix::identity(dim),
            b_tup: vec![0.0; dim],
        }
    }

    /// Identity plus small uniform noise on the weights, zero bias. Preserves
    /// the provider geometry at the start of training.
    pub fn init(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 0.01 / (dim as f64).sqrt();
        let mut model = ProjectionModel::identity(dim);
        for w in [&mut model.w_doc, &mut model.w_tup] {
            for v in w.data_mut() {
                *v += rng.gen_range(-scale..scale);
            }
        }
        model.quantize_f32();
        model
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn from_parts(w_doc: Matrix, b_doc: Vec<f64>, w_tup: Matrix, b_tup: Vec<f64>) -> Result<Self> {
        let dim = b_doc.len();
        for (rows, cols) in [(w_doc.rows(), w_doc.cols()), (w_tup.rows(), w_tup.cols())] {
            if rows != dim || cols != dim {
                return Err(Error::Dimension { expected: dim, got: rows.max(cols) });
            }
        }
        if b_tup.len() != dim {
            return Err(Error::Dimension { expected: dim, got: b_tup.len() });
        }
        let model = ProjectionModel { dim, w_doc, b_doc, w_tup, b_tup };
        if !model.is_finite() {
            return Err(Error::Training("non-finite projection parameters".into()));
        }
        Ok(model)
    }

    pub fn is_finite(&self) -> bool {
        self.w_doc.is_finite()
            && self.w_tup.is_finite()
            && self.b_doc.iter().all(|v| v.is_finite())
            && self.b_tup.iter().all(|v| v.is_finite())
    }

    /// Round all parameters through `f32` so checkpoints round-trip exactly.
    pub fn quantize_f32(&mut self) {
        self.w_doc.quantize_f32();
        self.w_tup.quantize_f32();
        for v in self.b_doc.iter_mut().chain(self.b_tup.iter_mut()) {
            *v = *v as f32 as f64;
        }
    }

    /// Project span rows (`F_w -> F'_w`), row-wise affine.
    pub fn project_span(&self, rows: &Matrix) -> Result<Matrix> {
        project_rows(&self.w_doc, &self.b_doc, rows)
    }

    /// Project tuple rows (`F_t -> F'_t`), row-wise affine.
    pub fn project_tuple(&self, rows: &Matrix) -> Result<Matrix> {
        project_rows(&self.w_tup, &self.b_tup, rows)
    }
}

fn project_rows(w: &Matrix, b: &[f64], rows: &Matrix) -> Result<Matrix> {
    if rows.cols() != w.cols() {
        return Err(Error::Dimension { expected: w.cols(), got: rows.cols() });
    }
    let mut out = Matrix::zeros(rows.rows(), w.rows());
    for i in 0..rows.rows() {
        out.row_mut(i).copy_from_slice(&w.affine_apply(rows.row(i), b));
    }
    if !out.is_finite() {
        return Err(Error::Training("non-finite projection output".into()));
    }
    Ok(out)
}

/// Mean absolute difference between two equal-length vectors.
pub fn row_distance(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let sum: f64 = u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum();
    sum / u.len() as f64
}

/// Result of the min-over-pairs distance: the distance together with the
/// minimizing span row `j*` and attribute row `i*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alignment {
    pub distance: f64,
    pub span_row: usize,
    pub attribute: usize,
}

/// Minimum `row_distance` over all (span row, attribute row) pairs. Ties
/// break toward the smallest attribute index, then the smallest span row.
pub fn align_distance(span_proj: &Matrix, tuple_proj: &Matrix) -> Result<Alignment> {
    if span_proj.cols() != tuple_proj.cols() {
        return Err(Error::Dimension { expected: span_proj.cols(), got: tuple_proj.cols() });
    }
    if span_proj.rows() == 0 || tuple_proj.rows() == 0 {
        return Err(Error::Match("align_distance on empty matrix".into()));
    }
    let mut best = Alignment { distance: f64::INFINITY, span_row: 0, attribute: 0 };
    for i in 0..tuple_proj.rows() {
        for j in 0..span_proj.rows() {
            let d = row_distance(span_proj.row(j), tuple_proj.row(i));
            if d < best.distance {
                best = Alignment { distance: d, span_row: j, attribute: i };
            }
        }
    }
    Ok(best)
}

/// Scan every tuple and return the index of the globally closest one, ties
/// broken by lexicographically smallest tuple id.
pub fn match_tuple_bruteforce(
    span_proj: &Matrix,
    tuples_proj: &[(String, Matrix)],
) -> Result<(usize, Alignment)> {
    if tuples_proj.is_empty() {
        return Err(Error::Match("empty tuple set".into()));
    }
    let mut best: Option<(usize, Alignment)> = None;
    for (idx, (id, rows)) in tuples_proj.iter().enumerate() {
        let a = align_distance(span_proj, rows)?;
        let better = match &best {
            None => true,
            Some((bi, b)) => {
                a.distance < b.distance
                    || (a.distance == b.distance && id.as_str() < tuples_proj[*bi].0.as_str())
            }
        };
        if better {
            best = Some((idx, a));
        }
    }
    Ok(best.expect("non-empty tuple set"))
}

/// Loss hyperparameters: the non-match weight and the optional hinge bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParams {
    pub lambda: f64,
    /// When set, the loss is clamped at `max(loss, -hinge_margin)`.
    pub hinge_margin: Option<f64>,
}

impl LossParams {
    pub fn new(lambda: f64) -> Self {
        LossParams { lambda, hinge_margin: None }
    }
}

/// Triplet objective: `d(span, match) - lambda * d(span, non-match)` on the
/// projected matrices, optionally hinge-clamped.
pub fn triplet_loss(
    span: &Matrix,
    tuple_pos: &Matrix,
    tuple_neg: &Matrix,
    model: &ProjectionModel,
    params: LossParams,
) -> Result<f64> {
    Ok(loss_and_gradient_inner(span, tuple_pos, tuple_neg, model, params, false)?.0)
}

/// Gradients of the triplet objective with respect to the projection
/// parameters, one tensor per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGradients {
    pub w_doc: Matrix,
    pub b_doc: Vec<f64>,
    pub w_tup: Matrix,
    pub b_tup: Vec<f64>,
}

impl ModelGradients {
    pub fn zeros(dim: usize) -> Self {
        ModelGradients {
            w_doc: Matrix::zeros(dim, dim),
            b_doc: vec![0.0; dim],
            w_tup: Matrix::zeros(dim, dim),
            b_tup: vec![0.0; dim],
        }
    }

    pub fn add_scaled(&mut self, other: &ModelGradients, scale: f64) {
        for (a, b) in self.w_doc.data_mut().iter_mut().zip(other.w_doc.data()) {
            *a += scale * b;
        }
        for (a, b) in self.b_doc.iter_mut().zip(&other.b_doc) {
            *a += scale * b;
        }
        for (a, b) in self.w_tup.data_mut().iter_mut().zip(other.w_tup.data()) {
            *a += scale * b;
        }
        for (a, b) in self.b_tup.iter_mut().zip(&other.b_tup) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.w_doc.data_mut() {
            *v *= factor;
        }
        for v in self.b_doc.iter_mut() {
            *v *= factor;
        }
        for v in self.w_tup.data_mut() {
            *v *= factor;
        }
        for v in self.b_tup.iter_mut() {
            *v *= factor;
        }
    }
}

/// Subgradient of [`triplet_loss`]: only the argmin row pairs of the positive
/// and negative terms receive gradient; sign ties contribute zero.
pub fn loss_gradient(
    span: &Matrix,
    tuple_pos: &Matrix,
    tuple_neg: &Matrix,
    model: &ProjectionModel,
    params: LossParams,
) -> Result<ModelGradients> {
    let (_, grads) = loss_and_gradient(span, tuple_pos, tuple_neg, model, params)?;
    Ok(grads)
}

/// Loss and subgradient in one pass (shares the projections).
pub fn loss_and_gradient(
    span: &Matrix,
    tuple_pos: &Matrix,
    tuple_neg: &Matrix,
    model: &ProjectionModel,
    params: LossParams,
) -> Result<(f64, ModelGradients)> {
    let (loss, grads) = loss_and_gradient_inner(span, tuple_pos, tuple_neg, model, params, true)?;
    Ok((loss, grads.expect("gradients requested")))
}

fn loss_and_gradient_inner(
    span: &Matrix,
    tuple_pos: &Matrix,
    tuple_neg: &Matrix,
    model: &ProjectionModel,
    params: LossParams,
    want_gradient: bool,
) -> Result<(f64, Option<ModelGradients>)> {
    let span_proj = model.project_span(span)?;
    let pos_proj = model.project_tuple(tuple_pos)?;
    let neg_proj = model.project_tuple(tuple_neg)?;
    let a_pos = align_distance(&span_proj, &pos_proj)?;
    let a_neg = align_distance(&span_proj, &neg_proj)?;
    let raw_loss = a_pos.distance - params.lambda * a_neg.distance;
    let clamped = match params.hinge_margin {
        Some(margin) if raw_loss < -margin => true,
        _ => false,
    };
    let loss = if clamped { -params.hinge_margin.expect("clamped") } else { raw_loss };
    if !want_gradient {
        return Ok((loss, None));
    }
    let mut grads = ModelGradients::zeros(model.dim());
    if !clamped {
        accumulate_term(&mut grads, 1.0, span, tuple_pos, &span_proj, &pos_proj, &a_pos);
        accumulate_term(&mut grads, -params.lambda, span, tuple_neg, &span_proj, &neg_proj, &a_neg);
    }
    Ok((loss, Some(grads)))
}

/// Add `weight * d(mean-abs of the selected pair)/d(params)` into `grads`.
///
/// For the selected pair (j*, i*), d/dF'_w[j*][k] = sign(diff_k)/d and
/// d/dF'_t[i*][k] = -sign(diff_k)/d, propagated through the affine maps.
fn accumulate_term(
    grads: &mut ModelGradients,
    weight: f64,
    span_raw: &Matrix,
    tuple_raw: &Matrix,
    span_proj: &Matrix,
    tuple_proj: &Matrix,
    alignment: &Alignment,
) {
    let d = span_proj.cols() as f64;
    let span_in = span_raw.row(alignment.span_row);
    let tuple_in = tuple_raw.row(alignment.attribute);
    let span_out = span_proj.row(alignment.span_row);
    let tuple_out = tuple_proj.row(alignment.attribute);
    for k in 0..span_out.len() {
        let diff = span_out[k] - tuple_out[k];
        let sign = if diff > 0.0 {
            1.0
        } else if diff < 0.0 {
            -1.0
        } else {
            0.0
        };
        if sign == 0.0 {
            continue;
        }
        let coeff = weight * sign / d;
        let w_doc_row = grads.w_doc.row_mut(k);
        for (b, x) in w_doc_row.iter_mut().zip(span_in) {
            *b += coeff * x;
        }
        grads.b_doc[k] += coeff;
        let w_tup_row = grads.w_tup.row_mut(k);
        for (b, x) in w_tup_row.iter_mut().zip(tuple_in) {
            *b -= coeff * x;
        }
        grads.b_tup[k] -= coeff;
    }
}

#[cfg(test)]
mod tests;
