use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::doc_model::{AttrValue, Tuple};
use crate::matrix::Matrix;

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

#[test]
fn projection_identity_is_noop() {
    let model = ProjectionModel::identity(8);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows = rand_matrix(&mut rng, 4, 8, 1.0);
    assert_eq!(model.project_span(&rows).unwrap(), rows);
    assert_eq!(model.project_tuple(&rows).unwrap(), rows);
}

#[test]
fn projection_zero_weights_yield_bias() {
    let mut model = ProjectionModel::identity(8);
    model.w_doc = Matrix::zeros(8, 8);
    model.b_doc = (0..8).map(|i| i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rows = rand_matrix(&mut rng, 4, 8, 1.0);
    let out = model.project_span(&rows).unwrap();
    for j in 0..4 {
        assert_eq!(out.row(j), &model.b_doc[..]);
    }
}

// Independent dense matmul oracle: out[j] = W * in[j] + b by explicit loops.
#[test]
fn projection_matches_matmul_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 8;
    let w = rand_matrix(&mut rng, d, d, 0.7);
    let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let input = rand_matrix(&mut rng, 4, d, 1.0);
    let model =
        ProjectionModel::from_parts(w.clone(), b.clone(), Matrix::identity(d), vec![0.0; d])
            .unwrap();
    let out = model.project_span(&input).unwrap();
    for j in 0..4 {
        for a in 0..d {
            let mut expect = b[a];
            for k in 0..d {
                expect += w.get(a, k) * input.get(j, k);
            }
            assert!((out.get(j, a) - expect).abs() < 1e-9);
        }
    }
}

#[test]
fn projection_dimension_mismatch_is_error() {
    let model = ProjectionModel::identity(8);
    let rows = Matrix::zeros(4, 16);
    assert!(model.project_span(&rows).is_err());
}

#[test]
fn row_distance_hand_values() {
    assert_eq!(row_distance(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
    assert_eq!(row_distance(&[1.0, 2.0], &[0.0, 4.0]), 1.5);
    let (u, v) = ([0.3, -1.0, 2.0], [1.1, 0.0, -0.5]);
    assert_eq!(row_distance(&u, &v), row_distance(&v, &u));
}

#[test]
fn align_distance_exact_row_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let span = rand_matrix(&mut rng, 4, 8, 1.0);
    let tuple = Matrix::from_rows(&[span.row(2).to_vec()]).unwrap();
    let a = align_distance(&span, &tuple).unwrap();
    assert_eq!(a.distance, 0.0);
    assert_eq!((a.span_row, a.attribute), (2, 0));
}

#[test]
fn align_distance_matches_exhaustive_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let span = rand_matrix(&mut rng, 4, 8, 1.0);
        let tuple = rand_matrix(&mut rng, 3, 8, 1.0);
        let a = align_distance(&span, &tuple).unwrap();
        // Brute force over all 12 pairs.
        let mut best = f64::INFINITY;
        for i in 0..3 {
            for j in 0..4 {
                best = best.min(row_distance(span.row(j), tuple.row(i)));
            }
        }
        assert_eq!(a.distance, best);
        assert_eq!(row_distance(span.row(a.span_row), tuple.row(a.attribute)), best);
    }
}

#[test]
fn align_distance_tie_breaks_to_smallest_indices() {
    // All rows identical: every pair ties at 0 -> (i*, j*) = (0, 0).
    let span = Matrix::from_rows(&vec![vec![1.0; 8]; 4]).unwrap();
    let tuple = Matrix::from_rows(&vec![vec![1.0; 8]; 3]).unwrap();
    let a = align_distance(&span, &tuple).unwrap();
    assert_eq!((a.attribute, a.span_row), (0, 0));
}

#[test]
fn align_distance_scales_homogeneously() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let span = rand_matrix(&mut rng, 4, 8, 1.0);
    let tuple = rand_matrix(&mut rng, 3, 8, 1.0);
    let a = align_distance(&span, &tuple).unwrap();
    let scale = |m: &Matrix, c: f64| {
        let data = m.data().iter().map(|v| v * c).collect();
        Matrix::from_vec(m.rows(), m.cols(), data).unwrap()
    };
    let b = align_distance(&scale(&span, 2.0), &scale(&tuple, 2.0)).unwrap();
    assert!((b.distance - 2.0 * a.distance).abs() < 1e-12);
    assert_eq!((b.span_row, b.attribute), (a.span_row, a.attribute));
}

fn named(tuples: Vec<Matrix>) -> Vec<(String, Matrix)> {
    tuples.into_iter().enumerate().map(|(i, m)| (format!("t{i}"), m)).collect()
}

#[test]
fn bruteforce_finds_planted_copy() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let span = rand_matrix(&mut rng, 4, 8, 1.0);
    let mut tuples: Vec<Matrix> = (0..5).map(|_| rand_matrix(&mut rng, 3, 8, 1.0)).collect();
    let mut planted = tuples[3].clone();
    planted.row_mut(1).copy_from_slice(span.row(0));
    tuples[3] = planted;
    let tuples = named(tuples);
    let (idx, a) = match_tuple_bruteforce(&span, &tuples).unwrap();
    assert_eq!(tuples[idx].0, "t3");
    assert_eq!(a.distance, 0.0);
}

#[test]
fn bruteforce_matches_exhaustive_scan_and_order_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let span = rand_matrix(&mut rng, 4, 8, 1.0);
    let tuples = named((0..5).map(|_| rand_matrix(&mut rng, 3, 8, 1.0)).collect());
    let (idx, a) = match_tuple_bruteforce(&span, &tuples).unwrap();
    let mut best = (f64::INFINITY, String::new());
    for (id, rows) in &tuples {
        let d = align_distance(&span, rows).unwrap().distance;
        if d < best.0 || (d == best.0 && *id < best.1) {
            best = (d, id.clone());
        }
    }
    assert_eq!((a.distance, tuples[idx].0.clone()), best);
    // Permuting the database does not change the winner.
    let mut reversed = tuples.clone();
    reversed.reverse();
    let (ridx, ra) = match_tuple_bruteforce(&span, &reversed).unwrap();
    assert_eq!(reversed[ridx].0, tuples[idx].0);
    assert_eq!(ra.distance, a.distance);
}

/// Span all zeros, positive rows all 1.0 (distance 1), negative rows all 2.0
/// (distance 2): loss = 1 - 0.025 * 2 = 0.95.
#[test]
fn triplet_loss_hand_value() {
    let model = ProjectionModel::identity(8);
    let span = Matrix::zeros(4, 8);
    let pos = Matrix::from_rows(&vec![vec![1.0; 8]; 3]).unwrap();
    let neg = Matrix::from_rows(&vec![vec![2.0; 8]; 3]).unwrap();
    let loss = triplet_loss(&span, &pos, &neg, &model, LossParams::new(0.025)).unwrap();
    assert!((loss - 0.95).abs() < 1e-12);
    // lambda = 0 reduces to the positive distance alone.
    let loss0 = triplet_loss(&span, &pos, &neg, &model, LossParams::new(0.0)).unwrap();
    assert!((loss0 - 1.0).abs() < 1e-12);
}

#[test]
fn triplet_loss_identical_pos_neg() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = ProjectionModel::init(8, 42);
    let span = rand_matrix(&mut rng, 4, 8, 1.0);
    let pos = rand_matrix(&mut rng, 3, 8, 1.0);
    let lambda = 0.025;
    let loss = triplet_loss(&span, &pos, &pos, &model, LossParams::new(lambda)).unwrap();
    let d_pos = triplet_loss(&span, &pos, &pos, &model, LossParams::new(0.0)).unwrap();
    assert!((loss - (1.0 - lambda) * d_pos).abs() < 1e-12);
}

#[test]
fn triplet_loss_hinge_clamps() {
    let model = ProjectionModel::identity(8);
    let span = Matrix::zeros(4, 8);
    let pos = Matrix::zeros(3, 8);
    let neg = Matrix::from_rows(&vec![vec![10.0; 8]; 3]).unwrap();
    let params = LossParams { lambda: 1.0, hinge_margin: Some(0.5) };
    let loss = triplet_loss(&span, &pos, &neg, &model, params).unwrap();
    assert_eq!(loss, -0.5);
    // Clamped region has zero gradient.
    let grads = loss_gradient(&span, &pos, &neg, &model, params).unwrap();
    assert_eq!(grads, ModelGradients::zeros(8));
}

#[test]
fn gradient_zero_at_stationary_point() {
    let model = ProjectionModel::identity(8);
    let mut span = Matrix::zeros(4, 8);
    span.row_mut(0).copy_from_slice(&[1.0; 8]);
    let tuple = Matrix::from_rows(&[vec![1.0; 8]]).unwrap();
    let grads = loss_gradient(&span, &tuple, &tuple, &model, LossParams::new(0.025)).unwrap();
    assert_eq!(grads, ModelGradients::zeros(8));
}

#[test]
fn gradient_identical_pos_neg_scales_positive_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let model = ProjectionModel::init(8, 43);
    let span = rand_matrix(&mut rng, 4, 8, 1.0);
    let pos = rand_matrix(&mut rng, 3, 8, 1.0);
    let lambda = 0.25;
    let full = loss_gradient(&span, &pos, &pos, &model, LossParams::new(lambda)).unwrap();
    let pos_only = loss_gradient(&span, &pos, &pos, &model, LossParams::new(0.0)).unwrap();
    let mut scaled = ModelGradients::zeros(8);
    scaled.add_scaled(&pos_only, 1.0 - lambda);
    for (a, b) in full.w_doc.data().iter().zip(scaled.w_doc.data()) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in full.b_tup.iter().zip(&scaled.b_tup) {
        assert!((a - b).abs() < 1e-12);
    }
}

/// Draw a (model, triplet) instance that is safely differentiable: unique
/// argmins with a clear gap and coordinate differences bounded away from
/// zero, so central differences at h = 1e-5 cannot cross a kink.
pub(crate) fn sample_smooth_instance(
    rng: &mut ChaCha8Rng,
    dim: usize,
    arity: usize,
) -> (ProjectionModel, Matrix, Matrix, Matrix) {
    loop {
        let w_doc = {
            let mut m = Matrix::identity(dim);
            for v in m.data_mut() {
                *v += rng.gen_range(-0.3..0.3);
            }
            m
        };
        let w_tup = {
            let mut m = Matrix::identity(dim);
            for v in m.data_mut() {
                *v += rng.gen_range(-0.3..0.3);
            }
            m
        };
        let b_doc = (0..dim).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let b_tup = (0..dim).map(|_| rng.gen_range(-0.2..0.2)).collect();
        let model = ProjectionModel::from_parts(w_doc, b_doc, w_tup, b_tup).unwrap();
        let span = rand_matrix(rng, 4, dim, 1.0);
        let pos = rand_matrix(rng, arity, dim, 1.0);
        let neg = rand_matrix(rng, arity, dim, 1.0);
        if instance_is_smooth(&model, &span, &pos, &neg) {
            return (model, span, pos, neg);
        }
    }
}

fn instance_is_smooth(
    model: &ProjectionModel,
    span: &Matrix,
    pos: &Matrix,
    neg: &Matrix,
) -> bool {
    let span_proj = model.project_span(span).unwrap();
    for tuple in [pos, neg] {
        let tuple_proj = model.project_tuple(tuple).unwrap();
        let mut dists = Vec::new();
        for i in 0..tuple_proj.rows() {
            for j in 0..span_proj.rows() {
                dists.push((row_distance(span_proj.row(j), tuple_proj.row(i)), j, i));
            }
        }
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // Unique argmin with a gap well above the h = 1e-5 perturbation.
        if dists[1].0 - dists[0].0 < 1e-3 {
            return false;
        }
        let (_, j, i) = dists[0];
        let min_coord = span_proj
            .row(j)
            .iter()
            .zip(tuple_proj.row(i))
            .map(|(a, b)| (a - b).abs())
            .fold(f64::INFINITY, f64::min);
        if min_coord < 1e-4 {
            return false;
        }
    }
    true
}

/// Central finite differences over every parameter of the model.
pub(crate) fn finite_difference_max_rel_err(
    model: &ProjectionModel,
    span: &Matrix,
    pos: &Matrix,
    neg: &Matrix,
    params: LossParams,
) -> f64 {
    let h = 1e-5;
    let analytic = loss_gradient(span, pos, neg, model, params).unwrap();
    let mut max_rel = 0.0f64;
    let mut check = |set: &dyn Fn(&mut ProjectionModel, usize, f64), get_grad: &dyn Fn(&ModelGradients, usize) -> f64, len: usize| {
        for idx in 0..len {
            let mut plus = model.clone();
            set(&mut plus, idx, h);
            let mut minus = model.clone();
            set(&mut minus, idx, -h);
            let lp = triplet_loss(span, pos, neg, &plus, params).unwrap();
            let lm = triplet_loss(span, pos, neg, &minus, params).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let a = get_grad(&analytic, idx);
            let denom = a.abs().max(fd.abs());
            if denom < 1e-8 {
                continue;
            }
            max_rel = max_rel.max((a - fd).abs() / denom);
        }
    };
    let d = model.dim();
    check(
        &|m, idx, delta| {
            let v = m.w_doc.data()[idx];
            m.w_doc.data_mut()[idx] = v + delta;
        },
        &|g, idx| g.w_doc.data()[idx],
        d * d,
    );
    check(&|m, idx, delta| m.b_doc[idx] += delta, &|g, idx| g.b_doc[idx], d);
    check(
        &|m, idx, delta| {
            let v = m.w_tup.data()[idx];
            m.w_tup.data_mut()[idx] = v + delta;
        },
        &|g, idx| g.w_tup.data()[idx],
        d * d,
    );
    check(&|m, idx, delta| m.b_tup[idx] += delta, &|g, idx| g.b_tup[idx], d);
    max_rel
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let params = LossParams::new(0.025);
    for _ in 0..20 {
        let (model, span, pos, neg) = sample_smooth_instance(&mut rng, 8, 3);
        let rel = finite_difference_max_rel_err(&model, &span, &pos, &neg, params);
        assert!(rel <= 1e-4, "relative error {rel}");
    }
}

fn synthetic_examples(rng: &mut ChaCha8Rng, count: usize, dim: usize) -> Vec<TrainExample> {
    (0..count)
        .map(|_| {
            let span = rand_matrix(rng, 4, dim, 1.0);
            let mut pos = rand_matrix(rng, 3, dim, 1.0);
            // Plant a scaled copy of the span's word row at attribute 1: the
            // identity-initialized model sees a consistent gap that the
            // projections can learn to close.
            let planted: Vec<f64> =
                span.row(0).iter().map(|v| 0.5 * v + rng.gen_range(-0.05..0.05)).collect();
            pos.row_mut(1).copy_from_slice(&planted);
            let neg = rand_matrix(rng, 3, dim, 1.0);
            TrainExample { span, positive: pos, negative: neg }
        })
        .collect()
}

#[test]
fn training_reduces_validation_loss_on_separable_corpus() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let train_set = synthetic_examples(&mut rng, 200, 16);
    let val_set = synthetic_examples(&mut rng, 50, 16);
    let cfg = TrainConfig { seed: 7, ..TrainConfig::default() };
    let outcome = train(&train_set, &val_set, &cfg).unwrap();
    let initial = outcome.log[0].val_loss;
    let last = outcome.log.last().unwrap().val_loss;
    assert!(last < initial, "val loss {initial} -> {last}");
    assert!(outcome.model.is_finite());
}

#[test]
fn training_is_deterministic_given_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let train_set = synthetic_examples(&mut rng, 40, 16);
    let val_set = synthetic_examples(&mut rng, 10, 16);
    let cfg = TrainConfig { epochs: 3, seed: 5, ..TrainConfig::default() };
    let a = train(&train_set, &val_set, &cfg).unwrap();
    let b = train(&train_set, &val_set, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log, b.log);
}

#[test]
fn patience_zero_stops_at_first_non_improvement() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let train_set = synthetic_examples(&mut rng, 16, 16);
    let val_set = synthetic_examples(&mut rng, 8, 16);
    // lr = 0 freezes the model, so epoch 1 cannot improve on the baseline.
    let cfg = TrainConfig {
        epochs: 10,
        learning_rate: 0.0,
        weight_decay: 0.0,
        patience: 0,
        ..TrainConfig::default()
    };
    let outcome = train(&train_set, &val_set, &cfg).unwrap();
    assert_eq!(outcome.log.len(), 2, "{:?}", outcome.log);
    assert_eq!(outcome.log[1].epoch, 1);
    assert_eq!(outcome.log[1].val_loss, outcome.log[0].val_loss);
}

fn toy_tuples(n: usize) -> Vec<Tuple> {
    (0..n)
        .map(|i| Tuple { id: format!("t{i}"), values: vec![AttrValue::Single(format!("v{i}"))] })
        .collect()
}

#[test]
fn sample_negative_forced_choice() {
    let tuples = toy_tuples(2);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        assert_eq!(sample_negative(&tuples, "t0", &mut rng).unwrap().id, "t1");
    }
    let single = toy_tuples(1);
    assert!(sample_negative(&single, "t0", &mut rng).is_err());
}

#[test]
fn sample_negative_same_seed_same_sequence() {
    let tuples = toy_tuples(10);
    let draw = |seed: u64| -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..50).map(|_| sample_negative(&tuples, "t3", &mut rng).unwrap().id.clone()).collect()
    };
    assert_eq!(draw(42), draw(42));
    assert_ne!(draw(42), draw(43));
}

/// Chi-squared uniformity over 10k draws, 9 categories (dof 8): the 1%
/// critical value is 20.09.
#[test]
fn sample_negative_uniformity_chi_squared() {
    let tuples = toy_tuples(10);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = std::collections::BTreeMap::new();
    let draws = 10_000usize;
    for _ in 0..draws {
        *counts.entry(sample_negative(&tuples, "t0", &mut rng).unwrap().id.clone()).or_insert(0u32) += 1;
    }
    assert_eq!(counts.len(), 9);
    assert!(!counts.contains_key("t0"));
    let expected = draws as f64 / 9.0;
    let chi2: f64 =
        counts.values().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 20.09, "chi-squared {chi2}");
}

#[test]
fn checkpoint_round_trip_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.jprj");
    let model = ProjectionModel::init(16, 9);
    save_model(&model, &path).unwrap();
    let loaded = load_model(&path).unwrap();
    assert_eq!(loaded, model);
    let bytes = std::fs::read(&path).unwrap();
    save_model(&loaded, &path).unwrap();
    assert_eq!(bytes, std::fs::read(&path).unwrap());
    assert_eq!(model_checksum(&model), model_checksum(&loaded));
}

#[test]
fn checkpoint_truncated_is_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.jprj");
    save_model(&ProjectionModel::init(8, 1), &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(load_model(&path).is_err());
}

#[test]
fn train_rejects_empty_sets() {
    let cfg = TrainConfig::default();
    assert!(train(&[], &[], &cfg).is_err());
}
