//! Training loop: Adam with decoupled weight decay over shuffled mini-batches
//! of triplets, validation-loss early stopping, best-model selection.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_and_gradient, triplet_loss, LossParams, ModelGradients, ProjectionModel};
use crate::doc_model::Tuple;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Training hyperparameters. Defaults follow the alignment-layer training
/// recipe: lambda 0.025, 20 epochs, batch size 4, Adam at 1e-4 with decoupled
/// weight decay 1e-2 and betas (0.9, 0.999).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Consecutive non-improving validation epochs tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Optional lower bound on the (otherwise unbounded) objective.
    pub hinge_margin: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.025,
            epochs: 20,
            batch_size: 4,
            learning_rate: 1e-4,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: 3,
            seed: 7,
            hinge_margin: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 {
            return Err(Error::Config("lambda must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if self.learning_rate < 0.0 || self.weight_decay < 0.0 {
            return Err(Error::Config("learning_rate and weight_decay must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn loss_params(&self) -> LossParams {
        LossParams { lambda: self.lambda, hinge_margin: self.hinge_margin }
    }
}

/// A labeled triplet by reference: a span, its matching tuple, and a sampled
/// non-match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingTriplet {
    pub doc_id: String,
    pub word_index: usize,
    pub positive: String,
    pub negative: String,
}

impl TrainingTriplet {
    pub fn validate(&self) -> Result<()> {
        if self.positive == self.negative {
            return Err(Error::Training(format!(
                "triplet for {}#{} has identical positive and negative {:?}",
                self.doc_id, self.word_index, self.positive
            )));
        }
        Ok(())
    }
}

/// A triplet materialized into embedding matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub span: Matrix,
    pub positive: Matrix,
    pub negative: Matrix,
}

/// One training-log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ProjectionModel,
    pub log: Vec<EpochRecord>,
}

struct Adam {
    m: ModelGradients,
    v: ModelGradients,
    step: usize,
}

impl Adam {
    fn new(dim: usize) -> Self {
        Adam { m: ModelGradients::zeros(dim), v: ModelGradients::zeros(dim), step: 0 }
    }

    /// Bias-corrected Adam step with decoupled weight decay.
    fn update(&mut self, model: &mut ProjectionModel, grads: &ModelGradients, cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let tensors: [(&mut [f64], &[f64], &mut [f64], &mut [f64]); 4] = [
            (
                model.w_doc.data_mut(),
                grads.w_doc.data(),
                self.m.w_doc.data_mut(),
                self.v.w_doc.data_mut(),
            ),
            (&mut model.b_doc, &grads.b_doc, &mut self.m.b_doc, &mut self.v.b_doc),
            (
                model.w_tup.data_mut(),
                grads.w_tup.data(),
                self.m.w_tup.data_mut(),
                self.v.w_tup.data_mut(),
            ),
            (&mut model.b_tup, &grads.b_tup, &mut self.m.b_tup, &mut self.v.b_tup),
        ];
        for (theta, grad, m, v) in tensors {
            for i in 0..theta.len() {
                let g = grad[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -=
                    cfg.learning_rate * (m_hat / (v_hat.sqrt() + cfg.epsilon) + cfg.weight_decay * theta[i]);
            }
        }
    }
}

fn mean_loss(examples: &[TrainExample], model: &ProjectionModel, params: LossParams) -> Result<f64> {
    let mut sum = 0.0;
    for ex in examples {
        sum += triplet_loss(&ex.span, &ex.positive, &ex.negative, model, params)?;
    }
    let mean = sum / examples.len() as f64;
    if !mean.is_finite() {
        return Err(Error::Training(
            "non-finite validation loss; consider enabling hinge_margin".into(),
        ));
    }
    Ok(mean)
}

/// Train projection maps on `train_set`, tracking mean validation loss per
/// epoch. Stops early after `patience` consecutive non-improving epochs
/// (a patience of 0 stops at the first one) and returns the model with the
/// best validation loss, quantized for exact checkpoint round trips.
pub fn train(
    train_set: &[TrainExample],
    val_set: &[TrainExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Training("training and validation sets must be non-empty".into()));
    }
    let dim = train_set[0].span.cols();
    for ex in train_set.iter().chain(val_set) {
        if ex.span.cols() != dim || ex.positive.cols() != dim || ex.negative.cols() != dim {
            return Err(Error::Dimension { expected: dim, got: ex.positive.cols() });
        }
    }
    let params = cfg.loss_params();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = ProjectionModel::init(dim, rng.gen());
    let mut adam = Adam::new(dim);

    let initial_val = mean_loss(val_set, &model, params)?;
    let mut log = vec![EpochRecord { epoch: 0, train_loss: None, val_loss: initial_val }];
    let mut best_val = initial_val;
    let mut best_model = model.clone();
    let mut stall = 0usize;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = ModelGradients::zeros(dim);
            let mut batch_loss = 0.0;
            for &idx in batch {
                let ex = &train_set[idx];
                let (loss, g) =
                    loss_and_gradient(&ex.span, &ex.positive, &ex.negative, &model, params)?;
                batch_loss += loss;
                grads.add_scaled(&g, 1.0);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_idx });
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.update(&mut model, &grads, cfg);
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = mean_loss(val_set, &model, params)?;
        log.push(EpochRecord { epoch, train_loss: Some(train_loss), val_loss });
        if val_loss < best_val {
            best_val = val_loss;
            best_model = model.clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.patience.max(1) {
                break;
            }
        }
    }
    best_model.quantize_f32();
    Ok(TrainOutcome { model: best_model, log })
}

/// Uniformly sample a tuple other than `positive_id`.
pub fn sample_negative<'a>(
    tuples: &'a [Tuple],
    positive_id: &str,
    rng: &mut impl Rng,
) -> Result<&'a Tuple> {
    let candidates: Vec<&Tuple> = tuples.iter().filter(|t| t.id != positive_id).collect();
    if candidates.is_empty() {
        return Err(Error::Training(format!(
            "no negative candidates: table only contains {positive_id:?}"
        )));
    }
    Ok(candidates[rng.gen_range(0..candidates.len())])
}
