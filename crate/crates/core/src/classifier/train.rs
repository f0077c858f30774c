//! Mini-batch SGD with momentum on mean cross-entropy.
//!
//! Single-threaded with a seeded shuffle, so a given seed and dataset always
//! produce the same weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{accumulate_gradients, cross_entropy, logits, one_hot};
use super::{ClassifierError, NetworkConfig, Weights};
use crate::label::ImpactLabel;
use crate::wavelet::Scalogram;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainHyper {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub momentum: f64,
    /// Mini-batch gradients with a larger global L2 norm are rescaled to it.
    pub clip_norm: Option<f64>,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self { lr: 0.01, epochs: 100, batch: 8, seed: 0, momentum: 0.9, clip_norm: Some(1.0) }
    }
}

/// One labelled, channel-major network input.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<f32>,
    pub label: ImpactLabel,
}

impl Example {
    pub fn from_scalogram(s: &Scalogram, label: ImpactLabel) -> Self {
        Self { input: s.as_slice().to_vec(), label }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: Weights<f32>,
    /// Mean cross-entropy over the training set with the final weights.
    pub final_loss: f64,
    pub final_accuracy: f64,
    /// Mean mini-batch loss per epoch, as seen during training.
    pub epoch_losses: Vec<f64>,
}

pub fn train(config: &NetworkConfig, examples: &[Example], hyper: &TrainHyper) -> Result<TrainOutcome, ClassifierError> {
    train_with_progress(config, examples, hyper, |_, _| {})
}

pub fn train_with_progress(
    config: &NetworkConfig,
    examples: &[Example],
    hyper: &TrainHyper,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainOutcome, ClassifierError> {
    config.validate().map_err(ClassifierError::Config)?;
    if examples.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    if hyper.batch == 0 {
        return Err(ClassifierError::Config("batch size must be positive".into()));
    }
    for (index, e) in examples.iter().enumerate() {
        if e.input.len() != config.input_len() {
            return Err(ClassifierError::BadExample { index, reason: format!("input length {}", e.input.len()) });
        }
        if e.input.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::BadExample { index, reason: "non-finite input".into() });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut weights = Weights::<f32>::init_with(config, &mut rng, hyper.seed);
    let mut velocity = weights.zeros_like();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    let lr = hyper.lr as f32;
    let momentum = hyper.momentum as f32;

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(hyper.batch) {
            let mut grads = weights.zeros_like();
            let share = 1.0 / batch.len() as f32;
            for &i in batch {
                let e = &examples[i];
                total += accumulate_gradients(&weights, &e.input, &one_hot(e.label), share, &mut grads)?;
            }
            if let Some(clip) = hyper.clip_norm {
                let norm = grads.norm();
                if norm > clip {
                    grads.scale((clip / norm) as f32);
                }
            }
            velocity.scale(momentum);
            velocity.add_scaled(&grads, 1.0);
            weights.add_scaled(&velocity, -lr);
        }
        let mean = total / examples.len() as f64;
        epoch_losses.push(mean);
        progress(epoch, mean);
    }
    weights.meta.epochs = hyper.epochs as u32;

    let (final_loss, final_accuracy) = evaluate(&weights, examples)?;
    Ok(TrainOutcome { weights, final_loss, final_accuracy, epoch_losses })
}

/// Mean cross-entropy and accuracy of `weights` on `examples`.
pub fn evaluate(weights: &Weights<f32>, examples: &[Example]) -> Result<(f64, f64), ClassifierError> {
    if examples.is_empty() {
        return Err(ClassifierError::EmptyDataset);
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    for e in examples {
        let z: Vec<f64> = logits(weights, &e.input)?.iter().map(|&v| f64::from(v)).collect();
        loss += cross_entropy(&z, &one_hot(e.label));
        let mut best = 0;
        for k in 1..z.len() {
            if z[k] > z[best] {
                best = k;
            }
        }
        if best == e.label.index() {
            correct += 1;
        }
    }
    let n = examples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}
