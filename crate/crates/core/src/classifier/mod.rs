//! Miniature inverted-residual CNN (MobileNetV2 family) over scalograms:
//! inference, training, gradient verification and the weight file format.

mod config;
mod gradcheck;
mod io;
mod network;
pub mod ops;
mod train;
mod weights;

pub use config::{BlockSpec, NetworkConfig};
pub use gradcheck::{grad_check, grad_check_with_step, GradCheckReport};
pub use io::{load_weights, read_weights, save_weights, write_weights, WeightsFileError};
pub use network::{
    accumulate_gradients, backward, cross_entropy, forward, forward_cached, logits, loss_and_gradients, one_hot,
    softmax, ForwardCache,
};
pub use train::{evaluate, train, train_with_progress, Example, TrainHyper, TrainOutcome};
pub use weights::{Tensor, Weights, WeightsMeta};

use serde::{Deserialize, Serialize};

use crate::label::ImpactLabel;

/// Floating-point type the network can run in.
pub trait Scalar:
    num_traits::Float
    + ndarray::LinalgScalar
    + std::iter::Sum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::fmt::Debug
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn as_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifierError {
    #[error("input has {got} values, network expects {expected}")]
    InputShape { expected: usize, got: usize },
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error("example {index}: {reason}")]
    BadExample { index: usize, reason: String },
}

/// Softmax output indexed by the label encoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassProbs(pub [f64; 4]);

impl ClassProbs {
    /// Most probable label; ties go to the lowest encoding.
    pub fn argmax(&self) -> ImpactLabel {
        let mut best = 0;
        for k in 1..4 {
            if self.0[k] > self.0[best] {
                best = k;
            }
        }
        ImpactLabel::from_index(best).expect("index < 4")
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax().index()]
    }

    pub fn get(&self, label: ImpactLabel) -> f64 {
        self.0[label.index()]
    }

    /// Each entry in `[0, 1]` and the total within 1e-6 of one.
    pub fn is_valid(&self) -> bool {
        self.0.iter().all(|p| (0.0..=1.0).contains(p)) && (self.0.iter().sum::<f64>() - 1.0).abs() <= 1e-6
    }
}
