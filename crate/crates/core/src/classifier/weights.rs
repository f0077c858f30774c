use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{NetworkConfig, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WeightsMeta {
    pub seed: u64,
    pub epochs: u32,
}

/// Every parameter tensor of a network, in [`NetworkConfig::tensor_layout`]
/// order. Also used as the container for gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T = f32> {
    config: NetworkConfig,
    tensors: Vec<Tensor<T>>,
    pub meta: WeightsMeta,
}

/// Index of each tensor group inside a block.
pub(crate) mod slot {
    pub const EXPAND_W: usize = 0;
    pub const EXPAND_SCALE: usize = 1;
    pub const EXPAND_BIAS: usize = 2;
    pub const DW_W: usize = 3;
    pub const DW_SCALE: usize = 4;
    pub const DW_BIAS: usize = 5;
    pub const PROJ_W: usize = 6;
    pub const PROJ_SCALE: usize = 7;
    pub const PROJ_BIAS: usize = 8;
    pub const PER_BLOCK: usize = 9;
}

impl<T: Scalar> Weights<T> {
    pub fn zeros(config: &NetworkConfig) -> Self {
        let tensors = config
            .tensor_layout()
            .into_iter()
            .map(|(name, shape)| {
                let n = shape.iter().product();
                Tensor { name, shape, data: vec![T::zero(); n] }
            })
            .collect();
        Self { config: config.clone(), tensors, meta: WeightsMeta::default() }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(&self.config);
        z.meta = self.meta;
        z
    }

    /// He-style initialization; folded batch-norm starts as identity.
    pub fn init(config: &NetworkConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::init_with(config, &mut rng, seed)
    }

    pub(crate) fn init_with(config: &NetworkConfig, rng: &mut ChaCha8Rng, seed: u64) -> Self {
        let mut w = Self::zeros(config);
        w.meta.seed = seed;
        for t in &mut w.tensors {
            let fan_in = match t.name.as_str() {
                n if n.ends_with("conv.weight") => Some((2.0, 9 * config.input_channels)),
                n if n.ends_with("expand.weight") => Some((2.0, t.shape[0])),
                n if n.ends_with("depthwise.weight") => Some((2.0, 9)),
                n if n.ends_with("project.weight") => Some((1.0, t.shape[0])),
                n if n.ends_with("fc.weight") => Some((1.0, t.shape[0])),
                n if n.ends_with(".scale") => {
                    t.data.iter_mut().for_each(|v| *v = T::one());
                    None
                }
                _ => None,
            };
            if let Some((gain, fan)) = fan_in {
                let normal = Normal::new(0.0, (gain / fan as f64).sqrt()).expect("finite std");
                t.data.iter_mut().for_each(|v| *v = T::of(normal.sample(rng)));
            }
        }
        w
    }

    /// Randomizes batch-norm scale/bias around identity (used by gradient
    /// checks so those parameters are exercised away from 1/0).
    pub(crate) fn jitter_affine(&mut self, rng: &mut ChaCha8Rng) {
        for t in &mut self.tensors {
            if t.name.ends_with(".scale") {
                t.data.iter_mut().for_each(|v| *v = T::of(rng.random_range(0.6..1.4)));
            } else if t.name.ends_with(".bias") {
                t.data.iter_mut().for_each(|v| *v = T::of(rng.random_range(-0.2..0.2)));
            }
        }
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub(crate) fn stem(&self, k: usize) -> &[T] {
        &self.tensors[k].data
    }

    pub(crate) fn stem_mut(&mut self, k: usize) -> &mut Vec<T> {
        &mut self.tensors[k].data
    }

    pub(crate) fn block(&self, b: usize, s: usize) -> &[T] {
        &self.tensors[3 + b * slot::PER_BLOCK + s].data
    }

    pub(crate) fn block_mut(&mut self, b: usize, s: usize) -> &mut Vec<T> {
        &mut self.tensors[3 + b * slot::PER_BLOCK + s].data
    }

    pub(crate) fn head(&self, k: usize) -> &[T] {
        &self.tensors[3 + self.config.blocks.len() * slot::PER_BLOCK + k].data
    }

    pub(crate) fn head_mut(&mut self, k: usize) -> &mut Vec<T> {
        let i = 3 + self.config.blocks.len() * slot::PER_BLOCK + k;
        &mut self.tensors[i].data
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Flat view of all parameters in layout order.
    pub fn flat(&self) -> Vec<T> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// Mutable access to the `i`th scalar in layout order.
    pub fn flat_mut(&mut self, mut i: usize) -> &mut T {
        for t in &mut self.tensors {
            if i < t.data.len() {
                return &mut t.data[i];
            }
            i -= t.data.len();
        }
        panic!("parameter index out of range");
    }

    /// Converts every tensor to another precision.
    pub fn cast<U: Scalar>(&self) -> Weights<U> {
        Weights {
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor { name: t.name.clone(), shape: t.shape.clone(), data: t.data.iter().map(|v| U::of(v.as_f64())).collect() })
                .collect(),
            meta: self.meta,
        }
    }

    pub(crate) fn from_parts(config: NetworkConfig, tensors: Vec<Tensor<T>>, meta: WeightsMeta) -> Self {
        Self { config, tensors, meta }
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, other: &Self, alpha: T) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += alpha * y;
            }
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v *= alpha);
        }
    }

    pub fn norm(&self) -> f64 {
        self.tensors.iter().flat_map(|t| t.data.iter()).map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt()
    }
}
