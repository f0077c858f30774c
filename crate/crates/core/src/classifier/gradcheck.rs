//! Central finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{cross_entropy, forward_cached, loss_and_gradients, one_hot};
use super::{NetworkConfig, Weights};
use crate::label::ImpactLabel;

/// Denominator floor for the relative error.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Name of the tensor holding the worst parameter.
    pub worst_tensor: String,
    /// Sum of `|analytic - numeric|` over checked parameters.
    pub abs_error_sum: f64,
    pub checked: usize,
    /// Parameters whose perturbation crossed a ReLU6 kink.
    pub skipped: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tol
    }
}

pub fn grad_check(config: &NetworkConfig, seed: u64) -> GradCheckReport {
    grad_check_with_step(config, seed, 1e-4)
}

/// Checks every parameter of a randomly initialized network at a random
/// input and label drawn from `seed`, using step `h` in f64.
pub fn grad_check_with_step(config: &NetworkConfig, seed: u64, h: f64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Weights::<f64>::init_with(config, &mut rng, seed);
    weights.jitter_affine(&mut rng);
    let input: Vec<f64> = (0..config.input_len()).map(|_| rng.random_range(0.0..1.0)).collect();
    let label = ImpactLabel::ALL[rng.random_range(0..4)];
    let target = one_hot(label);

    let (_, grads) = loss_and_gradients(&weights, &input, &target).expect("valid config");
    let analytic = grads.flat();
    let base_regions = forward_cached(&weights, &input).expect("valid").activation_regions();

    let names: Vec<(String, usize)> = weights.tensors().iter().map(|t| (t.name.clone(), t.data.len())).collect();
    let tensor_of = |mut i: usize| -> &str {
        for (n, len) in &names {
            if i < *len {
                return n;
            }
            i -= len;
        }
        ""
    };

    let probe = |w: &mut Weights<f64>, i: usize, delta: f64| -> Option<f64> {
        let orig = *w.flat_mut(i);
        *w.flat_mut(i) = orig + delta;
        let cache = forward_cached(w, &input).expect("valid");
        *w.flat_mut(i) = orig;
        if cache.activation_regions() != base_regions {
            return None;
        }
        Some(cross_entropy(&cache.logits, &target))
    };

    let mut report =
        GradCheckReport { max_rel_error: 0.0, worst_tensor: String::new(), abs_error_sum: 0.0, checked: 0, skipped: 0 };
    for (i, &a) in analytic.iter().enumerate() {
        let (Some(lp), Some(lm)) = (probe(&mut weights, i, h), probe(&mut weights, i, -h)) else {
            report.skipped += 1;
            continue;
        };
        let n = (lp - lm) / (2.0 * h);
        let diff = (a - n).abs();
        let rel = diff / a.abs().max(n.abs()).max(REL_FLOOR);
        report.abs_error_sum += diff;
        report.checked += 1;
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_tensor = tensor_of(i).to_string();
        }
    }
    report
}
