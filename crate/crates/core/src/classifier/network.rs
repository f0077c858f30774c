//! Forward inference and backpropagation for the inverted-residual network.

use super::ops::{
    affine, affine_backward, affine_inplace, depthwise3x3, depthwise3x3_backward, global_avg_pool, im2col3x3, matmul, relu6,
    relu6_backward, relu6_regions, Feat,
};
use super::weights::slot;
use super::{ClassProbs, ClassifierError, Scalar, Weights};
use crate::label::ImpactLabel;

struct StemCache<T> {
    cols: Vec<T>,
    pre: Vec<T>,
    act_in: Vec<T>,
}

struct BlockCache<T> {
    input: Feat<T>,
    expand_pre: Vec<T>,
    expand_act_in: Vec<T>,
    expand_out: Feat<T>,
    dw_pre: Vec<T>,
    dw_act_in: Vec<T>,
    dw_out: Feat<T>,
    proj_pre: Vec<T>,
    out_hw: (usize, usize),
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache<T> {
    stem: StemCache<T>,
    blocks: Vec<BlockCache<T>>,
    last: Feat<T>,
    pooled: Vec<T>,
    pub logits: Vec<T>,
}

impl<T: Scalar> ForwardCache<T> {
    /// Region code of every ReLU6 input; a change between two forward passes
    /// means a finite difference straddled a kink.
    pub fn activation_regions(&self) -> Vec<u8> {
        let mut out = Vec::new();
        relu6_regions(&self.stem.act_in, &mut out);
        for b in &self.blocks {
            relu6_regions(&b.expand_act_in, &mut out);
            relu6_regions(&b.dw_act_in, &mut out);
        }
        out
    }
}

fn check_input<T: Scalar>(weights: &Weights<T>, input: &[T]) -> Result<(), ClassifierError> {
    let want = weights.config().input_len();
    if input.len() != want {
        return Err(ClassifierError::InputShape { expected: want, got: input.len() });
    }
    Ok(())
}

/// Runs the network on a channel-major input, keeping activations.
pub fn forward_cached<T: Scalar>(weights: &Weights<T>, input: &[T]) -> Result<ForwardCache<T>, ClassifierError> {
    check_input(weights, input)?;
    let cfg = weights.config();
    let x = Feat::from_chw(input, cfg.input_channels, cfg.input_height, cfg.input_width);

    let (cols, ho, wo) = im2col3x3(&x, 2);
    let pre = matmul(&cols, (ho * wo, 9 * x.c), false, weights.stem(0), (9 * x.c, cfg.stem_channels), false);
    let act_in = affine(&pre, weights.stem(1), weights.stem(2));
    let mut feat = Feat { h: ho, w: wo, c: cfg.stem_channels, data: relu6(&act_in) };
    let stem = StemCache { cols, pre, act_in };

    let mut blocks = Vec::with_capacity(cfg.blocks.len());
    for (b, spec) in cfg.blocks.iter().enumerate() {
        let cin = feat.c;
        let hidden = cin * spec.expansion;
        let p = feat.pixels();
        let expand_pre = matmul(&feat.data, (p, cin), false, weights.block(b, slot::EXPAND_W), (cin, hidden), false);
        let expand_act_in = affine(&expand_pre, weights.block(b, slot::EXPAND_SCALE), weights.block(b, slot::EXPAND_BIAS));
        let expand_out = Feat { h: feat.h, w: feat.w, c: hidden, data: relu6(&expand_act_in) };

        let dw = depthwise3x3(&expand_out, weights.block(b, slot::DW_W), spec.stride);
        let out_hw = (dw.h, dw.w);
        let dw_pre = dw.data;
        let dw_act_in = affine(&dw_pre, weights.block(b, slot::DW_SCALE), weights.block(b, slot::DW_BIAS));
        let dw_out = Feat { h: out_hw.0, w: out_hw.1, c: hidden, data: relu6(&dw_act_in) };

        let q = dw_out.pixels();
        let proj_pre = matmul(&dw_out.data, (q, hidden), false, weights.block(b, slot::PROJ_W), (hidden, spec.out_channels), false);
        let mut out = affine(&proj_pre, weights.block(b, slot::PROJ_SCALE), weights.block(b, slot::PROJ_BIAS));
        if spec.residual {
            for (o, &v) in out.iter_mut().zip(&feat.data) {
                *o += v;
            }
        }
        let next = Feat { h: out_hw.0, w: out_hw.1, c: spec.out_channels, data: out };
        blocks.push(BlockCache { input: feat, expand_pre, expand_act_in, expand_out, dw_pre, dw_act_in, dw_out, proj_pre, out_hw });
        feat = next;
    }

    let pooled = global_avg_pool(&feat);
    let mut logits = matmul(&pooled, (1, feat.c), false, weights.head(0), (feat.c, cfg.classes), false);
    for (l, &b) in logits.iter_mut().zip(weights.head(1)) {
        *l += b;
    }
    Ok(ForwardCache { stem, blocks, last: feat, pooled, logits })
}

/// Inference-only forward pass; same arithmetic as [`forward_cached`]
/// without keeping activations.
pub fn logits<T: Scalar>(weights: &Weights<T>, input: &[T]) -> Result<Vec<T>, ClassifierError> {
    check_input(weights, input)?;
    let cfg = weights.config();
    let x = Feat::from_chw(input, cfg.input_channels, cfg.input_height, cfg.input_width);
    let (cols, ho, wo) = im2col3x3(&x, 2);
    let mut data = matmul(&cols, (ho * wo, 9 * x.c), false, weights.stem(0), (9 * x.c, cfg.stem_channels), false);
    drop(cols);
    affine_inplace(&mut data, weights.stem(1), weights.stem(2), true);
    let mut feat = Feat { h: ho, w: wo, c: cfg.stem_channels, data };

    for (b, spec) in cfg.blocks.iter().enumerate() {
        let cin = feat.c;
        let hidden = cin * spec.expansion;
        let p = feat.pixels();
        let mut hid = matmul(&feat.data, (p, cin), false, weights.block(b, slot::EXPAND_W), (cin, hidden), false);
        affine_inplace(&mut hid, weights.block(b, slot::EXPAND_SCALE), weights.block(b, slot::EXPAND_BIAS), true);
        let hid = Feat { h: feat.h, w: feat.w, c: hidden, data: hid };
        let mut dw = depthwise3x3(&hid, weights.block(b, slot::DW_W), spec.stride);
        drop(hid);
        affine_inplace(&mut dw.data, weights.block(b, slot::DW_SCALE), weights.block(b, slot::DW_BIAS), true);
        let q = dw.pixels();
        let mut out = matmul(&dw.data, (q, hidden), false, weights.block(b, slot::PROJ_W), (hidden, spec.out_channels), false);
        affine_inplace(&mut out, weights.block(b, slot::PROJ_SCALE), weights.block(b, slot::PROJ_BIAS), false);
        if spec.residual {
            for (o, &v) in out.iter_mut().zip(&feat.data) {
                *o += v;
            }
        }
        feat = Feat { h: dw.h, w: dw.w, c: spec.out_channels, data: out };
    }

    let pooled = global_avg_pool(&feat);
    let mut logits = matmul(&pooled, (1, feat.c), false, weights.head(0), (feat.c, cfg.classes), false);
    for (l, &b) in logits.iter_mut().zip(weights.head(1)) {
        *l += b;
    }
    Ok(logits)
}

/// Numerically stable softmax, evaluated in f64.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

/// Class probabilities for one input.
pub fn forward<T: Scalar>(weights: &Weights<T>, input: &[T]) -> Result<ClassProbs, ClassifierError> {
    if weights.config().classes != ImpactLabel::COUNT {
        return Err(ClassifierError::Config(format!("{} classes, expected 4", weights.config().classes)));
    }
    let z: Vec<f64> = logits(weights, input)?.iter().map(|v| v.as_f64()).collect();
    let p = softmax(&z);
    Ok(ClassProbs([p[0], p[1], p[2], p[3]]))
}

/// Cross-entropy against a target distribution: `-Σ t_k log p_k`.
pub fn cross_entropy(logits: &[f64], target: &[f64]) -> f64 {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    target.iter().zip(logits).map(|(&t, &z)| if t == 0.0 { 0.0 } else { -t * (z - lse) }).sum()
}

/// One-hot target for `label`.
pub fn one_hot(label: ImpactLabel) -> [f64; 4] {
    let mut t = [0.0; 4];
    t[label.index()] = 1.0;
    t
}

/// Backpropagates `dlogits` through a cached forward pass, adding parameter
/// gradients into `grads`.
pub fn backward<T: Scalar>(weights: &Weights<T>, cache: &ForwardCache<T>, dlogits: &[T], grads: &mut Weights<T>) {
    let cfg = weights.config();
    let c_last = cache.last.c;

    // Head: logits = pooled · W + b.
    {
        let dw = matmul(&cache.pooled, (c_last, 1), false, dlogits, (1, cfg.classes), false);
        for (g, v) in grads.head_mut(0).iter_mut().zip(dw) {
            *g += v;
        }
        for (g, &v) in grads.head_mut(1).iter_mut().zip(dlogits) {
            *g += v;
        }
    }
    let dpooled = matmul(weights.head(0), (c_last, cfg.classes), false, dlogits, (cfg.classes, 1), false);
    let p = cache.last.pixels();
    let inv = T::one() / T::of(p as f64);
    let mut dfeat = Feat::zeros(cache.last.h, cache.last.w, c_last);
    for px in dfeat.data.chunks_exact_mut(c_last) {
        for (d, &g) in px.iter_mut().zip(&dpooled) {
            *d = g * inv;
        }
    }

    for (b, spec) in cfg.blocks.iter().enumerate().rev() {
        let bc = &cache.blocks[b];
        let cin = bc.input.c;
        let hidden = bc.expand_out.c;
        let q = bc.out_hw.0 * bc.out_hw.1;
        let residual_grad = spec.residual.then(|| dfeat.data.clone());

        // Projection (linear bottleneck).
        let mut dscale = vec![T::zero(); spec.out_channels];
        let mut dbias = vec![T::zero(); spec.out_channels];
        let dproj_pre = affine_backward(&dfeat.data, &bc.proj_pre, weights.block(b, slot::PROJ_SCALE), &mut dscale, &mut dbias);
        accumulate(grads.block_mut(b, slot::PROJ_SCALE), &dscale);
        accumulate(grads.block_mut(b, slot::PROJ_BIAS), &dbias);
        let dwp = matmul(&bc.dw_out.data, (q, hidden), true, &dproj_pre, (q, spec.out_channels), false);
        accumulate(grads.block_mut(b, slot::PROJ_W), &dwp);
        let mut d_dw_out = matmul(&dproj_pre, (q, spec.out_channels), false, weights.block(b, slot::PROJ_W), (hidden, spec.out_channels), true);

        // Depthwise stage.
        relu6_backward(&mut d_dw_out, &bc.dw_act_in);
        let mut dscale = vec![T::zero(); hidden];
        let mut dbias = vec![T::zero(); hidden];
        let d_dw_pre = affine_backward(&d_dw_out, &bc.dw_pre, weights.block(b, slot::DW_SCALE), &mut dscale, &mut dbias);
        accumulate(grads.block_mut(b, slot::DW_SCALE), &dscale);
        accumulate(grads.block_mut(b, slot::DW_BIAS), &dbias);
        let d_dw = Feat { h: bc.out_hw.0, w: bc.out_hw.1, c: hidden, data: d_dw_pre };
        let mut dwk = vec![T::zero(); 9 * hidden];
        let d_expand_out = depthwise3x3_backward(&d_dw, &bc.expand_out, weights.block(b, slot::DW_W), spec.stride, &mut dwk);
        accumulate(grads.block_mut(b, slot::DW_W), &dwk);

        // Expansion stage.
        let mut d_exp = d_expand_out.data;
        relu6_backward(&mut d_exp, &bc.expand_act_in);
        let mut dscale = vec![T::zero(); hidden];
        let mut dbias = vec![T::zero(); hidden];
        let d_exp_pre = affine_backward(&d_exp, &bc.expand_pre, weights.block(b, slot::EXPAND_SCALE), &mut dscale, &mut dbias);
        accumulate(grads.block_mut(b, slot::EXPAND_SCALE), &dscale);
        accumulate(grads.block_mut(b, slot::EXPAND_BIAS), &dbias);
        let pin = bc.input.pixels();
        let dwe = matmul(&bc.input.data, (pin, cin), true, &d_exp_pre, (pin, hidden), false);
        accumulate(grads.block_mut(b, slot::EXPAND_W), &dwe);
        let mut dx = matmul(&d_exp_pre, (pin, hidden), false, weights.block(b, slot::EXPAND_W), (cin, hidden), true);
        if let Some(r) = residual_grad {
            for (d, v) in dx.iter_mut().zip(r) {
                *d += v;
            }
        }
        dfeat = Feat { h: bc.input.h, w: bc.input.w, c: cin, data: dx };
    }

    // Stem.
    let mut d = dfeat.data;
    relu6_backward(&mut d, &cache.stem.act_in);
    let s = cfg.stem_channels;
    let mut dscale = vec![T::zero(); s];
    let mut dbias = vec![T::zero(); s];
    let dpre = affine_backward(&d, &cache.stem.pre, weights.stem(1), &mut dscale, &mut dbias);
    accumulate(grads.stem_mut(1), &dscale);
    accumulate(grads.stem_mut(2), &dbias);
    let k = 9 * cfg.input_channels;
    let p = dfeat.h * dfeat.w;
    let dw = matmul(&cache.stem.cols, (p, k), true, &dpre, (p, s), false);
    accumulate(grads.stem_mut(0), &dw);
}

fn accumulate<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Loss and parameter gradients for one input against a target distribution.
pub fn loss_and_gradients<T: Scalar>(
    weights: &Weights<T>,
    input: &[T],
    target: &[f64],
) -> Result<(f64, Weights<T>), ClassifierError> {
    let mut grads = weights.zeros_like();
    let loss = accumulate_gradients(weights, input, target, T::one(), &mut grads)?;
    Ok((loss, grads))
}

/// Adds `weight * ∂loss/∂θ` into `grads` and returns the loss.
pub fn accumulate_gradients<T: Scalar>(
    weights: &Weights<T>,
    input: &[T],
    target: &[f64],
    weight: T,
    grads: &mut Weights<T>,
) -> Result<f64, ClassifierError> {
    let cache = forward_cached(weights, input)?;
    let z: Vec<f64> = cache.logits.iter().map(|v| v.as_f64()).collect();
    let loss = cross_entropy(&z, target);
    let p = softmax(&z);
    let dlogits: Vec<T> = p.iter().zip(target).map(|(pk, tk)| T::of(pk - tk) * weight).collect();
    backward(weights, &cache, &dlogits, grads);
    Ok(loss)
}
