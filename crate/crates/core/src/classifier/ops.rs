//! Layer primitives on channels-last (HWC) feature maps.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};

use super::Scalar;

/// Channels-last feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct Feat<T> {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Feat<T> {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Self { h, w, c, data: vec![T::zero(); h * w * c] }
    }

    pub fn pixels(&self) -> usize {
        self.h * self.w
    }

    /// Converts channel-major (CHW) input to HWC.
    pub fn from_chw(data: &[T], c: usize, h: usize, w: usize) -> Self {
        let mut out = Self::zeros(h, w, c);
        for ch in 0..c {
            for y in 0..h {
                for x in 0..w {
                    out.data[(y * w + x) * c + ch] = data[(ch * h + y) * w + x];
                }
            }
        }
        out
    }
}

/// Output length of a 3×3, padding-1 convolution with `stride`.
pub fn conv_out(n: usize, stride: usize) -> usize {
    (n + 2 - 3) / stride + 1
}

/// `C = op(A) · op(B)` where `op` optionally transposes. `A` is stored as
/// `rows_a × cols_a`, `B` as `rows_b × cols_b`, both row-major.
pub fn matmul<T: Scalar>(
    a: &[T],
    (rows_a, cols_a): (usize, usize),
    trans_a: bool,
    b: &[T],
    (rows_b, cols_b): (usize, usize),
    trans_b: bool,
) -> Vec<T> {
    let av = ArrayView2::from_shape((rows_a, cols_a), a).expect("lhs shape");
    let bv = ArrayView2::from_shape((rows_b, cols_b), b).expect("rhs shape");
    let av = if trans_a { av.reversed_axes() } else { av };
    let bv = if trans_b { bv.reversed_axes() } else { bv };
    let (m, n) = (av.nrows(), bv.ncols());
    assert_eq!(av.ncols(), bv.nrows(), "inner dimensions differ");
    let mut out = vec![T::zero(); m * n];
    {
        let mut cv = ArrayViewMut2::from_shape((m, n), &mut out).expect("out shape");
        general_mat_mul(T::one(), &av, &bv, T::zero(), &mut cv);
    }
    out
}

/// Unrolls 3×3 padding-1 patches; row `p` holds `(ky, kx, c)` taps.
pub fn im2col3x3<T: Scalar>(x: &Feat<T>, stride: usize) -> (Vec<T>, usize, usize) {
    let (ho, wo) = (conv_out(x.h, stride), conv_out(x.w, stride));
    let k = 9 * x.c;
    let mut cols = vec![T::zero(); ho * wo * k];
    for oy in 0..ho {
        for ox in 0..wo {
            let row = &mut cols[(oy * wo + ox) * k..(oy * wo + ox + 1) * k];
            for ky in 0..3 {
                let iy = (oy * stride + ky) as isize - 1;
                if iy < 0 || iy >= x.h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let ix = (ox * stride + kx) as isize - 1;
                    if ix < 0 || ix >= x.w as isize {
                        continue;
                    }
                    let src = ((iy as usize) * x.w + ix as usize) * x.c;
                    let dst = (ky * 3 + kx) * x.c;
                    row[dst..dst + x.c].copy_from_slice(&x.data[src..src + x.c]);
                }
            }
        }
    }
    (cols, ho, wo)
}

/// Per-channel `y = x * scale + bias` (folded batch norm).
pub fn affine<T: Scalar>(x: &[T], scale: &[T], bias: &[T]) -> Vec<T> {
    let c = scale.len();
    let mut y = Vec::with_capacity(x.len());
    for px in x.chunks_exact(c) {
        y.extend(px.iter().zip(scale).zip(bias).map(|((&v, &s), &b)| v * s + b));
    }
    y
}

/// Backward of [`affine`]: accumulates scale/bias grads and returns `dx`.
pub fn affine_backward<T: Scalar>(dy: &[T], x: &[T], scale: &[T], dscale: &mut [T], dbias: &mut [T]) -> Vec<T> {
    let c = scale.len();
    let mut dx = Vec::with_capacity(dy.len());
    for (dpx, xpx) in dy.chunks_exact(c).zip(x.chunks_exact(c)) {
        for ch in 0..c {
            dscale[ch] += dpx[ch] * xpx[ch];
            dbias[ch] += dpx[ch];
            dx.push(dpx[ch] * scale[ch]);
        }
    }
    dx
}

/// In-place [`affine`], optionally followed by ReLU6.
pub fn affine_inplace<T: Scalar>(x: &mut [T], scale: &[T], bias: &[T], clamp: bool) {
    let c = scale.len();
    let six = T::of(6.0);
    for px in x.chunks_exact_mut(c) {
        for ((v, &s), &b) in px.iter_mut().zip(scale).zip(bias) {
            let y = *v * s + b;
            *v = if clamp { y.max(T::zero()).min(six) } else { y };
        }
    }
}

pub fn relu6<T: Scalar>(x: &[T]) -> Vec<T> {
    let six = T::of(6.0);
    x.iter().map(|&v| v.max(T::zero()).min(six)).collect()
}

/// Passes gradient where `0 < pre < 6`.
pub fn relu6_backward<T: Scalar>(dy: &mut [T], pre: &[T]) {
    let six = T::of(6.0);
    for (d, &p) in dy.iter_mut().zip(pre) {
        if !(p > T::zero() && p < six) {
            *d = T::zero();
        }
    }
}

/// Region code per activation (0: clipped low, 1: linear, 2: clipped high).
pub fn relu6_regions<T: Scalar>(pre: &[T], out: &mut Vec<u8>) {
    let six = T::of(6.0);
    out.extend(pre.iter().map(|&p| {
        if p <= T::zero() {
            0
        } else if p >= six {
            2
        } else {
            1
        }
    }));
}

/// Depthwise 3×3, padding 1. Weights are `[ky][kx][c]`.
pub fn depthwise3x3<T: Scalar>(x: &Feat<T>, weight: &[T], stride: usize) -> Feat<T> {
    let c = x.c;
    let (ho, wo) = (conv_out(x.h, stride), conv_out(x.w, stride));
    let mut y = Feat::zeros(ho, wo, c);
    for oy in 0..ho {
        for ox in 0..wo {
            let out = &mut y.data[(oy * wo + ox) * c..(oy * wo + ox + 1) * c];
            for ky in 0..3 {
                let iy = (oy * stride + ky) as isize - 1;
                if iy < 0 || iy >= x.h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let ix = (ox * stride + kx) as isize - 1;
                    if ix < 0 || ix >= x.w as isize {
                        continue;
                    }
                    let src = &x.data[((iy as usize) * x.w + ix as usize) * c..][..c];
                    let wk = &weight[(ky * 3 + kx) * c..][..c];
                    for ((o, &v), &k) in out.iter_mut().zip(src).zip(wk) {
                        *o += v * k;
                    }
                }
            }
        }
    }
    y
}

/// Backward of [`depthwise3x3`]: accumulates into `dweight`, returns `dx`.
pub fn depthwise3x3_backward<T: Scalar>(dy: &Feat<T>, x: &Feat<T>, weight: &[T], stride: usize, dweight: &mut [T]) -> Feat<T> {
    let c = x.c;
    let mut dx = Feat::zeros(x.h, x.w, c);
    for oy in 0..dy.h {
        for ox in 0..dy.w {
            let g = &dy.data[(oy * dy.w + ox) * c..][..c];
            for ky in 0..3 {
                let iy = (oy * stride + ky) as isize - 1;
                if iy < 0 || iy >= x.h as isize {
                    continue;
                }
                for kx in 0..3 {
                    let ix = (ox * stride + kx) as isize - 1;
                    if ix < 0 || ix >= x.w as isize {
                        continue;
                    }
                    let at = ((iy as usize) * x.w + ix as usize) * c;
                    let k = (ky * 3 + kx) * c;
                    for ch in 0..c {
                        dweight[k + ch] += g[ch] * x.data[at + ch];
                        dx.data[at + ch] += g[ch] * weight[k + ch];
                    }
                }
            }
        }
    }
    dx
}

pub fn global_avg_pool<T: Scalar>(x: &Feat<T>) -> Vec<T> {
    let mut acc = vec![T::zero(); x.c];
    for px in x.data.chunks_exact(x.c) {
        for (a, &v) in acc.iter_mut().zip(px) {
            *a += v;
        }
    }
    let n = T::of(x.pixels() as f64);
    acc.iter_mut().for_each(|a| *a = *a / n);
    acc
}
