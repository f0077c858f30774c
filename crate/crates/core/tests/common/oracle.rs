//! Brute-force reference implementations, written without the production
//! code paths.

use std::f64::consts::PI;

/// Direct-summation Morlet CWT magnitude at one column for one frequency.
/// Plain (re, im) arithmetic; zero-padded outside the signal.
pub fn cwt_at(signal: &[f64], rate_hz: f64, freq_hz: f64, column: usize) -> f64 {
    let omega0 = 6.0;
    let s = omega0 * rate_hz / (2.0 * PI * freq_hz);
    let norm = PI.powf(-0.25) / s.sqrt();
    let (mut re, mut im) = (0.0, 0.0);
    for (m, &x) in signal.iter().enumerate() {
        let t = (m as f64 - column as f64) / s;
        let env = norm * (-0.5 * t * t).exp();
        // x * conj(exp(i w0 t))
        re += x * env * (omega0 * t).cos();
        im -= x * env * (omega0 * t).sin();
    }
    (re * re + im * im).sqrt()
}

/// Log grid frequency, recomputed from its definition.
pub fn grid_frequency(k: usize, n_bins: usize, f_min: f64, f_max: f64) -> f64 {
    f_min * (f_max / f_min).powf(k as f64 / (n_bins - 1) as f64)
}

/// Frequency row with the largest oracle magnitude at `column`.
pub fn peak_bin(signal: &[f64], rate_hz: f64, n_bins: usize, f_min: f64, f_max: f64, column: usize) -> usize {
    (0..n_bins)
        .map(|k| (k, cwt_at(signal, rate_hz, grid_frequency(k, n_bins, f_min, f_max), column)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
        .unwrap()
}

/// Expected windows for a stream of `s` samples.
pub fn window_count(s: usize) -> usize {
    if s < 500 {
        0
    } else {
        (s - 500) / 300 + 1
    }
}

/// Stem-only network: 3×3 stride-2 padding-1 convolution (weights indexed
/// `[ky][kx][cin][cout]`), folded scale/bias, ReLU6, global mean, affine head.
/// The convolution is unrolled into a dense matrix and applied as one
/// matrix-vector product. Input is channel-major.
#[allow(clippy::too_many_arguments)]
pub fn stem_only_logits(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    conv: &[f64],
    cout: usize,
    scale: &[f64],
    bias: &[f64],
    fc: &[f64],
    fc_bias: &[f64],
) -> Vec<f64> {
    let ho = (h - 1) / 2 + 1;
    let wo = (w - 1) / 2 + 1;
    let n_in = c * h * w;
    // dense[(oy, ox, co)][(ci, iy, ix)]
    let n_out = ho * wo * cout;
    let mut dense = vec![0.0; n_out * n_in];
    for oy in 0..ho {
        for ox in 0..wo {
            for co in 0..cout {
                let r = (oy * wo + ox) * cout + co;
                for ky in 0..3 {
                    for kx in 0..3 {
                        let iy = (oy * 2 + ky) as isize - 1;
                        let ix = (ox * 2 + kx) as isize - 1;
                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                            continue;
                        }
                        for ci in 0..c {
                            let col = (ci * h + iy as usize) * w + ix as usize;
                            dense[r * n_in + col] += conv[((ky * 3 + kx) * c + ci) * cout + co];
                        }
                    }
                }
            }
        }
    }
    let mut act = vec![0.0; n_out];
    for (r, a) in act.iter_mut().enumerate() {
        let z: f64 = (0..n_in).map(|j| dense[r * n_in + j] * input[j]).sum();
        let co = r % cout;
        *a = (scale[co] * z + bias[co]).clamp(0.0, 6.0);
    }
    let pooled: Vec<f64> = (0..cout).map(|co| (0..ho * wo).map(|p| act[p * cout + co]).sum::<f64>() / (ho * wo) as f64).collect();
    let classes = fc_bias.len();
    (0..classes).map(|k| fc_bias[k] + (0..cout).map(|co| pooled[co] * fc[co * classes + k]).sum::<f64>()).collect()
}
