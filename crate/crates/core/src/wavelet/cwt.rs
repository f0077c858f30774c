//! Morlet CWT by direct-summation semantics, evaluated with FFT convolution.
//!
//! Coefficient `(k, n)` is `|Σ_m x[m] s_k^{-1/2} conj(ψ((m - n) / s_k))|` with
//! zero padding outside the signal. The atom is never truncated, so the FFT
//! route equals the direct sum up to rounding.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FrequencyGrid, WaveletError};
use crate::signal::{RATE_HZ, WINDOW_SAMPLES};

/// Morlet centre frequency (rad per unit scale).
pub const OMEGA0: f64 = 6.0;

/// `ψ(t) = π^{-1/4} e^{i ω0 t} e^{-t²/2}`
pub fn morlet(t: f64) -> Complex64 {
    let envelope = PI.powf(-0.25) * (-0.5 * t * t).exp();
    Complex64::from_polar(envelope, OMEGA0 * t)
}

/// Scale in samples for analysis frequency `f` at `rate_hz`.
pub fn scale_for_frequency(f: f64, rate_hz: f64) -> f64 {
    OMEGA0 * rate_hz / (2.0 * PI * f)
}

/// Row-major magnitude matrix (frequency rows × time columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Magnitudes {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Magnitudes {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Row index of the largest value in `col`.
    pub fn argmax_in_column(&self, col: usize) -> usize {
        (0..self.rows).max_by(|&a, &b| self.get(a, col).total_cmp(&self.get(b, col))).unwrap_or(0)
    }

    /// Column index of the largest value in `row`.
    pub fn argmax_in_row(&self, row: usize) -> usize {
        let r = self.row(row);
        (0..self.cols).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap_or(0)
    }
}

/// Precomputed atom spectra for one signal length, rate and grid. Build once
/// and reuse; `transform` is reentrant.
pub struct MorletBank {
    len: usize,
    grid: FrequencyGrid,
    fft_len: usize,
    spectra: Vec<Vec<Complex64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MorletBank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MorletBank").field("len", &self.len).field("grid", &self.grid).field("fft_len", &self.fft_len).finish()
    }
}

impl MorletBank {
    pub fn new(len: usize, rate_hz: f64, grid: FrequencyGrid) -> Self {
        assert!(len > 0, "empty signal length");
        // Linear convolution of a length-L signal with a (2L-1)-tap atom only
        // needs outputs 0..L, which are alias-free once N >= 2L - 1.
        let fft_len = (2 * len - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let spectra = grid
            .frequencies()
            .iter()
            .map(|&f| {
                let s = scale_for_frequency(f, rate_hz);
                let norm = s.powf(-0.5);
                let mut atom = vec![Complex64::new(0.0, 0.0); fft_len];
                // Convolution kernel g[j] = s^{-1/2} ψ(j / s); conj(ψ(-t)) = ψ(t).
                for j in -(len as isize - 1)..=(len as isize - 1) {
                    let idx = j.rem_euclid(fft_len as isize) as usize;
                    atom[idx] = morlet(j as f64 / s) * norm;
                }
                forward.process(&mut atom);
                atom
            })
            .collect();
        Self { len, grid, fft_len, spectra, forward, inverse }
    }

    /// Bank for 5 s windows at 100 Hz on the default grid.
    pub fn standard() -> Self {
        Self::new(WINDOW_SAMPLES, f64::from(RATE_HZ), FrequencyGrid::default())
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn signal_len(&self) -> usize {
        self.len
    }

    pub fn transform(&self, signal: &[f64]) -> Result<Magnitudes, WaveletError> {
        if signal.len() != self.len {
            return Err(WaveletError::Length { expected: self.len, got: signal.len() });
        }
        if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
            return Err(WaveletError::NonFinite(i));
        }
        let mut spectrum: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        spectrum.resize(self.fft_len, Complex64::new(0.0, 0.0));
        self.forward.process(&mut spectrum);

        let scale = 1.0 / self.fft_len as f64;
        let mut out = Magnitudes::zeros(self.grid.n_bins, self.len);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        for (k, atom) in self.spectra.iter().enumerate() {
            for ((b, x), a) in buf.iter_mut().zip(&spectrum).zip(atom) {
                *b = x * a;
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let row = &mut out.data[k * self.len..(k + 1) * self.len];
            for (o, c) in row.iter_mut().zip(&buf) {
                *o = (c.re * c.re + c.im * c.im).sqrt() * scale;
            }
        }
        Ok(out)
    }
}

/// Morlet CWT magnitude of one 500-sample, 100 Hz window on `grid`.
pub fn morlet_cwt(signal: &[f64], grid: &FrequencyGrid) -> Result<Magnitudes, WaveletError> {
    if signal.len() != WINDOW_SAMPLES {
        return Err(WaveletError::Length { expected: WINDOW_SAMPLES, got: signal.len() });
    }
    MorletBank::new(WINDOW_SAMPLES, f64::from(RATE_HZ), *grid).transform(signal)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent route: direct inner product with the analytic atom.
    fn direct(signal: &[f64], rate: f64, grid: &FrequencyGrid) -> Magnitudes {
        let n = signal.len();
        let mut out = Magnitudes::zeros(grid.n_bins, n);
        for k in 0..grid.n_bins {
            let s = OMEGA0 * rate / (2.0 * PI * grid.frequency(k));
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (m, &x) in signal.iter().enumerate() {
                    let t = (m as f64 - c as f64) / s;
                    let psi = Complex64::from_polar(PI.powf(-0.25) * (-t * t / 2.0).exp(), OMEGA0 * t);
                    acc += x * psi.conj() / s.sqrt();
                }
                out.data[k * n + c] = acc.norm();
            }
        }
        out
    }

    #[test]
    fn zero_signal_gives_zero() {
        let m = morlet_cwt(&[0.0; 500], &FrequencyGrid::default()).unwrap();
        assert!(m.data.iter().all(|&v| v == 0.0));
        assert_eq!((m.rows, m.cols), (150, 500));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(morlet_cwt(&[0.0; 499], &FrequencyGrid::default()), Err(WaveletError::Length { .. })));
        let mut x = vec![0.0; 500];
        x[3] = f64::INFINITY;
        assert!(matches!(morlet_cwt(&x, &FrequencyGrid::default()), Err(WaveletError::NonFinite(3))));
    }

    #[test]
    fn matches_direct_sum_on_short_signal() {
        let grid = FrequencyGrid::log(10, 0.5, 10.0);
        let x: Vec<f64> = (0..50).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let fast = MorletBank::new(50, 100.0, grid).transform(&x).unwrap();
        let slow = direct(&x, 100.0, &grid);
        let worst = fast.data.iter().zip(&slow.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "max abs diff {worst}");
    }

    #[test]
    fn impulse_peaks_at_its_own_column() {
        let mut x = vec![0.0; 500];
        x[250] = 1.0;
        let m = morlet_cwt(&x, &FrequencyGrid::default()).unwrap();
        for k in 0..m.rows {
            assert_eq!(m.argmax_in_row(k), 250, "row {k}");
        }
    }

    #[test]
    fn magnitude_scales_linearly() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin() + 0.2 * (i as f64 * 0.05).cos()).collect();
        let bank = MorletBank::standard();
        let base = bank.transform(&x).unwrap();
        let alpha = -2.75;
        let scaled = bank.transform(&x.iter().map(|v| alpha * v).collect::<Vec<_>>()).unwrap();
        // Norm-wise relative error over the whole matrix.
        let peak = base.data.iter().fold(0.0f64, |m, v| m.max(v.abs())) * alpha.abs();
        let worst = base.data.iter().zip(&scaled.data).map(|(a, b)| (b - alpha.abs() * a).abs()).fold(0.0, f64::max);
        assert!(worst <= 1e-9 * peak, "{worst} vs peak {peak}");
    }
}
