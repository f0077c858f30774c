use serde::{Deserialize, Serialize};

/// Log-spaced analysis frequencies, lowest first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub n_bins: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self { n_bins: 150, f_min: 0.25, f_max: 10.0 }
    }
}

impl FrequencyGrid {
    pub fn log(n_bins: usize, f_min: f64, f_max: f64) -> Self {
        assert!(n_bins >= 2 && f_min > 0.0 && f_max > f_min, "degenerate frequency grid");
        Self { n_bins, f_min, f_max }
    }

    /// `f_k = f_min * (f_max / f_min)^(k / (n_bins - 1))`
    pub fn frequency(&self, k: usize) -> f64 {
        if k + 1 == self.n_bins {
            return self.f_max;
        }
        let ratio = self.f_max / self.f_min;
        self.f_min * ratio.powf(k as f64 / (self.n_bins - 1) as f64)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_bins).map(|k| self.frequency(k)).collect()
    }

    /// Bin whose frequency is closest to `f` on the log axis.
    pub fn nearest_bin(&self, f: f64) -> usize {
        let target = f.ln();
        (0..self.n_bins)
            .min_by(|&a, &b| {
                let da = (self.frequency(a).ln() - target).abs();
                let db = (self.frequency(b).ln() - target).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }
}
