//! Fixed-size normalized scalogram tensor and its binary fixture format.
//!
//! Fixture layout: `b"SCG1"`, then channels, height and width as
//! little-endian `u32`, then the values as little-endian `f32`,
//! channel-major then row-major.

use sha2::{Digest, Sha256};

use super::{Magnitudes, WaveletError};

pub const CHANNELS: usize = 6;
pub const HEIGHT: usize = 150;
pub const WIDTH: usize = 192;

const MAGIC: &[u8; 4] = b"SCG1";

/// 6×150×192 tensor with values in `[0, 1]`; row 0 is the lowest frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    data: Vec<f32>,
}

impl Scalogram {
    pub const LEN: usize = CHANNELS * HEIGHT * WIDTH;

    pub fn zeros() -> Self {
        Self { data: vec![0.0; Self::LEN] }
    }

    pub fn from_vec(data: Vec<f32>) -> Result<Self, WaveletError> {
        if data.len() != Self::LEN {
            return Err(WaveletError::Shape(format!("scalogram needs {} values, got {}", Self::LEN, data.len())));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(WaveletError::Shape(format!("value {} at {i} outside [0, 1]", data[i])));
        }
        Ok(Self { data })
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * HEIGHT + row) * WIDTH + col]
    }

    pub fn channel(&self, channel: usize) -> &[f32] {
        &self.data[channel * HEIGHT * WIDTH..(channel + 1) * HEIGHT * WIDTH]
    }

    pub fn to_fixture_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * Self::LEN);
        out.extend_from_slice(MAGIC);
        for d in [CHANNELS, HEIGHT, WIDTH] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_fixture_bytes(bytes: &[u8]) -> Result<Self, WaveletError> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(WaveletError::Fixture("missing SCG1 header".into()));
        }
        let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
        let dims = [dim(0), dim(1), dim(2)];
        if dims != [CHANNELS, HEIGHT, WIDTH] {
            return Err(WaveletError::Fixture(format!("dims {dims:?}, expected [6, 150, 192]")));
        }
        let body = &bytes[16..];
        if body.len() != 4 * Self::LEN {
            return Err(WaveletError::Fixture(format!("payload {} bytes, expected {}", body.len(), 4 * Self::LEN)));
        }
        let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Self::from_vec(data).map_err(|e| WaveletError::Fixture(e.to_string()))
    }

    /// SHA-256 of the fixture bytes, lowercase hex.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_fixture_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Column boundaries `round(j * cols / WIDTH)` for `j = 0..=WIDTH`, computed
/// in integers (halves round up).
pub fn pool_boundaries(cols: usize) -> Vec<usize> {
    (0..=WIDTH).map(|j| (2 * j * cols + WIDTH) / (2 * WIDTH)).collect()
}

/// Mean-pools each channel's time axis to 192 columns, then divides by the
/// channel maximum. All-zero channels stay zero.
pub fn to_scalogram(channels: &[Magnitudes]) -> Result<Scalogram, WaveletError> {
    if channels.len() != CHANNELS {
        return Err(WaveletError::Shape(format!("expected 6 channels, got {}", channels.len())));
    }
    let (rows, cols) = (channels[0].rows, channels[0].cols);
    if channels.iter().any(|m| m.rows != rows || m.cols != cols || m.data.len() != rows * cols) {
        return Err(WaveletError::Shape("channel matrices differ in shape".into()));
    }
    if rows != HEIGHT {
        return Err(WaveletError::Shape(format!("expected {HEIGHT} rows, got {rows}")));
    }
    if cols < WIDTH {
        return Err(WaveletError::Shape(format!("need at least {WIDTH} columns, got {cols}")));
    }
    let bounds = pool_boundaries(cols);
    let mut data = vec![0.0f32; Scalogram::LEN];
    let mut pooled = vec![0.0f64; HEIGHT * WIDTH];
    for (c, mag) in channels.iter().enumerate() {
        let mut peak = 0.0f64;
        for r in 0..HEIGHT {
            let row = mag.row(r);
            for j in 0..WIDTH {
                let span = &row[bounds[j]..bounds[j + 1]];
                let v = span.iter().sum::<f64>() / span.len() as f64;
                pooled[r * WIDTH + j] = v;
                peak = peak.max(v);
            }
        }
        if !peak.is_finite() {
            return Err(WaveletError::Shape(format!("channel {c} contains non-finite magnitudes")));
        }
        let out = &mut data[c * HEIGHT * WIDTH..(c + 1) * HEIGHT * WIDTH];
        if peak > 0.0 {
            for (o, v) in out.iter_mut().zip(&pooled) {
                *o = ((v / peak) as f32).clamp(0.0, 1.0);
            }
        }
    }
    Ok(Scalogram { data })
}
