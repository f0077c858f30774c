//! Morlet continuous wavelet transform and scalogram construction.

mod cwt;
mod grid;
mod render;
mod scalogram;

pub use cwt::{morlet, morlet_cwt, scale_for_frequency, Magnitudes, MorletBank, OMEGA0};
pub use grid::FrequencyGrid;
pub use render::render_channel_png;
pub use scalogram::{pool_boundaries, to_scalogram, Scalogram, CHANNELS, HEIGHT, WIDTH};

#[derive(Debug, thiserror::Error)]
pub enum WaveletError {
    #[error("signal length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("channel {0} out of range 0..6")]
    Channel(usize),
    #[error("bad scalogram fixture: {0}")]
    Fixture(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

/// Six-axis scalogram of one window: per-axis CWT magnitudes, pooled and
/// normalized.
pub fn window_scalogram(bank: &MorletBank, window: &crate::signal::SampleWindow) -> Result<Scalogram, WaveletError> {
    let mags = (0..CHANNELS).map(|axis| bank.transform(&window.channel(axis))).collect::<Result<Vec<_>, _>>()?;
    to_scalogram(&mags)
}
