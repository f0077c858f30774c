use std::path::Path;

use image::{Rgb, RgbImage};

use super::{Scalogram, WaveletError, CHANNELS, HEIGHT, WIDTH};

/// Grey-level RGB image of one channel, 192 wide by 150 tall, with frequency
/// increasing upward.
pub fn channel_image(scalogram: &Scalogram, channel: usize) -> Result<RgbImage, WaveletError> {
    if channel >= CHANNELS {
        return Err(WaveletError::Channel(channel));
    }
    let mut img = RgbImage::new(WIDTH as u32, HEIGHT as u32);
    for row in 0..HEIGHT {
        let y = (HEIGHT - 1 - row) as u32;
        for col in 0..WIDTH {
            let v = (scalogram.get(channel, row, col).clamp(0.0, 1.0) * 255.0).round() as u8;
            img.put_pixel(col as u32, y, Rgb([v, v, v]));
        }
    }
    Ok(img)
}

pub fn render_channel_png(scalogram: &Scalogram, channel: usize, path: impl AsRef<Path>) -> Result<(), WaveletError> {
    channel_image(scalogram, channel)?.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_scalogram_is_black() {
        let img = channel_image(&Scalogram::zeros(), 0).unwrap();
        assert_eq!(img.dimensions(), (192, 150));
        assert!(img.pixels().all(|p| p.0 == [0, 0, 0]));
    }

    #[test]
    fn full_value_is_white_and_row_zero_is_bottom() {
        let mut data = vec![0.0f32; Scalogram::LEN];
        data[(2 * HEIGHT) * WIDTH + 5] = 1.0; // channel 2, row 0, col 5
        let s = Scalogram::from_vec(data).unwrap();
        let img = channel_image(&s, 2).unwrap();
        assert_eq!(img.get_pixel(5, 149).0, [255, 255, 255]);
        assert_eq!(img.get_pixel(5, 0).0, [0, 0, 0]);
    }

    #[test]
    fn bad_channel() {
        assert!(matches!(channel_image(&Scalogram::zeros(), 6), Err(WaveletError::Channel(6))));
    }
}
