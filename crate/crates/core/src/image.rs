//! Dense multi-channel float images, stored row-major with interleaved
//! channels. Row 0 is the top of the image.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{width}x{height}x{channels} values"),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Image {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Pixel lookup with coordinates clamped to the image border.
    #[inline]
    pub fn pixel_clamped(&self, x: i64, y: i64) -> &[f32] {
        let cx = x.clamp(0, self.width as i64 - 1) as usize;
        let cy = y.clamp(0, self.height as i64 - 1) as usize;
        self.pixel(cx, cy)
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    /// Copies out a contiguous range of channels.
    pub fn channel_range(&self, start: usize, count: usize) -> Image {
        assert!(start + count <= self.channels);
        Image::from_fn(self.width, self.height, count, |x, y, c| {
            self.get(x, y, start + c)
        })
    }

    /// Nearest-neighbour enlargement by an integer factor.
    pub fn upsample_nearest(&self, factor: usize) -> Image {
        Image::from_fn(
            self.width * factor,
            self.height * factor,
            self.channels,
            |x, y, c| self.get(x / factor, y / factor, c),
        )
    }

    /// Box-filter reduction by an integer factor.
    pub fn downsample_box(&self, factor: usize) -> Result<Image> {
        if factor == 0 || self.width % factor != 0 || self.height % factor != 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("dimensions divisible by {factor}"),
                actual: self.shape_string(),
            });
        }
        let (w, h) = (self.width / factor, self.height / factor);
        let norm = 1.0 / (factor * factor) as f64;
        let mut out = Image::new(w, h, self.channels);
        for y in 0..h {
            for x in 0..w {
                for c in 0..self.channels {
                    let mut acc = 0.0f64;
                    for dy in 0..factor {
                        for dx in 0..factor {
                            acc += self.get(x * factor + dx, y * factor + dy, c) as f64;
                        }
                    }
                    out.pixel_mut(x, y)[c] = (acc * norm) as f32;
                }
            }
        }
        Ok(out)
    }

    /// Mirrors the image left to right.
    pub fn flip_horizontal(&self) -> Image {
        Image::from_fn(self.width, self.height, self.channels, |x, y, c| {
            self.get(self.width - 1 - x, y, c)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_over_nearest_is_identity() {
        let img = Image::from_fn(5, 3, 2, |x, y, c| (x * 7 + y * 3 + c) as f32 * 0.1);
        let round_trip = img.upsample_nearest(4).downsample_box(4).unwrap();
        assert_eq!(round_trip, img);
    }

    #[test]
    fn downsample_rejects_indivisible() {
        let img = Image::new(6, 4, 1);
        assert!(img.downsample_box(4).is_err());
    }

    #[test]
    fn clamped_lookup() {
        let img = Image::from_fn(3, 2, 1, |x, y, _| (x + 10 * y) as f32);
        assert_eq!(img.pixel_clamped(-4, 0)[0], 0.0);
        assert_eq!(img.pixel_clamped(9, 9)[0], 12.0);
    }
}
