//! Image tensors: `[H, W, C]` arrays of intensities in `[0, 1]`.

use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};

pub const MIN_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ColorSpace {
    Rgb,
    /// Single luminance plane.
    Y,
}

/// An image as a dense `[H, W, C]` array of f64 intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pixels: Array3<f64>,
    color_space: ColorSpace,
}

impl ImageTensor {
    /// Wrap an `[H, W, C]` array. Validates dimensions, channel count, and
    /// the `[0, 1]` intensity range.
    pub fn new(pixels: Array3<f64>, color_space: ColorSpace) -> Result<Self> {
        let (h, w, c) = pixels.dim();
        if h < MIN_DIM || w < MIN_DIM {
            return Err(Error::invalid_input(format!(
                "image must be at least {MIN_DIM}x{MIN_DIM}, got {h}x{w}"
            )));
        }
        match (c, color_space) {
            (3, ColorSpace::Rgb) | (1, ColorSpace::Y) => {}
            _ => {
                return Err(Error::invalid_input(format!(
                    "channel count {c} does not match color space {color_space:?}"
                )))
            }
        }
        if !pixels.iter().all(|&v| (0.0..=1.0).contains(&v)) {
            return Err(Error::invalid_input(
                "pixel intensities must lie in [0, 1]".to_string(),
            ));
        }
        Ok(Self {
            pixels,
            color_space,
        })
    }

    /// Wrap an array that is already known to be clipped; clips defensively.
    pub fn from_clipped(mut pixels: Array3<f64>, color_space: ColorSpace) -> Result<Self> {
        pixels.mapv_inplace(|v| v.clamp(0.0, 1.0));
        Self::new(pixels, color_space)
    }

    pub fn constant(h: usize, w: usize, c: usize, value: f64) -> Result<Self> {
        let cs = if c == 1 { ColorSpace::Y } else { ColorSpace::Rgb };
        Self::new(Array3::from_elem((h, w, c), value), cs)
    }

    pub fn pixels(&self) -> &Array3<f64> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array3<f64> {
        self.pixels
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().1
    }

    pub fn channels(&self) -> usize {
        self.pixels.dim().2
    }

    pub fn color_space(&self) -> ColorSpace {
        self.color_space
    }

    /// ITU-R BT.601 luminance plane; identity for single-channel images.
    pub fn luminance(&self) -> Array3<f64> {
        let (h, w, c) = self.pixels.dim();
        if c == 1 {
            return self.pixels.clone();
        }
        let mut y = Array3::zeros((h, w, 1));
        for r in 0..h {
            for col in 0..w {
                let p = [
                    self.pixels[[r, col, 0]],
                    self.pixels[[r, col, 1]],
                    self.pixels[[r, col, 2]],
                ];
                y[[r, col, 0]] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
            }
        }
        y
    }

    /// Center-crop to the largest size divisible by `scale`.
    pub fn crop_to_multiple(&self, scale: usize) -> Result<Self> {
        let (h, w, _) = self.pixels.dim();
        let nh = (h / scale) * scale;
        let nw = (w / scale) * scale;
        if nh < MIN_DIM || nw < MIN_DIM {
            return Err(Error::invalid_input(format!(
                "crop to multiple of {scale} leaves image below {MIN_DIM} px"
            )));
        }
        if nh == h && nw == w {
            return Ok(self.clone());
        }
        let r0 = (h - nh) / 2;
        let c0 = (w - nw) / 2;
        let cropped = self
            .pixels
            .slice(ndarray::s![r0..r0 + nh, c0..c0 + nw, ..])
            .to_owned();
        Self::new(cropped, self.color_space)
    }

    pub fn crop(&self, r0: usize, c0: usize, h: usize, w: usize) -> Result<Self> {
        let (ih, iw, _) = self.pixels.dim();
        if r0 + h > ih || c0 + w > iw {
            return Err(Error::invalid_input("crop window out of bounds"));
        }
        let cropped = self
            .pixels
            .slice(ndarray::s![r0..r0 + h, c0..c0 + w, ..])
            .to_owned();
        Self::new(cropped, self.color_space)
    }

    /// Quantize to 8-bit, the representation used for file output and golden
    /// comparisons. Rounds half away from zero.
    pub fn to_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_u8(data: &[u8], h: usize, w: usize, c: usize) -> Result<Self> {
        if data.len() != h * w * c {
            return Err(Error::invalid_input("byte length does not match shape"));
        }
        let pixels = Array3::from_shape_vec(
            (h, w, c),
            data.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
        .expect("shape checked above");
        let cs = if c == 1 { ColorSpace::Y } else { ColorSpace::Rgb };
        Self::new(pixels, cs)
    }

    /// Load a PNG or JPEG file. Images are decoded to 8-bit RGB unless the
    /// file is single-channel, which stays luminance.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path.as_ref())
            .map_err(|e| Error::DegradationIo(format!("{}: {e}", path.as_ref().display())))?;
        match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = g.dimensions();
                Self::from_u8(g.as_raw(), h as usize, w as usize, 1)
            }
            other => {
                let rgb = other.to_rgb8();
                let (w, h) = rgb.dimensions();
                Self::from_u8(rgb.as_raw(), h as usize, w as usize, 3)
            }
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let (h, w, c) = self.pixels.dim();
        let data = self.to_u8();
        let color = match c {
            1 => image::ColorType::L8,
            _ => image::ColorType::Rgb8,
        };
        image::save_buffer(
            path.as_ref(),
            &data,
            w as u32,
            h as u32,
            color,
        )
        .map_err(|e| Error::DegradationIo(format!("{}: {e}", path.as_ref().display())))
    }

    /// Root-mean-square difference, a convenience for tests and diagnostics.
    pub fn rms_diff(&self, other: &Self) -> f64 {
        let n = self.pixels.len() as f64;
        let ss: f64 = self
            .pixels
            .iter()
            .zip(other.pixels.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (ss / n).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_images() {
        assert!(ImageTensor::constant(4, 16, 1, 0.5).is_err());
        assert!(ImageTensor::constant(16, 16, 1, 0.5).is_ok());
    }

    #[test]
    fn rejects_out_of_range() {
        let arr = Array3::from_elem((8, 8, 1), 1.5);
        assert!(ImageTensor::new(arr, ColorSpace::Y).is_err());
    }

    #[test]
    fn channel_color_space_consistency() {
        let arr = Array3::from_elem((8, 8, 3), 0.5);
        assert!(ImageTensor::new(arr.clone(), ColorSpace::Y).is_err());
        assert!(ImageTensor::new(arr, ColorSpace::Rgb).is_ok());
    }

    #[test]
    fn crop_to_multiple_centers() {
        let mut arr = Array3::zeros((10, 11, 1));
        arr[[1, 1, 0]] = 1.0; // lands at (0,0) after center crop to 8x8
        let img = ImageTensor::new(arr, ColorSpace::Y).unwrap();
        let c = img.crop_to_multiple(8).unwrap();
        assert_eq!((c.height(), c.width()), (8, 8));
        assert_eq!(c.pixels()[[0, 0, 0]], 1.0);
    }

    #[test]
    fn u8_round_trip() {
        let img = ImageTensor::constant(8, 8, 3, 0.5).unwrap();
        let bytes = img.to_u8();
        let back = ImageTensor::from_u8(&bytes, 8, 8, 3).unwrap();
        assert!(img.rms_diff(&back) < 1.0 / 255.0);
    }
}
