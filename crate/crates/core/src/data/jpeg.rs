//! Baseline JPEG round trip. Deterministic for a fixed codec version (the
//! encoder is pinned in Cargo.lock), which is what makes golden files stable.

use std::io::Cursor;

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Encode to baseline JPEG at the given quality.
pub fn jpeg_encode(x: &ImageTensor, quality: u8) -> Result<Vec<u8>> {
    if !(1..=100).contains(&quality) {
        return Err(Error::invalid_spec(format!(
            "jpeg quality must be in [1, 100], got {quality}"
        )));
    }
    let (h, w, c) = x.pixels().dim();
    let data = x.to_u8();
    let color = match c {
        1 => image::ColorType::L8,
        _ => image::ColorType::Rgb8,
    };
    let mut buf = Cursor::new(Vec::new());
    let mut enc = image::codecs::jpeg::JpegEncoder::new_with_quality(&mut buf, quality);
    enc.encode(&data, w as u32, h as u32, color)
        .map_err(|e| Error::DegradationIo(format!("jpeg encode: {e}")))?;
    Ok(buf.into_inner())
}

/// Encode–decode round trip; the output keeps the input's channel count.
pub fn jpeg_compress(x: &ImageTensor, quality: u8) -> Result<ImageTensor> {
    let bytes = jpeg_encode(x, quality)?;
    let decoded = image::load_from_memory_with_format(&bytes, image::ImageFormat::Jpeg)
        .map_err(|e| Error::DegradationIo(format!("jpeg decode: {e}")))?;
    let (h, w, c) = x.pixels().dim();
    let out = if c == 1 {
        let g = decoded.to_luma8();
        ImageTensor::from_u8(g.as_raw(), h, w, 1)?
    } else {
        let rgb = decoded.to_rgb8();
        ImageTensor::from_u8(rgb.as_raw(), h, w, 3)?
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalbench::metrics::psnr;
    use ndarray::Array3;

    #[test]
    fn quality_range_enforced() {
        let img = ImageTensor::constant(8, 8, 3, 0.5).unwrap();
        assert!(jpeg_compress(&img, 0).is_err());
        assert!(jpeg_compress(&img, 101).is_err());
    }

    #[test]
    fn constant_block_survives_any_quality() {
        // A constant block is pure DC; quantization cannot move it far.
        let img = ImageTensor::constant(8, 8, 1, 0.5).unwrap();
        for &q in &[1u8, 30, 75, 100] {
            let out = jpeg_compress(&img, q).unwrap();
            let v0 = out.pixels()[[0, 0, 0]];
            for &v in out.pixels().iter() {
                assert_eq!(v, v0, "quality {q}: block must stay constant");
            }
            assert!((v0 - 0.5).abs() < 2.5 / 255.0, "quality {q}: {v0}");
        }
    }

    #[test]
    fn deterministic_bytes() {
        let arr = Array3::from_shape_fn((16, 16, 3), |(i, j, c)| {
            ((i * 13 + j * 7 + c * 3) % 50) as f64 / 100.0 + 0.2
        });
        let img = ImageTensor::new(arr, crate::image::ColorSpace::Rgb).unwrap();
        let a = jpeg_encode(&img, 30).unwrap();
        let b = jpeg_encode(&img, 30).unwrap();
        assert_eq!(a, b);
        let ia = jpeg_compress(&img, 30).unwrap();
        let ib = jpeg_compress(&img, 30).unwrap();
        assert_eq!(ia.pixels(), ib.pixels());
    }

    #[test]
    fn high_quality_smooth_gradient_psnr() {
        let arr = Array3::from_shape_fn((32, 32, 3), |(i, j, _)| {
            0.2 + 0.6 * (i as f64 + j as f64) / 62.0
        });
        let img = ImageTensor::new(arr, crate::image::ColorSpace::Rgb).unwrap();
        let out = jpeg_compress(&img, 100).unwrap();
        let db = psnr(&img, &out, 0).unwrap();
        assert!(db >= 40.0, "quality 100 PSNR {db}");
    }
}
