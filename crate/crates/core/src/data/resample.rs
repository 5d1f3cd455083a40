//! Bicubic resampling with the Keys kernel (a = −0.5).
//!
//! Downsampling stretches the kernel by the scale factor (antialiasing);
//! upsampling uses the unit kernel. Both are separable and use symmetric
//! reflection at the borders, with per-tap weight normalization so constant
//! images stay constant.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::image::ImageTensor;

pub const KERNEL_A: f64 = -0.5;

/// The cubic convolution kernel with a = −0.5.
pub fn cubic_kernel(x: f64) -> f64 {
    let a = KERNEL_A;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Symmetric boundary reflection (edge sample repeated):
/// indices ...2,1,0 | 0,1,2,... and n-1 | n-1,n-2,...
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Tap positions and normalized weights for one output coordinate.
/// `filter_scale` is 1 for interpolation and `scale` for antialiased
/// reduction.
fn taps(center: f64, filter_scale: f64) -> (isize, Vec<f64>) {
    let support = 2.0 * filter_scale;
    let left = (center - support).floor() as isize + 1;
    let right = (center + support).floor() as isize;
    let mut weights = Vec::with_capacity((right - left + 1) as usize);
    let mut sum = 0.0;
    for j in left..=right {
        let w = cubic_kernel((j as f64 - center) / filter_scale);
        weights.push(w);
        sum += w;
    }
    for w in &mut weights {
        *w /= sum;
    }
    (left, weights)
}

/// Resample one axis length `n_in` to `n_out` where the geometric scale is
/// `n_in/n_out` (reduction) or `n_out/n_in` (magnification).
fn axis_plan(n_in: usize, n_out: usize) -> Vec<(isize, Vec<f64>)> {
    let ratio = n_in as f64 / n_out as f64;
    let filter_scale = if ratio > 1.0 { ratio } else { 1.0 };
    (0..n_out)
        .map(|i| {
            let center = (i as f64 + 0.5) * ratio - 0.5;
            taps(center, filter_scale)
        })
        .collect()
}

fn resample_hwc(pixels: &Array3<f64>, oh: usize, ow: usize) -> Array3<f64> {
    let (h, w, c) = pixels.dim();
    let row_plan = axis_plan(h, oh);
    let col_plan = axis_plan(w, ow);

    // rows first: [h, w, c] -> [oh, w, c]
    let mut tmp = Array3::zeros((oh, w, c));
    for (oi, (left, weights)) in row_plan.iter().enumerate() {
        for (t, &wt) in weights.iter().enumerate() {
            let src = reflect_index(left + t as isize, h);
            for j in 0..w {
                for ch in 0..c {
                    tmp[[oi, j, ch]] += wt * pixels[[src, j, ch]];
                }
            }
        }
    }
    // columns: [oh, w, c] -> [oh, ow, c]
    let mut out = Array3::zeros((oh, ow, c));
    for (oj, (left, weights)) in col_plan.iter().enumerate() {
        for (t, &wt) in weights.iter().enumerate() {
            let src = reflect_index(left + t as isize, w);
            for i in 0..oh {
                for ch in 0..c {
                    out[[i, oj, ch]] += wt * tmp[[i, src, ch]];
                }
            }
        }
    }
    out
}

pub(crate) fn validate_scale(scale: usize) -> Result<()> {
    if ![2, 3, 4, 8].contains(&scale) {
        return Err(Error::invalid_spec(format!(
            "scale must be one of 2, 3, 4, 8; got {scale}"
        )));
    }
    Ok(())
}

/// Antialiased bicubic reduction by an integer factor. Inputs with
/// non-divisible dimensions are center-cropped to the largest multiple first.
pub fn bicubic_downsample(x: &ImageTensor, scale: usize) -> Result<ImageTensor> {
    validate_scale(scale)?;
    let x = x.crop_to_multiple(scale)?;
    let (h, w, _) = x.pixels().dim();
    let out = resample_hwc(x.pixels(), h / scale, w / scale);
    ImageTensor::from_clipped(out, x.color_space())
}

/// Bicubic magnification by an integer factor.
pub fn bicubic_upsample(x: &ImageTensor, scale: usize) -> Result<ImageTensor> {
    validate_scale(scale)?;
    let (h, w, _) = x.pixels().dim();
    let out = resample_hwc(x.pixels(), h * scale, w * scale);
    ImageTensor::from_clipped(out, x.color_space())
}

/// Resize to an arbitrary target (used by the semantic thumbnail and the
/// posterior's observation proxy).
pub fn bicubic_resize_raw(pixels: &Array3<f64>, oh: usize, ow: usize) -> Array3<f64> {
    resample_hwc(pixels, oh, ow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ColorSpace;

    /// Direct 2-D kernel-evaluation oracle: for every output pixel, sum
    /// kernel weights over the full (reflected) input without the separable
    /// split. Independent of the row/column implementation above.
    fn bicubic_down_oracle(pixels: &Array3<f64>, scale: usize) -> Array3<f64> {
        let (h, w, c) = pixels.dim();
        let (oh, ow) = (h / scale, w / scale);
        let s = scale as f64;
        let mut out = Array3::zeros((oh, ow, c));
        for oi in 0..oh {
            for oj in 0..ow {
                let uc = (oi as f64 + 0.5) * s - 0.5;
                let vc = (oj as f64 + 0.5) * s - 0.5;
                let il = (uc - 2.0 * s).floor() as isize + 1;
                let ir = (uc + 2.0 * s).floor() as isize;
                let jl = (vc - 2.0 * s).floor() as isize + 1;
                let jr = (vc + 2.0 * s).floor() as isize;
                let mut wsum = 0.0;
                let mut acc = vec![0.0; c];
                for ii in il..=ir {
                    let wi = cubic_kernel((ii as f64 - uc) / s);
                    for jj in jl..=jr {
                        let wj = cubic_kernel((jj as f64 - vc) / s);
                        let ri = reflect_index(ii, h);
                        let rj = reflect_index(jj, w);
                        wsum += wi * wj;
                        for ch in 0..c {
                            acc[ch] += wi * wj * pixels[[ri, rj, ch]];
                        }
                    }
                }
                for ch in 0..c {
                    out[[oi, oj, ch]] = acc[ch] / wsum;
                }
            }
        }
        out
    }

    #[test]
    fn constant_image_stays_constant() {
        for &scale in &[2usize, 3, 4, 8] {
            let img = ImageTensor::constant(16, 16, 3, 0.5).unwrap();
            let down = bicubic_downsample(&img, scale).unwrap();
            for &v in down.pixels().iter() {
                assert!((v - 0.5).abs() < 1e-6, "scale {scale}: {v}");
            }
        }
    }

    #[test]
    fn rejects_bad_scale() {
        let img = ImageTensor::constant(16, 16, 1, 0.5).unwrap();
        assert!(matches!(
            bicubic_downsample(&img, 5),
            Err(crate::error::Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn ramp_matches_kernel_evaluation_oracle() {
        // 8x8 linear ramp, scale 2 -> 4x4.
        let mut arr = Array3::zeros((8, 8, 1));
        for i in 0..8 {
            for j in 0..8 {
                arr[[i, j, 0]] = (i * 8 + j) as f64 / 63.0;
            }
        }
        let img = ImageTensor::new(arr.clone(), ColorSpace::Y).unwrap();
        let got = bicubic_downsample(&img, 2).unwrap();
        let want = bicubic_down_oracle(&arr, 2);
        assert_eq!(got.pixels().dim(), (4, 4, 1));
        for i in 0..4 {
            for j in 0..4 {
                let g = got.pixels()[[i, j, 0]];
                let w = want[[i, j, 0]].clamp(0.0, 1.0);
                assert!((g - w).abs() < 1e-6, "({i},{j}): {g} vs {w}");
            }
        }
    }

    #[test]
    fn random_image_matches_oracle_all_scales() {
        use rand::Rng;
        let mut rng = crate::rng::stream(5, "bicubic-test", &[]);
        let arr = Array3::from_shape_fn((24, 24, 3), |_| rng.gen_range(0.1..0.9));
        let img = ImageTensor::new(arr.clone(), ColorSpace::Rgb).unwrap();
        for &scale in &[2usize, 3, 4] {
            let got = bicubic_downsample(&img, scale).unwrap();
            let want = bicubic_down_oracle(&arr, scale);
            let mut max = 0.0f64;
            for (g, w) in got.pixels().iter().zip(want.iter()) {
                max = max.max((g - w.clamp(0.0, 1.0)).abs());
            }
            assert!(max < 1e-6, "scale {scale}: max diff {max}");
        }
    }

    #[test]
    fn band_limited_sinusoid_round_trip() {
        // Nyquist-safe sinusoid: period 32 px at HR, amplitude 0.2.
        let n = 64;
        let mut arr = Array3::zeros((n, n, 1));
        for i in 0..n {
            for j in 0..n {
                let phase = 2.0 * std::f64::consts::PI * (i as f64 + 0.7 * j as f64) / 32.0;
                arr[[i, j, 0]] = 0.5 + 0.2 * phase.sin();
            }
        }
        let img = ImageTensor::new(arr, ColorSpace::Y).unwrap();
        let down = bicubic_downsample(&img, 4).unwrap();
        let up = bicubic_upsample(&down, 4).unwrap();
        let rms = img.rms_diff(&up);
        assert!(rms < 1e-2, "round-trip RMS {rms}");
    }
}
