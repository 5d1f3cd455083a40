//! Separable Gaussian blur with reflect padding.

use ndarray::Array3;

use crate::data::resample::reflect_index;
use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Sampled Gaussian tap weights, normalized to sum 1.
pub fn gaussian_kernel(sigma: f64, kernel: usize) -> Vec<f64> {
    let c = (kernel / 2) as isize;
    let mut w: Vec<f64> = (0..kernel)
        .map(|i| {
            let x = i as isize - c;
            (-((x * x) as f64) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Gaussian blur. `sigma = 0` is the identity (bit-exact).
pub fn gaussian_blur(x: &ImageTensor, sigma: f64, kernel: usize) -> Result<ImageTensor> {
    if kernel % 2 == 0 {
        return Err(Error::invalid_spec(format!(
            "blur kernel must be odd, got {kernel}"
        )));
    }
    if sigma < 0.0 {
        return Err(Error::invalid_spec("blur sigma must be nonnegative"));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let taps = gaussian_kernel(sigma, kernel);
    let half = (kernel / 2) as isize;
    let (h, w, c) = x.pixels().dim();

    let mut rows = Array3::zeros((h, w, c));
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (t, &wt) in taps.iter().enumerate() {
                    let src = reflect_index(i as isize + t as isize - half, h);
                    acc += wt * x.pixels()[[src, j, ch]];
                }
                rows[[i, j, ch]] = acc;
            }
        }
    }
    let mut out = Array3::zeros((h, w, c));
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let mut acc = 0.0;
                for (t, &wt) in taps.iter().enumerate() {
                    let src = reflect_index(j as isize + t as isize - half, w);
                    acc += wt * rows[[i, src, ch]];
                }
                out[[i, j, ch]] = acc;
            }
        }
    }
    ImageTensor::from_clipped(out, x.color_space())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::ColorSpace;

    #[test]
    fn sigma_zero_is_identity() {
        let img = ImageTensor::constant(9, 9, 1, 0.3).unwrap();
        let out = gaussian_blur(&img, 0.0, 3).unwrap();
        assert_eq!(img.pixels(), out.pixels());
    }

    #[test]
    fn even_kernel_rejected() {
        let img = ImageTensor::constant(9, 9, 1, 0.3).unwrap();
        assert!(gaussian_blur(&img, 1.0, 4).is_err());
    }

    #[test]
    fn constant_preserved() {
        let img = ImageTensor::constant(12, 12, 3, 0.77).unwrap();
        let out = gaussian_blur(&img, 2.0, 5).unwrap();
        for &v in out.pixels().iter() {
            assert!((v - 0.77).abs() < 1e-6);
        }
    }

    #[test]
    fn impulse_matches_closed_form_weights() {
        // 5x5 impulse, sigma = 2, kernel = 3: taps are [e^{-1/8}, 1, e^{-1/8}]
        // normalized; the blurred center row is their outer product.
        let mut arr = Array3::zeros((9, 9, 1));
        arr[[4, 4, 0]] = 1.0;
        let img = ImageTensor::new(arr, ColorSpace::Y).unwrap();
        let out = gaussian_blur(&img, 2.0, 3).unwrap();

        let e = (-1.0f64 / 8.0).exp();
        let z = 1.0 + 2.0 * e;
        let w = [e / z, 1.0 / z, e / z];
        for dj in 0..3 {
            let want = w[1] * w[dj];
            let got = out.pixels()[[4, 3 + dj, 0]];
            assert!((got - want).abs() < 1e-12, "center row tap {dj}");
        }
        for di in 0..3 {
            for dj in 0..3 {
                let want = w[di] * w[dj];
                let got = out.pixels()[[3 + di, 3 + dj, 0]];
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_preserved_under_reflect_padding() {
        use rand::Rng;
        let mut rng = crate::rng::stream(2, "blur-test", &[]);
        // Constant-extended along borders so reflection cannot change mass.
        let arr = Array3::from_shape_fn((16, 16, 1), |(i, j, _)| {
            if i < 3 || i > 12 || j < 3 || j > 12 {
                0.5
            } else {
                rng.gen_range(0.2..0.8)
            }
        });
        let img = ImageTensor::new(arr, ColorSpace::Y).unwrap();
        let before = img.pixels().mean().unwrap();
        let out = gaussian_blur(&img, 1.0, 5).unwrap();
        let after = out.pixels().mean().unwrap();
        assert!((before - after).abs() < 1e-6);
    }
}
