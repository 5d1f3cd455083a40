//! Additive white Gaussian noise, specified on the conventional 0–255 scale.

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::rng;

/// Add N(0, (sigma/255)²) per pixel and channel, then clip. The same
/// `(seed)` always produces byte-identical output.
pub fn add_awgn(x: &ImageTensor, sigma: f64, seed: u64) -> Result<ImageTensor> {
    if sigma < 0.0 {
        return Err(Error::invalid_spec("noise sigma must be nonnegative"));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, sigma / 255.0).expect("sigma validated");
    let mut stream = rng::stream(seed, "awgn", &[]);
    let mut out = x.pixels().clone();
    for v in out.iter_mut() {
        *v += normal.sample(&mut stream);
    }
    ImageTensor::from_clipped(out, x.color_space())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_zero_is_identity() {
        let img = ImageTensor::constant(8, 8, 3, 0.42).unwrap();
        let out = add_awgn(&img, 0.0, 1).unwrap();
        assert_eq!(img.pixels(), out.pixels());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let img = ImageTensor::constant(16, 16, 3, 0.5).unwrap();
        let a = add_awgn(&img, 15.0, 99).unwrap();
        let b = add_awgn(&img, 15.0, 99).unwrap();
        assert_eq!(a.pixels(), b.pixels());
        let c = add_awgn(&img, 15.0, 100).unwrap();
        assert_ne!(a.pixels(), c.pixels());
    }

    #[test]
    fn sample_std_matches_sigma() {
        // Mid-gray keeps clipping out of play (8.5 sigma margin).
        let img = ImageTensor::constant(256, 256, 1, 0.5).unwrap();
        let out = add_awgn(&img, 15.0, 7).unwrap();
        let diffs: Vec<f64> = out
            .pixels()
            .iter()
            .zip(img.pixels().iter())
            .map(|(a, b)| a - b)
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        let std = var.sqrt();
        let target = 15.0 / 255.0;
        let se = target / (2.0 * (n - 1.0)).sqrt();
        assert!(
            (std - target).abs() < 3.0 * se,
            "std {std} vs target {target} (se {se})"
        );
    }
}
