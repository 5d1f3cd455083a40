//! PSNR and SSIM on `[0, 1]` image tensors.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image::ImageTensor;

/// Identical images report this sentinel instead of +inf.
pub const PSNR_CAP_DB: f64 = 100.0;

fn check_same_shape(a: &ImageTensor, b: &ImageTensor) -> Result<()> {
    if a.pixels().dim() != b.pixels().dim() {
        return Err(Error::invalid_input(format!(
            "shape mismatch: {:?} vs {:?}",
            a.pixels().dim(),
            b.pixels().dim()
        )));
    }
    Ok(())
}

fn crop_view<'a>(
    img: &'a ImageTensor,
    crop: usize,
) -> Result<ndarray::ArrayView3<'a, f64>> {
    let (h, w, _) = img.pixels().dim();
    if 2 * crop >= h || 2 * crop >= w {
        return Err(Error::invalid_input("border crop larger than image"));
    }
    Ok(img
        .pixels()
        .slice(ndarray::s![crop..h - crop, crop..w - crop, ..]))
}

/// Peak signal-to-noise ratio in dB: `10·log10(1/MSE)` on the [0,1] scale
/// after cropping `crop` border pixels, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &ImageTensor, b: &ImageTensor, crop: usize) -> Result<f64> {
    check_same_shape(a, b)?;
    let av = crop_view(a, crop)?;
    let bv = crop_view(b, crop)?;
    let n = av.len() as f64;
    let mse: f64 = av
        .iter()
        .zip(bv.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Gaussian window weights, normalized, as a flat `[SSIM_WINDOW]` profile.
fn window_profile() -> Vec<f64> {
    crate::data::gaussian_kernel(SSIM_SIGMA, SSIM_WINDOW)
}

/// Weighted local means over valid positions, separable pass.
fn local_means(plane: &Array2<f64>, w1d: &[f64]) -> Array2<f64> {
    let (h, w) = plane.dim();
    let k = w1d.len();
    let oh = h - k + 1;
    let ow = w - k + 1;
    let mut rows = Array2::zeros((oh, w));
    for i in 0..oh {
        for j in 0..w {
            let mut acc = 0.0;
            for (t, &wt) in w1d.iter().enumerate() {
                acc += wt * plane[[i + t, j]];
            }
            rows[[i, j]] = acc;
        }
    }
    let mut out = Array2::zeros((oh, ow));
    for i in 0..oh {
        for j in 0..ow {
            let mut acc = 0.0;
            for (t, &wt) in w1d.iter().enumerate() {
                acc += wt * rows[[i, j + t]];
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Mean local SSIM with an 11×11 Gaussian window (σ = 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1. Windows are fully interior (valid mode);
/// multi-channel images average the per-channel scores.
pub fn ssim(a: &ImageTensor, b: &ImageTensor, crop: usize) -> Result<f64> {
    check_same_shape(a, b)?;
    let av = crop_view(a, crop)?;
    let bv = crop_view(b, crop)?;
    let (h, w, c) = av.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid_input("image smaller than SSIM window"));
    }
    let w1d = window_profile();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let mut total = 0.0;
    for ch in 0..c {
        let pa: Array2<f64> = av.index_axis(ndarray::Axis(2), ch).to_owned();
        let pb: Array2<f64> = bv.index_axis(ndarray::Axis(2), ch).to_owned();
        let mu_a = local_means(&pa, &w1d);
        let mu_b = local_means(&pb, &w1d);
        let aa = local_means(&(&pa * &pa), &w1d);
        let bb = local_means(&(&pb * &pb), &w1d);
        let ab = local_means(&(&pa * &pb), &w1d);
        let mut acc = 0.0;
        for i in 0..mu_a.nrows() {
            for j in 0..mu_a.ncols() {
                let (ma, mb) = (mu_a[[i, j]], mu_b[[i, j]]);
                let va = aa[[i, j]] - ma * ma;
                let vb = bb[[i, j]] - mb * mb;
                let cov = ab[[i, j]] - ma * mb;
                let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
                let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
                acc += num / den;
            }
        }
        total += acc / (mu_a.len() as f64);
    }
    Ok(total / c as f64)
}

/// Scalar SSIM of two constant images — the closed form used by tests.
pub fn ssim_constant_closed_form(v1: f64, v2: f64) -> f64 {
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    // variances and covariance vanish; the structure term degenerates to
    // c2/c2 = 1 and only luminance remains.
    ((2.0 * v1 * v2 + c1) / (v1 * v1 + v2 * v2 + c1)) * (c2 / c2)
}
