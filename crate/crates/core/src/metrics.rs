//! Image-quality metrics used to validate decompositions: mean absolute
//! difference, PSNR, and windowed SSIM.

use crate::error::{CoreError, Result};
use crate::image::ImageTensor;
use crate::Real;
use ndarray::Axis;

/// SSIM window side length.
pub const SSIM_WINDOW: usize = 7;
/// SSIM stabilization constants (for a dynamic range of 1.0).
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
/// MSE floor for PSNR, capping identical images at 120 dB.
pub const MSE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Mean absolute difference.
    pub l1: f64,
    /// `10·log10(1 / MSE)` in dB, peak value 1.0, MSE floored at 1e-12.
    pub psnr: f64,
    /// Mean windowed SSIM (uniform 7x7 window, valid positions only).
    pub ssim: f64,
}

/// Computes `{L1, PSNR, SSIM}` between two equally shaped images.
pub fn image_metrics<F: Real>(a: &ImageTensor<F>, b: &ImageTensor<F>) -> Result<Metrics> {
    if !a.same_shape(b) {
        return Err(CoreError::dim(
            "image_metrics",
            format!("{:?} vs {:?}", a.dim(), b.dim()),
        ));
    }
    let (h, w, c) = a.dim();
    let n = (h * w * c) as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (&va, &vb) in a.data().iter().zip(b.data().iter()) {
        let d = va.to_f64() - vb.to_f64();
        abs_sum += d.abs();
        sq_sum += d * d;
    }
    let l1 = abs_sum / n;
    let mse = (sq_sum / n).max(MSE_FLOOR);
    let psnr = 10.0 * (1.0 / mse).log10();
    let ssim = ssim_mean(a, b);
    Ok(Metrics { l1, psnr, ssim })
}

/// Mean SSIM over all valid 7x7 windows and channels.
///
/// Images smaller than the window fall back to a single window covering the
/// whole image.
pub fn ssim_mean<F: Real>(a: &ImageTensor<F>, b: &ImageTensor<F>) -> f64 {
    let (h, w, c) = a.dim();
    let win = SSIM_WINDOW.min(h).min(w);
    let c1 = (SSIM_K1 * 1.0) * (SSIM_K1 * 1.0);
    let c2 = (SSIM_K2 * 1.0) * (SSIM_K2 * 1.0);
    let area = (win * win) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for k in 0..c {
        let pa = a.data().index_axis(Axis(2), k);
        let pb = b.data().index_axis(Axis(2), k);
        for i0 in 0..=(h - win) {
            for j0 in 0..=(w - win) {
                let mut sa = 0.0;
                let mut sb = 0.0;
                let mut saa = 0.0;
                let mut sbb = 0.0;
                let mut sab = 0.0;
                for i in i0..i0 + win {
                    for j in j0..j0 + win {
                        let va = pa[[i, j]].to_f64();
                        let vb = pb[[i, j]].to_f64();
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                }
                let mu_a = sa / area;
                let mu_b = sb / area;
                // Sample variances/covariance with the n−1 denominator.
                let var_a = (saa - sa * mu_a) / (area - 1.0);
                let var_b = (sbb - sb * mu_b) / (area - 1.0);
                let cov = (sab - sa * mu_b) / (area - 1.0);
                let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
                let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                total += num / den;
                count += 1;
            }
        }
    }
    total / count as f64
}
