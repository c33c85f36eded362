//! Metrics cross-checked against independent scalar-loop references.

use approx::assert_abs_diff_eq;
use bdf_core::image::ImageTensor;
use bdf_core::metrics::{image_metrics, SSIM_K1, SSIM_K2, SSIM_WINDOW};
use ndarray::Array3;
use rand::Rng;

/// Straight-line reference SSIM: no shared code with the implementation.
fn reference_ssim(a: &ImageTensor<f64>, b: &ImageTensor<f64>) -> f64 {
    let (h, w, c) = a.dim();
    let win = SSIM_WINDOW.min(h).min(w);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut vals = Vec::new();
    for k in 0..c {
        for i0 in 0..=(h - win) {
            for j0 in 0..=(w - win) {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for i in i0..i0 + win {
                    for j in j0..j0 + win {
                        xs.push(a.data()[[i, j, k]]);
                        ys.push(b.data()[[i, j, k]]);
                    }
                }
                let n = xs.len() as f64;
                let mx: f64 = xs.iter().sum::<f64>() / n;
                let my: f64 = ys.iter().sum::<f64>() / n;
                let vx: f64 = xs.iter().map(|v| (v - mx) * (v - mx)).sum::<f64>() / (n - 1.0);
                let vy: f64 = ys.iter().map(|v| (v - my) * (v - my)).sum::<f64>() / (n - 1.0);
                let cov: f64 = xs
                    .iter()
                    .zip(ys.iter())
                    .map(|(x, y)| (x - mx) * (y - my))
                    .sum::<f64>()
                    / (n - 1.0);
                vals.push(((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2)));
            }
        }
    }
    vals.iter().sum::<f64>() / vals.len() as f64
}

fn rand_image(rng: &mut bdf_core::rng::Rng, h: usize, w: usize, c: usize) -> ImageTensor<f64> {
    let mut a = Array3::zeros((h, w, c));
    for v in a.iter_mut() {
        *v = rng.gen::<f64>();
    }
    ImageTensor::new(a).unwrap()
}

#[test]
fn identical_images_hit_the_caps() {
    let mut rng = bdf_core::rng::seeded(1);
    let a = rand_image(&mut rng, 16, 16, 3);
    let m = image_metrics(&a, &a).unwrap();
    assert_eq!(m.l1, 0.0);
    assert_abs_diff_eq!(m.psnr, 120.0, epsilon = 1e-9);
    assert_abs_diff_eq!(m.ssim, 1.0, epsilon = 1e-9);
}

#[test]
fn maximal_difference() {
    let a = ImageTensor::<f64>::zeros(12, 12, 3).unwrap();
    let b = ImageTensor::<f64>::constant(12, 12, 3, 1.0).unwrap();
    let m = image_metrics(&a, &b).unwrap();
    assert_abs_diff_eq!(m.l1, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.psnr, 0.0, epsilon = 1e-9);
}

#[test]
fn random_pairs_match_scalar_loop_reference() {
    let mut rng = bdf_core::rng::seeded(99);
    for _ in 0..20 {
        let a = rand_image(&mut rng, 14, 11, 3);
        let b = rand_image(&mut rng, 14, 11, 3);
        let m = image_metrics(&a, &b).unwrap();

        // L1 reference.
        let mut l1 = 0.0;
        let mut mse = 0.0;
        let mut n = 0.0;
        for (x, y) in a.data().iter().zip(b.data().iter()) {
            l1 += (x - y).abs();
            mse += (x - y) * (x - y);
            n += 1.0;
        }
        l1 /= n;
        mse /= n;
        let psnr = 10.0 * (1.0 / mse.max(1e-12)).log10();
        assert_abs_diff_eq!(m.l1, l1, epsilon = 1e-6);
        assert_abs_diff_eq!(m.psnr, psnr, epsilon = 1e-6);
        assert_abs_diff_eq!(m.ssim, reference_ssim(&a, &b), epsilon = 1e-6);
    }
}

#[test]
fn ssim_is_symmetric() {
    let mut rng = bdf_core::rng::seeded(123);
    for _ in 0..10 {
        let a = rand_image(&mut rng, 10, 10, 1);
        let b = rand_image(&mut rng, 10, 10, 1);
        let ab = image_metrics(&a, &b).unwrap().ssim;
        let ba = image_metrics(&b, &a).unwrap().ssim;
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-12);
    }
}

#[test]
fn shape_mismatch_errors() {
    let a = ImageTensor::<f64>::zeros(8, 8, 3).unwrap();
    let b = ImageTensor::<f64>::zeros(8, 9, 3).unwrap();
    assert!(image_metrics(&a, &b).is_err());
}
