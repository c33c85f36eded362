//! Mini-batch training loops. Each loop is single-threaded and fully
//! deterministic given its seed; callers parallelize across independent
//! models instead.

use crate::cnn::SmallCnn;
use crate::denoiser::Denoiser;
use crate::error::Result;
use crate::optim::Adam;
use bdf_core::image::ImageTensor;
use bdf_core::Real;
use ndarray::{Array3, Array4};
use rand::seq::SliceRandom;

/// Packs a subset of images (by index) into an `(N, C, H, W)` batch.
fn gather_batch<F: Real>(images: &[ImageTensor<F>], idx: &[usize]) -> Array4<F> {
    let (h, w, c) = images[0].dim();
    let mut out = Array4::zeros((idx.len(), c, h, w));
    for (n, &i) in idx.iter().enumerate() {
        let img = images[i].data();
        for ii in 0..h {
            for jj in 0..w {
                for k in 0..c {
                    out[[n, k, ii, jj]] = img[[ii, jj, k]];
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 4,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Supervised training on `(images, labels)`. Returns the mean loss per
/// epoch; a non-finite loss aborts with a divergence error.
pub fn train_classifier<F: Real>(
    model: &mut SmallCnn<F>,
    images: &[ImageTensor<F>],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let mut rng = bdf_core::rng::derived(cfg.seed, "train-classifier");
    let adam = Adam::with_lr(cfg.lr);
    let mut order: Vec<usize> = (0..images.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut t = 0usize;
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let x = gather_batch(images, chunk);
            Adam::zero_grads(&mut model.params_mut());
            let loss = model.ce_train_step(&x, &batch_labels)?;
            t += 1;
            adam.step(&mut model.params_mut(), t);
            epoch_loss += loss.to_f64();
            batches += 1;
        }
        losses.push(epoch_loss / batches.max(1) as f64);
    }
    Ok(losses)
}

/// Denoising objective: reconstruct each clean image from itself plus
/// Gaussian noise of standard deviation `noise_level` (resampled per
/// epoch). Returns the mean loss per epoch.
pub fn train_denoiser<F: Real>(
    model: &mut Denoiser<F>,
    clean: &[ImageTensor<F>],
    noise_level: f64,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let mut rng = bdf_core::rng::derived(cfg.seed, "train-denoiser");
    let adam = Adam::with_lr(cfg.lr);
    let mut order: Vec<usize> = (0..clean.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let sigma = F::from_f64(noise_level);
    let mut t = 0usize;
    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let y = gather_batch(clean, chunk);
            let mut x = y.clone();
            for v in x.iter_mut() {
                *v = *v + sigma * F::std_normal(&mut rng);
            }
            Adam::zero_grads(&mut model.params_mut());
            let loss = model.mse_train_step(&x, &y)?;
            t += 1;
            adam.step(&mut model.params_mut(), t);
            epoch_loss += loss.to_f64();
            batches += 1;
        }
        losses.push(epoch_loss / batches.max(1) as f64);
    }
    Ok(losses)
}

/// Mean reconstruction MSE over a held-out set (no noise added).
pub fn reconstruction_mse<F: Real>(model: &Denoiser<F>, images: &[ImageTensor<F>]) -> f64 {
    use crate::traits::Reconstructor;
    let mut total = 0.0;
    let mut count = 0.0;
    for chunk in images.chunks(64) {
        let arrays: Vec<Array3<F>> = chunk.iter().map(|t| t.data().clone()).collect();
        let outs = model.reconstruct_batch(&arrays);
        for (out, img) in outs.iter().zip(arrays.iter()) {
            for (&a, &b) in out.iter().zip(img.iter()) {
                let d = a.to_f64() - b.to_f64();
                total += d * d;
                count += 1.0;
            }
        }
    }
    total / count
}
