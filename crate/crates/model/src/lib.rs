//! Compact neural-network stack used by the forensics pipeline: a small
//! convolutional classifier, a denoising encoder-decoder that projects
//! images back onto the clean manifold, and the training loops for both.
//!
//! Everything is written directly against `ndarray` with hand-derived
//! backward passes, because the pipeline needs gradients with respect to
//! *inputs* (trigger inversion, attack decomposition, adversarial probes)
//! as much as gradients with respect to parameters.

pub mod adversarial;
pub mod cnn;
pub mod denoiser;
pub mod error;
pub mod layers;
pub mod optim;
pub mod train;
pub mod traits;

pub use cnn::SmallCnn;
pub use denoiser::Denoiser;
pub use error::{ModelError, Result};
pub use traits::{Classifier, FeatureSpace, Reconstructor};

use bdf_core::Real;
use ndarray::{Array3, Array4};

/// Packs `(H, W, C)` images into an `(N, C, H, W)` activation batch.
pub fn batch_from_images<F: Real>(images: &[Array3<F>]) -> Array4<F> {
    let (h, w, c) = images[0].dim();
    let mut out = Array4::zeros((images.len(), c, h, w));
    for (n, img) in images.iter().enumerate() {
        for i in 0..h {
            for j in 0..w {
                for k in 0..c {
                    out[[n, k, i, j]] = img[[i, j, k]];
                }
            }
        }
    }
    out
}

/// Unpacks an `(N, C, H, W)` batch back into `(H, W, C)` images.
pub fn images_from_batch<F: Real>(batch: &Array4<F>) -> Vec<Array3<F>> {
    let (n, c, h, w) = batch.dim();
    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        let mut img = Array3::zeros((h, w, c));
        for i in 0..h {
            for j in 0..w {
                for k in 0..c {
                    img[[i, j, k]] = batch[[idx, k, i, j]];
                }
            }
        }
        out.push(img);
    }
    out
}
