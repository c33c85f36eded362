//! Abstract contracts the forensics engine depends on, so a different
//! classifier architecture or a true generative-model reconstructor can be
//! plugged in behind the same pipeline.

use bdf_core::Real;
use ndarray::{Array1, Array2, Array3};

/// A differentiable image classifier.
pub trait Classifier<F: Real>: Sync {
    fn num_classes(&self) -> usize;
    /// `(H, W, C)` expected input geometry.
    fn input_dim(&self) -> (usize, usize, usize);
    /// Raw logits, one row per image.
    fn logits(&self, images: &[Array3<F>]) -> Array2<F>;
    /// Mean cross-entropy to `labels` and its gradient w.r.t. each image.
    fn ce_input_grads(&self, images: &[Array3<F>], labels: &[usize]) -> (F, Vec<Array3<F>>);

    fn predict(&self, images: &[Array3<F>]) -> Vec<usize> {
        let logits = self.logits(images);
        logits
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (k, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }

    /// Fraction of images classified as `labels`.
    fn accuracy(&self, images: &[Array3<F>], labels: &[usize]) -> f64 {
        if images.is_empty() {
            return 0.0;
        }
        let preds = self.predict(images);
        let hits = preds
            .iter()
            .zip(labels.iter())
            .filter(|(p, l)| p == l)
            .count();
        hits as f64 / images.len() as f64
    }
}

/// Deterministic feature embedding standing in for a perceptual metric.
pub trait FeatureSpace<F: Real>: Sync {
    fn feature_dim(&self) -> usize;
    fn features(&self, images: &[Array3<F>]) -> Array2<F>;
    /// Pushes feature-space gradients back to image space.
    fn feature_input_grads(&self, images: &[Array3<F>], dfeatures: &Array2<F>) -> Vec<Array3<F>>;

    fn features_one(&self, image: &Array3<F>) -> Array1<F> {
        self.features(std::slice::from_ref(image))
            .row(0)
            .to_owned()
    }
}

/// Learned projection onto the clean-image manifold. Outputs are valid
/// images in `[0, 1]`; gradients flow through the projection.
pub trait Reconstructor<F: Real>: Sync {
    fn input_dim(&self) -> (usize, usize, usize);
    fn reconstruct_batch(&self, inputs: &[Array3<F>]) -> Vec<Array3<F>>;
    /// Input gradients for the given upstream output gradients.
    fn reconstruct_input_grads(
        &self,
        inputs: &[Array3<F>],
        upstream: &[Array3<F>],
    ) -> Vec<Array3<F>>;

    fn reconstruct(&self, input: &Array3<F>) -> Array3<F> {
        self.reconstruct_batch(std::slice::from_ref(input))
            .into_iter()
            .next()
            .expect("one output per input")
    }
}
