//! The desk-scale subject classifier: four 3x3 conv blocks (16/16/32/32
//! channels, three 2x2 max-pools) followed by two dense layers. The same
//! architecture doubles as the frozen feature extractor, exposing its
//! penultimate activation as the perceptual embedding.

use crate::error::{ModelError, Result};
use crate::layers::{
    maxpool2, maxpool2_backward, relu, relu_backward, softmax_ce, Conv2d, ConvCache, Dense,
    DenseCache, Param, PoolCache,
};
use crate::traits::{Classifier, FeatureSpace};
use crate::{batch_from_images, images_from_batch};
use bdf_core::Real;
use ndarray::{Array2, Array3, Array4, ArrayD};
use std::path::Path;

pub const ARCH_ID: &str = "cnn4";
const CH: [usize; 4] = [16, 16, 32, 32];
const FC_HIDDEN: usize = 128;

#[derive(Debug, Clone)]
pub struct SmallCnn<F: Real> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub classes: usize,
    conv: [Conv2d<F>; 4],
    fc1: Dense<F>,
    fc2: Dense<F>,
}

pub struct CnnCache<F: Real> {
    conv_caches: Vec<ConvCache<F>>,
    relu_masks: Vec<Array4<F>>,
    pool_caches: Vec<PoolCache>,
    fc1_cache: DenseCache<F>,
    fc1_mask: Array2<F>,
    fc1_relu: Array2<F>,
    fc2_cache: DenseCache<F>,
}

impl<F: Real> SmallCnn<F> {
    /// Builds a randomly initialized classifier for `(h, w, c)` inputs.
    /// Spatial dims must be divisible by 8 (three pooling stages).
    pub fn new(h: usize, w: usize, c: usize, classes: usize, seed: u64) -> Self {
        assert!(h % 8 == 0 && w % 8 == 0, "input dims must be divisible by 8");
        let mut rng = bdf_core::rng::derived(seed, "cnn-init");
        let conv = [
            Conv2d::new(c, CH[0], &mut rng),
            Conv2d::new(CH[0], CH[1], &mut rng),
            Conv2d::new(CH[1], CH[2], &mut rng),
            Conv2d::new(CH[2], CH[3], &mut rng),
        ];
        let flat_dim = CH[3] * (h / 8) * (w / 8);
        let fc1 = Dense::new(flat_dim, FC_HIDDEN, &mut rng);
        let fc2 = Dense::new(FC_HIDDEN, classes, &mut rng);
        Self {
            height: h,
            width: w,
            channels: c,
            classes,
            conv,
            fc1,
            fc2,
        }
    }

    pub fn forward(&self, x: &Array4<F>) -> (Array2<F>, CnnCache<F>) {
        let mut conv_caches = Vec::with_capacity(4);
        let mut relu_masks = Vec::with_capacity(4);
        let mut pool_caches = Vec::with_capacity(3);

        let (c1, cc1) = self.conv[0].forward(x);
        let (a1, m1) = relu(&c1);
        conv_caches.push(cc1);
        relu_masks.push(m1);

        let (c2, cc2) = self.conv[1].forward(&a1);
        let (a2, m2) = relu(&c2);
        let (p2, pc2) = maxpool2(&a2);
        conv_caches.push(cc2);
        relu_masks.push(m2);
        pool_caches.push(pc2);

        let (c3, cc3) = self.conv[2].forward(&p2);
        let (a3, m3) = relu(&c3);
        let (p3, pc3) = maxpool2(&a3);
        conv_caches.push(cc3);
        relu_masks.push(m3);
        pool_caches.push(pc3);

        let (c4, cc4) = self.conv[3].forward(&p3);
        let (a4, m4) = relu(&c4);
        let (p4, pc4) = maxpool2(&a4);
        conv_caches.push(cc4);
        relu_masks.push(m4);
        pool_caches.push(pc4);

        let (n, ch, hh, ww) = p4.dim();
        let flat = p4
            .to_shape((n, ch * hh * ww))
            .expect("contiguous reshape")
            .to_owned();
        let (f1, fc1_cache) = self.fc1.forward(&flat);
        let (f1_relu, fc1_mask) = relu(&f1);
        let (logits, fc2_cache) = self.fc2.forward(&f1_relu);
        (
            logits,
            CnnCache {
                conv_caches,
                relu_masks,
                pool_caches,
                fc1_cache,
                fc1_mask,
                fc1_relu: f1_relu,
                fc2_cache,
            },
        )
    }

    fn backward_from_fc1relu_input(&self, cache: &CnnCache<F>, d_f1relu: &Array2<F>) -> Array4<F> {
        let d_f1 = relu_backward(&cache.fc1_mask, d_f1relu);
        let d_flat = self.fc1.backward_input(&cache.fc1_cache, &d_f1);
        let n = d_flat.dim().0;
        let (hh, ww) = (self.height / 8, self.width / 8);
        let d_p4 = d_flat
            .to_shape((n, CH[3], hh, ww))
            .expect("contiguous reshape")
            .to_owned();

        let d_a4 = maxpool2_backward(&cache.pool_caches[2], &d_p4);
        let d_c4 = relu_backward(&cache.relu_masks[3], &d_a4);
        let d_p3 = self.conv[3].backward_input(&cache.conv_caches[3], &d_c4);

        let d_a3 = maxpool2_backward(&cache.pool_caches[1], &d_p3);
        let d_c3 = relu_backward(&cache.relu_masks[2], &d_a3);
        let d_p2 = self.conv[2].backward_input(&cache.conv_caches[2], &d_c3);

        let d_a2 = maxpool2_backward(&cache.pool_caches[0], &d_p2);
        let d_c2 = relu_backward(&cache.relu_masks[1], &d_a2);
        let d_a1 = self.conv[1].backward_input(&cache.conv_caches[1], &d_c2);

        let d_c1 = relu_backward(&cache.relu_masks[0], &d_a1);
        self.conv[0].backward_input(&cache.conv_caches[0], &d_c1)
    }

    /// Input gradient for a logits gradient; parameters stay frozen.
    pub fn backward_input(&self, cache: &CnnCache<F>, dlogits: &Array2<F>) -> Array4<F> {
        let d_f1relu = self.fc2.backward_input(&cache.fc2_cache, dlogits);
        self.backward_from_fc1relu_input(cache, &d_f1relu)
    }

    fn backward_train(&mut self, cache: &CnnCache<F>, dlogits: &Array2<F>) -> Array4<F> {
        let d_f1relu = self.fc2.backward_train(&cache.fc2_cache, dlogits);
        let d_f1 = relu_backward(&cache.fc1_mask, &d_f1relu);
        let d_flat = self.fc1.backward_train(&cache.fc1_cache, &d_f1);
        let n = d_flat.dim().0;
        let (hh, ww) = (self.height / 8, self.width / 8);
        let d_p4 = d_flat
            .to_shape((n, CH[3], hh, ww))
            .expect("contiguous reshape")
            .to_owned();

        let d_a4 = maxpool2_backward(&cache.pool_caches[2], &d_p4);
        let d_c4 = relu_backward(&cache.relu_masks[3], &d_a4);
        let d_p3 = self.conv[3].backward_train(&cache.conv_caches[3], &d_c4);

        let d_a3 = maxpool2_backward(&cache.pool_caches[1], &d_p3);
        let d_c3 = relu_backward(&cache.relu_masks[2], &d_a3);
        let d_p2 = self.conv[2].backward_train(&cache.conv_caches[2], &d_c3);

        let d_a2 = maxpool2_backward(&cache.pool_caches[0], &d_p2);
        let d_c2 = relu_backward(&cache.relu_masks[1], &d_a2);
        let d_a1 = self.conv[1].backward_train(&cache.conv_caches[1], &d_c2);

        let d_c1 = relu_backward(&cache.relu_masks[0], &d_a1);
        self.conv[0].backward_train(&cache.conv_caches[0], &d_c1)
    }

    /// One supervised step: forward, mean CE, backward into grad buffers.
    pub fn ce_train_step(&mut self, x: &Array4<F>, labels: &[usize]) -> Result<F> {
        let (logits, cache) = self.forward(x);
        let (loss, dlogits) = softmax_ce(&logits, labels)?;
        if !loss.to_f64().is_finite() {
            return Err(ModelError::Diverged {
                context: "classifier step".into(),
                loss: loss.to_f64(),
            });
        }
        self.backward_train(&cache, &dlogits);
        Ok(loss)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        let mut out = Vec::new();
        for c in self.conv.iter_mut() {
            out.extend(c.params_mut());
        }
        out.extend(self.fc1.params_mut());
        out.extend(self.fc2.params_mut());
        out
    }

    fn param_arrays(&self) -> Vec<ArrayD<f32>> {
        let mut out = Vec::new();
        let mut push = |a: &ArrayD<F>| {
            out.push(a.mapv(|v| v.to_f64() as f32));
        };
        for c in &self.conv {
            push(&c.weight.value);
            push(&c.bias.value);
        }
        push(&self.fc1.weight.value);
        push(&self.fc1.bias.value);
        push(&self.fc2.weight.value);
        push(&self.fc2.bias.value);
        out
    }

    fn set_param_arrays(&mut self, arrs: &[ArrayD<f32>]) -> Result<()> {
        let mut params = self.params_mut();
        if arrs.len() != params.len() {
            return Err(ModelError::Dimension {
                op: "SmallCnn::set_param_arrays",
                detail: format!("{} records vs {} parameters", arrs.len(), params.len()),
            });
        }
        for (p, a) in params.iter_mut().zip(arrs.iter()) {
            if p.value.shape() != a.shape() {
                return Err(ModelError::Dimension {
                    op: "SmallCnn::set_param_arrays",
                    detail: format!("{:?} vs {:?}", p.value.shape(), a.shape()),
                });
            }
            p.value = a.mapv(|v| F::from_f64(v as f64));
        }
        Ok(())
    }

    /// Persists all parameters as a sequence of container records.
    pub fn save_params(&self, path: &Path) -> Result<()> {
        bdf_core::container::write_arrays(path, &self.param_arrays())?;
        Ok(())
    }

    pub fn load_params(&mut self, path: &Path) -> Result<()> {
        let arrs = bdf_core::container::read_arrays(path)?;
        self.set_param_arrays(&arrs)
    }

    /// Lifts the parameters into another float width (used to gradient-check
    /// `f32` pipelines in `f64`).
    pub fn cast<G: Real>(&self) -> SmallCnn<G> {
        let mut out = SmallCnn::<G>::new(self.height, self.width, self.channels, self.classes, 0);
        let arrs = self.param_arrays();
        out.set_param_arrays(&arrs).expect("same architecture");
        out
    }
}

impl<F: Real> Classifier<F> for SmallCnn<F> {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn input_dim(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    fn logits(&self, images: &[Array3<F>]) -> Array2<F> {
        let batch = batch_from_images(images);
        self.forward(&batch).0
    }

    fn ce_input_grads(&self, images: &[Array3<F>], labels: &[usize]) -> (F, Vec<Array3<F>>) {
        let batch = batch_from_images(images);
        let (logits, cache) = self.forward(&batch);
        let (loss, dlogits) = softmax_ce(&logits, labels).expect("label/batch sizes match");
        let dx = self.backward_input(&cache, &dlogits);
        (loss, images_from_batch(&dx))
    }
}

impl<F: Real> FeatureSpace<F> for SmallCnn<F> {
    fn feature_dim(&self) -> usize {
        FC_HIDDEN
    }

    fn features(&self, images: &[Array3<F>]) -> Array2<F> {
        let batch = batch_from_images(images);
        let (_, cache) = self.forward(&batch);
        cache.fc1_relu
    }

    fn feature_input_grads(&self, images: &[Array3<F>], dfeatures: &Array2<F>) -> Vec<Array3<F>> {
        let batch = batch_from_images(images);
        let (_, cache) = self.forward(&batch);
        let dx = self.backward_from_fc1relu_input(&cache, dfeatures);
        images_from_batch(&dx)
    }
}
