//! Denoising encoder-decoder that projects raw (possibly out-of-range)
//! images back onto the clean-image manifold. It plays the role a
//! pre-trained generative model would in a full-scale deployment: a filter
//! that removes out-of-distribution noise from unstamped estimates. The
//! decomposition engine only sees the [`Reconstructor`] contract.

use crate::error::{ModelError, Result};
use crate::layers::{
    relu, relu_backward, sigmoid, sigmoid_backward, upsample2, upsample2_backward, Conv2d,
    ConvCache, Param,
};
use crate::traits::Reconstructor;
use crate::{batch_from_images, images_from_batch};
use bdf_core::Real;
use ndarray::{Array3, Array4, ArrayD};
use std::path::Path;

pub const ARCH_ID: &str = "dae5";
const ENC: [usize; 2] = [12, 24];

/// Five-conv encoder-decoder with a 4x downsampled bottleneck and a sigmoid
/// output head, so reconstructions always live in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Denoiser<F: Real> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    enc1: Conv2d<F>,
    enc2: Conv2d<F>,
    mid: Conv2d<F>,
    dec1: Conv2d<F>,
    dec2: Conv2d<F>,
}

pub struct DenoiserCache<F: Real> {
    cc: Vec<ConvCache<F>>,
    masks: Vec<Array4<F>>,
    pools: Vec<crate::layers::PoolCache>,
    out: Array4<F>,
}

impl<F: Real> Denoiser<F> {
    pub fn new(h: usize, w: usize, c: usize, seed: u64) -> Self {
        assert!(h % 4 == 0 && w % 4 == 0, "input dims must be divisible by 4");
        let mut rng = bdf_core::rng::derived(seed, "denoiser-init");
        Self {
            height: h,
            width: w,
            channels: c,
            enc1: Conv2d::new(c, ENC[0], &mut rng),
            enc2: Conv2d::new(ENC[0], ENC[1], &mut rng),
            mid: Conv2d::new(ENC[1], ENC[1], &mut rng),
            dec1: Conv2d::new(ENC[1], ENC[0], &mut rng),
            dec2: Conv2d::new(ENC[0], c, &mut rng),
        }
    }

    pub fn forward(&self, x: &Array4<F>) -> (Array4<F>, DenoiserCache<F>) {
        let mut cc = Vec::with_capacity(5);
        let mut masks = Vec::with_capacity(4);
        let mut pools = Vec::with_capacity(2);

        let (c1, k1) = self.enc1.forward(x);
        let (a1, m1) = relu(&c1);
        let (p1, q1) = crate::layers::maxpool2(&a1);
        cc.push(k1);
        masks.push(m1);
        pools.push(q1);

        let (c2, k2) = self.enc2.forward(&p1);
        let (a2, m2) = relu(&c2);
        let (p2, q2) = crate::layers::maxpool2(&a2);
        cc.push(k2);
        masks.push(m2);
        pools.push(q2);

        let (c3, k3) = self.mid.forward(&p2);
        let (a3, m3) = relu(&c3);
        cc.push(k3);
        masks.push(m3);

        let u1 = upsample2(&a3);
        let (c4, k4) = self.dec1.forward(&u1);
        let (a4, m4) = relu(&c4);
        cc.push(k4);
        masks.push(m4);

        let u2 = upsample2(&a4);
        let (c5, k5) = self.dec2.forward(&u2);
        cc.push(k5);
        let out = sigmoid(&c5);
        let cache = DenoiserCache {
            cc,
            masks,
            pools,
            out: out.clone(),
        };
        (out, cache)
    }

    /// Pre-conv gradients in layer order `[d_c5, d_c4, d_c3, d_c2, d_c1]`,
    /// computed with frozen parameters.
    fn preconv_grads(&self, cache: &DenoiserCache<F>, dout: &Array4<F>) -> Vec<Array4<F>> {
        let d_c5 = sigmoid_backward(&cache.out, dout);
        let d_u2 = self.dec2.backward_input(&cache.cc[4], &d_c5);
        let d_a4 = upsample2_backward(&d_u2);
        let d_c4 = relu_backward(&cache.masks[3], &d_a4);
        let d_u1 = self.dec1.backward_input(&cache.cc[3], &d_c4);
        let d_a3 = upsample2_backward(&d_u1);
        let d_c3 = relu_backward(&cache.masks[2], &d_a3);
        let d_p2 = self.mid.backward_input(&cache.cc[2], &d_c3);
        let d_a2 = crate::layers::maxpool2_backward(&cache.pools[1], &d_p2);
        let d_c2 = relu_backward(&cache.masks[1], &d_a2);
        let d_p1 = self.enc2.backward_input(&cache.cc[1], &d_c2);
        let d_a1 = crate::layers::maxpool2_backward(&cache.pools[0], &d_p1);
        let d_c1 = relu_backward(&cache.masks[0], &d_a1);
        vec![d_c5, d_c4, d_c3, d_c2, d_c1]
    }

    /// Input gradient with frozen parameters.
    pub fn backward_input(&self, cache: &DenoiserCache<F>, dout: &Array4<F>) -> Array4<F> {
        let grads = self.preconv_grads(cache, dout);
        self.enc1.backward_input(&cache.cc[0], &grads[4])
    }

    /// Training backward: accumulates parameter gradients.
    pub fn backward_train(&mut self, cache: &DenoiserCache<F>, dout: &Array4<F>) {
        let grads = self.preconv_grads(cache, dout);
        self.dec2.backward_train(&cache.cc[4], &grads[0]);
        self.dec1.backward_train(&cache.cc[3], &grads[1]);
        self.mid.backward_train(&cache.cc[2], &grads[2]);
        self.enc2.backward_train(&cache.cc[1], &grads[3]);
        self.enc1.backward_train(&cache.cc[0], &grads[4]);
    }

    /// One denoising step: MSE between `reconstruct(noisy)` and `clean`.
    pub fn mse_train_step(&mut self, noisy: &Array4<F>, clean: &Array4<F>) -> Result<F> {
        let (out, cache) = self.forward(noisy);
        let n = F::from_f64(out.len() as f64);
        let diff = &out - clean;
        let loss = diff.mapv(|v| v * v).sum() / n;
        if !loss.to_f64().is_finite() {
            return Err(ModelError::Diverged {
                context: "denoiser step".into(),
                loss: loss.to_f64(),
            });
        }
        let two = F::from_f64(2.0);
        let dout = diff.mapv(|v| two * v / n);
        self.backward_train(&cache, &dout);
        Ok(loss)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        let mut out = Vec::new();
        out.extend(self.enc1.params_mut());
        out.extend(self.enc2.params_mut());
        out.extend(self.mid.params_mut());
        out.extend(self.dec1.params_mut());
        out.extend(self.dec2.params_mut());
        out
    }

    fn param_arrays(&self) -> Vec<ArrayD<f32>> {
        [&self.enc1, &self.enc2, &self.mid, &self.dec1, &self.dec2]
            .iter()
            .flat_map(|c| {
                vec![
                    c.weight.value.mapv(|v| v.to_f64() as f32),
                    c.bias.value.mapv(|v| v.to_f64() as f32),
                ]
            })
            .collect()
    }

    pub fn save_params(&self, path: &Path) -> Result<()> {
        bdf_core::container::write_arrays(path, &self.param_arrays())?;
        Ok(())
    }

    pub fn load_params(&mut self, path: &Path) -> Result<()> {
        let arrs = bdf_core::container::read_arrays(path)?;
        let mut params = self.params_mut();
        if arrs.len() != params.len() {
            return Err(ModelError::Dimension {
                op: "Denoiser::load_params",
                detail: format!("{} records vs {} parameters", arrs.len(), params.len()),
            });
        }
        for (p, a) in params.iter_mut().zip(arrs.iter()) {
            if p.value.shape() != a.shape() {
                return Err(ModelError::Dimension {
                    op: "Denoiser::load_params",
                    detail: format!("{:?} vs {:?}", p.value.shape(), a.shape()),
                });
            }
            p.value = a.mapv(|v| F::from_f64(v as f64));
        }
        Ok(())
    }

    pub fn cast<G: Real>(&self) -> Denoiser<G> {
        let mut out = Denoiser::<G>::new(self.height, self.width, self.channels, 0);
        let arrs = self.param_arrays();
        let mut params = out.params_mut();
        for (p, a) in params.iter_mut().zip(arrs.iter()) {
            p.value = a.mapv(|v| G::from_f64(v as f64));
        }
        out
    }
}

impl<F: Real> Reconstructor<F> for Denoiser<F> {
    fn input_dim(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    fn reconstruct_batch(&self, inputs: &[Array3<F>]) -> Vec<Array3<F>> {
        let batch = batch_from_images(inputs);
        let (out, _) = self.forward(&batch);
        images_from_batch(&out)
    }

    fn reconstruct_input_grads(
        &self,
        inputs: &[Array3<F>],
        upstream: &[Array3<F>],
    ) -> Vec<Array3<F>> {
        let batch = batch_from_images(inputs);
        let (_, cache) = self.forward(&batch);
        let dout = batch_from_images(upstream);
        let dx = self.backward_input(&cache, &dout);
        images_from_batch(&dx)
    }
}
