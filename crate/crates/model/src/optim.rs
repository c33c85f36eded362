//! Adam optimizer operating on [`Param`] buffers.

use crate::layers::Param;
use bdf_core::Real;

#[derive(Debug, Clone, Copy)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Adam {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    /// One bias-corrected update; `t` is the 1-based step counter.
    pub fn step<F: Real>(&self, params: &mut [&mut Param<F>], t: usize) {
        let lr = F::from_f64(self.lr);
        let b1 = F::from_f64(self.beta1);
        let b2 = F::from_f64(self.beta2);
        let eps = F::from_f64(self.eps);
        let corr1 = F::from_f64(1.0 - self.beta1.powi(t as i32));
        let corr2 = F::from_f64(1.0 - self.beta2.powi(t as i32));
        for p in params.iter_mut() {
            let g = p.grad.clone();
            ndarray::Zip::from(&mut p.m).and(&g).for_each(|m, &gv| {
                *m = b1 * *m + (F::one() - b1) * gv;
            });
            ndarray::Zip::from(&mut p.v).and(&g).for_each(|v, &gv| {
                *v = b2 * *v + (F::one() - b2) * gv * gv;
            });
            ndarray::Zip::from(&mut p.value)
                .and(&p.m)
                .and(&p.v)
                .for_each(|val, &m, &v| {
                    let mhat = m / corr1;
                    let vhat = v / corr2;
                    *val = *val - lr * mhat / (vhat.sqrt() + eps);
                });
        }
    }

    /// Zero every gradient buffer.
    pub fn zero_grads<F: Real>(params: &mut [&mut Param<F>]) {
        for p in params.iter_mut() {
            p.zero_grad();
        }
    }
}
