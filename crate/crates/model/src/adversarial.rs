//! Targeted projected-gradient-descent adversarial examples, used by the
//! adaptive-attack robustness checks.

use crate::traits::Classifier;
use bdf_core::image::clamp01;
use bdf_core::Real;
use ndarray::Array3;

/// Iterated targeted FGSM with an L-infinity ball of radius `eps` around
/// the original image, clipped to `[0, 1]` each step.
pub fn pgd_targeted<F: Real, M: Classifier<F>>(
    model: &M,
    image: &Array3<F>,
    target: usize,
    eps: f64,
    step: f64,
    iters: usize,
) -> Array3<F> {
    let eps_f = F::from_f64(eps);
    let step_f = F::from_f64(step);
    let mut adv = image.clone();
    for _ in 0..iters {
        let (_, grads) = model.ce_input_grads(std::slice::from_ref(&adv), &[target]);
        let g = &grads[0];
        // Descend the target CE: move against the gradient sign.
        ndarray::Zip::from(&mut adv).and(g).for_each(|a, &gv| {
            let sgn = if gv > F::zero() {
                F::one()
            } else if gv < F::zero() {
                -F::one()
            } else {
                F::zero()
            };
            *a = *a - step_f * sgn;
        });
        // Project back into the eps-ball and the image range.
        ndarray::Zip::from(&mut adv).and(image).for_each(|a, &x| {
            let lo = x - eps_f;
            let hi = x + eps_f;
            if *a < lo {
                *a = lo;
            }
            if *a > hi {
                *a = hi;
            }
            *a = clamp01(*a);
        });
    }
    adv
}
