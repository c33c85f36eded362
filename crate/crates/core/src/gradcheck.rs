//! Central finite-difference utilities used to verify the hand-derived
//! gradients throughout the workspace.

use crate::Real;
use ndarray::{ArrayD, IxDyn};

/// Central finite-difference gradient of a scalar function of a flat
/// parameter vector viewed as an array of shape `shape`.
pub fn central_diff<F, G>(params: &ArrayD<F>, step: F, mut f: G) -> ArrayD<F>
where
    F: Real,
    G: FnMut(&ArrayD<F>) -> F,
{
    let mut grad = ArrayD::<F>::zeros(IxDyn(params.shape()));
    let mut work = params.clone();
    let two = F::from_f64(2.0);
    for idx in 0..params.len() {
        let orig = params.as_slice().unwrap()[idx];
        work.as_slice_mut().unwrap()[idx] = orig + step;
        let plus = f(&work);
        work.as_slice_mut().unwrap()[idx] = orig - step;
        let minus = f(&work);
        work.as_slice_mut().unwrap()[idx] = orig;
        grad.as_slice_mut().unwrap()[idx] = (plus - minus) / (two * step);
    }
    grad
}

/// Maximum relative error between an analytic and a numeric gradient,
/// with an absolute floor to keep near-zero entries comparable.
pub fn max_rel_err<F: Real>(analytic: &ArrayD<F>, numeric: &ArrayD<F>, floor: F) -> F {
    let mut worst = F::zero();
    for (&a, &n) in analytic.iter().zip(numeric.iter()) {
        let denom = a.abs().max(n.abs()).max(floor);
        let err = (a - n).abs() / denom;
        if err > worst {
            worst = err;
        }
    }
    worst
}

/// Central finite differences plus a per-coordinate smoothness mask.
///
/// Networks with ReLU and max-pooling are only piecewise smooth: when the
/// probe interval `[x−h, x+h]` straddles a kink the central difference is a
/// secant, not a derivative. Such coordinates are detected by comparing the
/// two one-sided differences and masked out; callers assert that the mask
/// covers nearly everything.
pub fn central_diff_masked<F, G>(
    params: &ArrayD<F>,
    step: F,
    mut f: G,
) -> (ArrayD<F>, Vec<bool>)
where
    F: Real,
    G: FnMut(&ArrayD<F>) -> F,
{
    let mut grad = ArrayD::<F>::zeros(IxDyn(params.shape()));
    let mut smooth = vec![true; params.len()];
    let mut work = params.clone();
    let two = F::from_f64(2.0);
    let center = f(&work);
    for idx in 0..params.len() {
        let orig = params.as_slice().unwrap()[idx];
        work.as_slice_mut().unwrap()[idx] = orig + step;
        let plus = f(&work);
        work.as_slice_mut().unwrap()[idx] = orig - step;
        let minus = f(&work);
        work.as_slice_mut().unwrap()[idx] = orig;
        let central = (plus - minus) / (two * step);
        let fwd = (plus - center) / step;
        let bwd = (center - minus) / step;
        let scale = fwd.abs().max(bwd.abs()).max(F::from_f64(1e-6));
        if (fwd - bwd).abs() / scale > F::from_f64(1e-3) {
            smooth[idx] = false;
        }
        grad.as_slice_mut().unwrap()[idx] = central;
    }
    (grad, smooth)
}

/// Worst relative error over coordinates marked smooth; also returns the
/// fraction of smooth coordinates so callers can reject degenerate masks.
pub fn max_rel_err_masked<F: Real>(
    analytic: &ArrayD<F>,
    numeric: &ArrayD<F>,
    smooth: &[bool],
    floor: F,
) -> (F, f64) {
    let mut worst = F::zero();
    let mut kept = 0usize;
    for ((&a, &n), &ok) in analytic.iter().zip(numeric.iter()).zip(smooth.iter()) {
        if !ok {
            continue;
        }
        kept += 1;
        let denom = a.abs().max(n.abs()).max(floor);
        let err = (a - n).abs() / denom;
        if err > worst {
            worst = err;
        }
    }
    (worst, kept as f64 / smooth.len().max(1) as f64)
}
