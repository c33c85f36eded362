//! Differentiable stamping, unstamping, and normalization.
//!
//! The `*_raw` functions operate on plain arrays without range clamping and
//! come with hand-derived vector-Jacobian products (`*_vjp`) so optimization
//! loops can backpropagate through them. The public wrappers enforce the
//! image-range contracts: stamping clamps its output, unstamping does not
//! (the raw unstamped image feeds normalization and reconstruction first).

use crate::error::{CoreError, Result};
use crate::image::{clamp01, ChannelStats, ImageTensor};
use crate::trigger::{PatchTrigger, TransformTrigger};
use crate::Real;
use ndarray::{Array2, Array3, Axis};

/// Floor applied to the `1 − m` denominator when unstamping a patch.
pub const EPS_MASK: f64 = 1e-3;

fn check_patch_shapes<F: Real>(
    op: &'static str,
    x: &Array3<F>,
    mask: &Array2<F>,
    pattern: &Array3<F>,
) -> Result<()> {
    let (h, w, c) = x.dim();
    if mask.dim() != (h, w) {
        return Err(CoreError::dim(
            op,
            format!("image {h}x{w}x{c} vs mask {:?}", mask.dim()),
        ));
    }
    if pattern.dim() != (h, w, c) {
        return Err(CoreError::dim(
            op,
            format!("image {h}x{w}x{c} vs pattern {:?}", pattern.dim()),
        ));
    }
    Ok(())
}

/// `x·(1−m) + t·m`, no clamp. Affine in `x`, `m`, and `t`.
pub fn stamp_patch_raw<F: Real>(x: &Array3<F>, mask: &Array2<F>, pattern: &Array3<F>) -> Array3<F> {
    let (h, w, c) = x.dim();
    let mut out = Array3::zeros((h, w, c));
    for i in 0..h {
        for j in 0..w {
            let m = mask[[i, j]];
            for k in 0..c {
                out[[i, j, k]] = x[[i, j, k]] * (F::one() - m) + pattern[[i, j, k]] * m;
            }
        }
    }
    out
}

/// VJP of [`stamp_patch_raw`]: maps the upstream gradient `g` to gradients
/// w.r.t. `x`, `mask` (channel-summed), and `pattern`.
pub fn stamp_patch_vjp<F: Real>(
    x: &Array3<F>,
    mask: &Array2<F>,
    pattern: &Array3<F>,
    g: &Array3<F>,
) -> (Array3<F>, Array2<F>, Array3<F>) {
    let (h, w, c) = x.dim();
    let mut dx = Array3::zeros((h, w, c));
    let mut dmask = Array2::zeros((h, w));
    let mut dpattern = Array3::zeros((h, w, c));
    for i in 0..h {
        for j in 0..w {
            let m = mask[[i, j]];
            let mut dm = F::zero();
            for k in 0..c {
                let gv = g[[i, j, k]];
                dx[[i, j, k]] = gv * (F::one() - m);
                dpattern[[i, j, k]] = gv * m;
                dm = dm + gv * (pattern[[i, j, k]] - x[[i, j, k]]);
            }
            dmask[[i, j]] = dm;
        }
    }
    (dx, dmask, dpattern)
}

/// `(xt − t·m) / max(1−m, ε)`, no clamp.
pub fn unstamp_patch_raw<F: Real>(
    xt: &Array3<F>,
    mask: &Array2<F>,
    pattern: &Array3<F>,
) -> Array3<F> {
    let (h, w, c) = xt.dim();
    let eps = F::from_f64(EPS_MASK);
    let mut out = Array3::zeros((h, w, c));
    for i in 0..h {
        for j in 0..w {
            let m = mask[[i, j]];
            let denom = (F::one() - m).max(eps);
            for k in 0..c {
                out[[i, j, k]] = (xt[[i, j, k]] - pattern[[i, j, k]] * m) / denom;
            }
        }
    }
    out
}

/// VJP of [`unstamp_patch_raw`] w.r.t. `xt`, `mask`, and `pattern`.
///
/// Where the `1 − m` floor is active the denominator is constant, so its
/// derivative contribution vanishes on that branch.
pub fn unstamp_patch_vjp<F: Real>(
    xt: &Array3<F>,
    mask: &Array2<F>,
    pattern: &Array3<F>,
    g: &Array3<F>,
) -> (Array3<F>, Array2<F>, Array3<F>) {
    let (h, w, c) = xt.dim();
    let eps = F::from_f64(EPS_MASK);
    let mut dxt = Array3::zeros((h, w, c));
    let mut dmask = Array2::zeros((h, w));
    let mut dpattern = Array3::zeros((h, w, c));
    for i in 0..h {
        for j in 0..w {
            let m = mask[[i, j]];
            let raw = F::one() - m;
            let active = raw > eps;
            let denom = raw.max(eps);
            let mut dm = F::zero();
            for k in 0..c {
                let gv = g[[i, j, k]];
                let out = (xt[[i, j, k]] - pattern[[i, j, k]] * m) / denom;
                dxt[[i, j, k]] = gv / denom;
                dpattern[[i, j, k]] = -gv * m / denom;
                // d out / d m = (-t·denom + (xt - t·m)) / denom²  when the
                // floor is inactive, and -t/denom when it is active.
                let dpart = if active {
                    (out - pattern[[i, j, k]]) / denom
                } else {
                    -pattern[[i, j, k]] / denom
                };
                dm = dm + gv * dpart;
            }
            dmask[[i, j]] = dm;
        }
    }
    (dxt, dmask, dpattern)
}

fn check_transform_shapes<F: Real>(
    op: &'static str,
    x: &Array3<F>,
    weights: &Array3<F>,
    biases: &Array3<F>,
) -> Result<()> {
    let (h, w, c) = x.dim();
    if weights.dim() != (3 * h, 3 * w, c) {
        return Err(CoreError::dim(
            op,
            format!("image {h}x{w}x{c} vs weights {:?}", weights.dim()),
        ));
    }
    if biases.dim() != (h, w, c) {
        return Err(CoreError::dim(
            op,
            format!("image {h}x{w}x{c} vs biases {:?}", biases.dim()),
        ));
    }
    Ok(())
}

/// Per-pixel piece-wise linear transform, no clamp.
///
/// Each output pixel is the sum of the element-wise product of the input's
/// 3x3 neighborhood (zero-padded at the borders) with that pixel's grid,
/// plus the pixel's bias. Linear in `(weights, biases)` for fixed `x`.
pub fn stamp_transform_raw<F: Real>(
    x: &Array3<F>,
    weights: &Array3<F>,
    biases: &Array3<F>,
) -> Array3<F> {
    let (h, w, c) = x.dim();
    let mut out = biases.clone();
    for i in 0..h {
        for j in 0..w {
            for p in -1i64..=1 {
                let ii = i as i64 + p;
                if ii < 0 || ii >= h as i64 {
                    continue;
                }
                for q in -1i64..=1 {
                    let jj = j as i64 + q;
                    if jj < 0 || jj >= w as i64 {
                        continue;
                    }
                    let wi = (3 * i as i64 + 1 + p) as usize;
                    let wj = (3 * j as i64 + 1 + q) as usize;
                    for k in 0..c {
                        out[[i, j, k]] = out[[i, j, k]]
                            + x[[ii as usize, jj as usize, k]] * weights[[wi, wj, k]];
                    }
                }
            }
        }
    }
    out
}

/// VJP of [`stamp_transform_raw`] w.r.t. `x`, `weights`, and `biases`.
pub fn stamp_transform_vjp<F: Real>(
    x: &Array3<F>,
    weights: &Array3<F>,
    g: &Array3<F>,
) -> (Array3<F>, Array3<F>, Array3<F>) {
    let (h, w, c) = x.dim();
    let mut dx = Array3::zeros((h, w, c));
    let mut dweights = Array3::zeros((3 * h, 3 * w, c));
    let dbiases = g.clone();
    for i in 0..h {
        for j in 0..w {
            for p in -1i64..=1 {
                let ii = i as i64 + p;
                if ii < 0 || ii >= h as i64 {
                    continue;
                }
                for q in -1i64..=1 {
                    let jj = j as i64 + q;
                    if jj < 0 || jj >= w as i64 {
                        continue;
                    }
                    let wi = (3 * i as i64 + 1 + p) as usize;
                    let wj = (3 * j as i64 + 1 + q) as usize;
                    for k in 0..c {
                        let gv = g[[i, j, k]];
                        dweights[[wi, wj, k]] = dweights[[wi, wj, k]]
                            + gv * x[[ii as usize, jj as usize, k]];
                        dx[[ii as usize, jj as usize, k]] = dx[[ii as usize, jj as usize, k]]
                            + gv * weights[[wi, wj, k]];
                    }
                }
            }
        }
    }
    (dx, dweights, dbiases)
}

/// Cache produced by [`normalize_raw`], consumed by [`normalize_vjp`].
pub struct NormCache<F: Real> {
    centered: Array3<F>,
    std: Vec<F>,
    std_active: Vec<bool>,
    ref_std: Vec<F>,
}

/// Per-channel recalibration of `x` to reference statistics:
/// `(x − mean(x)) / std(x) · ref.std + ref.mean`, no clamp.
///
/// `std(x)` is floored at [`crate::image::EPS_STD`]; a constant channel
/// triggers the floor and a warning is recorded.
pub fn normalize_raw<F: Real>(x: &Array3<F>, reference: &ChannelStats<F>) -> (Array3<F>, NormCache<F>) {
    let (h, w, c) = x.dim();
    let n = F::from_f64((h * w) as f64);
    let eps = F::from_f64(crate::image::EPS_STD);
    let mut out = Array3::zeros((h, w, c));
    let mut centered = Array3::zeros((h, w, c));
    let mut stds = Vec::with_capacity(c);
    let mut actives = Vec::with_capacity(c);
    let mut ref_stds = Vec::with_capacity(c);
    for k in 0..c {
        let ch = x.index_axis(Axis(2), k);
        let mu = ch.sum() / n;
        let var = ch.mapv(|v| (v - mu) * (v - mu)).sum() / n;
        let raw_std = var.sqrt();
        let active = raw_std > eps;
        if !active {
            log::warn!(
                "normalize: channel {k} is constant valued; std floored at {:e}",
                crate::image::EPS_STD
            );
        }
        let std = raw_std.max(eps);
        let scale = reference.std[k] / std;
        for i in 0..h {
            for j in 0..w {
                let cvar = x[[i, j, k]] - mu;
                centered[[i, j, k]] = cvar;
                out[[i, j, k]] = cvar * scale + reference.mean[k];
            }
        }
        stds.push(std);
        actives.push(active);
        ref_stds.push(reference.std[k]);
    }
    (
        out,
        NormCache {
            centered,
            std: stds,
            std_active: actives,
            ref_std: ref_stds,
        },
    )
}

/// VJP of [`normalize_raw`] w.r.t. `x` (the reference stats are constants).
pub fn normalize_vjp<F: Real>(cache: &NormCache<F>, g: &Array3<F>) -> Array3<F> {
    let (h, w, c) = g.dim();
    let n = F::from_f64((h * w) as f64);
    let mut dx = Array3::zeros((h, w, c));
    for k in 0..c {
        let std = cache.std[k];
        let scale = cache.ref_std[k] / std;
        let gch = g.index_axis(Axis(2), k);
        let g_mean = gch.sum() / n;
        if cache.std_active[k] {
            // y = s_ref · (x − μ)/σ + μ_ref with μ, σ functions of x:
            // dL/dx_i = (s_ref/σ)·(g_i − mean(g) − c_i·mean(g⊙c)/σ²)
            let mut gc_mean = F::zero();
            for i in 0..h {
                for j in 0..w {
                    gc_mean = gc_mean + g[[i, j, k]] * cache.centered[[i, j, k]];
                }
            }
            gc_mean = gc_mean / n;
            for i in 0..h {
                for j in 0..w {
                    let ci = cache.centered[[i, j, k]];
                    dx[[i, j, k]] = scale * (g[[i, j, k]] - g_mean - ci * gc_mean / (std * std));
                }
            }
        } else {
            // Floored std is a constant; only the mean depends on x.
            for i in 0..h {
                for j in 0..w {
                    dx[[i, j, k]] = scale * (g[[i, j, k]] - g_mean);
                }
            }
        }
    }
    dx
}

/// Stamps a patching-form trigger onto an image: `x·(1−m) + t·m`, clamped.
pub fn stamp_patch<F: Real>(x: &ImageTensor<F>, trig: &PatchTrigger<F>) -> Result<ImageTensor<F>> {
    check_patch_shapes("stamp_patch", x.data(), &trig.mask, &trig.pattern)?;
    let raw = stamp_patch_raw(x.data(), &trig.mask, &trig.pattern);
    ImageTensor::new(raw)
}

/// Recovers the raw clean-image estimate `(xt − t·m)/(1−m)`.
///
/// The output is intentionally not clamped: it may leave `[0, 1]` and is
/// normalized and reconstructed before becoming an image again.
pub fn unstamp_patch<F: Real>(xt: &ImageTensor<F>, trig: &PatchTrigger<F>) -> Result<Array3<F>> {
    check_patch_shapes("unstamp_patch", xt.data(), &trig.mask, &trig.pattern)?;
    Ok(unstamp_patch_raw(xt.data(), &trig.mask, &trig.pattern))
}

/// Applies a transforming-form trigger, clamping the result to `[0, 1]`.
pub fn stamp_transform<F: Real>(
    x: &ImageTensor<F>,
    trig: &TransformTrigger<F>,
) -> Result<ImageTensor<F>> {
    check_transform_shapes("stamp_transform", x.data(), &trig.weights, &trig.biases)?;
    let raw = stamp_transform_raw(x.data(), &trig.weights, &trig.biases);
    ImageTensor::new(raw)
}

/// Recalibrates an image (or raw unstamped estimate) to reference channel
/// statistics. The result is not clamped; it feeds the reconstructor.
pub fn normalize<F: Real>(x: &Array3<F>, reference: &ChannelStats<F>) -> Result<Array3<F>> {
    let (_, _, c) = x.dim();
    if c != reference.mean.len() {
        return Err(CoreError::dim(
            "normalize",
            format!("image has {c} channels, reference has {}", reference.mean.len()),
        ));
    }
    Ok(normalize_raw(x, reference).0)
}

/// Clamp to `[0, 1]` with the exact subgradient: upstream gradient passes
/// where the input is in range and is zeroed where the clamp saturates.
pub fn clamp01_with_grad<F: Real>(x: &Array3<F>, g: &Array3<F>) -> (Array3<F>, Array3<F>) {
    let clamped = x.mapv(clamp01);
    let mut dg = g.clone();
    for (dv, &v) in dg.iter_mut().zip(x.iter()) {
        if v < F::zero() || v > F::one() {
            *dv = F::zero();
        }
    }
    (clamped, dg)
}
