//! The two mathematical forms a trigger can take: patching (mask + pattern)
//! and transforming (per-pixel 3x3 grids + biases).

use crate::error::{CoreError, Result};
use crate::image::clamp01;
use crate::Real;
use ndarray::{Array2, Array3};

/// Patching-form trigger: `x ⊕ t = x·(1−m) + t·m` with a single-channel
/// mask broadcast across channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchTrigger<F: Real> {
    /// `(H, W)` mask, elementwise in `[0, 1]`.
    pub mask: Array2<F>,
    /// `(H, W, C)` pattern, elementwise in `[0, 1]`.
    pub pattern: Array3<F>,
}

impl<F: Real> PatchTrigger<F> {
    /// Builds a trigger, clamping mask and pattern into `[0, 1]`.
    pub fn new(mask: Array2<F>, pattern: Array3<F>) -> Result<Self> {
        let (mh, mw) = mask.dim();
        let (ph, pw, _pc) = pattern.dim();
        if (mh, mw) != (ph, pw) {
            return Err(CoreError::dim(
                "PatchTrigger::new",
                format!("mask {mh}x{mw} vs pattern {ph}x{pw}"),
            ));
        }
        Ok(Self {
            mask: mask.mapv(clamp01),
            pattern: pattern.mapv(clamp01),
        })
    }

    /// Mask size `s = Σ m`.
    pub fn mask_size(&self) -> F {
        self.mask.sum()
    }

    /// Mask-weighted centroid of pixel coordinates `(row, col)`.
    ///
    /// Returns the image center for an all-zero mask.
    pub fn mask_centroid(&self) -> (F, F) {
        let (h, w) = self.mask.dim();
        let total = self.mask.sum();
        if total <= F::zero() {
            return (
                F::from_f64((h as f64 - 1.0) / 2.0),
                F::from_f64((w as f64 - 1.0) / 2.0),
            );
        }
        let mut ci = F::zero();
        let mut cj = F::zero();
        for ((i, j), &m) in self.mask.indexed_iter() {
            ci = ci + F::from_f64(i as f64) * m;
            cj = cj + F::from_f64(j as f64) * m;
        }
        (ci / total, cj / total)
    }

    pub fn cast<G: Real>(&self) -> PatchTrigger<G> {
        PatchTrigger {
            mask: self.mask.mapv(|v| G::from_f64(v.to_f64())),
            pattern: self.pattern.mapv(|v| G::from_f64(v.to_f64())),
        }
    }
}

/// Transforming-form trigger: one trainable 3x3 grid per pixel per channel
/// plus a bias, applied as a local piece-wise linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformTrigger<F: Real> {
    /// `(3H, 3W, C)` grid weights; the grid for pixel `(i, j)` occupies
    /// rows `3i..3i+3` and columns `3j..3j+3`.
    pub weights: Array3<F>,
    /// `(H, W, C)` biases.
    pub biases: Array3<F>,
}

impl<F: Real> TransformTrigger<F> {
    pub fn new(weights: Array3<F>, biases: Array3<F>) -> Result<Self> {
        let (wh, ww, wc) = weights.dim();
        let (bh, bw, bc) = biases.dim();
        if (wh, ww, wc) != (3 * bh, 3 * bw, bc) {
            return Err(CoreError::dim(
                "TransformTrigger::new",
                format!("weights {wh}x{ww}x{wc} not 3x the bias shape {bh}x{bw}x{bc}"),
            ));
        }
        Ok(Self { weights, biases })
    }

    /// The identity trigger for images of shape `(h, w, c)`: center weight
    /// one, the eight neighbors zero, bias zero. Maps every image to itself
    /// exactly.
    pub fn identity(h: usize, w: usize, c: usize) -> Self {
        let mut weights = Array3::zeros((3 * h, 3 * w, c));
        for i in 0..h {
            for j in 0..w {
                for k in 0..c {
                    weights[[3 * i + 1, 3 * j + 1, k]] = F::one();
                }
            }
        }
        Self {
            weights,
            biases: Array3::zeros((h, w, c)),
        }
    }

    /// Target image shape `(H, W, C)`.
    pub fn image_dim(&self) -> (usize, usize, usize) {
        self.biases.dim()
    }

    pub fn cast<G: Real>(&self) -> TransformTrigger<G> {
        TransformTrigger {
            weights: self.weights.mapv(|v| G::from_f64(v.to_f64())),
            biases: self.biases.mapv(|v| G::from_f64(v.to_f64())),
        }
    }
}

/// A trigger in either mathematical form.
#[derive(Debug, Clone, PartialEq)]
pub enum Trigger<F: Real> {
    Patch(PatchTrigger<F>),
    Transform(TransformTrigger<F>),
}

impl<F: Real> Trigger<F> {
    pub fn form_name(&self) -> &'static str {
        match self {
            Trigger::Patch(_) => "patch",
            Trigger::Transform(_) => "transform",
        }
    }
}
