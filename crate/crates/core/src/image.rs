//! The universal sample carrier: an `(H, W, C)` image with intensities in
//! `[0, 1]`, plus per-channel statistics used by the normalization step.

use crate::error::{CoreError, Result};
use crate::Real;
use ndarray::{Array1, Array3, Axis};

/// Minimum spatial extent of an image.
pub const MIN_SIDE: usize = 3;

/// Std floor applied when a channel is constant valued.
pub const EPS_STD: f64 = 1e-6;

/// An `(H, W, C)` image with every element in `[0, 1]`.
///
/// Public constructors clamp, so the invariant holds after any operation
/// that returns an `ImageTensor`. Raw (possibly out-of-range) intermediate
/// images are carried as plain `Array3` values instead.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<F: Real> {
    data: Array3<F>,
}

impl<F: Real> ImageTensor<F> {
    /// Builds an image from raw data, clamping every element to `[0, 1]`.
    pub fn new(data: Array3<F>) -> Result<Self> {
        let (h, w, c) = data.dim();
        if h < MIN_SIDE || w < MIN_SIDE {
            return Err(CoreError::dim(
                "ImageTensor::new",
                format!("spatial dims {h}x{w} below minimum {MIN_SIDE}"),
            ));
        }
        if c != 1 && c != 3 {
            return Err(CoreError::dim(
                "ImageTensor::new",
                format!("channel count {c} not in {{1, 3}}"),
            ));
        }
        let data = data.mapv(|v| clamp01(v));
        Ok(Self { data })
    }

    /// Constant-valued image.
    pub fn constant(h: usize, w: usize, c: usize, value: F) -> Result<Self> {
        Self::new(Array3::from_elem((h, w, c), value))
    }

    pub fn zeros(h: usize, w: usize, c: usize) -> Result<Self> {
        Self::constant(h, w, c, F::zero())
    }

    pub fn data(&self) -> &Array3<F> {
        &self.data
    }

    pub fn into_data(self) -> Array3<F> {
        self.data
    }

    /// `(H, W, C)`.
    pub fn dim(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim() == other.dim()
    }

    /// Converts the element type (used to lift `f32` pipelines into `f64`
    /// gradient checks).
    pub fn cast<G: Real>(&self) -> ImageTensor<G> {
        ImageTensor {
            data: self.data.mapv(|v| G::from_f64(v.to_f64())),
        }
    }
}

pub fn clamp01<F: Real>(v: F) -> F {
    if v < F::zero() {
        F::zero()
    } else if v > F::one() {
        F::one()
    } else {
        v
    }
}

/// Per-channel mean and standard deviation of an image set.
///
/// `std` is strictly positive: a floor of [`EPS_STD`] is applied so that
/// constant channels (common in synthetic patches) stay usable.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats<F: Real> {
    pub mean: Array1<F>,
    pub std: Array1<F>,
}

impl<F: Real> ChannelStats<F> {
    pub fn new(mean: Array1<F>, std: Array1<F>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(CoreError::dim(
                "ChannelStats::new",
                format!("mean has {} channels, std has {}", mean.len(), std.len()),
            ));
        }
        let eps = F::from_f64(EPS_STD);
        let std = std.mapv(|s| if s < eps { eps } else { s });
        Ok(Self { mean, std })
    }

    /// Statistics of a single raw image, per channel over all pixels.
    pub fn of_array(data: &Array3<F>) -> Self {
        let (h, w, c) = data.dim();
        let n = F::from_f64((h * w) as f64);
        let mut mean = Array1::zeros(c);
        let mut std = Array1::zeros(c);
        for k in 0..c {
            let ch = data.index_axis(Axis(2), k);
            let mu = ch.sum() / n;
            let var = ch.mapv(|v| (v - mu) * (v - mu)).sum() / n;
            mean[k] = mu;
            std[k] = var.sqrt();
        }
        Self::new(mean, std).expect("channel counts match by construction")
    }

    /// Pooled statistics over a set of equally shaped images.
    pub fn of_images(images: &[ImageTensor<F>]) -> Result<Self> {
        let Some(first) = images.first() else {
            return Err(CoreError::Argument(
                "channel stats of an empty image set".into(),
            ));
        };
        let (h, w, c) = first.dim();
        let n = F::from_f64((h * w * images.len()) as f64);
        let mut mean = Array1::<F>::zeros(c);
        for img in images {
            if img.dim() != (h, w, c) {
                return Err(CoreError::dim(
                    "ChannelStats::of_images",
                    "images in the set have mixed shapes".to_string(),
                ));
            }
            for k in 0..c {
                mean[k] = mean[k] + img.data().index_axis(Axis(2), k).sum();
            }
        }
        mean.mapv_inplace(|m| m / n);
        let mut var = Array1::<F>::zeros(c);
        for img in images {
            for k in 0..c {
                let mu = mean[k];
                var[k] = var[k]
                    + img
                        .data()
                        .index_axis(Axis(2), k)
                        .mapv(|v| (v - mu) * (v - mu))
                        .sum();
            }
        }
        var.mapv_inplace(|v| (v / n).sqrt());
        Self::new(mean, var)
    }
}
