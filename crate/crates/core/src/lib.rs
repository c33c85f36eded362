//! Core algebra for backdoor forensics: image tensors, the two trigger
//! forms (patching and transforming), differentiable stamping/unstamping,
//! image-quality metrics, and the file formats shared across the workspace.
//!
//! Everything in this crate is a pure function on immutable inputs and is
//! safe to call concurrently. The numeric kernels are generic over [`Real`]
//! so the same code paths can be gradient-checked in `f64` while the
//! pipeline runs in `f32`.

pub mod config;
pub mod container;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod metrics;
pub mod png;
pub mod rng;
pub mod stamp;
pub mod trigger;

pub use error::{CoreError, Result};
pub use image::{ChannelStats, ImageTensor};
pub use metrics::{image_metrics, Metrics};
pub use stamp::{normalize, stamp_patch, stamp_transform, unstamp_patch};
pub use trigger::{PatchTrigger, TransformTrigger, Trigger};

use ndarray::NdFloat;

/// Floating-point scalar used by the numeric kernels.
///
/// Implemented for `f32` (pipeline) and `f64` (gradient checks).
pub trait Real: NdFloat {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Uniform draw from `[0, 1)`.
    fn uniform01<R: rand::Rng + ?Sized>(rng: &mut R) -> Self;
    /// Standard normal draw.
    fn std_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Real for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn uniform01<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f32>()
    }
    fn std_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample::<f32, _>(rand_distr::StandardNormal)
    }
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn uniform01<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f64>()
    }
    fn std_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    }
}
