//! Labeled image sets plus the built-in synthetic generator that keeps the
//! repository self-contained: ten shape classes rendered onto gradient
//! backgrounds with noise. Any 32x32-style dataset can be carried through
//! the same struct.

use crate::error::{Result, ZooError};
use bdf_core::image::ImageTensor;
use bdf_core::rng::Rng;
use ndarray::Array3;
use rand::Rng as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn tag(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(ZooError::Config(format!("unknown split tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<ImageTensor<f32>>,
    pub labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

impl Dataset {
    pub fn new(
        images: Vec<ImageTensor<f32>>,
        labels: Vec<usize>,
        classes: usize,
        split: Split,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(ZooError::Argument(format!(
                "{} images vs {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(ZooError::Argument(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        Ok(Self {
            images,
            labels,
            classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image_dim(&self) -> (usize, usize, usize) {
        self.images[0].dim()
    }

    /// Raw arrays for a subset of samples (model-facing batches).
    pub fn arrays(&self, idx: &[usize]) -> Vec<Array3<f32>> {
        idx.iter().map(|&i| self.images[i].data().clone()).collect()
    }

    /// Indices of samples whose label differs from `target`.
    pub fn non_target_indices(&self, target: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] != target).collect()
    }

    /// Persists the set as one rank-4 record plus a labels file.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| bdf_core::CoreError::io(dir.display().to_string(), e))?;
        let (h, w, c) = self.image_dim();
        let mut flat = ndarray::ArrayD::<f32>::zeros(ndarray::IxDyn(&[self.len(), h, w, c]));
        for (n, img) in self.images.iter().enumerate() {
            for i in 0..h {
                for j in 0..w {
                    for k in 0..c {
                        flat[[n, i, j, k]] = img.data()[[i, j, k]];
                    }
                }
            }
        }
        bdf_core::container::write_array(&dir.join("images.bfl"), &flat)?;
        let mut labels = String::new();
        for &l in &self.labels {
            labels.push_str(&format!("{l}\n"));
        }
        std::fs::write(dir.join("labels.txt"), labels)
            .map_err(|e| bdf_core::CoreError::io(dir.display().to_string(), e))?;
        bdf_core::config::write_kv_file(
            &dir.join("meta"),
            &[
                ("classes".into(), self.classes.to_string()),
                ("split".into(), self.split.tag().into()),
            ],
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let flat = bdf_core::container::read_array(&dir.join("images.bfl"))?;
        let shape = flat.shape().to_vec();
        if shape.len() != 4 {
            return Err(ZooError::Config(format!(
                "expected rank-4 image array in {}, got rank {}",
                dir.display(),
                shape.len()
            )));
        }
        let (n, h, w, c) = (shape[0], shape[1], shape[2], shape[3]);
        let mut images = Vec::with_capacity(n);
        for idx in 0..n {
            let mut img = Array3::<f32>::zeros((h, w, c));
            for i in 0..h {
                for j in 0..w {
                    for k in 0..c {
                        img[[i, j, k]] = flat[[idx, i, j, k]];
                    }
                }
            }
            images.push(ImageTensor::new(img)?);
        }
        let labels_text = std::fs::read_to_string(dir.join("labels.txt"))
            .map_err(|e| bdf_core::CoreError::io(dir.display().to_string(), e))?;
        let labels: Vec<usize> = labels_text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .parse::<usize>()
                    .map_err(|_| ZooError::Config(format!("bad label line `{l}`")))
            })
            .collect::<Result<_>>()?;
        let meta = bdf_core::config::read_kv_file(&dir.join("meta"))?;
        let classes = meta
            .get("classes")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ZooError::Config("missing classes in dataset meta".into()))?;
        let split = Split::parse(meta.get("split").map(|s| s.as_str()).unwrap_or("train"))?;
        Dataset::new(images, labels, classes, split)
    }
}

/// Number of shape classes produced by the generator.
pub const SHAPE_CLASSES: usize = 10;

/// Renders one synthetic sample of class `label`.
fn render_shape(h: usize, w: usize, label: usize, rng: &mut Rng) -> Array3<f32> {
    let mut img = Array3::<f32>::zeros((h, w, 3));

    // Background: smooth two-color gradient, dark range to keep contrast.
    let horizontal = rng.gen::<bool>();
    let c0: [f32; 3] = [
        rng.gen::<f32>() * 0.4,
        rng.gen::<f32>() * 0.4,
        rng.gen::<f32>() * 0.4,
    ];
    let c1: [f32; 3] = [
        rng.gen::<f32>() * 0.4,
        rng.gen::<f32>() * 0.4,
        rng.gen::<f32>() * 0.4,
    ];
    for i in 0..h {
        for j in 0..w {
            let t = if horizontal {
                j as f32 / (w - 1) as f32
            } else {
                i as f32 / (h - 1) as f32
            };
            for k in 0..3 {
                img[[i, j, k]] = c0[k] * (1.0 - t) + c1[k] * t;
            }
        }
    }

    // Foreground: bright shape with jittered center and size.
    let fg: [f32; 3] = [
        0.55 + 0.45 * rng.gen::<f32>(),
        0.55 + 0.45 * rng.gen::<f32>(),
        0.55 + 0.45 * rng.gen::<f32>(),
    ];
    let cy = h as f32 / 2.0 + (rng.gen::<f32>() - 0.5) * 8.0;
    let cx = w as f32 / 2.0 + (rng.gen::<f32>() - 0.5) * 8.0;
    let r = 5.0 + 4.0 * rng.gen::<f32>();
    let bar = (0.28 * r).max(1.2);

    // Signed distance to the class shape; negative inside.
    let sdf = |dy: f32, dx: f32| -> f32 {
        match label {
            0 => (dy * dy + dx * dx).sqrt() - r, // circle
            1 => dy.abs().max(dx.abs()) - r * 0.85, // square
            2 => {
                // upward triangle from three half-planes
                let e0 = dy - r * 0.7;
                let e1 = -dy * 0.5 - dx * 0.866 - r * 0.35;
                let e2 = -dy * 0.5 + dx * 0.866 - r * 0.35;
                e0.max(e1).max(e2)
            }
            3 => {
                // plus: union of two bars
                let a = (dx.abs() - bar).max(dy.abs() - r);
                let b = (dy.abs() - bar).max(dx.abs() - r);
                a.min(b)
            }
            4 => ((dy * dy + dx * dx).sqrt() - r * 0.85).abs() - bar, // ring
            5 => dy.abs() + dx.abs() - r, // diamond
            6 => (dy.abs() - bar).max(dx.abs() - r), // horizontal bar
            7 => (dx.abs() - bar).max(dy.abs() - r), // vertical bar
            8 => {
                // X: two diagonal bars
                let u = (dx + dy) * std::f32::consts::FRAC_1_SQRT_2;
                let v = (dx - dy) * std::f32::consts::FRAC_1_SQRT_2;
                let a = (u.abs() - bar).max(v.abs() - r);
                let b = (v.abs() - bar).max(u.abs() - r);
                a.min(b)
            }
            _ => {
                // two dots on the diagonal
                let o = r * 0.55;
                let d1 = ((dy - o).powi(2) + (dx - o).powi(2)).sqrt() - r * 0.4;
                let d2 = ((dy + o).powi(2) + (dx + o).powi(2)).sqrt() - r * 0.4;
                d1.min(d2)
            }
        }
    };

    for i in 0..h {
        for j in 0..w {
            let d = sdf(i as f32 - cy, j as f32 - cx);
            let coverage = (0.5 - d).clamp(0.0, 1.0);
            if coverage > 0.0 {
                for k in 0..3 {
                    img[[i, j, k]] = img[[i, j, k]] * (1.0 - coverage) + fg[k] * coverage;
                }
            }
        }
    }

    // Pixel noise.
    for v in img.iter_mut() {
        *v = (*v + 0.04 * <f32 as bdf_core::Real>::std_normal(rng)).clamp(0.0, 1.0);
    }
    img
}

/// Generates a balanced synthetic dataset (labels cycle through classes).
pub fn synth_shapes(n: usize, h: usize, w: usize, split: Split, seed: u64) -> Dataset {
    let mut rng = bdf_core::rng::derived(seed, &format!("shapes-{}", split.tag()));
    let mut images = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for idx in 0..n {
        let label = idx % SHAPE_CLASSES;
        images.push(ImageTensor::new(render_shape(h, w, label, &mut rng)).expect("generator output in range"));
        labels.push(label);
    }
    Dataset::new(images, labels, SHAPE_CLASSES, split).expect("balanced labels in range")
}
