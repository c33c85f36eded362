//! Trigger-injection recipes. Each family maps to exactly one mathematical
//! form: `patch`, `blend`, and `sinusoid` are patching (blend and sinusoid
//! with a constant mask); `filter_linear` and `warp` are transforming.
//! Recipes are pure functions of their parameters and stored seed, so
//! ground-truth trojaned samples are reproducible anywhere.

use crate::error::{Result, ZooError};
use bdf_core::image::ImageTensor;
use bdf_core::stamp::{stamp_patch, stamp_transform};
use bdf_core::trigger::{PatchTrigger, TransformTrigger, Trigger};
use ndarray::{Array2, Array3};
use rand::Rng as _;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecipeFamily {
    Patch,
    Blend,
    Sinusoid,
    FilterLinear,
    Warp,
}

impl RecipeFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            RecipeFamily::Patch => "patch",
            RecipeFamily::Blend => "blend",
            RecipeFamily::Sinusoid => "sinusoid",
            RecipeFamily::FilterLinear => "filter_linear",
            RecipeFamily::Warp => "warp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "patch" => Ok(RecipeFamily::Patch),
            "blend" => Ok(RecipeFamily::Blend),
            "sinusoid" => Ok(RecipeFamily::Sinusoid),
            "filter_linear" => Ok(RecipeFamily::FilterLinear),
            "warp" => Ok(RecipeFamily::Warp),
            other => Err(ZooError::Config(format!("unknown trigger family `{other}`"))),
        }
    }

    /// The mathematical form this family injects through.
    pub fn form(&self) -> &'static str {
        match self {
            RecipeFamily::Patch | RecipeFamily::Blend | RecipeFamily::Sinusoid => "patch",
            RecipeFamily::FilterLinear | RecipeFamily::Warp => "transform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyParams {
    /// Opaque k x k pattern stamped at `(row, col)`.
    Patch { size: usize, row: usize, col: usize },
    /// Whole-image blend of a stored trigger image at a constant ratio.
    Blend { ratio: f32 },
    /// Vertical stripes blended at a constant ratio.
    Sinusoid { amplitude: f32, frequency: f32 },
    /// Per-channel affine recoloring `scale·x + offset`.
    FilterLinear { scale: [f32; 3], offset: [f32; 3] },
    /// Smooth displacement field; `strength` is the mean displacement in
    /// pixels (bounded at 1.5) from a `grid x grid` random field.
    Warp { strength: f32, grid: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InjectionRecipe {
    pub family: RecipeFamily,
    pub params: FamilyParams,
    pub target: usize,
    pub victim: Option<usize>,
    /// Seeds the generated artifacts (patch pattern, blend image, warp field).
    pub seed: u64,
}

impl InjectionRecipe {
    pub fn patch(size: usize, row: usize, col: usize, target: usize, seed: u64) -> Self {
        Self {
            family: RecipeFamily::Patch,
            params: FamilyParams::Patch { size, row, col },
            target,
            victim: None,
            seed,
        }
    }

    pub fn blend(ratio: f32, target: usize, seed: u64) -> Self {
        Self {
            family: RecipeFamily::Blend,
            params: FamilyParams::Blend { ratio },
            target,
            victim: None,
            seed,
        }
    }

    pub fn sinusoid(amplitude: f32, frequency: f32, target: usize, seed: u64) -> Self {
        Self {
            family: RecipeFamily::Sinusoid,
            params: FamilyParams::Sinusoid { amplitude, frequency },
            target,
            victim: None,
            seed,
        }
    }

    pub fn filter_linear(scale: [f32; 3], offset: [f32; 3], target: usize, seed: u64) -> Self {
        Self {
            family: RecipeFamily::FilterLinear,
            params: FamilyParams::FilterLinear { scale, offset },
            target,
            victim: None,
            seed,
        }
    }

    pub fn warp(strength: f32, grid: usize, target: usize, seed: u64) -> Self {
        Self {
            family: RecipeFamily::Warp,
            params: FamilyParams::Warp { strength, grid },
            target,
            victim: None,
            seed,
        }
    }

    /// Ground-truth patching trigger for patch/blend/sinusoid recipes.
    pub fn patch_trigger(&self, h: usize, w: usize, c: usize) -> Result<PatchTrigger<f32>> {
        match &self.params {
            FamilyParams::Patch { size, row, col } => {
                if row + size > h || col + size > w {
                    return Err(ZooError::Config(format!(
                        "patch {size} at ({row}, {col}) exceeds {h}x{w} image"
                    )));
                }
                let mut rng = bdf_core::rng::derived(self.seed, "patch-pattern");
                let mut mask = Array2::<f32>::zeros((h, w));
                let mut pattern = Array3::<f32>::zeros((h, w, c));
                for i in 0..*size {
                    for j in 0..*size {
                        mask[[row + i, col + j]] = 1.0;
                        for k in 0..c {
                            pattern[[row + i, col + j, k]] = 0.2 + 0.8 * rng.gen::<f32>();
                        }
                    }
                }
                Ok(PatchTrigger::new(mask, pattern)?)
            }
            FamilyParams::Blend { ratio } => {
                let mut rng = bdf_core::rng::derived(self.seed, "blend-image");
                // Low-resolution noise upsampled bilinearly: a smooth,
                // image-like trigger.
                let gh = 8usize.min(h);
                let gw = 8usize.min(w);
                let mut coarse = Array3::<f32>::zeros((gh, gw, c));
                for v in coarse.iter_mut() {
                    *v = rng.gen::<f32>();
                }
                let mut pattern = Array3::<f32>::zeros((h, w, c));
                for i in 0..h {
                    for j in 0..w {
                        let fy = i as f32 / (h - 1) as f32 * (gh - 1) as f32;
                        let fx = j as f32 / (w - 1) as f32 * (gw - 1) as f32;
                        let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
                        let (y1, x1) = ((y0 + 1).min(gh - 1), (x0 + 1).min(gw - 1));
                        let (ty, tx) = (fy - y0 as f32, fx - x0 as f32);
                        for k in 0..c {
                            let top = coarse[[y0, x0, k]] * (1.0 - tx) + coarse[[y0, x1, k]] * tx;
                            let bot = coarse[[y1, x0, k]] * (1.0 - tx) + coarse[[y1, x1, k]] * tx;
                            pattern[[i, j, k]] = top * (1.0 - ty) + bot * ty;
                        }
                    }
                }
                let mask = Array2::<f32>::from_elem((h, w), *ratio);
                Ok(PatchTrigger::new(mask, pattern)?)
            }
            FamilyParams::Sinusoid { amplitude, frequency } => {
                let mut pattern = Array3::<f32>::zeros((h, w, c));
                for j in 0..w {
                    let v = 0.5
                        + 0.5
                            * (2.0 * std::f32::consts::PI * frequency * j as f32 / w as f32).sin();
                    for i in 0..h {
                        for k in 0..c {
                            pattern[[i, j, k]] = v;
                        }
                    }
                }
                let mask = Array2::<f32>::from_elem((h, w), *amplitude);
                Ok(PatchTrigger::new(mask, pattern)?)
            }
            _ => Err(ZooError::Config(format!(
                "{} is not a patching-form family",
                self.family.tag()
            ))),
        }
    }

    /// Exact transforming trigger for a `filter_linear` recipe.
    pub fn transform_trigger(&self, h: usize, w: usize, c: usize) -> Result<TransformTrigger<f32>> {
        match &self.params {
            FamilyParams::FilterLinear { scale, offset } => {
                let mut weights = Array3::<f32>::zeros((3 * h, 3 * w, c));
                let mut biases = Array3::<f32>::zeros((h, w, c));
                for i in 0..h {
                    for j in 0..w {
                        for k in 0..c {
                            weights[[3 * i + 1, 3 * j + 1, k]] = scale[k.min(2)];
                            biases[[i, j, k]] = offset[k.min(2)];
                        }
                    }
                }
                Ok(TransformTrigger::new(weights, biases)?)
            }
            _ => Err(ZooError::Config(format!(
                "{} has no exact transform-trigger equivalent",
                self.family.tag()
            ))),
        }
    }

    /// Ground-truth trigger in its natural form where one exists.
    pub fn ground_truth_trigger(&self, h: usize, w: usize, c: usize) -> Result<Trigger<f32>> {
        match self.family {
            RecipeFamily::Patch | RecipeFamily::Blend | RecipeFamily::Sinusoid => {
                Ok(Trigger::Patch(self.patch_trigger(h, w, c)?))
            }
            RecipeFamily::FilterLinear => Ok(Trigger::Transform(self.transform_trigger(h, w, c)?)),
            RecipeFamily::Warp => Err(ZooError::Config(
                "warp has no closed-form trigger; it is defined by its displacement field".into(),
            )),
        }
    }

    /// Displacement field `(dy, dx)` for a warp recipe: a coarse random
    /// grid upsampled bicubically, rescaled so the mean displacement equals
    /// `strength` (hard-capped at 1.5 px).
    pub fn warp_field(&self, h: usize, w: usize) -> Result<(Array2<f32>, Array2<f32>)> {
        let FamilyParams::Warp { strength, grid } = &self.params else {
            return Err(ZooError::Config(format!(
                "{} is not a warp family",
                self.family.tag()
            )));
        };
        let strength = strength.min(1.5);
        let g = (*grid).max(2);
        let mut rng = bdf_core::rng::derived(self.seed, "warp-field");
        let mut coarse_y = Array2::<f32>::zeros((g, g));
        let mut coarse_x = Array2::<f32>::zeros((g, g));
        for v in coarse_y.iter_mut() {
            *v = rng.gen::<f32>() * 2.0 - 1.0;
        }
        for v in coarse_x.iter_mut() {
            *v = rng.gen::<f32>() * 2.0 - 1.0;
        }
        let dy = bicubic_upsample(&coarse_y, h, w);
        let dx = bicubic_upsample(&coarse_x, h, w);
        let mut mean = 0.0f32;
        for i in 0..h {
            for j in 0..w {
                mean += (dy[[i, j]] * dy[[i, j]] + dx[[i, j]] * dx[[i, j]]).sqrt();
            }
        }
        mean /= (h * w) as f32;
        let scale = if mean > 1e-8 { strength / mean } else { 0.0 };
        Ok((dy * scale, dx * scale))
    }

    /// Applies the recipe to one image, producing the ground-truth trojaned
    /// sample. Deterministic: no hidden randomness.
    pub fn apply(&self, x: &ImageTensor<f32>) -> Result<ImageTensor<f32>> {
        let (h, w, c) = x.dim();
        match self.family {
            RecipeFamily::Patch | RecipeFamily::Blend | RecipeFamily::Sinusoid => {
                let trig = self.patch_trigger(h, w, c)?;
                Ok(stamp_patch(x, &trig)?)
            }
            RecipeFamily::FilterLinear => {
                let trig = self.transform_trigger(h, w, c)?;
                Ok(stamp_transform(x, &trig)?)
            }
            RecipeFamily::Warp => {
                let (dy, dx) = self.warp_field(h, w)?;
                let mut out = Array3::<f32>::zeros((h, w, c));
                for i in 0..h {
                    for j in 0..w {
                        let sy = (i as f32 + dy[[i, j]]).clamp(0.0, (h - 1) as f32);
                        let sx = (j as f32 + dx[[i, j]]).clamp(0.0, (w - 1) as f32);
                        let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
                        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
                        let (ty, tx) = (sy - y0 as f32, sx - x0 as f32);
                        for k in 0..c {
                            let d = x.data();
                            let top = d[[y0, x0, k]] * (1.0 - tx) + d[[y0, x1, k]] * tx;
                            let bot = d[[y1, x0, k]] * (1.0 - tx) + d[[y1, x1, k]] * tx;
                            out[[i, j, k]] = top * (1.0 - ty) + bot * ty;
                        }
                    }
                }
                Ok(ImageTensor::new(out)?)
            }
        }
    }

    /// Flat key/value serialization (zoo meta files).
    pub fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("recipe.family".into(), self.family.tag().to_string()),
            ("recipe.target".into(), self.target.to_string()),
            ("recipe.seed".into(), self.seed.to_string()),
        ];
        if let Some(v) = self.victim {
            kv.push(("recipe.victim".into(), v.to_string()));
        }
        match &self.params {
            FamilyParams::Patch { size, row, col } => {
                kv.push(("recipe.size".into(), size.to_string()));
                kv.push(("recipe.row".into(), row.to_string()));
                kv.push(("recipe.col".into(), col.to_string()));
            }
            FamilyParams::Blend { ratio } => {
                kv.push(("recipe.ratio".into(), ratio.to_string()));
            }
            FamilyParams::Sinusoid { amplitude, frequency } => {
                kv.push(("recipe.amplitude".into(), amplitude.to_string()));
                kv.push(("recipe.frequency".into(), frequency.to_string()));
            }
            FamilyParams::FilterLinear { scale, offset } => {
                for k in 0..3 {
                    kv.push((format!("recipe.scale{k}"), scale[k].to_string()));
                    kv.push((format!("recipe.offset{k}"), offset[k].to_string()));
                }
            }
            FamilyParams::Warp { strength, grid } => {
                kv.push(("recipe.strength".into(), strength.to_string()));
                kv.push(("recipe.grid".into(), grid.to_string()));
            }
        }
        kv
    }

    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let get = |key: &str| -> Result<&String> {
            kv.get(key)
                .ok_or_else(|| ZooError::Config(format!("missing `{key}` in recipe")))
        };
        let parse_f32 = |key: &str| -> Result<f32> {
            get(key)?
                .parse::<f32>()
                .map_err(|_| ZooError::Config(format!("bad float for `{key}`")))
        };
        let parse_usize = |key: &str| -> Result<usize> {
            get(key)?
                .parse::<usize>()
                .map_err(|_| ZooError::Config(format!("bad integer for `{key}`")))
        };
        let family = RecipeFamily::parse(get("recipe.family")?)?;
        let params = match family {
            RecipeFamily::Patch => FamilyParams::Patch {
                size: parse_usize("recipe.size")?,
                row: parse_usize("recipe.row")?,
                col: parse_usize("recipe.col")?,
            },
            RecipeFamily::Blend => FamilyParams::Blend {
                ratio: parse_f32("recipe.ratio")?,
            },
            RecipeFamily::Sinusoid => FamilyParams::Sinusoid {
                amplitude: parse_f32("recipe.amplitude")?,
                frequency: parse_f32("recipe.frequency")?,
            },
            RecipeFamily::FilterLinear => {
                let mut scale = [0.0f32; 3];
                let mut offset = [0.0f32; 3];
                for k in 0..3 {
                    scale[k] = parse_f32(&format!("recipe.scale{k}"))?;
                    offset[k] = parse_f32(&format!("recipe.offset{k}"))?;
                }
                FamilyParams::FilterLinear { scale, offset }
            }
            RecipeFamily::Warp => FamilyParams::Warp {
                strength: parse_f32("recipe.strength")?,
                grid: parse_usize("recipe.grid")?,
            },
        };
        Ok(Self {
            family,
            params,
            target: parse_usize("recipe.target")?,
            victim: kv
                .get("recipe.victim")
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| ZooError::Config("bad victim label".into()))
                })
                .transpose()?,
            seed: get("recipe.seed")?
                .parse::<u64>()
                .map_err(|_| ZooError::Config("bad recipe seed".into()))?,
        })
    }
}

/// Catmull-Rom bicubic upsampling of a coarse grid to `(h, w)`.
fn bicubic_upsample(coarse: &Array2<f32>, h: usize, w: usize) -> Array2<f32> {
    let (gh, gw) = coarse.dim();
    let sample = |y: i64, x: i64| -> f32 {
        let yy = y.clamp(0, gh as i64 - 1) as usize;
        let xx = x.clamp(0, gw as i64 - 1) as usize;
        coarse[[yy, xx]]
    };
    let cubic = |p: [f32; 4], t: f32| -> f32 {
        p[1] + 0.5
            * t
            * (p[2] - p[0]
                + t * (2.0 * p[0] - 5.0 * p[1] + 4.0 * p[2] - p[3]
                    + t * (3.0 * (p[1] - p[2]) + p[3] - p[0])))
    };
    let mut out = Array2::<f32>::zeros((h, w));
    for i in 0..h {
        let fy = i as f32 / (h - 1).max(1) as f32 * (gh - 1) as f32;
        let y0 = fy.floor() as i64;
        let ty = fy - y0 as f32;
        for j in 0..w {
            let fx = j as f32 / (w - 1).max(1) as f32 * (gw - 1) as f32;
            let x0 = fx.floor() as i64;
            let tx = fx - x0 as f32;
            let mut col = [0.0f32; 4];
            for (di, cv) in col.iter_mut().enumerate() {
                let row = [
                    sample(y0 - 1 + di as i64, x0 - 1),
                    sample(y0 - 1 + di as i64, x0),
                    sample(y0 - 1 + di as i64, x0 + 1),
                    sample(y0 - 1 + di as i64, x0 + 2),
                ];
                *cv = cubic(row, tx);
            }
            out[[i, j]] = cubic(col, ty);
        }
    }
    out
}
