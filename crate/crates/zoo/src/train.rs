//! Poisoning-based training and attack-success-rate measurement.

use crate::dataset::Dataset;
use crate::error::{Result, ZooError};
use crate::recipe::InjectionRecipe;
use crate::store::ZooEntry;
use bdf_core::image::ImageTensor;
use bdf_core::trigger::Trigger;
use bdf_model::train::{train_classifier, TrainConfig};
use bdf_model::traits::Classifier;
use bdf_model::SmallCnn;
use rand::seq::SliceRandom;

/// What to stamp when measuring ASR: a ground-truth recipe or a
/// (possibly decomposed/inverted) trigger.
#[derive(Clone, Copy)]
pub enum StampSpec<'a> {
    Recipe(&'a InjectionRecipe),
    Trigger(&'a Trigger<f32>),
}

impl<'a> StampSpec<'a> {
    pub fn stamp(&self, x: &ImageTensor<f32>) -> Result<ImageTensor<f32>> {
        match self {
            StampSpec::Recipe(r) => r.apply(x),
            StampSpec::Trigger(Trigger::Patch(t)) => Ok(bdf_core::stamp::stamp_patch(x, t)?),
            StampSpec::Trigger(Trigger::Transform(t)) => {
                Ok(bdf_core::stamp::stamp_transform(x, t)?)
            }
        }
    }
}

/// Fraction of stamped non-target samples classified as `target`.
///
/// Samples whose true label equals the target are never counted; an empty
/// remainder is an argument error.
pub fn asr<M: Classifier<f32>>(
    model: &M,
    data: &Dataset,
    stamp: StampSpec<'_>,
    target: usize,
) -> Result<f64> {
    let idx = data.non_target_indices(target);
    if idx.is_empty() {
        return Err(ZooError::Argument(
            "ASR needs at least one non-target sample".into(),
        ));
    }
    let mut hits = 0usize;
    for chunk in idx.chunks(64) {
        let stamped: Vec<_> = chunk
            .iter()
            .map(|&i| stamp.stamp(&data.images[i]).map(|t| t.into_data()))
            .collect::<Result<_>>()?;
        let preds = model.predict(&stamped);
        hits += preds.iter().filter(|&&p| p == target).count();
    }
    Ok(hits as f64 / idx.len() as f64)
}

/// Accuracy of a model over a dataset.
pub fn accuracy<M: Classifier<f32>>(model: &M, data: &Dataset) -> f64 {
    let mut hits = 0usize;
    for chunk_start in (0..data.len()).step_by(64) {
        let end = (chunk_start + 64).min(data.len());
        let idx: Vec<usize> = (chunk_start..end).collect();
        let arrays = data.arrays(&idx);
        let preds = model.predict(&arrays);
        hits += preds
            .iter()
            .zip(idx.iter())
            .filter(|(p, &i)| **p == data.labels[i])
            .count();
    }
    hits as f64 / data.len().max(1) as f64
}

/// Trains a classifier on `train` with `ceil(rate·N)` samples replaced by
/// recipe-stamped versions relabeled to the target (replacement, not
/// addition). Deterministic given `seed`. `rate = 0` degenerates to clean
/// training with the recipe recorded only for evaluation.
pub fn poison_and_train(
    train: &Dataset,
    test: &Dataset,
    recipe: &InjectionRecipe,
    rate: f64,
    epochs: usize,
    seed: u64,
) -> Result<ZooEntry> {
    if !(0.0..1.0).contains(&rate) {
        return Err(ZooError::Argument(format!(
            "poisoning rate {rate} outside [0, 1)"
        )));
    }
    let mut images = train.images.clone();
    let mut labels = train.labels.clone();

    let eligible: Vec<usize> = (0..train.len())
        .filter(|&i| {
            train.labels[i] != recipe.target
                && recipe.victim.is_none_or(|v| train.labels[i] == v)
        })
        .collect();
    let count = ((rate * train.len() as f64).ceil() as usize).min(eligible.len());
    let mut rng = bdf_core::rng::derived(seed, "poison-choice");
    let mut pool = eligible;
    pool.shuffle(&mut rng);
    for &i in pool.iter().take(count) {
        images[i] = recipe.apply(&train.images[i])?;
        labels[i] = recipe.target;
    }
    debug_assert_eq!(images.len(), train.len(), "replacement keeps the set size");

    let (h, w, c) = train.image_dim();
    let mut model = SmallCnn::<f32>::new(h, w, c, train.classes, bdf_core::rng::derive(seed, "model-init"));
    let cfg = TrainConfig {
        epochs,
        batch_size: 64,
        lr: 1e-3,
        seed,
    };
    train_classifier(&mut model, &images, &labels, &cfg)?;

    let clean_accuracy = accuracy(&model, test);
    let attack_rate = asr(&model, test, StampSpec::Recipe(recipe), recipe.target)?;
    Ok(ZooEntry::trojaned(
        model,
        recipe.clone(),
        seed,
        clean_accuracy,
        attack_rate,
    ))
}

/// Clean-label twin of [`poison_and_train`].
pub fn train_clean_entry(train: &Dataset, test: &Dataset, epochs: usize, seed: u64) -> Result<ZooEntry> {
    let (h, w, c) = train.image_dim();
    let mut model = SmallCnn::<f32>::new(h, w, c, train.classes, bdf_core::rng::derive(seed, "model-init"));
    let cfg = TrainConfig {
        epochs,
        batch_size: 64,
        lr: 1e-3,
        seed,
    };
    train_classifier(&mut model, &train.images, &train.labels, &cfg)?;
    let clean_accuracy = accuracy(&model, test);
    Ok(ZooEntry::clean(model, seed, clean_accuracy))
}
