//! Double-precision finite-difference checks of every backward pass the
//! pipeline depends on: classifier input gradients, parameter gradients,
//! feature-space gradients, and the denoiser.

use bdf_core::gradcheck::{central_diff, central_diff_masked, max_rel_err, max_rel_err_masked};
use bdf_model::layers::softmax_ce;
use bdf_model::traits::{Classifier, FeatureSpace, Reconstructor};
use bdf_model::{batch_from_images, Denoiser, SmallCnn};
use ndarray::{Array2, Array3, ArrayD};
use rand::Rng;

fn rand_images(rng: &mut bdf_core::rng::Rng, n: usize, h: usize, w: usize, c: usize) -> Vec<Array3<f64>> {
    (0..n)
        .map(|_| {
            let mut img = Array3::zeros((h, w, c));
            for v in img.iter_mut() {
                *v = 0.1 + 0.8 * rng.gen::<f64>();
            }
            img
        })
        .collect()
}

#[test]
fn classifier_input_gradient_matches_finite_differences() {
    let mut rng = bdf_core::rng::seeded(17);
    let model = SmallCnn::<f64>::new(8, 8, 3, 4, 99);
    let images = rand_images(&mut rng, 2, 8, 8, 3);
    let labels = vec![1usize, 3];

    let (_, analytic) = model.ce_input_grads(&images, &labels);

    for (idx, img) in images.iter().enumerate() {
        let (numeric, smooth) = central_diff_masked(&img.clone().into_dyn(), 1e-5, |p| {
            let mut probe = images.clone();
            probe[idx] = p.clone().into_dimensionality().unwrap();
            let logits = model.logits(&probe);
            softmax_ce(&logits, &labels).unwrap().0
        });
        let (err, kept) =
            max_rel_err_masked(&analytic[idx].clone().into_dyn(), &numeric, &smooth, 1e-7);
        assert!(kept > 0.95, "too many kink coordinates: kept {kept}");
        assert!(err < 1e-3, "input grad rel err {err} for image {idx}");
    }
}

#[test]
fn classifier_parameter_gradients_match_finite_differences() {
    let mut rng = bdf_core::rng::seeded(23);
    let mut model = SmallCnn::<f64>::new(8, 8, 3, 3, 7);
    let images = rand_images(&mut rng, 3, 8, 8, 3);
    let labels = vec![0usize, 2, 1];
    let x = batch_from_images(&images);

    bdf_model::optim::Adam::zero_grads(&mut model.params_mut());
    model.ce_train_step(&x, &labels).unwrap();
    let analytic: Vec<ArrayD<f64>> = model.params_mut().iter().map(|p| p.grad.clone()).collect();

    // Check a few parameters end to end (first conv and final dense cover
    // the longest and shortest chains).
    for param_idx in [0usize, 1, 10, 11] {
        let base = model.params_mut()[param_idx].value.clone();
        let numeric = central_diff(&base, 1e-5, |p| {
            model.params_mut()[param_idx].value = p.clone();
            let logits = model.logits(&images);
            softmax_ce(&logits, &labels).unwrap().0
        });
        model.params_mut()[param_idx].value = base;
        let err = max_rel_err(&analytic[param_idx], &numeric, 1e-7);
        assert!(err < 1e-3, "param {param_idx} grad rel err {err}");
    }
}

#[test]
fn feature_gradient_matches_finite_differences() {
    let mut rng = bdf_core::rng::seeded(29);
    let model = SmallCnn::<f64>::new(8, 8, 3, 4, 5);
    let images = rand_images(&mut rng, 1, 8, 8, 3);

    // Scalar objective: fixed random projection of the feature vector.
    let dim = model.feature_dim();
    let mut proj = Array2::zeros((1, dim));
    for v in proj.iter_mut() {
        *v = rng.gen::<f64>() * 2.0 - 1.0;
    }
    let analytic = model.feature_input_grads(&images, &proj);
    let numeric = central_diff(&images[0].clone().into_dyn(), 1e-5, |p| {
        let probe = vec![p.clone().into_dimensionality().unwrap()];
        let f = model.features(&probe);
        (&f * &proj).sum()
    });
    let err = max_rel_err(&analytic[0].clone().into_dyn(), &numeric, 1e-7);
    assert!(err < 1e-3, "feature grad rel err {err}");
}

#[test]
fn denoiser_input_gradient_matches_finite_differences() {
    let mut rng = bdf_core::rng::seeded(31);
    let model = Denoiser::<f64>::new(8, 8, 3, 3);
    let images = rand_images(&mut rng, 1, 8, 8, 3);
    let mut upstream = Array3::zeros((8, 8, 3));
    for v in upstream.iter_mut() {
        *v = rng.gen::<f64>() * 2.0 - 1.0;
    }
    let analytic = model.reconstruct_input_grads(&images, std::slice::from_ref(&upstream));
    let numeric = central_diff(&images[0].clone().into_dyn(), 1e-5, |p| {
        let probe = p.clone().into_dimensionality().unwrap();
        let out = model.reconstruct(&probe);
        (&out * &upstream).sum()
    });
    let err = max_rel_err(&analytic[0].clone().into_dyn(), &numeric, 1e-7);
    assert!(err < 1e-3, "denoiser grad rel err {err}");
}

#[test]
fn softmax_probabilities_sum_to_one() {
    let mut rng = bdf_core::rng::seeded(37);
    let model = SmallCnn::<f32>::new(8, 8, 3, 10, 11);
    let images: Vec<Array3<f32>> = (0..4)
        .map(|_| {
            let mut img = Array3::zeros((8, 8, 3));
            for v in img.iter_mut() {
                *v = rng.gen::<f32>();
            }
            img
        })
        .collect();
    let logits = model.logits(&images);
    let probs = bdf_model::layers::softmax(&logits);
    for row in probs.rows() {
        let s: f32 = row.sum();
        assert!((s - 1.0).abs() < 1e-5, "softmax row sums to {s}");
    }
}

#[test]
fn denoiser_output_stays_in_range_for_out_of_range_input() {
    let mut rng = bdf_core::rng::seeded(41);
    let model = Denoiser::<f32>::new(8, 8, 3, 13);
    let mut img = Array3::zeros((8, 8, 3));
    for v in img.iter_mut() {
        *v = rng.gen::<f32>() * 3.0 - 1.0; // values in [-1, 2]
    }
    let out = model.reconstruct(&img);
    for &v in out.iter() {
        assert!((0.0..=1.0).contains(&v));
    }
}
