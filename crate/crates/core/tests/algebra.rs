//! Oracle tests for the stamping algebra: hand-computed values, scalar-loop
//! reference implementations, round-trip properties, and finite-difference
//! gradient checks in double precision.

use approx::assert_abs_diff_eq;
use bdf_core::gradcheck::{central_diff, max_rel_err};
use bdf_core::image::{ChannelStats, ImageTensor};
use bdf_core::stamp::{
    normalize, normalize_raw, normalize_vjp, stamp_patch, stamp_patch_raw, stamp_patch_vjp,
    stamp_transform, stamp_transform_raw, stamp_transform_vjp, unstamp_patch, unstamp_patch_raw,
    unstamp_patch_vjp,
};
use bdf_core::trigger::{PatchTrigger, TransformTrigger};
use bdf_core::Real;
use ndarray::{Array1, Array2, Array3, ArrayD, IxDyn};
use rand::Rng;

fn rand_array3<F: Real>(rng: &mut bdf_core::rng::Rng, dim: (usize, usize, usize), lo: f64, hi: f64) -> Array3<F> {
    let mut a = Array3::zeros(dim);
    for v in a.iter_mut() {
        *v = F::from_f64(lo + (hi - lo) * rng.gen::<f64>());
    }
    a
}

fn rand_array2<F: Real>(rng: &mut bdf_core::rng::Rng, dim: (usize, usize), lo: f64, hi: f64) -> Array2<F> {
    let mut a = Array2::zeros(dim);
    for v in a.iter_mut() {
        *v = F::from_f64(lo + (hi - lo) * rng.gen::<f64>());
    }
    a
}

#[test]
fn stamp_patch_identity_and_full_replacement() {
    let mut rng = bdf_core::rng::seeded(7);
    let x = ImageTensor::new(rand_array3::<f32>(&mut rng, (8, 8, 3), 0.0, 1.0)).unwrap();
    let pattern = rand_array3::<f32>(&mut rng, (8, 8, 3), 0.0, 1.0);

    let zero = PatchTrigger::new(Array2::zeros((8, 8)), pattern.clone()).unwrap();
    let out = stamp_patch(&x, &zero).unwrap();
    assert_eq!(out.data(), x.data());

    let ones = PatchTrigger::new(Array2::from_elem((8, 8), 1.0), pattern.clone()).unwrap();
    let out = stamp_patch(&x, &ones).unwrap();
    assert_eq!(out.data(), &pattern);
}

#[test]
fn stamp_patch_single_pixel_arithmetic() {
    // x = 0.4, t = 0.8, m = 0.5 -> 0.6
    let x = Array3::from_elem((3, 3, 1), 0.4f64);
    let m = Array2::from_elem((3, 3), 0.5f64);
    let t = Array3::from_elem((3, 3, 1), 0.8f64);
    let out = stamp_patch_raw(&x, &m, &t);
    assert_abs_diff_eq!(out[[1, 1, 0]], 0.6, epsilon = 1e-12);
}

#[test]
fn unstamp_patch_single_pixel_arithmetic() {
    // xt = 0.6, t = 0.8, m = 0.5 -> 0.4
    let xt = Array3::from_elem((3, 3, 1), 0.6f64);
    let m = Array2::from_elem((3, 3), 0.5f64);
    let t = Array3::from_elem((3, 3, 1), 0.8f64);
    let out = unstamp_patch_raw(&xt, &m, &t);
    assert_abs_diff_eq!(out[[0, 0, 0]], 0.4, epsilon = 1e-12);
}

#[test]
fn unstamp_patch_identity_mask() {
    let mut rng = bdf_core::rng::seeded(9);
    let xt = ImageTensor::new(rand_array3::<f32>(&mut rng, (6, 5, 3), 0.0, 1.0)).unwrap();
    let trig = PatchTrigger::new(
        Array2::zeros((6, 5)),
        rand_array3::<f32>(&mut rng, (6, 5, 3), 0.0, 1.0),
    )
    .unwrap();
    let out = unstamp_patch(&xt, &trig).unwrap();
    assert_eq!(&out, xt.data());
}

#[test]
fn stamp_unstamp_round_trip_1000_random_draws() {
    // Masks bounded away from 1 so the unstamp denominator floor never
    // engages; recovery must hold to 1e-5.
    let mut rng = bdf_core::rng::seeded(42);
    for _ in 0..1000 {
        let h = rng.gen_range(3..10);
        let w = rng.gen_range(3..10);
        let x = ImageTensor::new(rand_array3::<f32>(&mut rng, (h, w, 3), 0.0, 1.0)).unwrap();
        let mask = rand_array2::<f32>(&mut rng, (h, w), 0.0, 0.9);
        let pattern = rand_array3::<f32>(&mut rng, (h, w, 3), 0.0, 1.0);
        let trig = PatchTrigger::new(mask, pattern).unwrap();
        let stamped = stamp_patch(&x, &trig).unwrap();
        let recovered = unstamp_patch(&stamped, &trig).unwrap();
        for (&a, &b) in recovered.iter().zip(x.data().iter()) {
            assert!((a - b).abs() < 1e-5, "round trip error {}", (a - b).abs());
        }
    }
}

#[test]
fn transform_identity_is_exact() {
    let mut rng = bdf_core::rng::seeded(3);
    let x = ImageTensor::new(rand_array3::<f32>(&mut rng, (7, 9, 3), 0.0, 1.0)).unwrap();
    let id = TransformTrigger::identity(7, 9, 3);
    let out = stamp_transform(&x, &id).unwrap();
    assert_eq!(out.data(), x.data());
}

#[test]
fn transform_worked_neighborhood_example() {
    // 3x3 input neighborhood
    //   5  1  8
    //   2  3 16
    //   4  0  7
    // against grid
    //   0.2 0.5 0.1
    //   0.5 0.9 0.0
    //   0.1 0.7 0.2
    // with zero bias gives 7.8 at the center (computed pre-clamp).
    let x = Array3::from_shape_vec(
        (3, 3, 1),
        vec![5.0f64, 1.0, 8.0, 2.0, 3.0, 16.0, 4.0, 0.0, 7.0],
    )
    .unwrap();
    let mut weights = Array3::zeros((9, 9, 1));
    let grid = [
        [0.2, 0.5, 0.1],
        [0.5, 0.9, 0.0],
        [0.1, 0.7, 0.2],
    ];
    for (r, row) in grid.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            weights[[3 + r, 3 + c, 0]] = v;
        }
    }
    let biases = Array3::zeros((3, 3, 1));
    let out = stamp_transform_raw(&x, &weights, &biases);
    assert_abs_diff_eq!(out[[1, 1, 0]], 7.8, epsilon = 1e-12);
}

#[test]
fn transform_zero_weights_bias_only() {
    let mut rng = bdf_core::rng::seeded(5);
    let x = ImageTensor::new(rand_array3::<f32>(&mut rng, (5, 5, 3), 0.0, 1.0)).unwrap();
    let trig = TransformTrigger::new(
        Array3::zeros((15, 15, 3)),
        Array3::from_elem((5, 5, 3), 0.3f32),
    )
    .unwrap();
    let out = stamp_transform(&x, &trig).unwrap();
    for &v in out.data().iter() {
        assert_abs_diff_eq!(v, 0.3, epsilon = 1e-7);
    }
}

#[test]
fn transform_linear_in_trigger() {
    // stamp(x, a·T1 + b·T2) pre-clamp equals a·stamp(x,T1) + b·stamp(x,T2)
    // pre-clamp when biases scale accordingly.
    let mut rng = bdf_core::rng::seeded(11);
    let x = rand_array3::<f64>(&mut rng, (5, 4, 3), 0.0, 1.0);
    let w1 = rand_array3::<f64>(&mut rng, (15, 12, 3), -0.5, 0.5);
    let b1 = rand_array3::<f64>(&mut rng, (5, 4, 3), -0.2, 0.2);
    let w2 = rand_array3::<f64>(&mut rng, (15, 12, 3), -0.5, 0.5);
    let b2 = rand_array3::<f64>(&mut rng, (5, 4, 3), -0.2, 0.2);
    let (a, b) = (0.7f64, -1.3f64);
    let combo_w = &w1 * a + &w2 * b;
    let combo_b = &b1 * a + &b2 * b;
    let lhs = stamp_transform_raw(&x, &combo_w, &combo_b);
    let rhs = stamp_transform_raw(&x, &w1, &b1) * a + stamp_transform_raw(&x, &w2, &b2) * b;
    for (&l, &r) in lhs.iter().zip(rhs.iter()) {
        assert_abs_diff_eq!(l, r, epsilon = 1e-12);
    }
}

#[test]
fn normalize_arithmetic_and_fixed_point() {
    // Half the pixels at 0.3, half at 0.1: mean 0.2, population std 0.1.
    // The 0.3 pixel must map to (0.3-0.2)/0.1*0.2 + 0.5 = 0.7.
    let mut x4 = Array3::<f64>::zeros((4, 3, 1));
    for (idx, v) in x4.iter_mut().enumerate() {
        *v = if idx % 2 == 0 { 0.3 } else { 0.1 };
    }
    let reference = ChannelStats::new(Array1::from_vec(vec![0.5]), Array1::from_vec(vec![0.2])).unwrap();
    let out = normalize(&x4, &reference).unwrap();
    assert_abs_diff_eq!(out[[0, 0, 0]], 0.7, epsilon = 1e-9);
    assert_abs_diff_eq!(out[[0, 1, 0]], 0.3, epsilon = 1e-9);

    // Fixed point: an image whose stats already match the reference.
    let stats = ChannelStats::of_array(&x4);
    let out = normalize(&x4, &stats).unwrap();
    for (&a, &b) in out.iter().zip(x4.iter()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-6);
    }
}

#[test]
fn normalize_is_idempotent() {
    let mut rng = bdf_core::rng::seeded(21);
    for _ in 0..20 {
        let x = rand_array3::<f64>(&mut rng, (8, 8, 3), -0.5, 1.5);
        let reference = ChannelStats::new(
            Array1::from_vec(vec![0.4, 0.5, 0.6]),
            Array1::from_vec(vec![0.1, 0.2, 0.15]),
        )
        .unwrap();
        let once = normalize(&x, &reference).unwrap();
        let twice = normalize(&once, &reference).unwrap();
        for (&a, &b) in twice.iter().zip(once.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
        // Output stats equal the reference.
        let got = ChannelStats::of_array(&once);
        for k in 0..3 {
            assert_abs_diff_eq!(got.mean[k], reference.mean[k], epsilon = 1e-6);
            assert_abs_diff_eq!(got.std[k], reference.std[k], epsilon = 1e-6);
        }
    }
}

#[test]
fn normalize_constant_channel_floors_std() {
    let x = Array3::<f32>::from_elem((4, 4, 1), 0.5);
    let reference = ChannelStats::new(Array1::from_vec(vec![0.3f32]), Array1::from_vec(vec![0.2f32])).unwrap();
    let out = normalize(&x, &reference).unwrap();
    for &v in out.iter() {
        assert!(v.is_finite());
        assert_abs_diff_eq!(v, 0.3, epsilon = 1e-5);
    }
}

// ---------------------------------------------------------------------------
// Gradient checks (double precision, central differences).
// ---------------------------------------------------------------------------

fn as_dyn<F: Real>(a: &Array3<F>) -> ArrayD<F> {
    a.clone().into_dyn()
}

#[test]
fn stamp_patch_gradients_match_finite_differences() {
    let mut rng = bdf_core::rng::seeded(31);
    let x = rand_array3::<f64>(&mut rng, (4, 4, 3), 0.05, 0.95);
    let mask = rand_array2::<f64>(&mut rng, (4, 4), 0.05, 0.9);
    let pattern = rand_array3::<f64>(&mut rng, (4, 4, 3), 0.05, 0.95);
    // Scalar objective: weighted sum of outputs with fixed weights.
    let weights = rand_array3::<f64>(&mut rng, (4, 4, 3), -1.0, 1.0);
    let loss = |xx: &Array3<f64>, mm: &Array2<f64>, tt: &Array3<f64>| {
        (stamp_patch_raw(xx, mm, tt) * &weights).sum()
    };
    let (dx, dm, dt) = stamp_patch_vjp(&x, &mask, &pattern, &weights);

    let num_dx = central_diff(&as_dyn(&x), 1e-6, |p| {
        loss(&p.clone().into_dimensionality().unwrap(), &mask, &pattern)
    });
    assert!(max_rel_err(&as_dyn(&dx), &num_dx, 1e-8) < 1e-4);

    let num_dm = central_diff(&mask.clone().into_dyn(), 1e-6, |p| {
        loss(&x, &p.clone().into_dimensionality().unwrap(), &pattern)
    });
    assert!(max_rel_err(&dm.clone().into_dyn(), &num_dm, 1e-8) < 1e-4);

    let num_dt = central_diff(&as_dyn(&pattern), 1e-6, |p| {
        loss(&x, &mask, &p.clone().into_dimensionality().unwrap())
    });
    assert!(max_rel_err(&as_dyn(&dt), &num_dt, 1e-8) < 1e-4);
}

#[test]
fn unstamp_patch_gradients_match_finite_differences() {
    let mut rng = bdf_core::rng::seeded(37);
    let xt = rand_array3::<f64>(&mut rng, (4, 4, 3), 0.05, 0.95);
    let mask = rand_array2::<f64>(&mut rng, (4, 4), 0.05, 0.9);
    let pattern = rand_array3::<f64>(&mut rng, (4, 4, 3), 0.05, 0.95);
    let weights = rand_array3::<f64>(&mut rng, (4, 4, 3), -1.0, 1.0);
    let loss = |xx: &Array3<f64>, mm: &Array2<f64>, tt: &Array3<f64>| {
        (unstamp_patch_raw(xx, mm, tt) * &weights).sum()
    };
    let (dxt, dm, dt) = unstamp_patch_vjp(&xt, &mask, &pattern, &weights);

    let num = central_diff(&as_dyn(&xt), 1e-6, |p| {
        loss(&p.clone().into_dimensionality().unwrap(), &mask, &pattern)
    });
    assert!(max_rel_err(&as_dyn(&dxt), &num, 1e-8) < 1e-4);

    let num = central_diff(&mask.clone().into_dyn(), 1e-7, |p| {
        loss(&xt, &p.clone().into_dimensionality().unwrap(), &pattern)
    });
    assert!(max_rel_err(&dm.clone().into_dyn(), &num, 1e-8) < 1e-4);

    let num = central_diff(&as_dyn(&pattern), 1e-6, |p| {
        loss(&xt, &mask, &p.clone().into_dimensionality().unwrap())
    });
    assert!(max_rel_err(&as_dyn(&dt), &num, 1e-8) < 1e-4);
}

#[test]
fn stamp_transform_gradients_match_finite_differences() {
    let mut rng = bdf_core::rng::seeded(41);
    let x = rand_array3::<f64>(&mut rng, (4, 4, 1), 0.05, 0.95);
    let w = rand_array3::<f64>(&mut rng, (12, 12, 1), -0.5, 0.5);
    let b = rand_array3::<f64>(&mut rng, (4, 4, 1), -0.2, 0.2);
    let upstream = rand_array3::<f64>(&mut rng, (4, 4, 1), -1.0, 1.0);
    let loss = |xx: &Array3<f64>, ww: &Array3<f64>, bb: &Array3<f64>| {
        (stamp_transform_raw(xx, ww, bb) * &upstream).sum()
    };
    let (dx, dw, db) = stamp_transform_vjp(&x, &w, &upstream);

    let num = central_diff(&as_dyn(&x), 1e-6, |p| {
        loss(&p.clone().into_dimensionality().unwrap(), &w, &b)
    });
    assert!(max_rel_err(&as_dyn(&dx), &num, 1e-8) < 1e-3);

    let num = central_diff(&as_dyn(&w), 1e-6, |p| {
        loss(&x, &p.clone().into_dimensionality().unwrap(), &b)
    });
    assert!(max_rel_err(&as_dyn(&dw), &num, 1e-8) < 1e-3);

    let num = central_diff(&as_dyn(&b), 1e-6, |p| {
        loss(&x, &w, &p.clone().into_dimensionality().unwrap())
    });
    assert!(max_rel_err(&as_dyn(&db), &num, 1e-8) < 1e-3);
}

#[test]
fn normalize_gradient_matches_finite_differences() {
    let mut rng = bdf_core::rng::seeded(43);
    let x = rand_array3::<f64>(&mut rng, (5, 5, 3), 0.0, 1.0);
    let reference = ChannelStats::new(
        Array1::from_vec(vec![0.4, 0.5, 0.6]),
        Array1::from_vec(vec![0.15, 0.2, 0.1]),
    )
    .unwrap();
    let upstream = rand_array3::<f64>(&mut rng, (5, 5, 3), -1.0, 1.0);
    let (_, cache) = normalize_raw(&x, &reference);
    let dx = normalize_vjp(&cache, &upstream);
    let num = central_diff(&as_dyn(&x), 1e-6, |p| {
        let arr: Array3<f64> = p.clone().into_dimensionality().unwrap();
        (normalize_raw(&arr, &reference).0 * &upstream).sum()
    });
    assert!(max_rel_err(&as_dyn(&dx), &num, 1e-8) < 1e-3);
}

#[test]
fn dimension_mismatch_is_reported() {
    let x = ImageTensor::<f32>::zeros(8, 8, 3).unwrap();
    let trig = PatchTrigger::new(Array2::zeros((4, 4)), Array3::zeros((4, 4, 3))).unwrap();
    assert!(stamp_patch(&x, &trig).is_err());
    assert!(unstamp_patch(&x, &trig).is_err());
    let tt = TransformTrigger::identity(4, 4, 3);
    assert!(stamp_transform(&x, &tt).is_err());
}

#[test]
fn grid_for_pixel_addresses_its_own_block() {
    // The weight element at (3i+1+p, 3j+1+q) belongs to output pixel (i, j)
    // only: perturbing a grid outside a pixel's block never changes that
    // pixel.
    let mut rng = bdf_core::rng::seeded(53);
    let x = rand_array3::<f64>(&mut rng, (4, 4, 1), 0.0, 1.0);
    let w = rand_array3::<f64>(&mut rng, (12, 12, 1), -0.5, 0.5);
    let b = Array3::zeros((4, 4, 1));
    let base = stamp_transform_raw(&x, &w, &b);
    let mut w2 = w.clone();
    w2[[3 * 2 + 1, 3 * 3 + 1, 0]] += 0.25; // center weight of pixel (2, 3)
    let bumped = stamp_transform_raw(&x, &w2, &b);
    for i in 0..4 {
        for j in 0..4 {
            if (i, j) == (2, 3) {
                assert!((bumped[[i, j, 0]] - base[[i, j, 0]]).abs() > 1e-9);
            } else {
                assert_abs_diff_eq!(bumped[[i, j, 0]], base[[i, j, 0]], epsilon = 1e-12);
            }
        }
    }
}
