//! Gradient-free estimator and boundary-geometry checks against the
//! analytic linear oracle.

mod common;

use common::{linear_two_class, CountingOracle};
use snd_core::estim::*;
use snd_core::loss::LossForm;
use snd_core::models::{LinearModel, Model, ModelError};
use snd_core::oracle::*;
use snd_core::rng::SeededRng;
use snd_core::tensor::{cosine, l2_norm, ImageTensor, Shape};

const SHAPE_8X8: Shape = Shape {
    width: 8,
    height: 8,
    channels: 1,
};

fn reference_linear() -> (LinearModel, ImageTensor, Vec<f64>) {
    let mut rng = SeededRng::new(4242);
    let a: Vec<f64> = (0..64).map(|_| rng.next_gaussian()).collect();
    let x_ref = vec![0.5; 64];
    let model = linear_two_class(&a, &x_ref, 0.05);
    let x0 = ImageTensor::new(SHAPE_8X8, x_ref).unwrap();
    (model, x0, a)
}

#[test]
fn rgf_is_exactly_zero_on_a_constant_model() {
    let model = LinearModel::new(vec![vec![0.0; 64], vec![0.0; 64]], vec![0.0, 0.0]).unwrap();
    let mut oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 1_000, SeededRng::new(1)).unwrap();
    let x0 = ImageTensor::constant(SHAPE_8X8, 0.5);
    let mut rng = SeededRng::new(2);
    let cfg = RgfConfig {
        samples: 50,
        smoothing: 0.01,
        probe_sigma: 1.0,
    };
    let g = rgf_estimate(
        &mut oracle,
        &x0,
        &LossForm::untargeted(0),
        &cfg,
        &mut rng,
    )
    .unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn rgf_aligns_with_analytic_gradient_without_defense() {
    let (model, x0, _) = reference_linear();
    let form = LossForm::untargeted(0);
    let grad = model.analytic_gradient(x0.data(), &form).unwrap();
    let cfg = RgfConfig {
        samples: 2000,
        smoothing: 0.01,
        probe_sigma: 1.0,
    };
    let mut oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 10_000, SeededRng::new(3)).unwrap();
    oracle.set_clip_inputs(false);
    let mut rng = SeededRng::new(4);
    let g = rgf_estimate(&mut oracle, &x0, &form, &cfg, &mut rng).unwrap();
    let c = cosine(&g, &grad);
    assert!(c >= 0.95, "cosine {c}");
}

#[test]
fn rgf_is_disturbed_by_noise_ten_times_the_smoothing_radius() {
    let (model, x0, _) = reference_linear();
    let form = LossForm::untargeted(0);
    let grad = model.analytic_gradient(x0.data(), &form).unwrap();
    let cfg = RgfConfig {
        samples: 2000,
        smoothing: 0.01,
        probe_sigma: 1.0,
    };
    let sigma = 10.0 * cfg.smoothing * cfg.probe_sigma;
    let mut cosines = Vec::new();
    for seed in 0..20 {
        let mut oracle = Oracle::new(
            &model,
            DefenseSpec::Snd { sigma },
            SHAPE_8X8,
            10_000,
            SeededRng::derive(50, seed),
        )
        .unwrap();
        oracle.set_clip_inputs(false);
        let mut rng = SeededRng::derive(60, seed);
        let g = rgf_estimate(&mut oracle, &x0, &form, &cfg, &mut rng).unwrap();
        cosines.push(cosine(&g, &grad));
    }
    let mean = cosines.iter().sum::<f64>() / cosines.len() as f64;
    assert!(mean <= 0.5, "mean defended cosine {mean}");
}

#[test]
fn rgf_consumes_exactly_samples_plus_one_queries() {
    let (model, x0, _) = reference_linear();
    let oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 1_000, SeededRng::new(5)).unwrap();
    let mut shim = CountingOracle::new(oracle);
    let cfg = RgfConfig {
        samples: 37,
        smoothing: 0.01,
        probe_sigma: 1.0,
    };
    let mut rng = SeededRng::new(6);
    rgf_estimate(&mut shim, &x0, &LossForm::untargeted(0), &cfg, &mut rng).unwrap();
    assert_eq!(shim.score_calls, 38);
    assert_eq!(shim.queries_used(), 38);
}

#[test]
fn rgf_budget_exhaustion_discards_partial_estimate() {
    let (model, x0, _) = reference_linear();
    let mut oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 10, SeededRng::new(7)).unwrap();
    let cfg = RgfConfig {
        samples: 50,
        smoothing: 0.01,
        probe_sigma: 1.0,
    };
    let mut rng = SeededRng::new(8);
    assert!(matches!(
        rgf_estimate(&mut oracle, &x0, &LossForm::untargeted(0), &cfg, &mut rng),
        Err(EstimError::BudgetExceeded)
    ));
}

/// Raw-linear-score model: "probabilities" are affine in x, so the adversary
/// loss is exactly a^T x + c and the estimator expectation is available in
/// closed form.
struct LinearProbModel {
    a: Vec<f64>,
}

impl Model for LinearProbModel {
    fn input_dim(&self) -> usize {
        self.a.len()
    }
    fn num_classes(&self) -> usize {
        2
    }
    fn forward_probs(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        // kept well inside (0,1) for the probe ranges used in tests
        let v = 0.5 + 0.05 * snd_core::tensor::dot(&self.a, x);
        Ok(vec![v, 1.0 - v])
    }
    fn analytic_gradient(&self, _x: &[f64], _form: &LossForm) -> Result<Vec<f64>, ModelError> {
        Ok(self.a.iter().map(|v| 0.1 * v).collect())
    }
}

#[test]
fn rgf_is_unbiased_on_a_raw_linear_loss() {
    // mean of g / probe_sigma^2 approaches the loss gradient componentwise
    let d = 8;
    let shape = Shape::new(8, 1, 1);
    let mut setup = SeededRng::new(9);
    let a: Vec<f64> = (0..d).map(|_| 1.0 + 0.2 * setup.next_f64()).collect();
    let model = LinearProbModel { a: a.clone() };
    let target: Vec<f64> = a.iter().map(|v| 0.1 * v).collect(); // grad of loss = 2*0.05*a
    let cfg = RgfConfig {
        samples: 10_000,
        smoothing: 0.01,
        probe_sigma: 1.3,
    };
    let reps = 50;
    let mut mean = vec![0.0; d];
    for rep in 0..reps {
        let mut oracle = Oracle::new(
            &model,
            DefenseSpec::None,
            shape,
            20_000,
            SeededRng::derive(70, rep),
        )
        .unwrap();
        oracle.set_clip_inputs(false);
        let mut rng = SeededRng::derive(80, rep);
        let x0 = ImageTensor::constant(shape, 0.0);
        let g = rgf_estimate(&mut oracle, &x0, &LossForm::untargeted(0), &cfg, &mut rng).unwrap();
        for (m, gi) in mean.iter_mut().zip(g) {
            *m += gi / (cfg.probe_sigma * cfg.probe_sigma) / reps as f64;
        }
    }
    for (m, t) in mean.iter().zip(&target) {
        let rel = (m - t).abs() / t.abs();
        assert!(rel < 0.05, "component {m} vs {t} (rel {rel})");
    }
}

// ---------------------------------------------------------------------------
// binary search
// ---------------------------------------------------------------------------

#[test]
fn binary_search_matches_analytic_hyperplane_distance() {
    let (model, x0, a) = reference_linear();
    let mut oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 10_000, SeededRng::new(10)).unwrap();
    oracle.set_clip_inputs(false);
    // step along the boundary normal to a point observed on the other side
    let normal = snd_core::tensor::normalized(&a).unwrap();
    let outside = x0.add_scaled(&normal, 0.4);
    let outside_label = oracle.decision_query(&outside).unwrap();
    assert_ne!(outside_label, 0);
    let tol = 1e-4;
    let found =
        binary_search_to_boundary(&mut oracle, &x0, 0, &outside, outside_label, tol).unwrap();
    // analytic margin of the reference model is 0.05
    assert!(
        (found.distance_from_inside - 0.05).abs() <= tol * 0.4 + 1e-9,
        "distance {}",
        found.distance_from_inside
    );
}

#[test]
fn binary_search_uses_exactly_the_bisection_count() {
    let (model, x0, a) = reference_linear();
    let oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 10_000, SeededRng::new(11)).unwrap();
    let mut shim = CountingOracle::new(oracle);
    let normal = snd_core::tensor::normalized(&a).unwrap();
    let outside = x0.add_scaled(&normal, 0.4);

    // tol 0.5 -> exactly one bisection
    binary_search_to_boundary(&mut shim, &x0, 0, &outside, 1, 0.5).unwrap();
    assert_eq!(shim.decision_calls, 1);

    // tol 1e-3 -> ceil(log2(1000)) = 10 bisections
    shim.decision_calls = 0;
    binary_search_to_boundary(&mut shim, &x0, 0, &outside, 1, 1e-3).unwrap();
    assert_eq!(shim.decision_calls, 10);
}

#[test]
fn binary_search_rejects_equal_labels() {
    let (model, x0, _) = reference_linear();
    let mut oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 100, SeededRng::new(12)).unwrap();
    let outside = ImageTensor::constant(SHAPE_8X8, 0.9);
    assert!(matches!(
        binary_search_to_boundary(&mut oracle, &x0, 1, &outside, 1, 0.1),
        Err(EstimError::BracketError)
    ));
}

#[test]
fn noisy_binary_search_has_run_to_run_variance() {
    let (model, x0, a) = reference_linear();
    let normal = snd_core::tensor::normalized(&a).unwrap();
    let outside = x0.add_scaled(&normal, 0.4);
    // noise on the scale of the margin
    let mut distances = Vec::new();
    for seed in 0..30 {
        let mut oracle = Oracle::new(
            &model,
            DefenseSpec::Snd { sigma: 0.025 },
            SHAPE_8X8,
            10_000,
            SeededRng::derive(90, seed),
        )
        .unwrap();
        oracle.set_clip_inputs(false);
        let found =
            binary_search_to_boundary(&mut oracle, &x0, 0, &outside, 1, 1e-4).unwrap();
        distances.push(found.distance_from_inside);
    }
    let std = snd_core::analysis::sample_std(&distances);
    assert!(std > 0.0, "noise must spread repeated searches, std {std}");
}

#[test]
fn bracket_interval_halves_and_keeps_opposite_labels() {
    // transparent re-implementation of the loop to observe the bracket
    let (model, x0, a) = reference_linear();
    let mut oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 10_000, SeededRng::new(13)).unwrap();
    oracle.set_clip_inputs(false);
    let normal = snd_core::tensor::normalized(&a).unwrap();
    let mut lo = x0.clone();
    let mut hi = x0.add_scaled(&normal, 0.4);
    let mut width = hi.l2_distance(&lo);
    for _ in 0..10 {
        let mid_data: Vec<f64> = lo
            .data()
            .iter()
            .zip(hi.data())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        let mid = ImageTensor::new(SHAPE_8X8, mid_data).unwrap();
        if oracle.decision_query(&mid).unwrap() == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        let new_width = hi.l2_distance(&lo);
        assert!((new_width - 0.5 * width).abs() < 1e-9);
        width = new_width;
        assert_eq!(
            snd_core::models::predict_label(&model, lo.data()).unwrap(),
            0
        );
        assert_ne!(
            snd_core::models::predict_label(&model, hi.data()).unwrap(),
            0
        );
    }
}

// ---------------------------------------------------------------------------
// boundary distance along a direction
// ---------------------------------------------------------------------------

#[test]
fn distance_along_normal_equals_the_margin() {
    let (model, x0, a) = reference_linear();
    let mut oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 10_000, SeededRng::new(14)).unwrap();
    oracle.set_clip_inputs(false);
    let normal = snd_core::tensor::normalized(&a).unwrap();
    let g = boundary_distance_along(&mut oracle, &x0, 0, &normal, 0.01, 10.0, 1e-4).unwrap();
    assert!((g - 0.05).abs() < 0.05 * 1e-3 + 1e-6, "g {g}");
}

#[test]
fn distance_along_oblique_direction_follows_linear_geometry() {
    let (model, x0, a) = reference_linear();
    let mut oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 10_000, SeededRng::new(15)).unwrap();
    oracle.set_clip_inputs(false);
    let normal = snd_core::tensor::normalized(&a).unwrap();
    // mix the normal with an orthogonal direction
    let mut ortho = vec![0.0; 64];
    ortho[0] = 1.0;
    let along = snd_core::tensor::dot(&ortho, &normal);
    let ortho: Vec<f64> = ortho
        .iter()
        .zip(&normal)
        .map(|(o, n)| o - along * n)
        .collect();
    let ortho = snd_core::tensor::normalized(&ortho).unwrap();
    let dir: Vec<f64> = normal
        .iter()
        .zip(&ortho)
        .map(|(n, o)| 0.6 * n + 0.8 * o)
        .collect();
    let g = boundary_distance_along(&mut oracle, &x0, 0, &dir, 0.01, 10.0, 1e-4).unwrap();
    let expected = 0.05 / 0.6; // margin / cos(angle to normal)
    assert!((g - expected).abs() < expected * 1e-3 + 1e-6, "g {g}");
}

#[test]
fn parallel_direction_returns_infinity() {
    let (model, x0, a) = reference_linear();
    let mut oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 10_000, SeededRng::new(16)).unwrap();
    oracle.set_clip_inputs(false);
    let normal = snd_core::tensor::normalized(&a).unwrap();
    let mut parallel = vec![0.0; 64];
    parallel[3] = 1.0;
    let along = snd_core::tensor::dot(&parallel, &normal);
    let parallel: Vec<f64> = parallel
        .iter()
        .zip(&normal)
        .map(|(p, n)| p - along * n)
        .collect();
    let g =
        boundary_distance_along(&mut oracle, &x0, 0, &parallel, 0.01, 50.0, 1e-3).unwrap();
    assert!(g.is_infinite());
}

#[test]
fn zero_direction_is_rejected() {
    let (model, x0, _) = reference_linear();
    let mut oracle =
        Oracle::new(&model, DefenseSpec::None, SHAPE_8X8, 100, SeededRng::new(17)).unwrap();
    assert!(matches!(
        boundary_distance_along(&mut oracle, &x0, 0, &vec![0.0; 64], 0.01, 10.0, 1e-3),
        Err(EstimError::InvalidParameter(_))
    ));
    let _ = l2_norm(&[1.0]);
}
