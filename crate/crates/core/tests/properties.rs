//! Property tests for the numerical invariants that should hold on any
//! well-formed input, not just the hand-picked cases.

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use sublogit::linalg::{leverage_scores, orthonormal_basis, DesignMatrix};
use sublogit::logreg::{
    grad_log_likelihood, log_likelihood, predict_probs, Coefficients, ResponseVector,
};
use sublogit::sketch::{
    apply_sketch, construct_sketch, make_distribution, required_sample_size, sketch_diagonal,
    SamplingScheme,
};

fn design_strategy(max_n: usize, max_d: usize) -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..=max_d)
        .prop_flat_map(move |d| (Just(d), d.max(2)..=max_n))
        .prop_flat_map(|(d, n)| {
            (
                Just(n),
                Just(d),
                proptest::collection::vec(-3.0f64..3.0, n * d),
            )
        })
}

/// Full column rank is not guaranteed by the strategy; skip the rare
/// degenerate draw the same way a caller would.
fn try_basis(
    n: usize,
    d: usize,
    data: Vec<f64>,
) -> Option<(DesignMatrix, sublogit::linalg::OrthonormalBasis)> {
    let x = DesignMatrix::from_shape_vec(n, d, data).ok()?;
    let basis = orthonormal_basis(&x).ok()?;
    Some((x, basis))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leverage_scores_sum_to_d_and_stay_in_range((n, d, data) in design_strategy(40, 6)) {
        if let Some((_, basis)) = try_basis(n, d, data) {
            let scores = leverage_scores(&basis);
            let sum = scores.sum();
            prop_assert!((sum - d as f64).abs() / d as f64 <= 1e-8);
            for &v in scores.values().iter() {
                prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            }
        }
    }

    #[test]
    fn basis_is_orthonormal((n, d, data) in design_strategy(40, 6)) {
        if let Some((_, basis)) = try_basis(n, d, data) {
            let u = basis.u();
            let utu = u.t().dot(&u);
            for i in 0..d {
                for j in 0..d {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((utu[[i, j]] - expect).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn plans_have_one_nonzero_per_row_and_are_seed_deterministic(
        (n, d, data) in design_strategy(30, 4),
        s in 1usize..40,
        seed in any::<u64>(),
    ) {
        if let Some((_, basis)) = try_basis(n, d, data) {
            let scores = leverage_scores(&basis);
            let dist = make_distribution(SamplingScheme::Leverage, Some(&scores), n).unwrap();
            let plan = construct_sketch(&dist, s, seed).unwrap();
            prop_assert_eq!(plan.sample_size(), s);
            prop_assert_eq!(plan.multiplicities().iter().sum::<usize>(), s);
            for e in plan.entries() {
                prop_assert!(e.index < n);
                prop_assert!(e.scale.is_finite() && e.scale > 0.0);
                prop_assert!(dist.probs()[e.index] > 0.0);
            }
            let again = construct_sketch(&dist, s, seed).unwrap();
            prop_assert_eq!(plan, again);
        }
    }

    #[test]
    fn sketch_diagonal_matches_multiplicity_formula(
        (n, d, data) in design_strategy(20, 3),
        s in 1usize..25,
        seed in any::<u64>(),
    ) {
        if let Some((_, basis)) = try_basis(n, d, data) {
            let scores = leverage_scores(&basis);
            let dist = make_distribution(SamplingScheme::L2s, Some(&scores), n).unwrap();
            let plan = construct_sketch(&dist, s, seed).unwrap();
            let diag = sketch_diagonal(&plan, &dist).unwrap();
            let counts = plan.multiplicities();
            for (l, &count) in counts.iter().enumerate() {
                if count == 0 {
                    prop_assert_eq!(diag.weights()[l], 0.0);
                } else {
                    let expected = count as f64 / (s as f64 * dist.probs()[l]);
                    prop_assert_eq!(diag.weights()[l], expected);
                }
            }
        }
    }

    #[test]
    fn applying_a_sketch_selects_rescaled_rows(
        (n, d, data) in design_strategy(20, 3),
        s in 1usize..25,
        seed in any::<u64>(),
    ) {
        if let Some((x, _)) = try_basis(n, d, data) {
            let dist = make_distribution(SamplingScheme::Uniform, None, n).unwrap();
            let plan = construct_sketch(&dist, s, seed).unwrap();
            let out = apply_sketch(&plan, x.view()).unwrap();
            prop_assert_eq!(out.nrows(), s);
            for (t, e) in plan.entries().iter().enumerate() {
                for j in 0..d {
                    prop_assert_eq!(out[[t, j]], e.scale * x.as_array()[[e.index, j]]);
                }
            }
        }
    }

    #[test]
    fn required_sample_size_is_monotone(
        d in 1usize..50,
        eps in 0.05f64..0.95,
        delta in 0.05f64..0.95,
    ) {
        let base = required_sample_size(d, eps, delta).unwrap();
        prop_assert!(base >= 8);
        let more_cols = required_sample_size(d + 1, eps, delta).unwrap();
        prop_assert!(more_cols >= base);
        let tighter_eps = required_sample_size(d, eps * 0.5, delta).unwrap();
        prop_assert!(tighter_eps >= base);
        let tighter_delta = required_sample_size(d, eps, delta * 0.5).unwrap();
        prop_assert!(tighter_delta >= base);
    }

    #[test]
    fn probabilities_stay_in_the_open_interval(
        (n, d, data) in design_strategy(30, 4),
        coef in proptest::collection::vec(-200.0f64..200.0, 6),
    ) {
        if let Ok(x) = DesignMatrix::from_shape_vec(n, d, data) {
            let beta = Coefficients::new(Array1::from(coef[..d].to_vec())).unwrap();
            let p = predict_probs(&x, &beta).unwrap();
            for &v in p.iter() {
                prop_assert!(v > 0.0 && v < 1.0 && v.is_finite());
            }
        }
    }

    #[test]
    fn log_likelihood_is_concave_on_segments(
        (n, d, data) in design_strategy(30, 4),
        a in proptest::collection::vec(-2.0f64..2.0, 6),
        b in proptest::collection::vec(-2.0f64..2.0, 6),
        labels in proptest::collection::vec(0u8..2, 30),
    ) {
        if let Ok(x) = DesignMatrix::from_shape_vec(n, d, data) {
            let y = ResponseVector::new(
                Array1::from_iter(labels.iter().take(n).map(|&v| v as f64)),
            ).unwrap();
            let beta_a = Array1::from(a[..d].to_vec());
            let beta_b = Array1::from(b[..d].to_vec());
            let mid = (&beta_a + &beta_b) * 0.5;
            let ll = |v: Array1<f64>| {
                log_likelihood(&x, &y, &Coefficients::new(v).unwrap()).unwrap()
            };
            prop_assert!(ll(mid) >= 0.5 * (ll(beta_a) + ll(beta_b)) - 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_on_random_points(
        (n, d, data) in design_strategy(25, 4),
        point in proptest::collection::vec(-1.5f64..1.5, 6),
        labels in proptest::collection::vec(0u8..2, 25),
    ) {
        if let Ok(x) = DesignMatrix::from_shape_vec(n, d, data) {
            let y = ResponseVector::new(
                Array1::from_iter(labels.iter().take(n).map(|&v| v as f64)),
            ).unwrap();
            let beta_vec = Array1::from(point[..d].to_vec());
            let beta = Coefficients::new(beta_vec.clone()).unwrap();
            let g = grad_log_likelihood(&x, &y, &beta).unwrap();
            let h = 1e-6;
            let mut fd = Array1::zeros(d);
            for j in 0..d {
                let mut up = beta_vec.clone();
                up[j] += h;
                let mut down = beta_vec.clone();
                down[j] -= h;
                fd[j] = (log_likelihood(&x, &y, &Coefficients::new(up).unwrap()).unwrap()
                    - log_likelihood(&x, &y, &Coefficients::new(down).unwrap()).unwrap())
                    / (2.0 * h);
            }
            let diff = &g - &fd;
            let denom = fd.dot(&fd).sqrt().max(1.0);
            prop_assert!(diff.dot(&diff).sqrt() / denom <= 1e-5);
        }
    }

    #[test]
    fn leverage_scores_ignore_right_multiplication(
        (n, d, data) in design_strategy(25, 3),
        perturb in proptest::collection::vec(-0.3f64..0.3, 9),
    ) {
        if let Some((x, basis)) = try_basis(n, d, data) {
            let mut r = Array2::<f64>::eye(d) * 1.5;
            for (v, p) in r.iter_mut().zip(perturb.iter()) {
                *v += p;
            }
            let xr_arr = x.as_array().dot(&r);
            if let Ok(xr) = DesignMatrix::new(xr_arr) {
                if let Ok(basis_r) = orthonormal_basis(&xr) {
                    let scores = leverage_scores(&basis);
                    let scores_r = leverage_scores(&basis_r);
                    for (&a, &b) in scores.values().iter().zip(scores_r.values().iter()) {
                        prop_assert!((a - b).abs() <= 1e-8, "{} vs {}", a, b);
                    }
                }
            }
        }
    }
}
