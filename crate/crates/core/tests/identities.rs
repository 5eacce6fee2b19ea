//! Runtime checks of the optimality identities behind the approximation
//! bound. At the exact optimum these hold exactly; the tolerances absorb the
//! solver residual, scaled by 1/sigma_min with a slack factor of 10.

use ndarray::{Array1, ArrayView1, ArrayView2};
use sublogit::analysis::check_structural_conditions;
use sublogit::linalg::{leverage_scores, orthonormal_basis};
use sublogit::logreg::{fit_full, fit_subsampled, SolverConfig};
use sublogit::sketch::{construct_sketch, make_distribution, sketch_diagonal, SamplingScheme};
use sublogit::synth::gaussian_instance;

const SOLVER_SLACK: f64 = 10.0;

fn weighted_basis_product(
    u: ArrayView2<'_, f64>,
    weights: ArrayView1<'_, f64>,
    v: ArrayView1<'_, f64>,
) -> Array1<f64> {
    let mut out = Array1::zeros(u.ncols());
    for (i, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            out.scaled_add(w * v[i], &u.row(i));
        }
    }
    out
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// At the full-data optimum the residual is orthogonal to range(X), so its
/// basis coordinates vanish up to the score tolerance over sigma_min.
#[test]
fn residual_is_orthogonal_to_the_basis_at_the_full_optimum() {
    let (x, y) = gaussian_instance(1500, 6, false, 0.5, 501);
    let cfg = SolverConfig::default();
    let full = fit_full(&x, &y, &cfg).unwrap();
    assert!(full.converged);
    let basis = orthonormal_basis(&x).unwrap();

    let residual = &y.values() - &full.probs;
    let coords = basis.u().t().dot(&residual);
    let bound = cfg.resolved_grad_tol(x.rows()) / basis.sigma_min();
    let got = coords.dot(&coords).sqrt();
    assert!(got <= bound * (1.0 + 1e-9), "{got} > {bound}");
}

/// Weighted-score identity at the subsampled optimum:
/// U^T S^T S (y - p_star) equals U^T S^T S (p_hat - p_star) once the
/// weighted score of p_hat vanishes.
#[test]
fn weighted_residual_identity_at_the_subsampled_optimum() {
    let (x, y) = gaussian_instance(2000, 5, false, 0.5, 77);
    let cfg = SolverConfig::default();
    let full = fit_full(&x, &y, &cfg).unwrap();
    assert!(full.converged);
    let basis = orthonormal_basis(&x).unwrap();
    let scores = leverage_scores(&basis);
    let dist = make_distribution(SamplingScheme::Leverage, Some(&scores), x.rows()).unwrap();
    let bound = SOLVER_SLACK * cfg.resolved_grad_tol(x.rows()) / basis.sigma_min();

    let mut checked = 0;
    for trial in 0..30u64 {
        let plan = construct_sketch(&dist, 800, 7000 + trial).unwrap();
        let fit = fit_subsampled(&x, &y, &plan, &dist, &cfg).unwrap();
        if !fit.converged {
            continue;
        }
        checked += 1;
        let weights = sketch_diagonal(&plan, &dist).unwrap();
        let res_star = (&y.values() - &full.probs).to_owned();
        let delta_p = (&fit.probs - &full.probs).to_owned();
        let lhs = weighted_basis_product(basis.u(), weights.weights(), res_star.view());
        let rhs = weighted_basis_product(basis.u(), weights.weights(), delta_p.view());
        let diff = &lhs - &rhs;
        assert!(
            norm(&diff) <= bound,
            "trial {trial}: identity residual {} > {bound}",
            norm(&diff)
        );
    }
    assert!(checked >= 25, "too few converged fits: {checked}");
}

/// Lower-bound direction: whenever the norm-preservation condition holds for
/// x = p_hat - p_star, the sketched basis coordinates retain at least a
/// (1 - eps/2) fraction of its norm, up to solver slack.
#[test]
fn sketched_coordinates_preserve_the_probability_deviation() {
    let (x, y) = gaussian_instance(2000, 5, false, 0.5, 78);
    let cfg = SolverConfig::default();
    let eps = 0.5;
    let full = fit_full(&x, &y, &cfg).unwrap();
    assert!(full.converged);
    let basis = orthonormal_basis(&x).unwrap();
    let scores = leverage_scores(&basis);
    let dist = make_distribution(SamplingScheme::Leverage, Some(&scores), x.rows()).unwrap();
    let slack = SOLVER_SLACK * cfg.resolved_grad_tol(x.rows()) / basis.sigma_min();

    let mut conditioned = 0;
    for trial in 0..30u64 {
        let plan = construct_sketch(&dist, 800, 8000 + trial).unwrap();
        let fit = fit_subsampled(&x, &y, &plan, &dist, &cfg).unwrap();
        if !fit.converged {
            continue;
        }
        let delta_p = (&fit.probs - &full.probs).to_owned();
        let report = check_structural_conditions(
            &basis,
            &plan,
            &dist,
            delta_p.view(),
            &y,
            full.probs.view(),
            eps,
            None,
        )
        .unwrap();
        if !report.cond1_holds {
            continue;
        }
        conditioned += 1;
        let weights = sketch_diagonal(&plan, &dist).unwrap();
        let sketched = weighted_basis_product(basis.u(), weights.weights(), delta_p.view());
        let lhs = norm(&sketched) + slack;
        let rhs = (1.0 - eps / 2.0) * norm(&delta_p);
        assert!(lhs >= rhs, "trial {trial}: {lhs} < {rhs}");
    }
    assert!(
        conditioned >= 25,
        "too few conditioned trials: {conditioned}"
    );
}
