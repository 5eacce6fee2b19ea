//! Sampling distributions and the sampling-and-rescaling sketch.
//!
//! A sketch is a conceptual s-by-n matrix S with one nonzero per row: row t
//! picks source row j_t (drawn i.i.d. with replacement from a probability
//! vector) and rescales it by (s * pi_{j_t})^{-1/2}. S is never materialized;
//! a plan stores the s (index, scale) pairs, which is all that applying S or
//! forming the diagonal of S^T S requires.

use crate::linalg::LeverageScores;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SketchError {
    #[error("scheme {0:?} requires leverage scores")]
    MissingScores(SamplingScheme),
    #[error("expected {expected} probabilities/rows, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sampling distribution has no positive mass")]
    DegenerateDistribution,
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("plan references index {index} which has zero probability under the distribution")]
    DistributionMismatch { index: usize },
    #[error("{name} must lie strictly inside (0, 1), got {value}")]
    InvalidRange { name: &'static str, value: f64 },
    #[error("plan entry {position} is invalid: index {index}, scale {scale}")]
    InvalidEntry {
        position: usize,
        index: usize,
        scale: f64,
    },
}

/// Row-sampling scheme.
///
/// `L2s` mixes, with equal weight, a component proportional to the square
/// root of the leverage scores and a uniform component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingScheme {
    Uniform,
    Leverage,
    L2s,
}

impl SamplingScheme {
    pub fn label(&self) -> &'static str {
        match self {
            SamplingScheme::Uniform => "uniform",
            SamplingScheme::Leverage => "leverage",
            SamplingScheme::L2s => "l2s",
        }
    }

    /// Stable tag used for per-cell seed derivation.
    pub(crate) fn tag(&self) -> u64 {
        match self {
            SamplingScheme::Uniform => 1,
            SamplingScheme::Leverage => 2,
            SamplingScheme::L2s => 3,
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "uniform" => Some(SamplingScheme::Uniform),
            "leverage" => Some(SamplingScheme::Leverage),
            "l2s" => Some(SamplingScheme::L2s),
            _ => None,
        }
    }
}

/// A probability vector over the n source rows, tagged with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    probs: Array1<f64>,
    scheme: SamplingScheme,
}

impl SamplingDistribution {
    pub fn probs(&self) -> ArrayView1<'_, f64> {
        self.probs.view()
    }

    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// One row of the conceptual sketch matrix: source index and rescale factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchEntry {
    pub index: usize,
    pub scale: f64,
}

/// The sampled index multiset with rescaling factors representing S.
///
/// Identical (distribution, s, seed) always reproduce the same plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchPlan {
    entries: Vec<SketchEntry>,
    source_rows: usize,
    seed: u64,
}

impl SketchPlan {
    /// Builds a plan from explicit entries (deterministic sketches, tests).
    pub fn from_entries(
        entries: Vec<SketchEntry>,
        source_rows: usize,
        seed: u64,
    ) -> Result<Self, SketchError> {
        if entries.is_empty() {
            return Err(SketchError::EmptySample);
        }
        for (position, e) in entries.iter().enumerate() {
            if e.index >= source_rows || !e.scale.is_finite() || e.scale <= 0.0 {
                return Err(SketchError::InvalidEntry {
                    position,
                    index: e.index,
                    scale: e.scale,
                });
            }
        }
        Ok(Self {
            entries,
            source_rows,
            seed,
        })
    }

    pub fn entries(&self) -> &[SketchEntry] {
        &self.entries
    }

    pub fn sample_size(&self) -> usize {
        self.entries.len()
    }

    pub fn source_rows(&self) -> usize {
        self.source_rows
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of times each source row was drawn; sums to the sample size.
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.source_rows];
        for e in &self.entries {
            counts[e.index] += 1;
        }
        counts
    }
}

/// Diagonal of S^T S: entry l equals L_l / (s * pi_l) where L_l is the
/// multiplicity of row l in the plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchDiagonal {
    weights: Array1<f64>,
}

impl SketchDiagonal {
    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Builds the sampling distribution for a scheme.
///
/// Uniform: pi_i = 1/n. Leverage: pi_i proportional to the leverage scores.
/// L2S: pi_i = (1/2) sqrt(l_i)/sum_j sqrt(l_j) + (1/2)/n.
pub fn make_distribution(
    scheme: SamplingScheme,
    leverage: Option<&LeverageScores>,
    n: usize,
) -> Result<SamplingDistribution, SketchError> {
    if n == 0 {
        return Err(SketchError::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    let probs = match scheme {
        SamplingScheme::Uniform => Array1::from_elem(n, 1.0 / n as f64),
        SamplingScheme::Leverage => {
            let scores = leverage.ok_or(SketchError::MissingScores(scheme))?;
            if scores.len() != n {
                return Err(SketchError::DimensionMismatch {
                    expected: n,
                    got: scores.len(),
                });
            }
            let total = scores.sum();
            if total <= 0.0 {
                return Err(SketchError::DegenerateDistribution);
            }
            scores.values().mapv(|l| l / total)
        }
        SamplingScheme::L2s => {
            let scores = leverage.ok_or(SketchError::MissingScores(scheme))?;
            if scores.len() != n {
                return Err(SketchError::DimensionMismatch {
                    expected: n,
                    got: scores.len(),
                });
            }
            let roots = scores.values().mapv(f64::sqrt);
            let total = roots.sum();
            if total <= 0.0 {
                return Err(SketchError::DegenerateDistribution);
            }
            let uniform = 0.5 / n as f64;
            roots.mapv(|r| 0.5 * r / total + uniform)
        }
    };
    Ok(SamplingDistribution { probs, scheme })
}

/// Draws s indices i.i.d. with replacement by inverse-CDF lookup over the
/// cumulative probability vector, using a seeded counter-based generator so
/// plans are reproducible across runs and platforms.
pub fn construct_sketch(
    dist: &SamplingDistribution,
    s: usize,
    seed: u64,
) -> Result<SketchPlan, SketchError> {
    if s == 0 {
        return Err(SketchError::EmptySample);
    }
    let probs = dist.probs.as_slice().expect("contiguous");
    let mut cum = Vec::with_capacity(probs.len());
    let mut running = 0.0;
    for &p in probs {
        running += p;
        cum.push(running);
    }
    let total = running;
    let last_positive = probs
        .iter()
        .rposition(|&p| p > 0.0)
        .ok_or(SketchError::DegenerateDistribution)?;

    let s_f = s as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = (0..s)
        .map(|_| {
            let u = rng.random::<f64>() * total;
            // First index whose cumulative mass exceeds u. Zero-probability
            // indices have a repeated cumulative value and can never be hit;
            // the clamp only fires when u lands beyond the final roundoff.
            let mut index = cum.partition_point(|&c| c <= u);
            if index > last_positive {
                index = last_positive;
            }
            let scale = 1.0 / (s_f * probs[index]).sqrt();
            SketchEntry { index, scale }
        })
        .collect();

    Ok(SketchPlan {
        entries,
        source_rows: probs.len(),
        seed,
    })
}

/// Diagonal of S^T S for a plan drawn from `dist`.
pub fn sketch_diagonal(
    plan: &SketchPlan,
    dist: &SamplingDistribution,
) -> Result<SketchDiagonal, SketchError> {
    if plan.source_rows != dist.len() {
        return Err(SketchError::DimensionMismatch {
            expected: plan.source_rows,
            got: dist.len(),
        });
    }
    let counts = plan.multiplicities();
    let s_f = plan.sample_size() as f64;
    let mut weights = Array1::zeros(plan.source_rows);
    for (index, &count) in counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let p = dist.probs[index];
        if p <= 0.0 {
            return Err(SketchError::DistributionMismatch { index });
        }
        weights[index] = count as f64 / (s_f * p);
    }
    Ok(SketchDiagonal { weights })
}

/// Applies the sketch to a matrix with n rows: output row t is
/// scale_t * M[j_t, :], exactly what multiplying by the dense S would give.
pub fn apply_sketch(plan: &SketchPlan, m: ArrayView2<'_, f64>) -> Result<Array2<f64>, SketchError> {
    if m.nrows() != plan.source_rows {
        return Err(SketchError::DimensionMismatch {
            expected: plan.source_rows,
            got: m.nrows(),
        });
    }
    let mut out = Array2::zeros((plan.sample_size(), m.ncols()));
    for (t, e) in plan.entries.iter().enumerate() {
        let src = m.row(e.index);
        let mut dst = out.row_mut(t);
        for (o, &v) in dst.iter_mut().zip(src.iter()) {
            *o = e.scale * v;
        }
    }
    Ok(out)
}

/// Vector counterpart of [`apply_sketch`].
pub fn apply_sketch_vec(
    plan: &SketchPlan,
    v: ArrayView1<'_, f64>,
) -> Result<Array1<f64>, SketchError> {
    if v.len() != plan.source_rows {
        return Err(SketchError::DimensionMismatch {
            expected: plan.source_rows,
            got: v.len(),
        });
    }
    Ok(plan.entries.iter().map(|e| e.scale * v[e.index]).collect())
}

/// Sample size sufficient for both structural conditions to hold with
/// probability at least 1 - delta: ceil(8 d / (delta * eps^2)).
///
/// The ceiling is taken with a 1e-9 relative roundoff guard so that values
/// which are integers in exact arithmetic do not get bumped by the final ulp
/// of the division.
pub fn required_sample_size(d: usize, eps: f64, delta: f64) -> Result<usize, SketchError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(SketchError::InvalidRange {
            name: "eps",
            value: eps,
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SketchError::InvalidRange {
            name: "delta",
            value: delta,
        });
    }
    let raw = 8.0 * d as f64 / (delta * eps * eps);
    Ok((raw - raw * 1e-9).ceil() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{leverage_scores, orthonormal_basis, DesignMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Scores built from a one-hot matrix whose row norms realize `values`
    /// when each column carries unit mass (as in the score-vector examples).
    fn leverage_fixture(values: &[f64]) -> LeverageScores {
        let n = values.len();
        let d = values.iter().filter(|&&v| v > 0.0).count().max(1);
        let mut data = vec![0.0; n * d];
        let mut col = 0;
        for (i, &v) in values.iter().enumerate() {
            if v > 0.0 {
                data[i * d + col] = v.sqrt();
                col = (col + 1) % d;
            }
        }
        let x = DesignMatrix::from_shape_vec(n, d, data).unwrap();
        let basis = orthonormal_basis(&x).unwrap();
        leverage_scores(&basis)
    }

    #[test]
    fn uniform_distribution() {
        let dist = make_distribution(SamplingScheme::Uniform, None, 4).unwrap();
        for &p in dist.probs().iter() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert!((dist.probs().sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn leverage_distribution_normalizes_by_d() {
        let scores = leverage_fixture(&[1.0, 1.0, 0.0]);
        let dist = make_distribution(SamplingScheme::Leverage, Some(&scores), 3).unwrap();
        let expect = [0.5, 0.5, 0.0];
        for (got, want) in dist.probs().iter().zip(expect) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn l2s_distribution_mixes_sqrt_and_uniform() {
        let scores = leverage_fixture(&[1.0, 1.0, 0.0, 0.0]);
        let dist = make_distribution(SamplingScheme::L2s, Some(&scores), 4).unwrap();
        // Hand evaluation: 0.5*(1/2) + 0.5*(1/4) = 0.375 for scored rows,
        // 0.125 for the rest.
        let expect = [0.375, 0.375, 0.125, 0.125];
        for (got, want) in dist.probs().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
        }
        assert!((dist.probs().sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn score_schemes_require_scores() {
        assert!(matches!(
            make_distribution(SamplingScheme::Leverage, None, 3),
            Err(SketchError::MissingScores(SamplingScheme::Leverage))
        ));
        assert!(matches!(
            make_distribution(SamplingScheme::L2s, None, 3),
            Err(SketchError::MissingScores(SamplingScheme::L2s))
        ));
    }

    #[test]
    fn uniform_scales_are_forced() {
        let dist = make_distribution(SamplingScheme::Uniform, None, 4).unwrap();
        let plan = construct_sketch(&dist, 2, 99).unwrap();
        for e in plan.entries() {
            assert!((e.scale - 2.0f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_single_row_distribution() {
        let dist = make_distribution(SamplingScheme::Uniform, None, 1).unwrap();
        let plan = construct_sketch(&dist, 3, 5).unwrap();
        assert_eq!(plan.sample_size(), 3);
        for e in plan.entries() {
            assert_eq!(e.index, 0);
            assert!((e.scale - 1.0 / 3.0f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn plans_are_deterministic_in_the_seed() {
        let scores = leverage_fixture(&[0.9, 0.7, 0.3, 0.1]);
        let dist = make_distribution(SamplingScheme::Leverage, Some(&scores), 4).unwrap();
        let a = construct_sketch(&dist, 50, 1234).unwrap();
        let b = construct_sketch(&dist, 50, 1234).unwrap();
        let c = construct_sketch(&dist, 50, 1235).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn draw_frequencies_match_probabilities() {
        // Chi-square goodness of fit over many plans.
        let n = 200;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let data: Vec<f64> = (0..n * 3)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let x = DesignMatrix::from_shape_vec(n, 3, data).unwrap();
        let scores = leverage_scores(&orthonormal_basis(&x).unwrap());
        let dist = make_distribution(SamplingScheme::Leverage, Some(&scores), n).unwrap();

        let s = 50;
        let plans = 20_000;
        let mut counts = vec![0u64; n];
        for rep in 0..plans {
            let plan = construct_sketch(&dist, s, 7000 + rep as u64).unwrap();
            for e in plan.entries() {
                counts[e.index] += 1;
            }
        }
        let draws = (s * plans) as f64;
        let mut stat = 0.0;
        let mut dof = 0usize;
        for (i, &c) in counts.iter().enumerate() {
            let expected = draws * dist.probs()[i];
            if expected < 5.0 {
                continue; // too rare for the chi-square approximation
            }
            let diff = c as f64 - expected;
            stat += diff * diff / expected;
            dof += 1;
        }
        let dof = (dof - 1) as f64;
        // Mean dof, sd sqrt(2 dof); 5 sigma is far beyond any plausible pass line.
        assert!(
            stat < dof + 5.0 * (2.0 * dof).sqrt(),
            "chi-square stat {stat} too large for {dof} dof"
        );
    }

    #[test]
    fn diagonal_arithmetic() {
        let dist = make_distribution(SamplingScheme::Uniform, None, 4).unwrap();
        let entries = vec![
            SketchEntry {
                index: 2,
                scale: 1.0 / (2.0 * 0.25f64).sqrt(),
            },
            SketchEntry {
                index: 2,
                scale: 1.0 / (2.0 * 0.25f64).sqrt(),
            },
        ];
        let plan = SketchPlan::from_entries(entries, 4, 0).unwrap();
        let diag = sketch_diagonal(&plan, &dist).unwrap();
        assert_eq!(diag.weights()[2], 4.0); // 2 / (2 * 1/4), exactly
        assert_eq!(diag.weights()[0], 0.0);
        assert_eq!(diag.weights()[1], 0.0);
        assert_eq!(diag.weights()[3], 0.0);
    }

    #[test]
    fn diagonal_matches_dense_materialization() {
        let scores = leverage_fixture(&[0.9, 0.7, 0.3, 0.1, 1.0]);
        let dist = make_distribution(SamplingScheme::Leverage, Some(&scores), 5).unwrap();
        for seed in 0..20 {
            let plan = construct_sketch(&dist, 12, seed).unwrap();
            let diag = sketch_diagonal(&plan, &dist).unwrap();

            // Dense oracle: materialize S, accumulate S^T S diagonal in draw
            // order. The sparse diagonal is the canonical L/(s*pi) formula;
            // the dense route squares the stored scales, so agreement is
            // checked to a few ulps.
            let s = plan.sample_size();
            let mut dense = Array2::<f64>::zeros((s, 5));
            for (t, e) in plan.entries().iter().enumerate() {
                dense[[t, e.index]] = e.scale;
            }
            let sts = dense.t().dot(&dense);
            for l in 0..5 {
                for m in 0..5 {
                    if l != m {
                        assert_eq!(sts[[l, m]], 0.0, "off-diagonal must vanish exactly");
                    }
                }
                let got = diag.weights()[l];
                let want = sts[[l, l]];
                assert!(
                    (got - want).abs() <= 4.0 * f64::EPSILON * want.max(1.0),
                    "diag[{l}]: sparse {got} vs dense {want}"
                );
            }
        }
    }

    #[test]
    fn diagonal_rejects_zero_probability_indices() {
        let scores = leverage_fixture(&[1.0, 1.0, 0.0]);
        let dist = make_distribution(SamplingScheme::Leverage, Some(&scores), 3).unwrap();
        let plan = SketchPlan::from_entries(
            vec![SketchEntry {
                index: 2,
                scale: 1.0,
            }],
            3,
            0,
        )
        .unwrap();
        assert!(matches!(
            sketch_diagonal(&plan, &dist),
            Err(SketchError::DistributionMismatch { index: 2 })
        ));
    }

    #[test]
    fn apply_selects_rescaled_rows() {
        let eye: Array2<f64> = Array2::eye(3);
        let plan = SketchPlan::from_entries(
            vec![SketchEntry {
                index: 1,
                scale: 2.5,
            }],
            3,
            0,
        )
        .unwrap();
        let out = apply_sketch(&plan, eye.view()).unwrap();
        assert_eq!(out.dim(), (1, 3));
        assert_eq!(out[[0, 0]], 0.0);
        assert_eq!(out[[0, 1]], 2.5);
        assert_eq!(out[[0, 2]], 0.0);
    }

    #[test]
    fn apply_matches_dense_multiplication_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 7;
        let k = 4;
        let m = Array2::from_shape_fn((n, k), |_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let dist = make_distribution(SamplingScheme::Uniform, None, n).unwrap();
        for seed in 0..10 {
            let plan = construct_sketch(&dist, 9, seed).unwrap();
            let out = apply_sketch(&plan, m.view()).unwrap();
            assert_eq!(out.nrows(), 9);

            let s = plan.sample_size();
            let mut dense = Array2::<f64>::zeros((s, n));
            for (t, e) in plan.entries().iter().enumerate() {
                dense[[t, e.index]] = e.scale;
            }
            let oracle = dense.dot(&m);
            for (a, b) in out.iter().zip(oracle.iter()) {
                assert_eq!(a, b, "sparse apply must equal dense multiply");
            }

            let v = m.column(0).to_owned();
            let out_v = apply_sketch_vec(&plan, v.view()).unwrap();
            let oracle_v = dense.dot(&v);
            for (a, b) in out_v.iter().zip(oracle_v.iter()) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn apply_rejects_wrong_row_count() {
        let plan = SketchPlan::from_entries(
            vec![SketchEntry {
                index: 0,
                scale: 1.0,
            }],
            3,
            0,
        )
        .unwrap();
        let m: Array2<f64> = Array2::zeros((4, 2));
        assert!(matches!(
            apply_sketch(&plan, m.view()),
            Err(SketchError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn required_sample_size_formula() {
        assert_eq!(required_sample_size(10, 0.5, 0.1).unwrap(), 3200);
        assert_eq!(required_sample_size(24, 0.25, 0.05).unwrap(), 61440);
        // Boundary: the formula tends to 8d as eps, delta -> 1.
        let near_one = 1.0 - 1e-12;
        assert_eq!(required_sample_size(1, near_one, near_one).unwrap(), 8);
        assert!(matches!(
            required_sample_size(10, 1.0, 0.1),
            Err(SketchError::InvalidRange { name: "eps", .. })
        ));
        assert!(matches!(
            required_sample_size(10, 0.5, 0.0),
            Err(SketchError::InvalidRange { name: "delta", .. })
        ));
    }

    #[test]
    fn multiplicities_sum_to_sample_size() {
        let dist = make_distribution(SamplingScheme::Uniform, None, 6).unwrap();
        let plan = construct_sketch(&dist, 17, 3).unwrap();
        let counts = plan.multiplicities();
        assert_eq!(counts.iter().sum::<usize>(), 17);
        let diag = sketch_diagonal(&plan, &dist).unwrap();
        for (l, &c) in counts.iter().enumerate() {
            if c == 0 {
                assert_eq!(diag.weights()[l], 0.0);
            } else {
                assert!(diag.weights()[l] > 0.0);
            }
        }
    }
}
