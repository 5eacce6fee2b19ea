//! Seeded synthetic instances for verification suites and benchmarks.

use crate::linalg::DesignMatrix;
use crate::logreg::ResponseVector;
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Standard normal via Box-Muller on the seeded stream.
pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Gaussian design with Bernoulli responses from a random true coefficient
/// vector scaled by `coef_scale`. With `intercept` the first column is all
/// ones (and carries no true signal beyond the random coefficient).
pub fn gaussian_instance(
    n: usize,
    d: usize,
    intercept: bool,
    coef_scale: f64,
    seed: u64,
) -> (DesignMatrix, ResponseVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0; n * d];
    for (idx, v) in data.iter_mut().enumerate() {
        let col = idx % d;
        *v = if intercept && col == 0 {
            1.0
        } else {
            standard_normal(&mut rng)
        };
    }
    let x = DesignMatrix::from_shape_vec(n, d, data).expect("valid synthetic shape");

    let beta: Vec<f64> = (0..d)
        .map(|_| coef_scale * standard_normal(&mut rng))
        .collect();
    let labels: Array1<f64> = x
        .as_array()
        .rows()
        .into_iter()
        .map(|row| {
            let t: f64 = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-t).exp());
            if rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let y = ResponseVector::new(labels).expect("labels are 0/1 by construction");
    (x, y)
}
