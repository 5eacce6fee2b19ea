//! Orthonormal-basis computation for tall matrices and exact row leverage scores.
//!
//! The basis is computed by Householder QR (cheaper than SVD and spanning the
//! same column space); singular values are recovered from the small d-by-d
//! triangular factor with a one-sided Jacobi iteration and kept for rank
//! diagnosis. Leverage scores are the squared row norms of the basis and are
//! invariant to the choice of orthonormal basis of range(X).

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("design matrix must satisfy n >= d >= 1, got {rows}x{cols}")]
    BadShape { rows: usize, cols: usize },
    #[error("design matrix has a non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error(
        "rank deficient: sigma_min/sigma_max = {ratio:.3e} is below the threshold {threshold:.3e}"
    )]
    RankDeficient { ratio: f64, threshold: f64 },
}

/// Dense n-by-d real design matrix with n >= d >= 1 and finite entries.
///
/// Full column rank is assumed by the downstream theory; it is not checked
/// here but detected (and rejected) when the orthonormal basis is computed.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    data: Array2<f64>,
}

impl DesignMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self, LinalgError> {
        let (rows, cols) = data.dim();
        if cols < 1 || rows < cols {
            return Err(LinalgError::BadShape { rows, cols });
        }
        for ((row, col), &v) in data.indexed_iter() {
            if !v.is_finite() {
                return Err(LinalgError::NonFinite { row, col });
            }
        }
        Ok(Self { data })
    }

    /// Builds the matrix from a row-major flat vector.
    pub fn from_shape_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        let arr = Array2::from_shape_vec((rows, cols), data)
            .map_err(|_| LinalgError::BadShape { rows, cols })?;
        Self::new(arr)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }
}

/// Orthonormal column basis U of range(X) together with the singular values
/// of X (kept for rank diagnosis).
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    u: Array2<f64>,
    singular_values: Array1<f64>,
}

impl OrthonormalBasis {
    pub fn u(&self) -> ArrayView2<'_, f64> {
        self.u.view()
    }

    /// Singular values of the original matrix, non-increasing.
    pub fn singular_values(&self) -> ArrayView1<'_, f64> {
        self.singular_values.view()
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.u.ncols()
    }

    /// Smallest singular value of X; positive for accepted matrices.
    pub fn sigma_min(&self) -> f64 {
        self.singular_values[self.singular_values.len() - 1]
    }
}

/// Row leverage scores: squared Euclidean norms of the rows of U.
///
/// Scores lie in [0, 1] and sum to d.
#[derive(Debug, Clone, PartialEq)]
pub struct LeverageScores {
    scores: Array1<f64>,
}

impl LeverageScores {
    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.scores.view()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.scores.sum()
    }
}

/// Computes an orthonormal basis of range(X) by Householder QR.
///
/// Rejects numerically rank-deficient input: the full-rank assumption is
/// violated when `sigma_min / sigma_max < max(n, d) * eps`.
pub fn orthonormal_basis(x: &DesignMatrix) -> Result<OrthonormalBasis, LinalgError> {
    let (q, r) = householder_qr(x.as_array());
    let mut singular_values = jacobi_singular_values(&r);
    singular_values
        .as_slice_mut()
        .expect("contiguous")
        .sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite singular values"));

    let smax = singular_values[0];
    let smin = singular_values[singular_values.len() - 1];
    let threshold = x.rows().max(x.cols()) as f64 * f64::EPSILON;
    if smax == 0.0 || smin / smax < threshold {
        return Err(LinalgError::RankDeficient {
            ratio: if smax == 0.0 { 0.0 } else { smin / smax },
            threshold,
        });
    }

    Ok(OrthonormalBasis {
        u: q,
        singular_values,
    })
}

/// Leverage score of row i: squared norm of the i-th row of U, clamped to
/// [0, 1] to absorb roundoff.
pub fn leverage_scores(basis: &OrthonormalBasis) -> LeverageScores {
    let scores = basis
        .u
        .rows()
        .into_iter()
        .map(|row| row.dot(&row).clamp(0.0, 1.0))
        .collect::<Array1<f64>>();
    LeverageScores { scores }
}

/// Householder QR of a tall matrix: returns (thin Q, R) with Q n-by-d
/// orthonormal and R d-by-d upper triangular.
fn householder_qr(a: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (n, d) = a.dim();
    let mut work = a.to_owned();
    // Householder vectors; vs[k] has length n - k.
    let mut vs: Vec<Option<(Array1<f64>, f64)>> = Vec::with_capacity(d);

    for k in 0..d {
        let x = work.slice(s![k.., k]).to_owned();
        let norm = x.dot(&x).sqrt();
        if norm == 0.0 {
            vs.push(None);
            continue;
        }
        // alpha takes the opposite sign of x[0] so v = x - alpha*e1 has no
        // cancellation in its first entry.
        let alpha = if x[0] > 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vtv = v.dot(&v);
        if vtv == 0.0 {
            vs.push(None);
            continue;
        }
        let beta = 2.0 / vtv;

        // Apply H = I - beta*v*v^T to the trailing columns.
        if k + 1 < d {
            let mut trailing = work.slice_mut(s![k.., k + 1..]);
            let w = trailing.t().dot(&v);
            for (i, vi) in v.iter().enumerate() {
                let coeff = beta * vi;
                let mut row = trailing.row_mut(i);
                row.scaled_add(-coeff, &w);
            }
        }
        // Column k becomes alpha*e1 exactly.
        work[[k, k]] = alpha;
        for i in k + 1..n {
            work[[i, k]] = 0.0;
        }
        vs.push(Some((v, beta)));
    }

    let mut r = Array2::zeros((d, d));
    for i in 0..d {
        for j in i..d {
            r[[i, j]] = work[[i, j]];
        }
    }

    // Accumulate thin Q = H_0 ... H_{d-1} * [I_d; 0] backwards.
    let mut q = Array2::zeros((n, d));
    for j in 0..d {
        q[[j, j]] = 1.0;
    }
    for k in (0..d).rev() {
        if let Some((v, beta)) = &vs[k] {
            let mut block = q.slice_mut(s![k.., k..]);
            let w = block.t().dot(v);
            for (i, vi) in v.iter().enumerate() {
                let coeff = beta * vi;
                let mut row = block.row_mut(i);
                row.scaled_add(-coeff, &w);
            }
        }
    }

    (q, r)
}

/// Singular values of a small dense matrix by one-sided Jacobi rotations.
/// Accurate to machine precision relative to sigma_max, which is all the
/// rank test needs.
fn jacobi_singular_values(r: &Array2<f64>) -> Array1<f64> {
    let d = r.ncols();
    let mut a = r.to_owned();
    let tol = 1e-15;
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let col_p = a.column(p);
                let col_q = a.column(q);
                let app = col_p.dot(&col_p);
                let aqq = col_q.dot(&col_q);
                let apq = col_p.dot(&col_q);
                if apq == 0.0 || app * aqq == 0.0 {
                    continue;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s_rot = c * t;
                for i in 0..d {
                    let aip = a[[i, p]];
                    let aiq = a[[i, q]];
                    a[[i, p]] = c * aip - s_rot * aiq;
                    a[[i, q]] = s_rot * aip + c * aiq;
                }
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }
    (0..d)
        .map(|j| {
            let col = a.column(j);
            col.dot(&col).sqrt()
        })
        .collect()
}

/// Solves the symmetric positive-definite system A x = b in place via
/// Cholesky. Returns None when a pivot is non-positive or non-finite.
pub(crate) fn solve_spd(mut a: Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let d = a.nrows();
    debug_assert_eq!(d, a.ncols());
    debug_assert_eq!(d, b.len());

    // Lower Cholesky factor written into the lower triangle of a.
    for j in 0..d {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= a[[j, k]] * a[[j, k]];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        a[[j, j]] = ljj;
        for i in j + 1..d {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = v / ljj;
        }
    }

    // Forward substitution L z = b.
    let mut z = b.clone();
    for i in 0..d {
        for k in 0..i {
            let t = a[[i, k]] * z[k];
            z[i] -= t;
        }
        z[i] /= a[[i, i]];
    }
    // Back substitution L^T x = z.
    for i in (0..d).rev() {
        for k in i + 1..d {
            let t = a[[k, i]] * z[k];
            z[i] -= t;
        }
        z[i] /= a[[i, i]];
    }
    Some(z)
}
