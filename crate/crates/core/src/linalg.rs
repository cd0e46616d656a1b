//! Small dense helpers on top of nalgebra: symmetrization, jittered
//! Cholesky factors for PSD matrices and multivariate normal draws.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{BpsError, Result};

/// Replaces `m` with `(m + m') / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let a = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = a;
            m[(j, i)] = a;
        }
    }
}

/// Lower Cholesky factor of a symmetric PSD matrix.
///
/// Semi-definite inputs get `1e-12 * trace` added to the diagonal, escalating
/// by factors of ten up to `1e-6 * trace`. The zero matrix factors to zero.
pub fn psd_cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(BpsError::DimensionMismatch {
            expected: n,
            got: m.ncols(),
        });
    }
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.l());
    }
    let trace = m.trace();
    if !trace.is_finite() || trace < 0.0 {
        return Err(BpsError::Numerical(format!(
            "matrix with trace {trace} is not positive semi-definite"
        )));
    }
    if trace == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let mut jitter = 1e-12 * trace;
    while jitter <= 1e-6 * trace {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(ch) = shifted.cholesky() {
            return Ok(ch.l());
        }
        jitter *= 10.0;
    }
    Err(BpsError::Numerical(
        "Cholesky factorization failed after diagonal jitter".into(),
    ))
}

/// Draws `mean + scale * L z` with `z` standard normal.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    chol_lower: &DMatrix<f64>,
    scale: f64,
    rng: &mut R,
) -> DVector<f64> {
    let n = mean.len();
    let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut out = mean.clone();
    for i in 0..n {
        let mut acc = 0.0;
        for k in 0..=i {
            acc += chol_lower[(i, k)] * z[k];
        }
        out[i] += scale * acc;
    }
    out
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
