#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Conjugate static regression `y = x'theta + e`, `theta | v ~ N(m0, v C0/s0)`,
/// `1/v ~ G(n0/2, n0 s0/2)`, returned in the same `(m, C, n, s)` scaling.
pub fn static_regression(
    m0: &DVector<f64>,
    c0: &DMatrix<f64>,
    n0: f64,
    s0: f64,
    xs: &[DVector<f64>],
    ys: &[f64],
) -> (DVector<f64>, DMatrix<f64>, f64, f64) {
    let p = m0.len();
    let prior_prec = (c0 / s0).try_inverse().expect("invertible prior");
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    let mut yty = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        xtx += x * x.transpose();
        xty += x * y;
        yty += y * y;
    }
    let post_prec = &prior_prec + xtx;
    let v_n = post_prec.clone().try_inverse().expect("invertible posterior");
    let m_n = &v_n * (&prior_prec * m0 + xty);
    let n_n = n0 + ys.len() as f64;
    let ss = n0 * s0 + yty + m0.dot(&(&prior_prec * m0)) - m_n.dot(&(&post_prec * &m_n));
    let s_n = ss / n_n;
    (m_n, v_n * s_n, n_n, s_n)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// One-sample Kolmogorov-Smirnov statistic against `cdf`.
pub fn ks_statistic(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic one-sample KS p-value.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

pub fn t_cdf(x: f64, loc: f64, scale_var: f64, dof: f64) -> f64 {
    StudentsT::new(loc, scale_var.sqrt(), dof).unwrap().cdf(x)
}

/// Empirical CDF of `xs` at `x`.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}
