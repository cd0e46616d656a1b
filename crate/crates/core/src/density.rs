//! Forecast densities supplied by agents and produced by combination methods.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{BpsError, Result};
use crate::rng::gamma_rate;

/// A step-ahead predictive distribution.
///
/// `StudentT { loc, scale, dof }` means `(x - loc) / sqrt(scale)` is standard
/// Student-T with `dof` degrees of freedom, so `scale` is in variance units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForecastDensity {
    Normal { mean: f64, var: f64 },
    StudentT { loc: f64, scale: f64, dof: f64 },
    Samples { draws: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    Normal,
    StudentT,
    Samples,
}

impl ForecastDensity {
    pub fn normal(mean: f64, var: f64) -> Result<Self> {
        if !(var > 0.0) || !mean.is_finite() || !var.is_finite() {
            return Err(BpsError::InvalidParameter(format!(
                "normal density needs finite mean and var > 0 (got {mean}, {var})"
            )));
        }
        Ok(ForecastDensity::Normal { mean, var })
    }

    pub fn student_t(loc: f64, scale: f64, dof: f64) -> Result<Self> {
        if !(scale > 0.0) || !(dof > 0.0) || !loc.is_finite() || !scale.is_finite() {
            return Err(BpsError::InvalidParameter(format!(
                "student-t density needs scale > 0 and dof > 0 (got loc {loc}, scale {scale}, dof {dof})"
            )));
        }
        Ok(ForecastDensity::StudentT { loc, scale, dof })
    }

    pub fn samples(draws: Vec<f64>) -> Result<Self> {
        if draws.is_empty() {
            return Err(BpsError::InvalidParameter(
                "sample density needs at least one draw".into(),
            ));
        }
        if draws.iter().any(|d| !d.is_finite()) {
            return Err(BpsError::InvalidParameter(
                "sample density contains non-finite draws".into(),
            ));
        }
        Ok(ForecastDensity::Samples { draws })
    }

    pub fn kind(&self) -> DensityKind {
        match self {
            ForecastDensity::Normal { .. } => DensityKind::Normal,
            ForecastDensity::StudentT { .. } => DensityKind::StudentT,
            ForecastDensity::Samples { .. } => DensityKind::Samples,
        }
    }

    /// Location `h` used by the latent-state update.
    pub fn location(&self) -> f64 {
        match self {
            ForecastDensity::Normal { mean, .. } => *mean,
            ForecastDensity::StudentT { loc, .. } => *loc,
            ForecastDensity::Samples { .. } => self.mean(),
        }
    }

    /// Scale `H` (variance units) used by the latent-state update.
    pub fn scale(&self) -> f64 {
        match self {
            ForecastDensity::Normal { var, .. } => *var,
            ForecastDensity::StudentT { scale, .. } => *scale,
            ForecastDensity::Samples { draws } => sample_variance(draws).max(f64::MIN_POSITIVE),
        }
    }

    pub fn dof(&self) -> Option<f64> {
        match self {
            ForecastDensity::StudentT { dof, .. } => Some(*dof),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ForecastDensity::Normal { mean, .. } => *mean,
            ForecastDensity::StudentT { loc, .. } => *loc,
            ForecastDensity::Samples { draws } => draws.iter().sum::<f64>() / draws.len() as f64,
        }
    }

    /// Variance, or `None` when it is infinite (Student-T with dof <= 2).
    pub fn variance(&self) -> Option<f64> {
        match self {
            ForecastDensity::Normal { var, .. } => Some(*var),
            ForecastDensity::StudentT { scale, dof, .. } => {
                (*dof > 2.0).then(|| scale * dof / (dof - 2.0))
            }
            ForecastDensity::Samples { draws } => Some(sample_variance(draws)),
        }
    }

    /// Spread used to size quadrature windows: the SD when finite, else `sqrt(scale)`.
    pub fn spread(&self) -> f64 {
        self.variance()
            .map(f64::sqrt)
            .unwrap_or_else(|| self.scale().sqrt())
    }

    pub fn ln_pdf(&self, y: f64) -> f64 {
        match self {
            ForecastDensity::Normal { mean, var } => {
                let d = y - mean;
                -0.5 * (2.0 * PI * var).ln() - 0.5 * d * d / var
            }
            ForecastDensity::StudentT { loc, scale, dof } => student_t_ln_pdf(y, *loc, *scale, *dof),
            ForecastDensity::Samples { draws } => {
                kde_pdf(draws, silverman_bandwidth(draws), y).ln()
            }
        }
    }

    /// Density at `y`; sample sets use a Gaussian KDE with Silverman bandwidth.
    pub fn pdf(&self, y: f64) -> f64 {
        match self {
            ForecastDensity::Samples { draws } => kde_pdf(draws, silverman_bandwidth(draws), y),
            _ => self.ln_pdf(y).exp(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ForecastDensity::Normal { mean, var } => {
                mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
            ForecastDensity::StudentT { loc, scale, dof } => {
                let phi = gamma_rate(dof / 2.0, dof / 2.0, rng);
                loc + (scale / phi).sqrt() * rng.sample::<f64, _>(StandardNormal)
            }
            ForecastDensity::Samples { draws } => draws[rng.random_range(0..draws.len())],
        }
    }
}

pub fn student_t_ln_pdf(y: f64, loc: f64, scale: f64, dof: f64) -> f64 {
    let z2 = (y - loc) * (y - loc) / scale;
    ln_gamma(0.5 * (dof + 1.0)) - ln_gamma(0.5 * dof) - 0.5 * (dof * PI * scale).ln()
        - 0.5 * (dof + 1.0) * (z2 / dof).ln_1p()
}

pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Silverman's rule of thumb: `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`.
pub fn silverman_bandwidth(xs: &[f64]) -> f64 {
    let n = xs.len();
    let sd = sample_variance(xs).sqrt();
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let bw = 0.9 * spread * (n as f64).powf(-0.2);
    if bw > 0.0 {
        bw
    } else {
        // all draws identical
        1e-8 * (1.0 + sorted[0].abs())
    }
}

/// Gaussian kernel density estimate at `y`.
pub fn kde_pdf(xs: &[f64], bandwidth: f64, y: f64) -> f64 {
    let norm = 1.0 / ((2.0 * PI).sqrt() * bandwidth * xs.len() as f64);
    let inv = 1.0 / bandwidth;
    xs.iter()
        .map(|x| {
            let z = (y - x) * inv;
            (-0.5 * z * z).exp()
        })
        .sum::<f64>()
        * norm
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ForecastDensity::normal(0.0, 0.0).is_err());
        assert!(ForecastDensity::student_t(0.0, 1.0, -1.0).is_err());
        assert!(ForecastDensity::samples(vec![]).is_err());
    }

    #[test]
    fn standard_normal_at_zero() {
        let d = ForecastDensity::normal(0.0, 1.0).unwrap();
        assert!((d.pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-12);
    }

    #[test]
    fn t_with_huge_dof_is_normal() {
        let t = ForecastDensity::student_t(0.3, 2.0, 1e7).unwrap();
        let n = ForecastDensity::normal(0.3, 2.0).unwrap();
        for y in [-3.0, -1.0, 0.0, 0.3, 2.5] {
            assert!((t.pdf(y) - n.pdf(y)).abs() < 1e-3);
        }
    }

    #[test]
    fn t_integrates_to_one() {
        let t = ForecastDensity::student_t(1.0, 0.5, 4.0).unwrap();
        // tan substitution covers the whole line
        let n = 20_000;
        let h = PI / n as f64;
        let mut s = 0.0;
        for i in 1..n {
            let u = -PI / 2.0 + i as f64 * h;
            let x = 1.0 + u.tan();
            s += t.pdf(x) / u.cos().powi(2);
        }
        assert!((s * h - 1.0).abs() < 1e-6);
        assert!((t.variance().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kde_of_normal_draws() {
        let mut rng = substream(11, &[]);
        let d = ForecastDensity::normal(0.0, 1.0).unwrap();
        let draws: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let s = ForecastDensity::samples(draws).unwrap();
        assert!((s.pdf(0.0) - 0.399).abs() < 0.02);
    }

    #[test]
    fn t_sampler_moments() {
        let mut rng = substream(12, &[]);
        let d = ForecastDensity::student_t(2.0, 0.5, 6.0).unwrap();
        let draws: Vec<f64> = (0..200_000).map(|_| d.sample(&mut rng)).collect();
        let m = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((m - 2.0).abs() < 0.01);
        assert!((sample_variance(&draws) - 0.75).abs() < 0.03);
    }
}
