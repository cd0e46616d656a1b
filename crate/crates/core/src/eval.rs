//! Sequential forecast evaluation and posterior dependence diagnostics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bps::PosteriorDraws;
use crate::density::{kde_pdf, silverman_bandwidth, ForecastDensity};
use crate::error::{BpsError, Result};

/// Cumulative accuracy trajectories for one method at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSeries {
    pub method: String,
    pub horizon: usize,
    pub msfe: Vec<f64>,
    /// Cumulative log predictive density ratio against the baseline.
    pub lpdr: Vec<f64>,
    pub fsd: Vec<f64>,
}

impl EvalSeries {
    pub fn new(
        method: impl Into<String>,
        horizon: usize,
        points: &[f64],
        outcomes: &[f64],
        densities: &[f64],
        baseline_densities: &[f64],
        fsd: Vec<f64>,
    ) -> Result<Self> {
        let msfe = msfe(points, outcomes)?;
        let lpdr = lpdr(densities, baseline_densities)?;
        if fsd.len() != msfe.len() {
            return Err(BpsError::DimensionMismatch {
                expected: msfe.len(),
                got: fsd.len(),
            });
        }
        Ok(EvalSeries {
            method: method.into(),
            horizon,
            msfe,
            lpdr,
            fsd,
        })
    }

    pub fn final_msfe(&self) -> f64 {
        *self.msfe.last().expect("non-empty series")
    }

    pub fn final_lpdr(&self) -> f64 {
        *self.lpdr.last().expect("non-empty series")
    }
}

/// Running mean of squared forecast errors.
pub fn msfe(points: &[f64], outcomes: &[f64]) -> Result<Vec<f64>> {
    if points.is_empty() {
        return Err(BpsError::InvalidParameter("MSFE of an empty series".into()));
    }
    if points.len() != outcomes.len() {
        return Err(BpsError::DimensionMismatch {
            expected: outcomes.len(),
            got: points.len(),
        });
    }
    let mut acc = 0.0;
    Ok(points
        .iter()
        .zip(outcomes)
        .enumerate()
        .map(|(i, (f, y))| {
            acc += (y - f) * (y - f);
            acc / (i + 1) as f64
        })
        .collect())
}

/// Running sum of `ln(p_method / p_baseline)`.
pub fn lpdr(method: &[f64], baseline: &[f64]) -> Result<Vec<f64>> {
    if method.len() != baseline.len() {
        return Err(BpsError::DimensionMismatch {
            expected: baseline.len(),
            got: method.len(),
        });
    }
    if let Some(bad) = method.iter().chain(baseline).find(|v| !(**v > 0.0)) {
        return Err(BpsError::InvalidParameter(format!("density values must be > 0, got {bad}")));
    }
    let mut acc = 0.0;
    Ok(method
        .iter()
        .zip(baseline)
        .map(|(m, b)| {
            if m != b {
                acc += m.ln() - b.ln();
            }
            acc
        })
        .collect())
}

/// Kernel bandwidth for sample-based densities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bandwidth {
    #[default]
    Silverman,
    Fixed {
        width: f64,
    },
}

/// Predictive density of a forecast sample at `y`, by Gaussian KDE.
pub fn sample_density_value(samples: &[f64], y: f64, bandwidth: Bandwidth) -> Result<f64> {
    if samples.is_empty() {
        return Err(BpsError::InvalidParameter("density of an empty sample".into()));
    }
    let bw = match bandwidth {
        Bandwidth::Silverman => silverman_bandwidth(samples),
        Bandwidth::Fixed { width } if width > 0.0 => width,
        Bandwidth::Fixed { width } => {
            return Err(BpsError::InvalidParameter(format!("bandwidth must be > 0, got {width}")))
        }
    };
    Ok(kde_pdf(samples, bw, y).max(f64::MIN_POSITIVE))
}

/// Density at `y`: analytic for normal/Student-T, KDE for sample sets.
pub fn density_value(density: &ForecastDensity, y: f64) -> Result<f64> {
    match density {
        ForecastDensity::Samples { draws } => sample_density_value(draws, y, Bandwidth::Silverman),
        d => Ok(d.pdf(y).max(f64::MIN_POSITIVE)),
    }
}

/// MC-empirical R^2 of latent agent states, per time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceSeries {
    /// `T x J`: variance of `x_j` explained by all other agents.
    pub complete: Vec<Vec<f64>>,
    /// `T x (J choose 2)`: squared correlation of each pair, ordered as `pairs`.
    pub paired: Vec<Vec<f64>>,
    pub pairs: Vec<(usize, usize)>,
    /// `T x J`: the covariance was singular for this agent and R^2 set to 1.
    pub singular: Vec<Vec<bool>>,
}

/// R^2 measures from one time's draws (rows are draws, columns agents).
pub fn r2_from_draws(rows: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>, Vec<bool>)> {
    let n = rows.len();
    if n < 2 {
        return Err(BpsError::InvalidParameter("R^2 needs at least 2 draws".into()));
    }
    let j_len = rows[0].len();
    let mut mean = vec![0.0; j_len];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(j_len, j_len);
    for r in rows {
        for a in 0..j_len {
            let da = r[a] - mean[a];
            for b in a..j_len {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..j_len {
        for b in a..j_len {
            cov[(a, b)] /= (n - 1) as f64;
            cov[(b, a)] = cov[(a, b)];
        }
    }

    let mut complete = vec![0.0; j_len];
    let mut singular = vec![false; j_len];
    for j in 0..j_len {
        let var = cov[(j, j)];
        if !(var > 0.0) {
            complete[j] = 1.0;
            singular[j] = true;
            continue;
        }
        if j_len == 1 {
            continue;
        }
        let others: Vec<usize> = (0..j_len).filter(|&i| i != j).collect();
        let s_oo = DMatrix::from_fn(others.len(), others.len(), |a, b| cov[(others[a], others[b])]);
        let s_oj = DMatrix::from_fn(others.len(), 1, |a, _| cov[(others[a], j)]);
        let pinv = s_oo
            .clone()
            .pseudo_inverse(1e-12 * s_oo.trace().max(f64::MIN_POSITIVE))
            .map_err(|e| BpsError::Numerical(e.to_string()))?;
        let explained = (s_oj.transpose() * pinv * &s_oj)[(0, 0)];
        let cond = var - explained;
        if cond <= 1e-12 * var {
            complete[j] = 1.0;
            singular[j] = true;
        } else {
            complete[j] = (explained / var).clamp(0.0, 1.0);
        }
    }

    let mut paired = Vec::with_capacity(j_len * (j_len.saturating_sub(1)) / 2);
    for a in 0..j_len {
        for b in (a + 1)..j_len {
            let (va, vb) = (cov[(a, a)], cov[(b, b)]);
            let r2 = if va > 0.0 && vb > 0.0 {
                (cov[(a, b)] * cov[(a, b)] / (va * vb)).clamp(0.0, 1.0)
            } else {
                1.0
            };
            paired.push(r2);
        }
    }
    Ok((complete, paired, singular))
}

/// Complete-conditional and paired R^2 for each time in the draws.
pub fn mc_empirical_r2(draws: &PosteriorDraws) -> Result<DependenceSeries> {
    if draws.len() < 2 {
        return Err(BpsError::InvalidParameter("R^2 needs at least 2 draws".into()));
    }
    let j_len = draws.latents[0].x.ncols();
    let pairs = (0..j_len)
        .flat_map(|a| ((a + 1)..j_len).map(move |b| (a, b)))
        .collect();
    let mut out = DependenceSeries {
        complete: Vec::new(),
        paired: Vec::new(),
        pairs,
        singular: Vec::new(),
    };
    for t in 0..draws.t_len() {
        let (c, p, s) = r2_from_draws(&draws.latent_rows(t))?;
        out.complete.push(c);
        out.paired.push(p);
        out.singular.push(s);
    }
    Ok(out)
}
