//! Latent agent states and their full conditionals.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{BpsConfig, Initialization, Resampling};
use crate::agents::AgentPanel;
use crate::density::{DensityKind, ForecastDensity};
use crate::dlm::StateTrajectory;
use crate::error::{BpsError, Result};
use crate::rng::gamma_rate;

/// Latent states `x` and Student-T mixing scales `phi`, both `T x J`.
/// Non-Student-T cells carry `phi = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStates {
    pub x: DMatrix<f64>,
    pub phi: DMatrix<f64>,
}

/// Moments of `x_t | theta_t, v_t, y_t` for normal (or scale-conditioned
/// Student-T) agent densities.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentConditional {
    /// Residual `y - theta_0 - h' theta_{1:J}`.
    pub c: f64,
    /// Marginal variance of `y` given `theta, v`.
    pub g: f64,
    /// Regression of `x` on `y`.
    pub b: DVector<f64>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

fn check_inputs(theta: &DVector<f64>, v: f64, h: &[f64], hvar: &[f64]) -> Result<()> {
    if theta.len() != h.len() + 1 || h.len() != hvar.len() {
        return Err(BpsError::DimensionMismatch {
            expected: h.len() + 1,
            got: theta.len(),
        });
    }
    if !(v > 0.0) {
        return Err(BpsError::InvalidParameter(format!("volatility must be > 0, got {v}")));
    }
    if let Some(bad) = hvar.iter().find(|&&s| !(s > 0.0)) {
        return Err(BpsError::InvalidParameter(format!("agent scale must be > 0, got {bad}")));
    }
    Ok(())
}

/// Conditional of `x_t` given `(theta_t, v_t, y_t)` with independent
/// `N(h_j, H_j)` priors: `N(h + b c, diag(H) - b b' g)`.
pub fn latent_conditional(
    theta: &DVector<f64>,
    v: f64,
    y: f64,
    h: &[f64],
    hvar: &[f64],
) -> Result<LatentConditional> {
    check_inputs(theta, v, h, hvar)?;
    let j_len = h.len();
    let loadings = theta.rows(1, j_len);
    let c = y - theta[0] - loadings.iter().zip(h).map(|(t, hj)| t * hj).sum::<f64>();
    let g = v + loadings.iter().zip(hvar).map(|(t, s)| t * t * s).sum::<f64>();
    assert!(g > 0.0, "marginal variance must be positive");
    let b = DVector::from_fn(j_len, |j, _| hvar[j] * loadings[j] / g);
    let mean = DVector::from_fn(j_len, |j, _| h[j] + b[j] * c);
    let mut cov = -(&b * b.transpose()) * g;
    for j in 0..j_len {
        cov[(j, j)] += hvar[j];
    }
    Ok(LatentConditional { c, g, b, mean, cov })
}

/// Exact draw from [`latent_conditional`] without factorizing its covariance:
/// draw `(x*, y*)` from the joint prior and shift `x* + b (y - y*)`.
pub fn sample_latent_vector<R: Rng + ?Sized>(
    theta: &DVector<f64>,
    v: f64,
    y: f64,
    h: &[f64],
    hvar: &[f64],
    rng: &mut R,
) -> Result<DVector<f64>> {
    check_inputs(theta, v, h, hvar)?;
    let j_len = h.len();
    let mut x = DVector::zeros(j_len);
    let mut y_star = theta[0] + v.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let mut g = v;
    for j in 0..j_len {
        x[j] = h[j] + hvar[j].sqrt() * rng.sample::<f64, _>(StandardNormal);
        y_star += theta[j + 1] * x[j];
        g += theta[j + 1] * theta[j + 1] * hvar[j];
    }
    let resid = (y - y_star) / g;
    for j in 0..j_len {
        x[j] += hvar[j] * theta[j + 1] * resid;
    }
    Ok(x)
}

fn validate_panel(panel: &AgentPanel) -> Result<()> {
    if panel.t_len() == 0 || panel.j_len() == 0 {
        return Err(BpsError::Data("empty agent panel".into()));
    }
    if panel.densities.len() != panel.t_len() || panel.densities.iter().any(|r| r.len() != panel.j_len()) {
        return Err(BpsError::Data("agent panel is not rectangular".into()));
    }
    Ok(())
}

/// Starting latent states: `phi ~ G(n/2, n/2)` then `x | phi ~ N(h, H/phi)`
/// for Student-T cells (so `x ~ h` marginally), direct draws otherwise.
pub fn init_latents<R: Rng + ?Sized>(panel: &AgentPanel, init: Initialization, rng: &mut R) -> Result<LatentStates> {
    validate_panel(panel)?;
    let (t_len, j_len) = (panel.t_len(), panel.j_len());
    let mut x = DMatrix::zeros(t_len, j_len);
    let mut phi = DMatrix::from_element(t_len, j_len, 1.0);
    for t in 0..t_len {
        for j in 0..j_len {
            let d = &panel.densities[t][j];
            if let ForecastDensity::StudentT { loc, scale, dof } = *d {
                let p = gamma_rate(dof / 2.0, dof / 2.0, rng);
                phi[(t, j)] = p;
                x[(t, j)] = loc + (scale / p).sqrt() * rng.sample::<f64, _>(StandardNormal);
            } else {
                x[(t, j)] = d.sample(rng);
            }
            if init == Initialization::Outcome {
                x[(t, j)] = panel.outcomes[t];
            }
        }
    }
    Ok(LatentStates { x, phi })
}

/// One latent-state sweep given a `(theta, v)` trajectory.
///
/// Times are handled independently. When every cell at time `t` is analytic
/// the update is the conditional normal with `H_tj / phi_tj` scales, followed
/// by `phi_tj ~ G((n + 1)/2, (n + d)/2)`, `d = (x - h)^2 / H`, for Student-T
/// cells. Times with any sample-only density use importance resampling.
pub fn sample_latents<R: Rng + ?Sized>(
    trajectory: &StateTrajectory,
    panel: &AgentPanel,
    phi: &DMatrix<f64>,
    cfg: &BpsConfig,
    rng: &mut R,
) -> Result<LatentStates> {
    validate_panel(panel)?;
    let (t_len, j_len) = (panel.t_len(), panel.j_len());
    if trajectory.len() != t_len {
        return Err(BpsError::DimensionMismatch {
            expected: t_len,
            got: trajectory.len(),
        });
    }
    if phi.nrows() != t_len || phi.ncols() != j_len {
        return Err(BpsError::DimensionMismatch {
            expected: t_len * j_len,
            got: phi.len(),
        });
    }
    let mut x = DMatrix::zeros(t_len, j_len);
    let mut new_phi = phi.clone();
    let mut h = vec![0.0; j_len];
    let mut hvar = vec![0.0; j_len];
    for t in 0..t_len {
        let row = &panel.densities[t];
        let theta = &trajectory.thetas[t];
        let v = trajectory.vols[t];
        let y = panel.outcomes[t];
        let xt = if row.iter().any(|d| d.kind() == DensityKind::Samples) {
            importance_resample(theta, v, y, row, cfg, rng)?
        } else {
            for (j, d) in row.iter().enumerate() {
                h[j] = d.location();
                hvar[j] = d.scale() / phi[(t, j)];
            }
            sample_latent_vector(theta, v, y, &h, &hvar, rng)?
        };
        for (j, d) in row.iter().enumerate() {
            x[(t, j)] = xt[j];
            if let ForecastDensity::StudentT { loc, scale, dof } = *d {
                let dist = (xt[j] - loc) * (xt[j] - loc) / scale;
                new_phi[(t, j)] = gamma_rate((dof + 1.0) / 2.0, (dof + dist) / 2.0, rng);
            }
        }
    }
    Ok(LatentStates { x, phi: new_phi })
}

/// Candidate vectors pair the i-th draw of every sample-only agent with
/// fresh draws from analytic agents; one is kept with probability
/// proportional to `N(y | theta_0 + theta' x, v)`.
fn importance_resample<R: Rng + ?Sized>(
    theta: &DVector<f64>,
    v: f64,
    y: f64,
    row: &[ForecastDensity],
    cfg: &BpsConfig,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let j_len = row.len();
    let count = row
        .iter()
        .filter_map(|d| match d {
            ForecastDensity::Samples { draws } => Some(draws.len()),
            _ => None,
        })
        .min()
        .unwrap_or(cfg.importance_draws)
        .min(cfg.importance_draws)
        .max(1);
    let offset = rng.random_range(0..count);
    let mut candidates = Vec::with_capacity(count);
    let mut log_w = Vec::with_capacity(count);
    for i in 0..count {
        let cand = DVector::from_fn(j_len, |j, _| match &row[j] {
            ForecastDensity::Samples { draws } => draws[(offset + i) % draws.len()],
            other => other.sample(rng),
        });
        let mean = theta[0] + theta.rows(1, j_len).dot(&cand);
        log_w.push(-0.5 * (y - mean) * (y - mean) / v);
        candidates.push(cand);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let idx = resample_one(&weights, cfg.resampling, rng);
    Ok(candidates.swap_remove(idx))
}

/// Index drawn with probability proportional to `weights`.
fn resample_one<R: Rng + ?Sized>(weights: &[f64], scheme: Resampling, rng: &mut R) -> usize {
    match scheme {
        Resampling::Systematic => systematic_indices(weights, 1, rng)[0],
        Resampling::Multinomial => {
            let u = rng.random::<f64>() * weights.iter().sum::<f64>();
            let mut acc = 0.0;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    return i;
                }
            }
            weights.len() - 1
        }
    }
}

/// Systematic resampling of `count` indices; exposed for multi-draw use.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], count: usize, rng: &mut R) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let step = total / count as f64;
    let start = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(count);
    let mut acc = weights[0];
    let mut i = 0;
    for k in 0..count {
        let u = start + k as f64 * step;
        while u >= acc && i + 1 < weights.len() {
            i += 1;
            acc += weights[i];
        }
        out.push(i);
    }
    out
}
