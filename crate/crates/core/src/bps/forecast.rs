//! Synthetic futures from the fitted synthesis model.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{BpsConfig, SynthesisMode};
use super::gibbs::{gibbs, PosteriorDraws};
use crate::agents::AgentPanel;
use crate::density::ForecastDensity;
use crate::error::{BpsError, Result};
use crate::linalg::{psd_cholesky, sample_mvn};
use crate::rng::beta;

/// Forecast sample for `y_{T+k}`, one value per retained draw.
///
/// Each draw evolves `v` by the beta-gamma step and `theta` by the discount
/// random walk `k` times from its time-T value, then samples
/// `x_j ~ next[j]` and `y ~ N(theta_0 + theta' x, v)`.
pub fn forecast_k_direct<R: Rng + ?Sized>(
    draws: &PosteriorDraws,
    next: &[ForecastDensity],
    k: usize,
    cfg: &BpsConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if draws.is_empty() {
        return Err(BpsError::InvalidParameter("no posterior draws to forecast from".into()));
    }
    if k == 0 {
        return Err(BpsError::InvalidParameter("forecast horizon must be >= 1".into()));
    }
    let j_len = next.len();
    let d = cfg.discounts;
    let t_last = draws.t_len() - 1;
    let mut out = Vec::with_capacity(draws.len());
    for (traj, post) in draws.trajectories.iter().zip(&draws.final_posteriors) {
        let mut theta = traj.thetas[t_last].clone();
        if theta.len() != j_len + 1 {
            return Err(BpsError::DimensionMismatch {
                expected: theta.len() - 1,
                got: j_len,
            });
        }
        let mut v = traj.vols[t_last];
        let mut n = post.n;
        let chol = if d.state < 1.0 { Some(psd_cholesky(&post.c)?) } else { None };
        let mut w_scale = 1.0 / d.state - 1.0;
        for _ in 0..k {
            let g = beta(d.vol * n / 2.0, (1.0 - d.vol) * n / 2.0, rng);
            v *= d.vol / g;
            n *= d.vol;
            if let Some(l) = &chol {
                theta += sample_mvn(&DVector::zeros(j_len + 1), l, (w_scale * v / post.s).sqrt(), rng);
            }
            w_scale /= d.state;
        }
        let mut mean = theta[0];
        for (j, dens) in next.iter().enumerate() {
            mean += theta[j + 1] * dens.sample(rng);
        }
        out.push(mean + v.sqrt() * rng.sample::<f64, _>(StandardNormal));
    }
    Ok(out)
}

/// 1-step forecast sample; identical to [`forecast_k_direct`] with `k = 1`.
pub fn forecast_one_step<R: Rng + ?Sized>(
    draws: &PosteriorDraws,
    next: &[ForecastDensity],
    cfg: &BpsConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    forecast_k_direct(draws, next, 1, cfg, rng)
}

/// Posterior draws plus the forecast sample they imply.
#[derive(Debug, Clone)]
pub struct BpsRun {
    pub draws: PosteriorDraws,
    pub forecast: Vec<f64>,
}

/// Horizon-customized synthesis: fit on a horizon-`k` panel (cells issued at
/// `t - k`) and project `k` steps using the agents' current k-step densities.
pub fn run_bps_k<R: Rng + ?Sized>(
    panel: &AgentPanel,
    next: &[ForecastDensity],
    cfg: &BpsConfig,
    rng: &mut R,
) -> Result<BpsRun> {
    if panel.horizon != cfg.horizon {
        return Err(BpsError::Config(format!(
            "panel horizon {} does not match synthesis horizon {}",
            panel.horizon, cfg.horizon
        )));
    }
    if cfg.horizon > 1 && cfg.mode != SynthesisMode::Customized {
        return Err(BpsError::Config("multi-step synthesis runs require customized mode".into()));
    }
    if next.len() != panel.j_len() {
        return Err(BpsError::DimensionMismatch {
            expected: panel.j_len(),
            got: next.len(),
        });
    }
    let draws = gibbs(panel, cfg, rng)?;
    let forecast = forecast_k_direct(&draws, next, cfg.horizon, cfg, rng)?;
    Ok(BpsRun { draws, forecast })
}
