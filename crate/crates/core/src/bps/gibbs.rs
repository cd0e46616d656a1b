use nalgebra::DVector;
use rand::Rng;

use super::config::BpsConfig;
use super::latent::{init_latents, sample_latents, LatentStates};
use crate::agents::AgentPanel;
use crate::dlm::{backward_sample, forward_filter, DlmPosterior, StateTrajectory};
use crate::error::{BpsError, Result};

/// Retained Gibbs draws.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub trajectories: Vec<StateTrajectory>,
    pub latents: Vec<LatentStates>,
    /// Time-T filtered posterior behind each draw; drives forecast evolution.
    pub final_posteriors: Vec<DlmPosterior>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Number of time points in each trajectory.
    pub fn t_len(&self) -> usize {
        self.trajectories.first().map_or(0, StateTrajectory::len)
    }

    /// Draws of coefficient `i` at time `t`.
    pub fn coefficient(&self, t: usize, i: usize) -> Vec<f64> {
        self.trajectories.iter().map(|tr| tr.thetas[t][i]).collect()
    }

    /// Draws of the latent state vector at time `t`, one row per draw.
    pub fn latent_rows(&self, t: usize) -> Vec<Vec<f64>> {
        self.latents
            .iter()
            .map(|l| l.x.row(t).iter().copied().collect())
            .collect()
    }

    /// Posterior mean of `theta_t`.
    pub fn theta_mean(&self, t: usize) -> DVector<f64> {
        let mut acc = DVector::zeros(self.trajectories[0].thetas[t].len());
        for tr in &self.trajectories {
            acc += &tr.thetas[t];
        }
        acc / self.len() as f64
    }
}

fn design(latents: &LatentStates) -> Vec<DVector<f64>> {
    let (t_len, j_len) = latents.x.shape();
    (0..t_len)
        .map(|t| {
            DVector::from_fn(j_len + 1, |i, _| if i == 0 { 1.0 } else { latents.x[(t, i - 1)] })
        })
        .collect()
}

/// Two-block Gibbs sampler starting from `cfg.init`.
pub fn gibbs<R: Rng + ?Sized>(panel: &AgentPanel, cfg: &BpsConfig, rng: &mut R) -> Result<PosteriorDraws> {
    let init = init_latents(panel, cfg.init, rng)?;
    gibbs_from(panel, cfg, init, rng)
}

/// Two-block Gibbs sampler from given latent states (e.g. a warm start).
///
/// Each sweep draws `(theta, v)_{1:T}` by FFBS with `F_t = (1, x_t')'`,
/// then the latent states given that trajectory.
pub fn gibbs_from<R: Rng + ?Sized>(
    panel: &AgentPanel,
    cfg: &BpsConfig,
    init: LatentStates,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    if cfg.prior.dim() != panel.j_len() + 1 {
        return Err(BpsError::Config(format!(
            "synthesis prior has dimension {} but the panel has {} agents",
            cfg.prior.dim(),
            panel.j_len()
        )));
    }
    if init.x.shape() != (panel.t_len(), panel.j_len()) {
        return Err(BpsError::DimensionMismatch {
            expected: panel.t_len() * panel.j_len(),
            got: init.x.len(),
        });
    }
    let mcmc = cfg.mcmc;
    let mut out = PosteriorDraws {
        trajectories: Vec::with_capacity(mcmc.draws),
        latents: Vec::with_capacity(mcmc.draws),
        final_posteriors: Vec::with_capacity(mcmc.draws),
    };
    let mut latents = init;
    for sweep in 0..mcmc.sweeps() {
        let f = design(&latents);
        let filtered = forward_filter(&cfg.prior, &f, &panel.outcomes, cfg.discounts)
            .map_err(|e| e.with_context(format!("gibbs sweep {sweep}")))?;
        let traj = backward_sample(&filtered, cfg.discounts, rng)?;
        latents = sample_latents(&traj, panel, &latents.phi, cfg, rng)?;
        if sweep >= mcmc.burn_in && (sweep - mcmc.burn_in) % mcmc.thin == 0 {
            out.trajectories.push(traj);
            out.latents.push(latents.clone());
            out.final_posteriors
                .push(filtered.into_iter().next_back().expect("non-empty panel"));
        }
    }
    Ok(out)
}
