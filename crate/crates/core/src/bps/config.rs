use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dlm::{DlmPosterior, Discounts};
use crate::error::{BpsError, Result};

/// Chain lengths. Total sweeps are `burn_in + draws * thin`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcSettings {
    pub burn_in: usize,
    pub draws: usize,
    pub thin: usize,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings {
            burn_in: 3000,
            draws: 5000,
            thin: 1,
        }
    }
}

impl McmcSettings {
    pub fn new(burn_in: usize, draws: usize, thin: usize) -> Result<Self> {
        let s = McmcSettings { burn_in, draws, thin };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.draws == 0 {
            return Err(BpsError::Config("MCMC needs at least one retained draw".into()));
        }
        if self.thin == 0 {
            return Err(BpsError::Config("MCMC thinning must be >= 1".into()));
        }
        Ok(())
    }

    pub fn sweeps(&self) -> usize {
        self.burn_in + self.draws * self.thin
    }
}

/// Whether a model is fitted on 1-step densities and projected (`Direct`) or
/// fitted on k-step densities for its own horizon (`Customized`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    Direct,
    Customized,
}

/// Starting values for the latent agent states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Initialization {
    /// Draw `x_tj ~ h_tj`.
    #[default]
    AgentPriors,
    /// Set `x_tj = y_t`.
    Outcome,
}

/// Resampling scheme for sample-only agent densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpsConfig {
    pub discounts: Discounts,
    /// Prior at t = 0, dimension `1 + J`.
    pub prior: DlmPosterior,
    pub horizon: usize,
    pub mode: SynthesisMode,
    pub mcmc: McmcSettings,
    pub init: Initialization,
    pub resampling: Resampling,
    /// Candidate vectors per time for the importance-sampling latent update.
    pub importance_draws: usize,
}

/// `m0 = (0, 1/J, ..., 1/J)`, `C0 = c_scale * I`.
pub fn equal_weight_prior(agents: usize, c_scale: f64, n0: f64, s0: f64) -> Result<DlmPosterior> {
    let mut m = DVector::from_element(agents + 1, 1.0 / agents as f64);
    m[0] = 0.0;
    DlmPosterior::new(m, DMatrix::from_diagonal_element(agents + 1, agents + 1, c_scale), n0, s0)
}

impl BpsConfig {
    /// 1-step synthesis defaults: `m0 = (0, 1/J, ...)`, `C0 = I`, `n0 = 10`,
    /// `s0 = 0.002`, discounts `(state 0.95, vol 0.99)`.
    pub fn one_step(agents: usize) -> Result<Self> {
        if agents == 0 {
            return Err(BpsError::Config("synthesis needs at least one agent".into()));
        }
        Ok(BpsConfig {
            discounts: Discounts::new(0.95, 0.99)?,
            prior: equal_weight_prior(agents, 1.0, 10.0, 0.002)?,
            horizon: 1,
            mode: SynthesisMode::Direct,
            mcmc: McmcSettings::default(),
            init: Initialization::AgentPriors,
            resampling: Resampling::Multinomial,
            importance_draws: 1000,
        })
    }

    /// Horizon-customized defaults: as [`BpsConfig::one_step`] but with
    /// `C0 = 1e-4 I` and discounts `(0.99, 0.99)`.
    pub fn customized(agents: usize, horizon: usize) -> Result<Self> {
        let mut cfg = Self::one_step(agents)?;
        cfg.prior = equal_weight_prior(agents, 1e-4, 10.0, 0.002)?;
        cfg.discounts = Discounts::new(0.99, 0.99)?;
        cfg.horizon = horizon;
        cfg.mode = SynthesisMode::Customized;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_mcmc(mut self, mcmc: McmcSettings) -> Self {
        self.mcmc = mcmc;
        self
    }

    pub fn agents(&self) -> usize {
        self.prior.dim().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        self.mcmc.validate()?;
        self.discounts.validate()?;
        self.prior.validate()?;
        if self.horizon == 0 {
            return Err(BpsError::Config("synthesis horizon must be >= 1".into()));
        }
        if self.prior.dim() < 2 {
            return Err(BpsError::Config("synthesis prior must have dimension 1 + J with J >= 1".into()));
        }
        if self.importance_draws == 0 {
            return Err(BpsError::Config("importance_draws must be >= 1".into()));
        }
        Ok(())
    }
}
