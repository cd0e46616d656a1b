//! Dynamic Bayesian predictive synthesis.
//!
//! Agents are discount dynamic linear models that issue forecast densities.
//! A latent-factor synthesis model, fitted by Gibbs sampling, combines those
//! densities into a forecast for the outcome. Baseline pools, sequential
//! evaluation, a regime-switching simulator and an end-to-end rolling
//! forecast pipeline complete the crate.
//!
//! The `examples/` directory has one runnable program per capability:
//!
//! - `filter_dlm`: forward filtering and backward sampling of a discount DLM
//! - `agent_forecasts`: fitting the standard agents and their k-step densities
//! - `gibbs_synthesis`: posterior draws of the synthesis model
//! - `multi_step`: direct projection versus horizon-customized synthesis
//! - `pools_and_bma`: model averaging and opinion pools
//! - `dependence_r2`: posterior dependence among latent agent states
//! - `simulate_regimes`: regime-switching synthetic data
//! - `pipeline_toy`: the full rolling evaluation on a small data set
//! - `simulation_study`: replicated evaluation on regime-switching data

pub mod agents;
pub mod bps;
pub mod data;
pub mod density;
pub mod dlm;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod pipeline;
pub mod pools;
pub mod rng;
pub mod simgen;

pub use agents::{standard_agents, AgentPanel, AgentSpec, FittedAgent, ForecastBook, Predictor};
pub use bps::{BpsConfig, McmcSettings, PosteriorDraws, SynthesisMode};
pub use data::{ingest, ColumnMapping, SeriesTable};
pub use density::ForecastDensity;
pub use dlm::{Discounts, DlmPosterior};
pub use error::{BpsError, Result};
pub use eval::{lpdr, mc_empirical_r2, msfe, EvalSeries};
pub use pools::{bma_update, linear_pool, log_pool, BmaState};
pub use simgen::{generate, SimConfig};
