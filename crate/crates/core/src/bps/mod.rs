//! Dynamic latent-factor synthesis of agent forecast densities.
//!
//! The synthesis model regresses the outcome on latent agent states,
//!
//! ```text
//! y_t = theta_t0 + sum_j theta_tj x_tj + nu_t,   nu_t ~ N(0, v_t)
//! x_tj ~ h_tj independently,
//! ```
//!
//! with discount random walks on `theta_t` and `v_t`. Posterior inference is
//! a two-block Gibbs sampler: forward-filtering/backward-sampling of
//! `(theta, v)_{1:T}` given the latent states, then the latent states given
//! `(theta, v)`, which are conditionally independent across time.

mod config;
mod forecast;
mod gibbs;
mod latent;

pub use config::{equal_weight_prior, BpsConfig, Initialization, McmcSettings, Resampling, SynthesisMode};
pub use forecast::{forecast_k_direct, forecast_one_step, run_bps_k, BpsRun};
pub use gibbs::{gibbs, gibbs_from, PosteriorDraws};
pub use latent::{
    init_latents, latent_conditional, sample_latent_vector, sample_latents, systematic_indices, LatentConditional,
    LatentStates,
};
