mod common;

use common::{ks_p_value, ks_statistic, mean, t_cdf, variance};
use dynbps::bps::{
    forecast_k_direct, forecast_one_step, gibbs, init_latents, latent_conditional, sample_latents,
    Initialization, McmcSettings,
};
use dynbps::dlm::StateTrajectory;
use dynbps::rng::substream;
use dynbps::{AgentPanel, BpsConfig, DlmPosterior, ForecastDensity, PosteriorDraws};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Conditional of `x` given `y` from the dense joint covariance of
/// `(x, y) = A (x, nu) + (0, theta_0)`.
fn dense_conditional(theta: &DVector<f64>, v: f64, y: f64, h: &[f64], hvar: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let j = h.len();
    let mut a = DMatrix::zeros(j + 1, j + 1);
    for i in 0..j {
        a[(i, i)] = 1.0;
        a[(j, i)] = theta[i + 1];
    }
    a[(j, j)] = 1.0;
    let mut d = DMatrix::zeros(j + 1, j + 1);
    for i in 0..j {
        d[(i, i)] = hvar[i];
    }
    d[(j, j)] = v;
    let sigma = &a * d * a.transpose();
    let mut mu = DVector::zeros(j + 1);
    for i in 0..j {
        mu[i] = h[i];
    }
    mu[j] = theta[0] + (0..j).map(|i| theta[i + 1] * h[i]).sum::<f64>();
    let s11 = sigma.view((0, 0), (j, j)).into_owned();
    let s12 = sigma.view((0, j), (j, 1)).into_owned();
    let s22 = sigma.view((j, j), (1, 1)).into_owned();
    let s22_inv = s22.try_inverse().unwrap();
    let mean = mu.rows(0, j).into_owned() + &s12 * &s22_inv * DVector::from_element(1, y - mu[j]);
    let cov = s11 - &s12 * s22_inv * s12.transpose();
    (mean, cov)
}

#[test]
fn latent_conditional_matches_dense_conditioning() {
    let mut rng = substream(21, &[]);
    for _ in 0..100 {
        let theta = DVector::from_fn(4, |_, _| rng.random_range(-1.5..1.5));
        let v = rng.random_range(0.01..2.0);
        let h: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let hvar: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..3.0)).collect();
        let y = rng.random_range(-5.0..5.0);
        let lc = latent_conditional(&theta, v, y, &h, &hvar).unwrap();
        let (mean, cov) = dense_conditional(&theta, v, y, &h, &hvar);
        assert!((lc.mean - mean).amax() <= 1e-8);
        assert!((lc.cov - cov).amax() <= 1e-8);
        assert!(lc.g > 0.0);
    }
}

fn constant_trajectory(t_len: usize, theta: DVector<f64>, v: f64) -> StateTrajectory {
    StateTrajectory {
        thetas: vec![theta; t_len],
        vols: vec![v; t_len],
    }
}

#[test]
fn init_draws_follow_agent_densities() {
    let panel = AgentPanel::from_parts(
        1,
        vec![vec![
            ForecastDensity::normal(1.5, 0.04).unwrap(),
            ForecastDensity::student_t(-0.5, 0.3, 6.0).unwrap(),
            ForecastDensity::normal(3.0, 1e-12).unwrap(),
        ]],
        vec![0.0],
    )
    .unwrap();
    let mut rng = substream(4, &[]);
    let n = 100_000;
    let mut col0 = Vec::with_capacity(n);
    let mut col1 = Vec::with_capacity(n);
    for _ in 0..n {
        let s = init_latents(&panel, Initialization::AgentPriors, &mut rng).unwrap();
        col0.push(s.x[(0, 0)]);
        col1.push(s.x[(0, 1)]);
        assert_eq!(s.phi[(0, 0)], 1.0);
        assert!((s.x[(0, 2)] - 3.0).abs() < 1e-4);
    }
    assert!((mean(&col0) - 1.5).abs() < 3.0 * (0.04 / n as f64).sqrt());
    let t_var = 0.3 * 6.0 / 4.0;
    assert!((mean(&col1) + 0.5).abs() < 3.0 * (t_var / n as f64).sqrt());
}

#[test]
fn outcome_initialization_sets_states_to_outcomes() {
    let panel = AgentPanel::from_parts(
        1,
        vec![vec![ForecastDensity::normal(0.0, 1.0).unwrap(); 2]; 3],
        vec![1.0, 2.0, 3.0],
    )
    .unwrap();
    let s = init_latents(&panel, Initialization::Outcome, &mut substream(1, &[])).unwrap();
    for t in 0..3 {
        assert_eq!(s.x[(t, 0)], (t + 1) as f64);
        assert_eq!(s.x[(t, 1)], (t + 1) as f64);
    }
}

/// Repeated latent sweeps under a fixed trajectory; returns x draws per sweep.
fn sweeps(panel: &AgentPanel, traj: &StateTrajectory, count: usize, seed: u64) -> Vec<DMatrix<f64>> {
    let cfg = BpsConfig::one_step(panel.j_len()).unwrap();
    let mut rng = substream(seed, &[]);
    let mut state = init_latents(panel, Initialization::AgentPriors, &mut rng).unwrap();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        state = sample_latents(traj, panel, &state.phi, &cfg, &mut rng).unwrap();
        out.push(state.x.clone());
    }
    out
}

#[test]
fn zero_loadings_reproduce_student_t_marginal() {
    let (loc, scale, dof) = (0.7, 0.5, 5.0);
    let panel = AgentPanel::from_parts(
        1,
        vec![vec![ForecastDensity::student_t(loc, scale, dof).unwrap()]],
        vec![10.0],
    )
    .unwrap();
    let traj = constant_trajectory(1, DVector::from_vec(vec![0.3, 0.0]), 0.5);
    let xs: Vec<f64> = sweeps(&panel, &traj, 10_000, 99).iter().map(|x| x[(0, 0)]).collect();
    let d = ks_statistic(&xs, |x| t_cdf(x, loc, scale, dof));
    assert!(ks_p_value(d, xs.len()) > 0.01, "KS D = {d}");
}

#[test]
fn distinct_times_are_conditionally_independent() {
    let dens = ForecastDensity::student_t(1.0, 0.2, 8.0).unwrap();
    let panel = AgentPanel::from_parts(1, vec![vec![dens.clone(), dens]; 2], vec![1.3, 0.4]).unwrap();
    let traj = constant_trajectory(2, DVector::from_vec(vec![0.1, 0.5, 0.4]), 0.05);
    let draws = sweeps(&panel, &traj, 10_000, 5);
    let a: Vec<f64> = draws.iter().map(|x| x[(0, 0)]).collect();
    let b: Vec<f64> = draws.iter().map(|x| x[(1, 0)]).collect();
    let (ma, mb) = (mean(&a), mean(&b));
    let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64;
    let rho = cov / (variance(&a) * variance(&b)).sqrt();
    assert!(rho.abs() < 0.03, "rho = {rho}");
}

#[test]
fn near_delta_agents_pin_latent_states() {
    let panel = AgentPanel::from_parts(
        1,
        vec![vec![
            ForecastDensity::normal(2.0, 1e-12).unwrap(),
            ForecastDensity::student_t(-1.0, 1e-12, 4.0).unwrap(),
        ]],
        vec![50.0],
    )
    .unwrap();
    let traj = constant_trajectory(1, DVector::from_vec(vec![0.0, 3.0, -2.0]), 0.01);
    for x in sweeps(&panel, &traj, 200, 8) {
        assert!((x[(0, 0)] - 2.0).abs() < 1e-4);
        assert!((x[(0, 1)] + 1.0).abs() < 1e-4);
    }
}

#[test]
fn importance_resampling_tracks_the_normal_conditional() {
    let mut rng = substream(31, &[]);
    let draws: Vec<f64> = (0..4000).map(|_| 1.0 + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
    let panel = AgentPanel::from_parts(
        1,
        vec![vec![ForecastDensity::samples(draws).unwrap(), ForecastDensity::normal(-1.0, 0.5).unwrap()]],
        vec![1.2],
    )
    .unwrap();
    let theta = DVector::from_vec(vec![0.2, 0.8, 0.3]);
    let traj = constant_trajectory(1, theta.clone(), 0.1);
    let xs = sweeps(&panel, &traj, 4000, 17);
    let lc = latent_conditional(&theta, 0.1, 1.2, &[1.0, -1.0], &[0.25, 0.5]).unwrap();
    for j in 0..2 {
        let col: Vec<f64> = xs.iter().map(|x| x[(0, j)]).collect();
        assert!((mean(&col) - lc.mean[j]).abs() < 0.05, "agent {j}: {} vs {}", mean(&col), lc.mean[j]);
        assert!((variance(&col) - lc.cov[(j, j)]).abs() < 0.1 * lc.cov[(j, j)] + 0.01);
    }
}

fn synthetic_panel(t_len: usize, seed: u64) -> AgentPanel {
    let mut rng = substream(seed, &[]);
    let mut densities = Vec::with_capacity(t_len);
    let mut outcomes = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let signal = 2.0 + (t as f64 / 9.0).sin();
        let h1 = signal + 0.3 * rng.sample::<f64, _>(StandardNormal);
        let h2 = signal + 0.5 + 0.2 * rng.sample::<f64, _>(StandardNormal);
        let h3 = 1.0 + 0.5 * signal;
        densities.push(vec![
            ForecastDensity::normal(h1, 0.05).unwrap(),
            ForecastDensity::student_t(h2, 0.04, 10.0).unwrap(),
            ForecastDensity::normal(h3, 0.1).unwrap(),
        ]);
        outcomes.push(signal + 0.15 * rng.sample::<f64, _>(StandardNormal));
    }
    AgentPanel::from_parts(1, densities, outcomes).unwrap()
}

#[test]
fn identity_agent_recovers_unit_loading() {
    let mut rng = substream(41, &[]);
    let t_len = 200;
    let mut densities = Vec::with_capacity(t_len);
    let mut outcomes = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let truth = 2.0 + 1.5 * (t as f64 / 7.0).sin();
        densities.push(vec![ForecastDensity::normal(truth, 1e-10).unwrap()]);
        outcomes.push(truth + 0.1 * rng.sample::<f64, _>(StandardNormal));
    }
    let panel = AgentPanel::from_parts(1, densities, outcomes).unwrap();
    let mut cfg = BpsConfig::one_step(1).unwrap();
    cfg.prior.m = DVector::from_vec(vec![0.0, 1.0]);
    let cfg = cfg.with_mcmc(McmcSettings::new(500, 2000, 1).unwrap());
    let draws = gibbs(&panel, &cfg, &mut substream(2, &[])).unwrap();
    let m = draws.theta_mean(t_len - 1);
    assert!(m[0].abs() < 0.1, "intercept {}", m[0]);
    assert!((m[1] - 1.0).abs() < 0.1, "loading {}", m[1]);
    assert!(draws.trajectories.iter().all(|tr| tr.vols.iter().all(|&v| v > 0.0)));
}

fn mean_abs_change(draws: &PosteriorDraws) -> f64 {
    let t_len = draws.t_len();
    let means: Vec<DVector<f64>> = (0..t_len).map(|t| draws.theta_mean(t)).collect();
    let total: f64 = means.windows(2).map(|w| (&w[1] - &w[0]).abs().sum()).sum();
    total / (t_len - 1) as f64
}

#[test]
fn customized_coefficients_are_smoother() {
    let panel = synthetic_panel(120, 3);
    let mcmc = McmcSettings::new(300, 1000, 1).unwrap();
    let one = BpsConfig::one_step(3).unwrap().with_mcmc(mcmc);
    let four = BpsConfig::customized(3, 4).unwrap().with_mcmc(mcmc);
    let d1 = gibbs(&panel, &one, &mut substream(6, &[])).unwrap();
    let mut panel4 = panel.clone();
    panel4.horizon = 4;
    let d4 = gibbs(&panel4, &four, &mut substream(6, &[])).unwrap();
    let (c1, c4) = (mean_abs_change(&d1), mean_abs_change(&d4));
    assert!(c4 < c1, "BPS(4) {c4} vs BPS(1) {c1}");
}

#[test]
fn agent_order_is_equivariant() {
    let panel = synthetic_panel(80, 9);
    let order = [2, 0, 1];
    let permuted = panel.permuted(&order);
    let cfg = BpsConfig::one_step(3).unwrap().with_mcmc(McmcSettings::new(500, 4000, 1).unwrap());
    let a = gibbs(&panel, &cfg, &mut substream(12, &[])).unwrap();
    let b = gibbs(&permuted, &cfg, &mut substream(12, &[])).unwrap();
    for t in [0, 40, 79] {
        let (ma, mb) = (a.theta_mean(t), b.theta_mean(t));
        assert!((ma[0] - mb[0]).abs() < 0.1, "intercept at t={t}: {} vs {}", ma[0], mb[0]);
        for (pos, &j) in order.iter().enumerate() {
            assert!((ma[j + 1] - mb[pos + 1]).abs() < 0.1, "agent {j} at t={t}");
            let xa = mean(&a.latents.iter().map(|l| l.x[(t, j)]).collect::<Vec<_>>());
            let xb = mean(&b.latents.iter().map(|l| l.x[(t, pos)]).collect::<Vec<_>>());
            assert!((xa - xb).abs() < 0.05);
        }
    }
}

fn fixed_draws(theta: DVector<f64>, v: f64, c_scale: f64, n: f64, s: f64, count: usize) -> PosteriorDraws {
    let post = DlmPosterior::isotropic(theta.clone(), c_scale, n, s).unwrap();
    PosteriorDraws {
        trajectories: vec![constant_trajectory(1, theta, v); count],
        latents: vec![],
        final_posteriors: vec![post; count],
    }
}

#[test]
fn near_delta_agents_reproduce_common_value() {
    let theta = DVector::from_vec(vec![0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    let draws = fixed_draws(theta, 1e-6, 1e-8, 50.0, 1e-6, 20_000);
    let next = vec![ForecastDensity::normal(2.5, 1e-12).unwrap(); 3];
    let cfg = BpsConfig::one_step(3).unwrap();
    let ys = forecast_one_step(&draws, &next, &cfg, &mut substream(1, &[])).unwrap();
    assert!((mean(&ys) - 2.5).abs() < 1e-3);
}

#[test]
fn one_step_and_direct_k1_coincide() {
    let panel = synthetic_panel(40, 2);
    let cfg = BpsConfig::one_step(3).unwrap().with_mcmc(McmcSettings::new(100, 300, 1).unwrap());
    let draws = gibbs(&panel, &cfg, &mut substream(1, &[])).unwrap();
    let next = panel.densities[39].clone();
    let a = forecast_one_step(&draws, &next, &cfg, &mut substream(7, &[])).unwrap();
    let b = forecast_k_direct(&draws, &next, 1, &cfg, &mut substream(7, &[])).unwrap();
    assert_eq!(a, b);
}

#[test]
fn forecast_variance_grows_with_horizon() {
    let theta = DVector::from_vec(vec![0.1, 0.5, 0.5]);
    let draws = fixed_draws(theta, 0.01, 0.05, 20.0, 0.01, 200_000);
    let next = vec![ForecastDensity::normal(1.0, 0.02).unwrap(), ForecastDensity::normal(2.0, 0.03).unwrap()];
    let cfg = BpsConfig::one_step(2).unwrap();
    let vars: Vec<f64> = (1..=4)
        .map(|k| variance(&forecast_k_direct(&draws, &next, k, &cfg, &mut substream(k as u64, &[])).unwrap()))
        .collect();
    for w in vars.windows(2) {
        assert!(w[1] >= w[0], "{vars:?}");
    }
}

#[test]
fn unit_discounts_reduce_to_one_step_formula() {
    let theta = DVector::from_vec(vec![0.2, 0.7, 0.4]);
    let v = 0.05;
    let draws = fixed_draws(theta.clone(), v, 0.3, 12.0, 0.05, 200_000);
    let next = vec![ForecastDensity::normal(1.5, 0.2).unwrap(), ForecastDensity::normal(-0.5, 0.1).unwrap()];
    let mut cfg = BpsConfig::one_step(2).unwrap();
    cfg.discounts = dynbps::Discounts::unit();
    let ys = forecast_k_direct(&draws, &next, 3, &cfg, &mut substream(3, &[])).unwrap();
    let mean_oracle = 0.2 + 0.7 * 1.5 + 0.4 * -0.5;
    let var_oracle = v + 0.49 * 0.2 + 0.16 * 0.1;
    assert!((mean(&ys) - mean_oracle).abs() < 4.0 * (var_oracle / ys.len() as f64).sqrt());
    assert!((variance(&ys) / var_oracle - 1.0).abs() < 0.02);
}

#[test]
fn forecast_mean_matches_per_draw_analytic_mean() {
    let panel = synthetic_panel(60, 4);
    let cfg = BpsConfig::one_step(3).unwrap().with_mcmc(McmcSettings::new(300, 3000, 1).unwrap());
    let draws = gibbs(&panel, &cfg, &mut substream(8, &[])).unwrap();
    let next = panel.densities[59].clone();
    let mut ys = Vec::new();
    for rep in 0..10 {
        ys.extend(forecast_one_step(&draws, &next, &cfg, &mut substream(100 + rep, &[])).unwrap());
    }
    let analytic = mean(
        &draws
            .trajectories
            .iter()
            .map(|tr| {
                let th = &tr.thetas[59];
                th[0] + (0..3).map(|j| th[j + 1] * next[j].mean()).sum::<f64>()
            })
            .collect::<Vec<_>>(),
    );
    let se = (variance(&ys) / ys.len() as f64).sqrt();
    assert!((mean(&ys) - analytic).abs() < 4.0 * se + 1e-3, "{} vs {analytic}", mean(&ys));

    let v_next: Vec<f64> = draws
        .trajectories
        .iter()
        .zip(&draws.final_posteriors)
        .map(|(tr, post)| {
            let (vol, n) = (cfg.discounts.vol, post.n);
            tr.vols[59] * vol * (n / 2.0 - 1.0) / (vol * n / 2.0 - 1.0)
        })
        .collect();
    assert!(variance(&ys) >= mean(&v_next));
}

#[test]
fn parameter_uncertainty_widens_forecasts() {
    let panel = synthetic_panel(60, 5);
    let cfg = BpsConfig::one_step(3).unwrap().with_mcmc(McmcSettings::new(300, 3000, 1).unwrap());
    let draws = gibbs(&panel, &cfg, &mut substream(9, &[])).unwrap();
    let next = panel.densities[59].clone();
    let full = forecast_one_step(&draws, &next, &cfg, &mut substream(50, &[])).unwrap();

    let theta_bar = draws.theta_mean(59);
    let v_bar = mean(&draws.trajectories.iter().map(|t| t.vols[59]).collect::<Vec<_>>());
    let frozen_draws = fixed_draws(theta_bar, v_bar, 1.0, 10.0, 1.0, draws.len());
    let mut frozen_cfg = cfg.clone();
    frozen_cfg.discounts = dynbps::Discounts::unit();
    let frozen = forecast_one_step(&frozen_draws, &next, &frozen_cfg, &mut substream(50, &[])).unwrap();
    assert!(variance(&full) > variance(&frozen), "{} vs {}", variance(&full), variance(&frozen));
}
