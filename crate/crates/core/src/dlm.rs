//! Conjugate discount-factor dynamic linear models.
//!
//! The model is `y_t = F_t' theta_t + nu_t`, `nu_t ~ N(0, v_t)`, with a random
//! walk on `theta_t` whose evolution variance is implied by a state discount,
//! and a beta-gamma random walk on `v_t` implied by a volatility discount.
//! Posteriors are normal/inverse-gamma:
//!
//! ```text
//! theta_t | v_t ~ N(m_t, C_t v_t / s_t),   1 / v_t ~ G(n_t / 2, n_t s_t / 2)
//! ```
//!
//! Forward filtering produces the sequence of `(m_t, C_t, n_t, s_t)`;
//! backward sampling then draws a full trajectory `(theta_t, v_t)_{1:T}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::ForecastDensity;
use crate::error::{BpsError, Result};
use crate::linalg::{min_eigenvalue, psd_cholesky, sample_mvn, symmetrize};
use crate::rng::gamma_rate;

/// Discount factors named by role.
///
/// `state` inflates the coefficient scale (`R_t = C_{t-1} / state`); `vol`
/// discounts the volatility degrees of freedom (`n -> vol * n`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discounts {
    pub state: f64,
    pub vol: f64,
}

impl Discounts {
    pub fn new(state: f64, vol: f64) -> Result<Self> {
        let d = Discounts { state, vol };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("state", self.state), ("vol", self.vol)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(BpsError::InvalidParameter(format!(
                    "{name} discount must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn unit() -> Self {
        Discounts {
            state: 1.0,
            vol: 1.0,
        }
    }
}

/// Normal/inverse-gamma filtering state `(m, C, n, s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DlmPosterior {
    pub m: DVector<f64>,
    pub c: DMatrix<f64>,
    pub n: f64,
    pub s: f64,
}

impl DlmPosterior {
    pub fn new(m: DVector<f64>, c: DMatrix<f64>, n: f64, s: f64) -> Result<Self> {
        let p = DlmPosterior { m, c, n, s };
        p.validate()?;
        Ok(p)
    }

    /// `m` repeated, `C = scale * I`.
    pub fn isotropic(m: DVector<f64>, c_scale: f64, n: f64, s: f64) -> Result<Self> {
        let p = m.len();
        Self::new(m, DMatrix::from_diagonal_element(p, p, c_scale), n, s)
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.m.len();
        if self.c.nrows() != p || self.c.ncols() != p {
            return Err(BpsError::DimensionMismatch {
                expected: p,
                got: self.c.nrows().max(self.c.ncols()),
            });
        }
        if !(self.n > 0.0) || !(self.s > 0.0) {
            return Err(BpsError::InvalidParameter(format!(
                "posterior needs n > 0 and s > 0 (got n {}, s {})",
                self.n, self.s
            )));
        }
        if p > 0 && min_eigenvalue(&self.c) < -1e-10 {
            return Err(BpsError::InvalidParameter(
                "coefficient scale matrix is not positive semi-definite".into(),
            ));
        }
        Ok(())
    }
}

/// Location, scale and dof of the 1-step Student-T predictive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneStepForecast {
    pub f: f64,
    pub q: f64,
    pub dof: f64,
}

impl OneStepForecast {
    pub fn density(&self) -> Result<ForecastDensity> {
        ForecastDensity::student_t(self.f, self.q, self.dof)
    }
}

/// Full 1-step quantities from a filtering update.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveStats {
    pub f: f64,
    pub q: f64,
    pub dof: f64,
    /// Forecast error `y - f`.
    pub e: f64,
    /// Adaptive (gain) vector `R F / q`.
    pub gain: DVector<f64>,
    /// Volatility ratio `s_t / s_{t-1}`.
    pub r: f64,
}

/// One sampled trajectory `(theta_t, v_t)` for `t = 1..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub thetas: Vec<DVector<f64>>,
    pub vols: Vec<f64>,
}

impl StateTrajectory {
    pub fn len(&self) -> usize {
        self.vols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vols.is_empty()
    }
}

/// Time `t-1` posterior to time `t` prior: `C / state`, `vol * n`.
pub fn evolve_prior(post: &DlmPosterior, d: Discounts) -> DlmPosterior {
    DlmPosterior {
        m: post.m.clone(),
        c: &post.c / d.state,
        n: d.vol * post.n,
        s: post.s,
    }
}

/// 1-step Student-T predictive from an evolved prior.
pub fn one_step_predict(prior: &DlmPosterior, regressors: &DVector<f64>) -> Result<OneStepForecast> {
    check_dim(prior, regressors)?;
    let f = regressors.dot(&prior.m);
    let q = quad_form(&prior.c, regressors) + prior.s;
    Ok(OneStepForecast {
        f,
        q,
        dof: prior.n,
    })
}

/// Evolve, predict and update in one step.
pub fn filter_update(
    prev: &DlmPosterior,
    regressors: &DVector<f64>,
    y: f64,
    d: Discounts,
) -> Result<(DlmPosterior, PredictiveStats)> {
    check_dim(prev, regressors)?;
    let r_mat = &prev.c / d.state;
    let rf = &r_mat * regressors;
    let f = regressors.dot(&prev.m);
    let q = regressors.dot(&rf) + prev.s;
    if !(q > 0.0) || !q.is_finite() {
        return Err(BpsError::DegenerateVariance { q });
    }
    let e = y - f;
    let gain = rf / q;
    let prior_n = d.vol * prev.n;
    let n = prior_n + 1.0;
    let r = (prior_n + e * e / q) / n;
    let m = &prev.m + &gain * e;
    let mut c = (r_mat - (&gain * gain.transpose()) * q) * r;
    symmetrize(&mut c);
    let s = r * prev.s;
    let post = DlmPosterior { m, c, n, s };
    let stats = PredictiveStats {
        f,
        q,
        dof: prior_n,
        e,
        gain,
        r,
    };
    Ok((post, stats))
}

/// Forward filtering over a sequence; returns the posteriors for `t = 1..T`.
pub fn forward_filter(
    initial: &DlmPosterior,
    regressors: &[DVector<f64>],
    ys: &[f64],
    d: Discounts,
) -> Result<Vec<DlmPosterior>> {
    if regressors.len() != ys.len() {
        return Err(BpsError::DimensionMismatch {
            expected: ys.len(),
            got: regressors.len(),
        });
    }
    let mut out = Vec::with_capacity(ys.len());
    let mut cur = initial.clone();
    for (t, (f, &y)) in regressors.iter().zip(ys).enumerate() {
        let (post, _) =
            filter_update(&cur, f, y, d).map_err(|e| e.with_context(format!("filtering t={}", t + 1)))?;
        out.push(post.clone());
        cur = post;
    }
    Ok(out)
}

/// Draw `(theta_t, v_t)_{1:T}` given forward-filtered posteriors.
///
/// Starts from the final normal/inverse-gamma posterior and recurses back
/// with `1/v_t = vol / v_{t+1} + gamma_t`,
/// `gamma_t ~ G((1 - vol) n_t / 2, n_t s_t / 2)` and
/// `theta_t ~ N(m_t + state (theta_{t+1} - m_t), C_t (1 - state) v_t / s_t)`.
pub fn backward_sample<R: Rng + ?Sized>(
    filtered: &[DlmPosterior],
    d: Discounts,
    rng: &mut R,
) -> Result<StateTrajectory> {
    let t_len = filtered.len();
    if t_len == 0 {
        return Err(BpsError::InvalidParameter(
            "backward sampling needs at least one filtered posterior".into(),
        ));
    }
    let mut thetas = vec![DVector::zeros(0); t_len];
    let mut vols = vec![0.0; t_len];

    let last = &filtered[t_len - 1];
    let mut precision = gamma_rate(last.n / 2.0, last.n * last.s / 2.0, rng);
    let mut v = 1.0 / precision;
    let chol = psd_cholesky(&last.c)?;
    let mut theta = sample_mvn(&last.m, &chol, (v / last.s).sqrt(), rng);
    thetas[t_len - 1] = theta.clone();
    vols[t_len - 1] = v;

    for t in (0..t_len - 1).rev() {
        let post = &filtered[t];
        let innov = gamma_rate(
            (1.0 - d.vol) * post.n / 2.0,
            post.n * post.s / 2.0,
            rng,
        );
        precision = d.vol * precision + innov;
        v = 1.0 / precision;
        let mean = &post.m + (&theta - &post.m) * d.state;
        theta = if d.state < 1.0 {
            let chol = psd_cholesky(&post.c)?;
            sample_mvn(&mean, &chol, ((1.0 - d.state) * v / post.s).sqrt(), rng)
        } else {
            mean
        };
        thetas[t] = theta.clone();
        vols[t] = v;
    }
    Ok(StateTrajectory { thetas, vols })
}

fn check_dim(post: &DlmPosterior, regressors: &DVector<f64>) -> Result<()> {
    if regressors.len() != post.dim() {
        return Err(BpsError::DimensionMismatch {
            expected: post.dim(),
            got: regressors.len(),
        });
    }
    Ok(())
}

fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}
