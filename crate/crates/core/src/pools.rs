//! Baseline combinations: Bayesian model averaging and equal-weight
//! linear and logarithmic opinion pools.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::ForecastDensity;
use crate::error::{BpsError, Result};

/// Model probabilities for sequential Bayesian model averaging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmaState {
    pub probs: Vec<f64>,
}

impl BmaState {
    pub fn uniform(agents: usize) -> Self {
        BmaState {
            probs: vec![1.0 / agents as f64; agents],
        }
    }

    /// Posterior model probabilities after seeing `likelihoods`
    /// (each agent's predictive density at the realized outcome).
    pub fn update(&self, likelihoods: &[f64]) -> Result<Self> {
        bma_update(self, likelihoods)
    }

    /// Probability-weighted mixture of the agents' densities.
    pub fn mixture(&self, densities: &[ForecastDensity]) -> Result<LinearPool> {
        LinearPool::weighted(densities.to_vec(), self.probs.clone())
    }
}

pub fn bma_update(state: &BmaState, likelihoods: &[f64]) -> Result<BmaState> {
    if likelihoods.len() != state.probs.len() {
        return Err(BpsError::DimensionMismatch {
            expected: state.probs.len(),
            got: likelihoods.len(),
        });
    }
    if let Some(bad) = likelihoods.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(BpsError::InvalidParameter(format!("likelihood must be finite and >= 0, got {bad}")));
    }
    let mut probs: Vec<f64> = state.probs.iter().zip(likelihoods).map(|(p, l)| p * l).collect();
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(BpsError::Numerical("all model likelihoods are zero".into()));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(BmaState { probs })
}

/// Weighted arithmetic mixture of densities.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPool {
    components: Vec<ForecastDensity>,
    weights: Vec<f64>,
}

impl LinearPool {
    pub fn weighted(components: Vec<ForecastDensity>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(BpsError::DimensionMismatch {
                expected: components.len().max(1),
                got: weights.len(),
            });
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || !(total > 0.0) {
            return Err(BpsError::InvalidParameter("pool weights must be >= 0 and not all zero".into()));
        }
        Ok(LinearPool {
            components,
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * c.pdf(y))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().zip(&self.weights).map(|(c, w)| w * c.mean()).sum()
    }

    /// Mixture variance; `None` if any component has infinite variance.
    pub fn variance(&self) -> Option<f64> {
        let mean = self.mean();
        let mut acc = 0.0;
        for (c, w) in self.components.iter().zip(&self.weights) {
            let m = c.mean();
            acc += w * (c.variance()? + (m - mean) * (m - mean));
        }
        Some(acc)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (c, w) in self.components.iter().zip(&self.weights) {
            acc += w;
            if u < acc {
                return c.sample(rng);
            }
        }
        self.components[self.components.len() - 1].sample(rng)
    }
}

/// Equal-weight linear pool.
pub fn linear_pool(densities: &[ForecastDensity]) -> Result<LinearPool> {
    LinearPool::weighted(densities.to_vec(), vec![1.0; densities.len()])
}

/// Quadrature used to normalize the logarithmic pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogPoolQuadrature {
    /// Composite Simpson on `center + spread * tan(u)`, `u` in `(-pi/2, pi/2)`.
    WholeLine { intervals: usize },
    /// Composite Simpson on `center +/- half_width * spread`.
    Window { half_width: f64, intervals: usize },
}

impl Default for LogPoolQuadrature {
    fn default() -> Self {
        LogPoolQuadrature::WholeLine { intervals: 4096 }
    }
}

/// Equal-weight geometric pool `prod h_j(y)^(1/J) / Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPool {
    components: Vec<ForecastDensity>,
    log_norm: f64,
    mean: f64,
    variance: f64,
}

impl LogPool {
    fn unnormalized_ln(&self, y: f64) -> f64 {
        self.components.iter().map(|c| c.ln_pdf(y)).sum::<f64>() / self.components.len() as f64
    }

    pub fn pdf(&self, y: f64) -> f64 {
        (self.unnormalized_ln(y) - self.log_norm).exp()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Composite Simpson weights for `intervals` (made even) subintervals.
fn simpson<F: FnMut(f64) -> f64>(a: f64, b: f64, intervals: usize, mut f: F) -> f64 {
    let n = intervals.max(2) + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

pub fn log_pool(densities: &[ForecastDensity], quadrature: LogPoolQuadrature) -> Result<LogPool> {
    if densities.is_empty() {
        return Err(BpsError::InvalidParameter("log pool needs at least one density".into()));
    }
    let lin = linear_pool(densities)?;
    let center = lin.mean();
    let spread = lin
        .variance()
        .map(f64::sqrt)
        .unwrap_or_else(|| densities.iter().map(ForecastDensity::spread).fold(0.0, f64::max));
    let mut pool = LogPool {
        components: densities.to_vec(),
        log_norm: 0.0,
        mean: 0.0,
        variance: 0.0,
    };
    // shift by the log-density at the center to keep exponentials in range
    let shift = pool.unnormalized_ln(center);
    let moments = |pool: &LogPool, power: i32, shift: f64, mu: f64| -> f64 {
        let g = |x: f64| (pool.unnormalized_ln(x) - shift).exp() * (x - mu).powi(power);
        match quadrature {
            LogPoolQuadrature::WholeLine { intervals } => simpson(-PI / 2.0, PI / 2.0, intervals, |u| {
                if u.abs() >= PI / 2.0 {
                    return 0.0;
                }
                let c = u.cos();
                let val = g(center + spread * u.tan()) * spread / (c * c);
                if val.is_finite() {
                    val
                } else {
                    0.0
                }
            }),
            LogPoolQuadrature::Window { half_width, intervals } => {
                simpson(center - half_width * spread, center + half_width * spread, intervals, g)
            }
        }
    };
    let z = moments(&pool, 0, shift, 0.0);
    if !(z > 0.0) || !z.is_finite() {
        return Err(BpsError::Numerical("log pool product is not integrable".into()));
    }
    pool.log_norm = shift + z.ln();
    pool.mean = moments(&pool, 1, pool.log_norm, center) + center;
    pool.variance = moments(&pool, 2, pool.log_norm, pool.mean);
    Ok(pool)
}
