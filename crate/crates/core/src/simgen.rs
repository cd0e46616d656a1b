//! Synthetic series with random switching among generating models.
//!
//! The target `p` follows one of several linear lag models at each step;
//! the auxiliary series `r` and `u` are independent AR(1) processes. The
//! default config uses the four forms of the standard agent set.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use nalgebra::{DMatrix, DVector};

use crate::agents::{AgentSpec, Predictor};
use crate::data::{quarterly_labels, SeriesTable};
use crate::dlm::{Discounts, DlmPosterior};
use crate::error::{BpsError, Result};
use crate::rng::substream;

/// One lagged term `coef * series[t - lag]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub series: String,
    pub lag: usize,
    pub coef: f64,
}

impl Term {
    pub fn new(series: impl Into<String>, lag: usize, coef: f64) -> Self {
        Term {
            series: series.into(),
            lag,
            coef,
        }
    }
}

/// A generating model for the target series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub name: String,
    pub intercept: f64,
    pub terms: Vec<Term>,
}

/// `x_t = mean + coef (x_{t-1} - mean) + sd e_t`, started at `init`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1 {
    pub mean: f64,
    pub coef: f64,
    pub sd: f64,
    pub init: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Switching {
    /// Per-step probability of moving to a different, uniformly chosen regime.
    Probability(f64),
    /// Regime index for every step.
    Path(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub length: usize,
    pub regimes: Vec<RegimeSpec>,
    pub switch: Switching,
    /// Observation noise SD of the target.
    pub noise: f64,
    pub seed: u64,
    pub target: String,
    /// Value of the target before the first step.
    pub target_init: f64,
    pub aux: Vec<(String, Ar1)>,
    /// First quarterly label as `(year, quarter)`.
    pub start: (i64, i64),
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            length: 200,
            regimes: default_regimes(),
            switch: Switching::Probability(0.02),
            noise: 0.2,
            seed: 1,
            target: "p".into(),
            target_init: 2.0,
            aux: vec![
                (
                    "r".into(),
                    Ar1 {
                        mean: 3.0,
                        coef: 0.9,
                        sd: 0.3,
                        init: 3.0,
                    },
                ),
                (
                    "u".into(),
                    Ar1 {
                        mean: 6.0,
                        coef: 0.95,
                        sd: 0.2,
                        init: 6.0,
                    },
                ),
            ],
            start: (1960, 1),
        }
    }
}

/// The four standard agent forms with fixed true coefficients. Each has a
/// stationary mean near 2 when `r` and `u` sit at their means, and each
/// draws on different information: `M4` mostly on `r` and `u`, `M3` on
/// oscillating `p` lags, `M2` on all nine lags.
pub fn default_regimes() -> Vec<RegimeSpec> {
    let t = Term::new;
    vec![
        RegimeSpec {
            name: "M1".into(),
            intercept: 0.4,
            terms: vec![t("p", 1, 0.8)],
        },
        RegimeSpec {
            name: "M2".into(),
            intercept: 1.9,
            terms: vec![
                t("p", 1, 0.4),
                t("p", 2, 0.3),
                t("p", 3, -0.2),
                t("r", 1, 0.5),
                t("r", 2, -0.3),
                t("r", 3, 0.1),
                t("u", 1, -0.4),
                t("u", 2, 0.2),
                t("u", 3, -0.1),
            ],
        },
        RegimeSpec {
            name: "M3".into(),
            intercept: 0.4,
            terms: vec![t("p", 1, 1.2), t("p", 2, -0.5), t("p", 3, 0.1)],
        },
        RegimeSpec {
            name: "M4".into(),
            intercept: 3.8,
            terms: vec![t("p", 1, 0.3), t("r", 1, 0.8), t("u", 1, -0.8)],
        },
    ]
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(BpsError::Config("simulation length must be >= 1".into()));
        }
        if self.regimes.is_empty() {
            return Err(BpsError::Config("at least one regime is required".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(BpsError::Config(format!("noise SD must be >= 0, got {}", self.noise)));
        }
        match &self.switch {
            Switching::Probability(p) if !(0.0..=1.0).contains(p) => {
                return Err(BpsError::Config(format!("switch probability {p} outside [0, 1]")))
            }
            Switching::Path(path) => {
                if path.len() != self.length {
                    return Err(BpsError::Config(format!(
                        "regime path has {} steps for length {}",
                        path.len(),
                        self.length
                    )));
                }
                if let Some(r) = path.iter().find(|r| **r >= self.regimes.len()) {
                    return Err(BpsError::Config(format!("regime index {r} out of range")));
                }
            }
            _ => {}
        }
        let known = |s: &str| s == self.target || self.aux.iter().any(|(n, _)| n == s);
        for reg in &self.regimes {
            for term in &reg.terms {
                if term.lag == 0 {
                    return Err(BpsError::Config(format!("regime {}: lags must be >= 1", reg.name)));
                }
                if !known(&term.series) {
                    return Err(BpsError::Config(format!(
                        "regime {}: unknown series '{}'",
                        reg.name, term.series
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One agent per regime that knows the regime's true coefficients and noise
/// variance: zero coefficient uncertainty, unit discounts and a near-certain
/// variance. Each is exact while its regime is in force.
pub fn known_parameter_agents(cfg: &SimConfig) -> Result<Vec<AgentSpec>> {
    cfg.validate()?;
    let s0 = (cfg.noise * cfg.noise).max(1e-12);
    cfg.regimes
        .iter()
        .map(|reg| {
            let predictors = reg.terms.iter().map(|t| Predictor::new(&t.series, t.lag)).collect();
            let mut m = vec![reg.intercept];
            m.extend(reg.terms.iter().map(|t| t.coef));
            let dim = m.len();
            AgentSpec::new(&reg.name, true, predictors)?
                .with_discounts(Discounts::unit())?
                .with_prior(DlmPosterior::new(DVector::from_vec(m), DMatrix::zeros(dim, dim), 1e6, s0)?)
        })
        .collect()
}

/// Generated series plus the regime in force at each step.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub table: SeriesTable,
    pub regimes: Vec<usize>,
    pub regime_names: Vec<String>,
}

impl Simulation {
    /// Writes `<stem>.csv` (ingestible series) and `<stem>_regimes.csv`.
    pub fn write(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.table
            .write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?, "date")?;
        self.write_regimes(std::fs::File::create(dir.join(format!("{stem}_regimes.csv")))?)
    }

    pub fn write_regimes<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "regime", "model"])?;
        for (date, r) in self.table.dates().iter().zip(&self.regimes) {
            w.write_record([date.as_str(), &r.to_string(), &self.regime_names[*r]])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn generate(cfg: &SimConfig) -> Result<Simulation> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, &[0x5157]);
    let n_regimes = cfg.regimes.len();

    let regimes: Vec<usize> = match &cfg.switch {
        Switching::Path(p) => p.clone(),
        Switching::Probability(prob) => {
            let mut cur = rng.random_range(0..n_regimes);
            let mut path = Vec::with_capacity(cfg.length);
            for t in 0..cfg.length {
                if t > 0 && n_regimes > 1 && rng.random::<f64>() < *prob {
                    let other = rng.random_range(0..n_regimes - 1);
                    cur = if other >= cur { other + 1 } else { other };
                }
                path.push(cur);
            }
            path
        }
    };

    let mut names = vec![cfg.target.clone()];
    names.extend(cfg.aux.iter().map(|(n, _)| n.clone()));
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.length); names.len()];
    let inits: Vec<f64> = std::iter::once(cfg.target_init)
        .chain(cfg.aux.iter().map(|(_, a)| a.init))
        .collect();
    let lagged = |columns: &[Vec<f64>], idx: usize, t: usize, lag: usize| {
        if t >= lag {
            columns[idx][t - lag]
        } else {
            inits[idx]
        }
    };
    let resolved: Vec<Vec<(usize, usize, f64)>> = cfg
        .regimes
        .iter()
        .map(|reg| {
            reg.terms
                .iter()
                .map(|term| {
                    let idx = names.iter().position(|n| *n == term.series).expect("validated");
                    (idx, term.lag, term.coef)
                })
                .collect()
        })
        .collect();

    for (t, &regime) in regimes.iter().enumerate() {
        for (k, (_, ar)) in cfg.aux.iter().enumerate() {
            let prev = lagged(&columns, k + 1, t, 1);
            let e: f64 = rng.sample(StandardNormal);
            let x = ar.mean + ar.coef * (prev - ar.mean) + ar.sd * e;
            columns[k + 1].push(x);
        }
        let mut y = cfg.regimes[regime].intercept;
        for &(idx, lag, coef) in &resolved[regime] {
            y += coef * lagged(&columns, idx, t, lag);
        }
        let e: f64 = rng.sample(StandardNormal);
        columns[0].push(y + cfg.noise * e);
    }

    let dates = quarterly_labels(cfg.start.0, cfg.start.1, cfg.length);
    Ok(Simulation {
        table: SeriesTable::new(dates, names, columns)?,
        regimes,
        regime_names: cfg.regimes.iter().map(|r| r.name.clone()).collect(),
    })
}
