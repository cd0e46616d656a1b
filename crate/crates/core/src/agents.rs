//! Forecasting agents: lag/factor regressions analysed as discount DLMs.
//!
//! Each agent regresses the target series on an intercept and lagged values
//! of any series in the table. Filtering gives the posterior after every row;
//! the 1-step forecast density is the analytic Student-T predictive, and
//! k-step densities are moment-matched Student-T fits to simulated paths.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::data::SeriesTable;
use crate::density::{quantile_sorted, sample_variance, ForecastDensity};
use crate::dlm::{evolve_prior, filter_update, one_step_predict, DlmPosterior, Discounts};
use crate::error::{BpsError, Result};
use crate::linalg::{psd_cholesky, sample_mvn};
use crate::rng::{beta, gamma_rate, substream};

/// A lagged regressor: `series` at `t - lag`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predictor {
    pub series: String,
    pub lag: usize,
}

impl Predictor {
    pub fn new(series: impl Into<String>, lag: usize) -> Self {
        Predictor {
            series: series.into(),
            lag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub name: String,
    pub intercept: bool,
    pub predictors: Vec<Predictor>,
    pub discounts: Discounts,
    pub prior: DlmPosterior,
}

/// Agent discounts `(state, vol)`.
pub const AGENT_DISCOUNTS: Discounts = Discounts {
    state: 0.99,
    vol: 0.95,
};
pub const AGENT_PRIOR_N: f64 = 2.0;
pub const AGENT_PRIOR_S: f64 = 0.01;

impl AgentSpec {
    /// Spec with the default prior `m0 = 0, C0 = I, n0 = 2, s0 = 0.01` and
    /// discounts `(0.99, 0.95)`.
    pub fn new(name: impl Into<String>, intercept: bool, predictors: Vec<Predictor>) -> Result<Self> {
        let dim = predictors.len() + usize::from(intercept);
        let spec = AgentSpec {
            name: name.into(),
            intercept,
            predictors,
            discounts: AGENT_DISCOUNTS,
            prior: DlmPosterior::isotropic(DVector::zeros(dim), 1.0, AGENT_PRIOR_N, AGENT_PRIOR_S)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_discounts(mut self, d: Discounts) -> Result<Self> {
        d.validate()?;
        self.discounts = d;
        Ok(self)
    }

    pub fn with_prior(mut self, prior: DlmPosterior) -> Result<Self> {
        self.prior = prior;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.predictors.len() + usize::from(self.intercept)
    }

    pub fn max_lag(&self) -> usize {
        self.predictors.iter().map(|p| p.lag).max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim() == 0 {
            return Err(BpsError::Config(format!(
                "agent '{}' needs an intercept or at least one predictor",
                self.name
            )));
        }
        if let Some(p) = self.predictors.iter().find(|p| p.lag == 0) {
            return Err(BpsError::Config(format!(
                "agent '{}': predictor '{}' must have lag >= 1",
                self.name, p.series
            )));
        }
        self.discounts.validate()?;
        self.prior.validate()?;
        if self.prior.dim() != self.dim() {
            return Err(BpsError::Config(format!(
                "agent '{}': prior dimension {} but {} coefficients",
                self.name,
                self.prior.dim(),
                self.dim()
            )));
        }
        Ok(())
    }
}

fn lags(series: &str, max: usize) -> impl Iterator<Item = Predictor> + '_ {
    (1..=max).map(move |l| Predictor::new(series, l))
}

/// The four inflation agents: M1 `p(t-1)`; M2 `p, r, u` at lags 1..3;
/// M3 `p` at lags 1..3; M4 `p, r, u` at lag 1. All include an intercept.
pub fn standard_agents(p: &str, r: &str, u: &str) -> Result<Vec<AgentSpec>> {
    Ok(vec![
        AgentSpec::new("M1", true, lags(p, 1).collect())?,
        AgentSpec::new(
            "M2",
            true,
            lags(p, 3).chain(lags(r, 3)).chain(lags(u, 3)).collect(),
        )?,
        AgentSpec::new("M3", true, lags(p, 3).collect())?,
        AgentSpec::new("M4", true, lags(p, 1).chain(lags(r, 1)).chain(lags(u, 1)).collect())?,
    ])
}

/// Options for k-step agent densities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastOptions {
    /// Simulated paths per k-step density.
    pub paths: usize,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        ForecastOptions { paths: 5000 }
    }
}

/// A filtered agent: posteriors after each row from `first_row - 1` onward.
#[derive(Debug, Clone)]
pub struct FittedAgent {
    pub spec: AgentSpec,
    pub target: String,
    first_row: usize,
    states: Vec<DlmPosterior>,
    columns: Vec<Vec<f64>>,
    target_column: Vec<f64>,
}

/// Filters an agent through rows `max_lag..=through` of the table.
pub fn build_agent(spec: &AgentSpec, table: &SeriesTable, target: &str, through: usize) -> Result<FittedAgent> {
    spec.validate()?;
    let target_column = table
        .column(target)
        .ok_or_else(|| BpsError::Data(format!("unknown target series '{target}'")))?
        .to_vec();
    let columns = spec
        .predictors
        .iter()
        .map(|p| {
            table
                .column(&p.series)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| BpsError::Data(format!("agent '{}': unknown series '{}'", spec.name, p.series)))
        })
        .collect::<Result<Vec<_>>>()?;
    let first_row = spec.max_lag();
    if through >= table.len() || through < first_row {
        return Err(BpsError::Data(format!(
            "agent '{}': cannot filter through row {through} (table has {} rows, first usable row {first_row})",
            spec.name,
            table.len()
        )));
    }
    let mut agent = FittedAgent {
        spec: spec.clone(),
        target: target.to_string(),
        first_row,
        states: vec![spec.prior.clone()],
        columns,
        target_column,
    };
    for row in first_row..=through {
        let f = agent.regressors(row, row - 1, &[])?;
        let y = agent.target_column[row];
        if y.is_nan() {
            return Err(BpsError::MissingData {
                series: target.to_string(),
                row,
            });
        }
        let prev = agent.states.last().expect("prior present");
        let (post, _) = filter_update(prev, &f, y, spec.discounts)
            .map_err(|e| e.with_context(format!("agent '{}' row {row}", spec.name)))?;
        agent.states.push(post);
    }
    Ok(agent)
}

impl FittedAgent {
    /// Earliest row a forecast can be issued from (the prior).
    pub fn first_issue_row(&self) -> usize {
        self.first_row - 1
    }

    /// Last row filtered.
    pub fn last_row(&self) -> usize {
        self.first_row + self.states.len() - 2
    }

    /// Posterior after observing `row`.
    pub fn posterior_at(&self, row: usize) -> Option<&DlmPosterior> {
        row.checked_sub(self.first_row - 1)
            .and_then(|i| self.states.get(i))
    }

    /// Regressor vector for target `row` given information through `issue_row`.
    /// Target values past `issue_row` come from `simulated` (the path so far);
    /// other series are held at their `issue_row` value.
    fn regressors(&self, row: usize, issue_row: usize, simulated: &[f64]) -> Result<DVector<f64>> {
        let mut f = Vec::with_capacity(self.spec.dim());
        if self.spec.intercept {
            f.push(1.0);
        }
        for (p, col) in self.spec.predictors.iter().zip(&self.columns) {
            let src = row.checked_sub(p.lag).ok_or_else(|| {
                BpsError::Data(format!("agent '{}': lag {} before start of data", self.spec.name, p.lag))
            })?;
            let v = if src <= issue_row {
                col[src]
            } else if p.series == self.target {
                simulated[src - issue_row - 1]
            } else {
                col[issue_row]
            };
            if v.is_nan() {
                return Err(BpsError::MissingData {
                    series: p.series.clone(),
                    row: src.min(issue_row),
                });
            }
            f.push(v);
        }
        Ok(DVector::from_vec(f))
    }

    /// k-step forecast density for row `issue_row + k`, issued at `issue_row`.
    pub fn forecast<R: Rng + ?Sized>(
        &self,
        issue_row: usize,
        k: usize,
        options: &ForecastOptions,
        rng: &mut R,
    ) -> Result<ForecastDensity> {
        if k == 0 {
            return Err(BpsError::InvalidParameter("forecast horizon must be >= 1".into()));
        }
        let post = self.posterior_at(issue_row).ok_or_else(|| {
            BpsError::Data(format!(
                "agent '{}' has no posterior at row {issue_row} (available {}..={})",
                self.spec.name,
                self.first_issue_row(),
                self.last_row()
            ))
        })?;
        let d = self.spec.discounts;
        if k == 1 {
            let f = self.regressors(issue_row + 1, issue_row, &[])?;
            return one_step_predict(&evolve_prior(post, d), &f)?.density();
        }
        if options.paths < 2 {
            return Err(BpsError::InvalidParameter("k-step forecasts need at least 2 paths".into()));
        }
        let chol = psd_cholesky(&post.c)?;
        let mut path = Vec::with_capacity(k);
        let mut finals = Vec::with_capacity(options.paths);
        for _ in 0..options.paths {
            path.clear();
            let mut v = 1.0 / gamma_rate(post.n / 2.0, post.n * post.s / 2.0, rng);
            let mut theta = sample_mvn(&post.m, &chol, (v / post.s).sqrt(), rng);
            let mut n = post.n;
            // evolution variance W_i = C / state^(i-1) * (1/state - 1), in units of v / s
            let mut w_scale = 1.0 / d.state - 1.0;
            for step in 1..=k {
                let g = beta(d.vol * n / 2.0, (1.0 - d.vol) * n / 2.0, rng);
                v *= d.vol / g;
                n *= d.vol;
                if w_scale > 0.0 {
                    let innov = sample_mvn(&DVector::zeros(theta.len()), &chol, (w_scale * v / post.s).sqrt(), rng);
                    theta += innov;
                }
                w_scale /= d.state;
                let f = self.regressors(issue_row + step, issue_row, &path)?;
                let y = f.dot(&theta) + v.sqrt() * rng.sample::<f64, _>(StandardNormal);
                path.push(y);
            }
            finals.push(path[k - 1]);
        }
        let dof = d.vol.powi(k as i32) * post.n;
        fit_student_t(&finals, dof)
    }
}

/// Student-T with given dof matched to a sample: variance when dof > 2,
/// interquartile range otherwise.
pub fn fit_student_t(draws: &[f64], dof: f64) -> Result<ForecastDensity> {
    let loc = draws.iter().sum::<f64>() / draws.len() as f64;
    let scale = if dof > 2.0 {
        sample_variance(draws) * (dof - 2.0) / dof
    } else {
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        let t = StudentsT::new(0.0, 1.0, dof)
            .map_err(|e| BpsError::Numerical(format!("student-t quantile: {e}")))?;
        let q = t.inverse_cdf(0.75);
        (iqr / (2.0 * q)).powi(2)
    };
    ForecastDensity::student_t(loc, scale, dof)
}

/// Agent forecast densities indexed by `(agent, issue row, horizon)`.
#[derive(Debug, Clone)]
pub struct ForecastBook {
    names: Vec<String>,
    target: Vec<f64>,
    dates: Vec<String>,
    cells: Vec<BTreeMap<(usize, usize), ForecastDensity>>,
}

impl ForecastBook {
    /// Computes every agent's densities for issue rows `issue_rows` and each
    /// horizon, one worker per agent. k-step simulations use the substream
    /// `(seed, agent, issue row, k)`, so the book does not depend on worker
    /// scheduling.
    pub fn build(
        agents: &[FittedAgent],
        table: &SeriesTable,
        issue_rows: std::ops::RangeInclusive<usize>,
        horizons: &[usize],
        options: &ForecastOptions,
        seed: u64,
    ) -> Result<Self> {
        let target = agents
            .first()
            .ok_or_else(|| BpsError::Config("at least one agent is required".into()))?
            .target
            .clone();
        let cells = agents
            .par_iter()
            .enumerate()
            .map(|(j, agent)| {
                let mut map = BTreeMap::new();
                for row in issue_rows.clone() {
                    for &k in horizons {
                        let mut rng = substream(seed, &[j as u64, row as u64, k as u64]);
                        let d = agent.forecast(row, k, options, &mut rng).map_err(|e| {
                            e.with_context(format!("agent '{}' issue row {row} horizon {k}", agent.spec.name))
                        })?;
                        map.insert((row, k), d);
                    }
                }
                Ok(map)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ForecastBook {
            names: agents.iter().map(|a| a.spec.name.clone()).collect(),
            target: table
                .column(&target)
                .ok_or_else(|| BpsError::Data(format!("unknown target series '{target}'")))?
                .to_vec(),
            dates: table.dates().to_vec(),
            cells,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, agent: usize, issue_row: usize, k: usize) -> Option<&ForecastDensity> {
        self.cells.get(agent)?.get(&(issue_row, k))
    }

    /// The J densities issued at `issue_row` for horizon `k`.
    pub fn issued(&self, issue_row: usize, k: usize) -> Result<Vec<ForecastDensity>> {
        (0..self.names.len())
            .map(|j| {
                self.get(j, issue_row, k).cloned().ok_or_else(|| {
                    BpsError::Data(format!(
                        "no {k}-step density from agent '{}' issued at row {issue_row}",
                        self.names[j]
                    ))
                })
            })
            .collect()
    }

    /// Panel of target rows `first..=last` at horizon `k`: row `t` holds the
    /// densities issued at `t - k`.
    pub fn panel(&self, first: usize, last: usize, k: usize) -> Result<AgentPanel> {
        if first < k {
            return Err(BpsError::Data(format!(
                "panel starting at row {first} cannot use {k}-step forecasts"
            )));
        }
        let mut densities = Vec::with_capacity(last + 1 - first);
        let mut outcomes = Vec::with_capacity(last + 1 - first);
        for t in first..=last {
            densities.push(self.issued(t - k, k)?);
            let y = self.target[t];
            if y.is_nan() {
                return Err(BpsError::MissingData {
                    series: "target".into(),
                    row: t,
                });
            }
            outcomes.push(y);
        }
        Ok(AgentPanel {
            horizon: k,
            names: self.names.clone(),
            rows: (first..=last).collect(),
            dates: self.dates[first..=last].to_vec(),
            densities,
            outcomes,
        })
    }
}

/// `T x J` grid of agent densities aligned with outcomes at horizon `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPanel {
    pub horizon: usize,
    pub names: Vec<String>,
    /// Table row of each target.
    pub rows: Vec<usize>,
    pub dates: Vec<String>,
    pub densities: Vec<Vec<ForecastDensity>>,
    pub outcomes: Vec<f64>,
}

impl AgentPanel {
    /// Panel from explicit densities, mainly for synthetic studies.
    pub fn from_parts(horizon: usize, densities: Vec<Vec<ForecastDensity>>, outcomes: Vec<f64>) -> Result<Self> {
        if horizon == 0 {
            return Err(BpsError::InvalidParameter("panel horizon must be >= 1".into()));
        }
        if densities.len() != outcomes.len() || densities.is_empty() {
            return Err(BpsError::DimensionMismatch {
                expected: outcomes.len(),
                got: densities.len(),
            });
        }
        let j = densities[0].len();
        if j == 0 || densities.iter().any(|r| r.len() != j) {
            return Err(BpsError::Data("panel rows must be non-empty and rectangular".into()));
        }
        Ok(AgentPanel {
            horizon,
            names: (1..=j).map(|i| format!("A{i}")).collect(),
            rows: (0..outcomes.len()).collect(),
            dates: (0..outcomes.len()).map(|i| i.to_string()).collect(),
            densities,
            outcomes,
        })
    }

    pub fn t_len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn j_len(&self) -> usize {
        self.names.len()
    }

    /// Reorders agents; used for equivariance checks.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut p = self.clone();
        p.names = order.iter().map(|&j| self.names[j].clone()).collect();
        p.densities = self
            .densities
            .iter()
            .map(|row| order.iter().map(|&j| row[j].clone()).collect())
            .collect();
        p
    }
}

/// Fits agents through `through` and assembles the horizon-`k` panel for
/// target rows `first..=last`.
pub fn assemble_panel(
    agents: &[FittedAgent],
    table: &SeriesTable,
    first: usize,
    last: usize,
    k: usize,
    options: &ForecastOptions,
    seed: u64,
) -> Result<AgentPanel> {
    if k == 0 || last < first {
        return Err(BpsError::InvalidParameter(format!("invalid panel window {first}..={last} at horizon {k}")));
    }
    let earliest = agents.iter().map(FittedAgent::first_issue_row).max().unwrap_or(0);
    if first < k || first - k < earliest {
        return Err(BpsError::Data(format!(
            "panel starting at row {first} would need forecasts issued at row {} before agents start at {earliest}",
            first as i64 - k as i64
        )));
    }
    let book = ForecastBook::build(agents, table, (first - k)..=(last - k), &[k], options, seed)?;
    book.panel(first, last, k)
}

/// Identity coefficient matrix helper for building priors.
pub fn identity_prior(dim: usize, c_scale: f64, n: f64, s: f64) -> Result<DlmPosterior> {
    DlmPosterior::new(DVector::zeros(dim), DMatrix::from_diagonal_element(dim, dim, c_scale), n, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::quarterly_labels;

    fn table(p: Vec<f64>) -> SeriesTable {
        let n = p.len();
        let r: Vec<f64> = (0..n).map(|i| 3.0 + (i as f64 * 0.7).sin()).collect();
        let u: Vec<f64> = (0..n).map(|i| 6.0 + (i as f64 * 0.3).cos()).collect();
        SeriesTable::new(quarterly_labels(1961, 1, n), vec!["p".into(), "r".into(), "u".into()], vec![p, r, u]).unwrap()
    }

    #[test]
    fn standard_agent_dimensions() {
        let specs = standard_agents("p", "r", "u").unwrap();
        let dims: Vec<usize> = specs.iter().map(AgentSpec::dim).collect();
        assert_eq!(dims, vec![2, 10, 4, 4]);
        assert!(specs.iter().all(|s| s.discounts == Discounts { state: 0.99, vol: 0.95 }));
        assert!(specs.iter().all(|s| s.prior.n == 2.0 && s.prior.s == 0.01));
    }

    #[test]
    fn constant_series_fixed_point() {
        let t = table(vec![2.5; 120]);
        let spec = &standard_agents("p", "r", "u").unwrap()[0];
        let a = build_agent(spec, &t, "p", 118).unwrap();
        let d = a.forecast(118, 1, &ForecastOptions::default(), &mut substream(0, &[])).unwrap();
        assert!((d.location() - 2.5).abs() < 1e-3, "{}", d.location());
    }

    #[test]
    fn missing_lag_is_an_error() {
        let mut p: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        p[10] = f64::NAN;
        let t = table(p);
        let spec = &standard_agents("p", "r", "u").unwrap()[0];
        assert!(matches!(build_agent(spec, &t, "p", 29), Err(BpsError::MissingData { .. })));
        assert!(build_agent(spec, &t, "p", 9).is_ok());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(AgentSpec::new("none", false, vec![]).is_err());
        assert!(AgentSpec::new("lag0", true, vec![Predictor::new("p", 0)]).is_err());
    }

    #[test]
    fn panel_shape_and_alignment() {
        let p: Vec<f64> = (0..60).map(|i| 2.0 + (i as f64 * 0.4).sin()).collect();
        let t = table(p);
        let agents: Vec<FittedAgent> = standard_agents("p", "r", "u")
            .unwrap()
            .iter()
            .map(|s| build_agent(s, &t, "p", 59).unwrap())
            .collect();
        let opts = ForecastOptions { paths: 200 };
        let panel = assemble_panel(&agents, &t, 30, 39, 1, &opts, 1).unwrap();
        assert_eq!((panel.t_len(), panel.j_len()), (10, 4));
        let again = agents[2].forecast(34, 1, &opts, &mut substream(9, &[])).unwrap();
        assert_eq!(panel.densities[5][2], again);
        let p4 = assemble_panel(&agents, &t, 30, 39, 4, &opts, 1).unwrap();
        let direct = agents[1].forecast(26, 4, &opts, &mut substream(1, &[1, 26, 4])).unwrap();
        assert_eq!(p4.densities[0][1], direct);
        assert!(assemble_panel(&agents, &t, 3, 10, 1, &opts, 1).is_ok());
        assert!(assemble_panel(&agents, &t, 2, 10, 1, &opts, 1).is_err());
    }
}
