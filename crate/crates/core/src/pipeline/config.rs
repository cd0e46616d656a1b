//! Pipeline configuration: a TOML document plus command-line overrides.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{standard_agents, AgentSpec, ForecastOptions, Predictor, AGENT_PRIOR_N, AGENT_PRIOR_S};
use crate::bps::{equal_weight_prior, BpsConfig, Initialization, McmcSettings, Resampling, SynthesisMode};
use crate::data::{ColumnMapping, SeriesTable};
use crate::dlm::{Discounts, DlmPosterior};
use crate::error::{BpsError, Result};
use crate::eval::Bandwidth;
use crate::pools::LogPoolQuadrature;

/// Combination methods that can be switched off. BPS always runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Agents,
    Bma,
    Linp,
    Logp,
    Bps,
}

impl std::str::FromStr for Method {
    type Err = BpsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "agents" => Ok(Method::Agents),
            "bma" => Ok(Method::Bma),
            "linp" | "linear_pool" => Ok(Method::Linp),
            "logp" | "log_pool" => Ok(Method::Logp),
            "bps" => Ok(Method::Bps),
            other => Err(BpsError::Config(format!(
                "unknown method '{other}' (expected agents, bma, linp, logp, bps)"
            ))),
        }
    }
}

pub fn parse_methods(list: &str) -> Result<BTreeSet<Method>> {
    let mut set: BTreeSet<Method> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    set.insert(Method::Bps);
    Ok(set)
}

pub fn parse_horizons(list: &str) -> Result<Vec<usize>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| BpsError::Config(format!("invalid horizon '{s}'")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// CSV path; relative paths resolve against the config file's directory.
    pub path: Option<PathBuf>,
    #[serde(default = "default_date")]
    pub date_column: String,
    /// Internal name -> CSV column. Empty reads every column.
    #[serde(default)]
    pub series: std::collections::BTreeMap<String, String>,
}

fn default_date() -> String {
    "date".into()
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            path: None,
            date_column: default_date(),
            series: Default::default(),
        }
    }
}

impl DataSection {
    pub fn mapping(&self) -> ColumnMapping {
        ColumnMapping {
            date: self.date_column.clone(),
            series: self.series.clone(),
        }
    }
}

/// Period boundaries as date labels. Missing values default to the first
/// quarter, first half and last row of the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Periods {
    pub train_end: Option<String>,
    pub calibrate_end: Option<String>,
    pub test_end: Option<String>,
}

/// Period boundaries as table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodRows {
    pub train_end: usize,
    pub calibrate_end: usize,
    pub test_end: usize,
}

impl Periods {
    pub fn resolve(&self, table: &SeriesTable) -> Result<PeriodRows> {
        let n = table.len();
        if n < 4 {
            return Err(BpsError::Data(format!("{n} rows is too short for the three-period protocol")));
        }
        let row = |label: &Option<String>, default: usize, what: &str| -> Result<usize> {
            match label {
                None => Ok(default),
                Some(l) => table
                    .row_of(l)
                    .ok_or_else(|| BpsError::Config(format!("{what} '{l}' is not a date in the data"))),
            }
        };
        let rows = PeriodRows {
            train_end: row(&self.train_end, n / 4 - 1, "train_end")?,
            calibrate_end: row(&self.calibrate_end, n / 2 - 1, "calibrate_end")?,
            test_end: row(&self.test_end, n - 1, "test_end")?,
        };
        if !(rows.train_end < rows.calibrate_end && rows.calibrate_end < rows.test_end) {
            return Err(BpsError::Config(format!(
                "periods must satisfy train_end < calibrate_end < test_end (rows {}, {}, {})",
                rows.train_end, rows.calibrate_end, rows.test_end
            )));
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    /// Prior coefficient mean; zeros when absent.
    #[serde(default)]
    pub m0: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub c0: f64,
    #[serde(default = "agent_n")]
    pub n0: f64,
    #[serde(default = "agent_s")]
    pub s0: f64,
}

fn one() -> f64 {
    1.0
}
fn agent_n() -> f64 {
    AGENT_PRIOR_N
}
fn agent_s() -> f64 {
    AGENT_PRIOR_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentEntry {
    pub name: String,
    #[serde(default = "yes")]
    pub intercept: bool,
    #[serde(default)]
    pub predictors: Vec<Predictor>,
    pub state_discount: Option<f64>,
    pub vol_discount: Option<f64>,
    pub prior: Option<PriorSection>,
}

fn yes() -> bool {
    true
}

impl AgentEntry {
    /// Config entry for a spec whose prior scale matrix is `c0 * I`.
    pub fn from_spec(spec: &AgentSpec) -> Result<Self> {
        let c = &spec.prior.c;
        let c0 = if c.nrows() > 0 { c[(0, 0)] } else { 1.0 };
        let isotropic = (0..c.nrows()).all(|i| (0..c.ncols()).all(|j| c[(i, j)] == if i == j { c0 } else { 0.0 }));
        if !isotropic {
            return Err(BpsError::Config(format!(
                "agent '{}': only priors with C0 = c0 * I can be written to a config",
                spec.name
            )));
        }
        Ok(AgentEntry {
            name: spec.name.clone(),
            intercept: spec.intercept,
            predictors: spec.predictors.clone(),
            state_discount: Some(spec.discounts.state),
            vol_discount: Some(spec.discounts.vol),
            prior: Some(PriorSection {
                m0: Some(spec.prior.m.iter().copied().collect()),
                c0,
                n0: spec.prior.n,
                s0: spec.prior.s,
            }),
        })
    }

    pub fn to_spec(&self) -> Result<AgentSpec> {
        let mut spec = AgentSpec::new(&self.name, self.intercept, self.predictors.clone())?;
        let d = Discounts::new(
            self.state_discount.unwrap_or(spec.discounts.state),
            self.vol_discount.unwrap_or(spec.discounts.vol),
        )?;
        spec = spec.with_discounts(d)?;
        if let Some(p) = &self.prior {
            let dim = spec.dim();
            let m = match &p.m0 {
                Some(m) if m.len() != dim => {
                    return Err(BpsError::Config(format!(
                        "agent '{}': m0 has {} entries for {dim} coefficients",
                        self.name,
                        m.len()
                    )))
                }
                Some(m) => nalgebra::DVector::from_vec(m.clone()),
                None => nalgebra::DVector::zeros(dim),
            };
            spec = spec.with_prior(DlmPosterior::isotropic(m, p.c0, p.n0, p.s0)?)?;
        }
        Ok(spec)
    }
}

/// Names of the inflation, interest and unemployment series for the
/// standard agent set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StandardAgents {
    pub p: String,
    pub r: String,
    pub u: String,
}

impl Default for StandardAgents {
    fn default() -> Self {
        StandardAgents {
            p: "p".into(),
            r: "r".into(),
            u: "u".into(),
        }
    }
}

/// Prior and discounts of one synthesis model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub state_discount: f64,
    pub vol_discount: f64,
    pub c0: f64,
    pub n0: f64,
    pub s0: f64,
}

impl SynthesisSection {
    pub fn one_step() -> Self {
        SynthesisSection {
            state_discount: 0.95,
            vol_discount: 0.99,
            c0: 1.0,
            n0: 10.0,
            s0: 0.002,
        }
    }

    pub fn multi_step() -> Self {
        SynthesisSection {
            state_discount: 0.99,
            vol_discount: 0.99,
            c0: 1e-4,
            ..Self::one_step()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpsSection {
    /// Fitted on 1-step densities; also gives the direct multi-step projection.
    pub one_step: SynthesisSection,
    /// Horizon-customized models for every horizon above 1.
    pub multi_step: SynthesisSection,
    pub mcmc: McmcSettings,
    pub init: Initialization,
    pub resampling: Resampling,
    pub importance_draws: usize,
}

impl Default for BpsSection {
    fn default() -> Self {
        BpsSection {
            one_step: SynthesisSection::one_step(),
            multi_step: SynthesisSection::multi_step(),
            mcmc: McmcSettings::default(),
            init: Initialization::default(),
            resampling: Resampling::default(),
            importance_draws: 1000,
        }
    }
}

impl BpsSection {
    /// Synthesis config for `agents` agents at horizon `k`.
    pub fn config(&self, agents: usize, k: usize) -> Result<BpsConfig> {
        let s = if k == 1 { self.one_step } else { self.multi_step };
        let cfg = BpsConfig {
            discounts: Discounts::new(s.state_discount, s.vol_discount)?,
            prior: equal_weight_prior(agents, s.c0, s.n0, s.s0)?,
            horizon: k,
            mode: if k == 1 {
                SynthesisMode::Direct
            } else {
                SynthesisMode::Customized
            },
            mcmc: self.mcmc,
            init: self.init,
            resampling: self.resampling,
            importance_draws: self.importance_draws,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data: DataSection,
    pub target: String,
    pub periods: Periods,
    pub horizons: Vec<usize>,
    /// Explicit agents; empty uses the standard set.
    pub agents: Vec<AgentEntry>,
    pub standard_agents: StandardAgents,
    pub agent_forecasts: ForecastOptions,
    pub bps: BpsSection,
    pub methods: BTreeSet<Method>,
    pub bandwidth: Bandwidth,
    pub log_pool: LogPoolQuadrature,
    /// Write retrospective posterior summaries from a fit through test end.
    pub retrospective: bool,
    pub seed: u64,
    pub workers: usize,
    pub warm_start: bool,
    pub output: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data: DataSection::default(),
            target: "p".into(),
            periods: Periods::default(),
            horizons: vec![1],
            agents: Vec::new(),
            standard_agents: StandardAgents::default(),
            agent_forecasts: ForecastOptions::default(),
            bps: BpsSection::default(),
            methods: [Method::Agents, Method::Bma, Method::Linp, Method::Logp, Method::Bps]
                .into_iter()
                .collect(),
            bandwidth: Bandwidth::Silverman,
            log_pool: LogPoolQuadrature::default(),
            retrospective: true,
            seed: 0,
            workers: 1,
            warm_start: false,
            output: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| BpsError::Config(format!("invalid config: {e}")))?;
        cfg.methods.insert(Method::Bps);
        Ok(cfg)
    }

    /// Reads a config file; a relative data path is taken relative to it.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BpsError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.data.path {
            if p.is_relative() {
                cfg.data.path = Some(base.join(p));
            }
        }
        if let Some(p) = &cfg.output {
            if p.is_relative() {
                cfg.output = Some(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| BpsError::Config(e.to_string()))
    }

    pub fn agent_specs(&self) -> Result<Vec<AgentSpec>> {
        if self.agents.is_empty() {
            let s = &self.standard_agents;
            standard_agents(&s.p, &s.r, &s.u)
        } else {
            self.agents.iter().map(AgentEntry::to_spec).collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(BpsError::Config("horizons must be a non-empty list of values >= 1".into()));
        }
        let mut seen = self.horizons.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.horizons.len() {
            return Err(BpsError::Config("horizons must be distinct".into()));
        }
        if self.workers == 0 {
            return Err(BpsError::Config("workers must be >= 1".into()));
        }
        if self.agent_forecasts.paths < 2 {
            return Err(BpsError::Config("agent_forecasts.paths must be >= 2".into()));
        }
        let specs = self.agent_specs()?;
        for (i, s) in specs.iter().enumerate() {
            if specs[..i].iter().any(|o| o.name == s.name) {
                return Err(BpsError::Config(format!("duplicate agent name '{}'", s.name)));
            }
        }
        for &k in &self.horizons {
            self.bps.config(specs.len(), k)?;
        }
        Ok(())
    }

    pub fn max_horizon(&self) -> usize {
        self.horizons.iter().copied().max().unwrap_or(1)
    }
}

/// Command-line values that override the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub horizons: Option<Vec<usize>>,
    pub methods: Option<BTreeSet<Method>>,
    pub mcmc_draws: Option<usize>,
    pub workers: Option<usize>,
    pub warm_start: bool,
}

impl PipelineConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.data {
            self.data.path = Some(d.clone());
        }
        if let Some(d) = &o.out {
            self.output = Some(d.clone());
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(h) = &o.horizons {
            self.horizons = h.clone();
        }
        if let Some(m) = &o.methods {
            self.methods = m.clone();
            self.methods.insert(Method::Bps);
        }
        if let Some(d) = o.mcmc_draws {
            self.bps.mcmc.draws = d;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if o.warm_start {
            self.warm_start = true;
        }
    }
}
