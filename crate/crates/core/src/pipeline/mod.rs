//! Rolling three-period evaluation.
//!
//! Rows up to `train_end` only train the agents. From `train_end + 1` the
//! synthesis models and baseline combinations start learning. Every target
//! in `calibrate_end + 1 ..= test_end` is forecast at each horizon `k` from
//! information through `target - k`, with BPS re-fitted on the expanding
//! window at each issue time.

mod config;
mod output;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::agents::{build_agent, FittedAgent, ForecastBook};
use crate::bps::{forecast_k_direct, gibbs, gibbs_from, init_latents, BpsConfig, LatentStates, PosteriorDraws};
use crate::data::{ingest, SeriesTable};
use crate::density::{quantile_sorted, ForecastDensity};
use crate::error::{BpsError, Result};
use crate::eval::{density_value, mc_empirical_r2, sample_density_value, DependenceSeries, EvalSeries};
use crate::pools::{linear_pool, log_pool, BmaState};
use crate::rng::substream;

pub use config::{
    parse_horizons, parse_methods, AgentEntry, BpsSection, DataSection, Method, Overrides, PeriodRows, Periods,
    PipelineConfig, PriorSection, StandardAgents, SynthesisSection,
};
pub use output::{write_outputs, Summary, SummaryHorizon, SummaryRow};

/// One forecast of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub method: String,
    pub horizon: usize,
    pub issue_row: usize,
    pub target_row: usize,
    pub issue_date: String,
    pub target_date: String,
    pub mean: f64,
    pub sd: f64,
    pub density_at_outcome: f64,
    pub outcome: f64,
    /// Last table row whose values entered the forecast.
    pub info_through: usize,
}

/// Posterior summaries of a BPS fit over the whole evaluation span.
#[derive(Debug, Clone)]
pub struct Retrospective {
    pub dates: Vec<String>,
    pub agent_names: Vec<String>,
    pub draws: PosteriorDraws,
    pub dependence: DependenceSeries,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub periods: PeriodRows,
    pub horizons: Vec<usize>,
    /// Method names in output order.
    pub methods: Vec<String>,
    pub forecasts: Vec<ForecastRecord>,
    pub series: Vec<EvalSeries>,
    pub summary: Summary,
    pub retrospective: Option<Retrospective>,
}

impl PipelineResult {
    pub fn records(&self, method: &str, horizon: usize) -> impl Iterator<Item = &ForecastRecord> {
        let method = method.to_string();
        self.forecasts
            .iter()
            .filter(move |r| r.method == method && r.horizon == horizon)
    }

    pub fn series(&self, method: &str, horizon: usize) -> Option<&EvalSeries> {
        self.series.iter().find(|s| s.method == method && s.horizon == horizon)
    }
}

/// A forecast that used data past its issue time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookAheadViolation {
    pub method: String,
    pub horizon: usize,
    pub target_row: usize,
    pub reason: String,
}

/// Re-derives each forecast's issue time from its target and horizon and
/// flags any record that claims a different issue time or used later data.
pub fn audit_look_ahead(result: &PipelineResult, table: &SeriesTable) -> Vec<LookAheadViolation> {
    let mut out = Vec::new();
    for r in &result.forecasts {
        let mut flag = |reason: String| {
            out.push(LookAheadViolation {
                method: r.method.clone(),
                horizon: r.horizon,
                target_row: r.target_row,
                reason,
            })
        };
        let Some(issue) = r.target_row.checked_sub(r.horizon) else {
            flag("target precedes its horizon".into());
            continue;
        };
        if r.issue_row != issue {
            flag(format!("issue row {} but target - horizon is {issue}", r.issue_row));
        }
        if r.info_through > issue {
            flag(format!("uses data through row {} after issue row {issue}", r.info_through));
        }
        if table.date(issue) != r.issue_date || table.date(r.target_row) != r.target_date {
            flag("dates do not match the table".into());
        }
    }
    out
}

/// Loads the configured data file and runs the pipeline.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineResult> {
    let path = cfg
        .data
        .path
        .as_ref()
        .ok_or_else(|| BpsError::Config("no data path given".into()))?;
    let table = ingest(path, &cfg.data.mapping())?;
    run_on_table(cfg, &table)
}

/// Runs the pipeline and writes its outputs to `cfg.output`.
pub fn run_and_write(cfg: &PipelineConfig) -> Result<PipelineResult> {
    let out = cfg
        .output
        .clone()
        .ok_or_else(|| BpsError::Config("no output directory given".into()))?;
    let result = run_pipeline(cfg)?;
    write_outputs(&result, &out)?;
    Ok(result)
}

const TAG_BPS1: u64 = 1;
const TAG_BPSK: u64 = 2;
const TAG_RETRO: u64 = 3;
const TAG_AGENTS: u64 = 4;

fn sample_summary(draws: &[f64]) -> (f64, f64) {
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = if draws.len() > 1 {
        draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

struct Context<'a> {
    cfg: &'a PipelineConfig,
    table: &'a SeriesTable,
    book: ForecastBook,
    outcomes: &'a [f64],
    rows: PeriodRows,
    j_len: usize,
}

impl Context<'_> {
    fn record(&self, method: &str, k: usize, target: usize, mean: f64, sd: f64, dens: f64) -> ForecastRecord {
        ForecastRecord {
            method: method.to_string(),
            horizon: k,
            issue_row: target - k,
            target_row: target,
            issue_date: self.table.date(target - k).to_string(),
            target_date: self.table.date(target).to_string(),
            mean,
            sd,
            density_at_outcome: dens,
            outcome: self.outcomes[target],
            info_through: target - k,
        }
    }

    fn sample_record(&self, method: &str, k: usize, target: usize, draws: &[f64]) -> Result<ForecastRecord> {
        let (mean, sd) = sample_summary(draws);
        let dens = sample_density_value(draws, self.outcomes[target], self.cfg.bandwidth)?;
        Ok(self.record(method, k, target, mean, sd, dens))
    }

    fn targets(&self) -> std::ops::RangeInclusive<usize> {
        (self.rows.calibrate_end + 1)..=self.rows.test_end
    }

    /// Synthesis fit on targets `train_end + 1 ..= issue` at horizon `k`.
    fn fit(
        &self,
        k: usize,
        issue: usize,
        bcfg: &BpsConfig,
        warm: Option<&LatentStates>,
        tag: u64,
    ) -> Result<PosteriorDraws> {
        let panel = self.book.panel(self.rows.train_end + 1, issue, k)?;
        let mut rng = substream(self.cfg.seed, &[tag, k as u64, issue as u64]);
        match warm {
            None => gibbs(&panel, bcfg, &mut rng),
            Some(prev) => {
                let mut init = init_latents(&panel, bcfg.init, &mut rng)?;
                let keep = prev.x.nrows().min(init.x.nrows());
                for t in 0..keep {
                    for j in 0..init.x.ncols() {
                        init.x[(t, j)] = prev.x[(t, j)];
                        init.phi[(t, j)] = prev.phi[(t, j)];
                    }
                }
                gibbs_from(&panel, bcfg, init, &mut rng)
            }
        }
    }

    /// Runs a chain of fits over `issues` (ascending), in parallel unless
    /// warm-starting, then maps each fit to forecast records.
    fn chain<F>(&self, k: usize, issues: &[usize], bcfg: &BpsConfig, tag: u64, emit: F) -> Result<Vec<ForecastRecord>>
    where
        F: Fn(usize, &PosteriorDraws) -> Result<Vec<ForecastRecord>> + Sync,
    {
        let run = |issue: usize, warm: Option<&LatentStates>| -> Result<(Vec<ForecastRecord>, LatentStates)> {
            let draws = self
                .fit(k, issue, bcfg, warm, tag)
                .map_err(|e| e.with_context(format!("fitting synthesis at issue row {issue}, horizon {k}")))?;
            let recs = emit(issue, &draws)?;
            let last = draws.latents.last().cloned().expect("at least one draw");
            Ok((recs, last))
        };
        if self.cfg.warm_start {
            let mut warm: Option<LatentStates> = None;
            let mut out = Vec::new();
            for &issue in issues {
                let (recs, last) = run(issue, warm.as_ref())?;
                warm = Some(last);
                out.extend(recs);
            }
            Ok(out)
        } else {
            let parts = issues
                .par_iter()
                .map(|&issue| run(issue, None).map(|(r, _)| r))
                .collect::<Result<Vec<_>>>()?;
            Ok(parts.into_iter().flatten().collect())
        }
    }

    fn bps_records(&self) -> Result<Vec<ForecastRecord>> {
        let horizons = &self.cfg.horizons;
        let cfg1 = self.cfg.bps.config(self.j_len, 1)?;
        // issue rows for the 1-step synthesis: every target - k
        let mut issues1: Vec<usize> = horizons
            .iter()
            .flat_map(|&k| self.targets().map(move |t| t - k))
            .collect();
        issues1.sort_unstable();
        issues1.dedup();

        let direct = |issue: usize, draws: &PosteriorDraws| -> Result<Vec<ForecastRecord>> {
            let mut recs = Vec::new();
            for &k in horizons {
                let target = issue + k;
                if !self.targets().any(|t| t == target) {
                    continue;
                }
                let next = self.book.issued(issue, k)?;
                let mut rng = substream(self.cfg.seed, &[TAG_BPS1, 1000 + k as u64, issue as u64]);
                let sample = forecast_k_direct(draws, &next, k, &cfg1, &mut rng)
                    .map_err(|e| e.with_context(format!("method BPS, target row {target}, horizon {k}")))?;
                recs.push(self.sample_record("BPS", k, target, &sample)?);
            }
            Ok(recs)
        };

        let mut jobs: Vec<(usize, Vec<usize>)> = vec![(1, issues1)];
        for &k in horizons.iter().filter(|&&k| k > 1) {
            jobs.push((k, self.targets().map(|t| t - k).collect()));
        }
        let parts = jobs
            .par_iter()
            .map(|(k, issues)| {
                let k = *k;
                if k == 1 {
                    return self.chain(1, issues, &cfg1, TAG_BPS1, direct);
                }
                let cfgk = self.cfg.bps.config(self.j_len, k)?;
                let name = format!("BPS({k})");
                self.chain(k, issues, &cfgk, TAG_BPSK, |issue, draws| {
                    let target = issue + k;
                    let next = self.book.issued(issue, k)?;
                    let mut rng = substream(self.cfg.seed, &[TAG_BPSK, 1000 + k as u64, issue as u64]);
                    let sample = forecast_k_direct(draws, &next, k, &cfgk, &mut rng)
                        .map_err(|e| e.with_context(format!("method {name}, target row {target}, horizon {k}")))?;
                    Ok(vec![self.sample_record(&name, k, target, &sample)?])
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(parts.into_iter().flatten().collect())
    }

    fn baseline_records(&self) -> Result<Vec<ForecastRecord>> {
        let methods = &self.cfg.methods;
        let names = self.book.names().to_vec();
        let mut out = Vec::new();
        for &k in &self.cfg.horizons {
            let mut bma = BmaState::uniform(self.j_len);
            let mut bma_through = self.rows.train_end;
            for target in self.targets() {
                let issue = target - k;
                let ctx = |m: &str| format!("method {m}, target row {target}, horizon {k}");
                let dens = self.book.issued(issue, k)?;
                let y = self.outcomes[target];
                if methods.contains(&Method::Agents) {
                    for (name, d) in names.iter().zip(&dens) {
                        out.push(self.density_record(name, k, target, d, y).map_err(|e| e.with_context(ctx(name)))?);
                    }
                }
                if methods.contains(&Method::Bma) {
                    // accumulate evidence from calibration start through the issue row
                    while bma_through < issue {
                        bma_through += 1;
                        let past = self.book.issued(bma_through - k, k)?;
                        let lik: Vec<f64> = past.iter().map(|d| d.pdf(self.outcomes[bma_through])).collect();
                        bma = bma.update(&lik).map_err(|e| e.with_context(ctx("BMA")))?;
                    }
                    let mix = bma.mixture(&dens)?;
                    let sd = mix.variance().map_or(f64::NAN, f64::sqrt);
                    out.push(self.record("BMA", k, target, mix.mean(), sd, mix.pdf(y).max(f64::MIN_POSITIVE)));
                }
                if methods.contains(&Method::Linp) {
                    let pool = linear_pool(&dens)?;
                    let sd = pool.variance().map_or(f64::NAN, f64::sqrt);
                    out.push(self.record("LinP", k, target, pool.mean(), sd, pool.pdf(y).max(f64::MIN_POSITIVE)));
                }
                if methods.contains(&Method::Logp) {
                    let pool = log_pool(&dens, self.cfg.log_pool).map_err(|e| e.with_context(ctx("LogP")))?;
                    out.push(self.record(
                        "LogP",
                        k,
                        target,
                        pool.mean(),
                        pool.variance().sqrt(),
                        pool.pdf(y).max(f64::MIN_POSITIVE),
                    ));
                }
            }
        }
        Ok(out)
    }

    fn density_record(&self, name: &str, k: usize, target: usize, d: &ForecastDensity, y: f64) -> Result<ForecastRecord> {
        let sd = d.variance().map_or(f64::NAN, f64::sqrt);
        Ok(self.record(name, k, target, d.mean(), sd, density_value(d, y)?))
    }

    fn retrospective(&self) -> Result<Retrospective> {
        let cfg1 = self.cfg.bps.config(self.j_len, 1)?;
        let draws = self.fit(1, self.rows.test_end, &cfg1, None, TAG_RETRO)?;
        let dependence = mc_empirical_r2(&draws)?;
        Ok(Retrospective {
            dates: self.table.dates()[self.rows.train_end + 1..=self.rows.test_end].to_vec(),
            agent_names: self.book.names().to_vec(),
            draws,
            dependence,
        })
    }
}

/// Runs the full protocol on an in-memory table.
pub fn run_on_table(cfg: &PipelineConfig, table: &SeriesTable) -> Result<PipelineResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| BpsError::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_inner(cfg, table))
}

fn run_inner(cfg: &PipelineConfig, table: &SeriesTable) -> Result<PipelineResult> {
    let rows = cfg.periods.resolve(table)?;
    let outcomes = table
        .column(&cfg.target)
        .ok_or_else(|| BpsError::Data(format!("target series '{}' not in data", cfg.target)))?;
    let specs = cfg.agent_specs()?;
    let kmax = cfg.max_horizon();
    if rows.calibrate_end - rows.train_end < kmax {
        return Err(BpsError::Config(format!(
            "calibration period ({} rows) is shorter than the longest horizon {kmax}",
            rows.calibrate_end - rows.train_end
        )));
    }
    let agents: Vec<FittedAgent> = specs
        .par_iter()
        .map(|s| build_agent(s, table, &cfg.target, rows.test_end))
        .collect::<Result<_>>()?;
    let earliest = agents.iter().map(FittedAgent::first_issue_row).max().unwrap_or(0);
    let first_issue = (rows.train_end + 1)
        .checked_sub(kmax)
        .filter(|r| *r >= earliest)
        .ok_or_else(|| {
            BpsError::Config(format!(
                "training period too short: agents need {earliest} rows of lags before the first {kmax}-step forecast"
            ))
        })?;
    let book = ForecastBook::build(
        &agents,
        table,
        first_issue..=rows.test_end - 1,
        &cfg.horizons,
        &cfg.agent_forecasts,
        crate::rng::derive_seed(cfg.seed, &[TAG_AGENTS]),
    )?;
    let ctx = Context {
        cfg,
        table,
        book,
        outcomes,
        rows,
        j_len: agents.len(),
    };

    let (bps, baselines) = rayon::join(|| ctx.bps_records(), || ctx.baseline_records());
    let mut forecasts = bps?;
    forecasts.extend(baselines?);

    let mut methods: Vec<String> = Vec::new();
    if cfg.methods.contains(&Method::Agents) {
        methods.extend(ctx.book.names().iter().cloned());
    }
    for (m, name) in [(Method::Bma, "BMA"), (Method::Linp, "LinP"), (Method::Logp, "LogP")] {
        if cfg.methods.contains(&m) {
            methods.push(name.into());
        }
    }
    methods.push("BPS".into());
    for &k in cfg.horizons.iter().filter(|&&k| k > 1) {
        methods.push(format!("BPS({k})"));
    }
    let order: BTreeMap<&str, usize> = methods.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    forecasts.sort_by_key(|r| (r.horizon, order[r.method.as_str()], r.target_row));

    let mut horizons = cfg.horizons.clone();
    horizons.sort_unstable();
    let series = evaluate(&forecasts, &methods, &horizons)?;
    let summary = Summary::build(&series, &horizons);
    let retrospective = if cfg.retrospective {
        Some(ctx.retrospective().map_err(|e| e.with_context("retrospective fit"))?)
    } else {
        None
    };
    Ok(PipelineResult {
        periods: rows,
        horizons,
        methods,
        forecasts,
        series,
        summary,
        retrospective,
    })
}

/// Baseline of the LPDR column: BPS at horizon 1, BPS(k) beyond.
pub fn lpdr_baseline(k: usize) -> String {
    if k == 1 {
        "BPS".into()
    } else {
        format!("BPS({k})")
    }
}

fn evaluate(forecasts: &[ForecastRecord], methods: &[String], horizons: &[usize]) -> Result<Vec<EvalSeries>> {
    let mut out = Vec::new();
    for &k in horizons {
        let pick = |m: &str| -> Vec<&ForecastRecord> {
            forecasts.iter().filter(|r| r.horizon == k && r.method == m).collect()
        };
        let base = pick(&lpdr_baseline(k));
        let base_d: Vec<f64> = base.iter().map(|r| r.density_at_outcome).collect();
        for m in methods {
            let recs = pick(m);
            if recs.is_empty() {
                continue;
            }
            let points: Vec<f64> = recs.iter().map(|r| r.mean).collect();
            let ys: Vec<f64> = recs.iter().map(|r| r.outcome).collect();
            let dens: Vec<f64> = recs.iter().map(|r| r.density_at_outcome).collect();
            let fsd: Vec<f64> = recs.iter().map(|r| r.sd).collect();
            out.push(
                EvalSeries::new(m.clone(), k, &points, &ys, &dens, &base_d, fsd)
                    .map_err(|e| e.with_context(format!("evaluating {m} at horizon {k}")))?,
            );
        }
    }
    Ok(out)
}

/// Equal-tailed interval of a sample.
pub(crate) fn interval(mut xs: Vec<f64>, level: f64) -> (f64, f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    (mean, quantile_sorted(&xs, a), quantile_sorted(&xs, 1.0 - a))
}
