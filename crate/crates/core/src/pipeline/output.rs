use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{interval, lpdr_baseline, PipelineResult, Retrospective};
use crate::error::Result;
use crate::eval::EvalSeries;

/// One row of the accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub msfe: f64,
    /// `(msfe_baseline - msfe) / msfe_baseline * 100`; negative is worse.
    pub msfe_pct: f64,
    /// Final LPDR against the horizon's baseline; absent for the baseline.
    pub lpdr: Option<f64>,
    /// Final LPDR against the direct BPS projection (horizons above 1).
    pub lpdr_vs_bps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryHorizon {
    pub horizon: usize,
    pub baseline: String,
    pub rows: Vec<SummaryRow>,
}

/// Accuracy table: one block per horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub horizons: Vec<SummaryHorizon>,
}

impl Summary {
    pub fn build(series: &[EvalSeries], horizons: &[usize]) -> Self {
        let mut out = Vec::new();
        for &k in horizons {
            let at_k: Vec<&EvalSeries> = series.iter().filter(|s| s.horizon == k).collect();
            let baseline = lpdr_baseline(k);
            let Some(base) = at_k.iter().find(|s| s.method == baseline) else {
                continue;
            };
            let base_msfe = base.final_msfe();
            // LPDR of direct BPS against the baseline, to re-reference rows
            let bps_vs_base = at_k.iter().find(|s| s.method == "BPS").map(|s| s.final_lpdr());
            let rows = at_k
                .iter()
                .map(|s| SummaryRow {
                    method: s.method.clone(),
                    msfe: s.final_msfe(),
                    msfe_pct: (base_msfe - s.final_msfe()) / base_msfe * 100.0,
                    lpdr: (s.method != baseline).then(|| s.final_lpdr()),
                    lpdr_vs_bps: match bps_vs_base {
                        Some(b) if k > 1 && s.method != "BPS" => Some(s.final_lpdr() - b),
                        _ => None,
                    },
                })
                .collect();
            out.push(SummaryHorizon {
                horizon: k,
                baseline,
                rows,
            });
        }
        Summary { horizons: out }
    }

    pub fn row(&self, horizon: usize, method: &str) -> Option<&SummaryRow> {
        self.horizons
            .iter()
            .find(|h| h.horizon == horizon)?
            .rows
            .iter()
            .find(|r| r.method == method)
    }
}

/// Writes `forecasts.csv`, `metrics.csv`, `summary.json` and, when a
/// retrospective fit was made, `posterior_coefficients.csv`,
/// `posterior_latents.csv` and `posterior_r2.csv`.
pub fn write_outputs(result: &PipelineResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut w = csv::Writer::from_path(dir.join("forecasts.csv"))?;
    w.write_record(["method", "horizon", "issue_date", "target_date", "mean", "sd", "density_at_outcome"])?;
    for r in &result.forecasts {
        w.write_record([
            r.method.clone(),
            r.horizon.to_string(),
            r.issue_date.clone(),
            r.target_date.clone(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.density_at_outcome.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("metrics.csv"))?;
    w.write_record(["method", "horizon", "t", "msfe", "lpdr", "fsd"])?;
    for s in &result.series {
        let dates = result.records(&s.method, s.horizon).map(|r| r.target_date.as_str());
        for (i, date) in dates.enumerate() {
            w.write_record([
                s.method.clone(),
                s.horizon.to_string(),
                date.to_string(),
                s.msfe[i].to_string(),
                s.lpdr[i].to_string(),
                s.fsd[i].to_string(),
            ])?;
        }
    }
    w.flush()?;

    serde_json::to_writer_pretty(File::create(dir.join("summary.json"))?, &result.summary)?;

    if let Some(retro) = &result.retrospective {
        write_retrospective(retro, dir)?;
    }
    Ok(())
}

fn write_retrospective(retro: &Retrospective, dir: &Path) -> Result<()> {
    let draws = &retro.draws;
    let mut w = csv::Writer::from_path(dir.join("posterior_coefficients.csv"))?;
    w.write_record(["date", "coefficient", "mean", "lower95", "upper95"])?;
    let mut names = vec!["intercept".to_string()];
    names.extend(retro.agent_names.iter().cloned());
    for (t, date) in retro.dates.iter().enumerate() {
        for (i, name) in names.iter().enumerate() {
            let (m, lo, hi) = interval(draws.coefficient(t, i), 0.95);
            w.write_record([date.clone(), name.clone(), m.to_string(), lo.to_string(), hi.to_string()])?;
        }
        let vols: Vec<f64> = draws.trajectories.iter().map(|tr| tr.vols[t]).collect();
        let (m, lo, hi) = interval(vols, 0.95);
        w.write_record([date.clone(), "volatility".into(), m.to_string(), lo.to_string(), hi.to_string()])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("posterior_latents.csv"))?;
    w.write_record(["date", "agent", "mean", "lower95", "upper95"])?;
    for (t, date) in retro.dates.iter().enumerate() {
        for (j, name) in retro.agent_names.iter().enumerate() {
            let xs = draws.latents.iter().map(|l| l.x[(t, j)]).collect();
            let (m, lo, hi) = interval(xs, 0.95);
            w.write_record([date.clone(), name.clone(), m.to_string(), lo.to_string(), hi.to_string()])?;
        }
    }
    w.flush()?;

    let dep = &retro.dependence;
    let mut w = csv::Writer::from_path(dir.join("posterior_r2.csv"))?;
    w.write_record(["date", "kind", "agents", "r2", "singular"])?;
    for (t, date) in retro.dates.iter().enumerate() {
        for (j, name) in retro.agent_names.iter().enumerate() {
            w.write_record([
                date.clone(),
                "complete".into(),
                name.clone(),
                dep.complete[t][j].to_string(),
                dep.singular[t][j].to_string(),
            ])?;
        }
        for (p, &(a, b)) in dep.pairs.iter().enumerate() {
            w.write_record([
                date.clone(),
                "paired".into(),
                format!("{}-{}", retro.agent_names[a], retro.agent_names[b]),
                dep.paired[t][p].to_string(),
                "false".into(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
