use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dynbps::pipeline::{parse_horizons, parse_methods, run_and_write, Overrides, PipelineConfig};
use dynbps::Result;

/// Rolling forecast evaluation of agent densities and their synthesis.
#[derive(Debug, Parser)]
#[command(name = "bps", version)]
struct Args {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV (overrides the config).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated horizons, e.g. `1,4`.
    #[arg(long)]
    horizons: Option<String>,
    /// Comma-separated subset of agents,bma,linp,logp,bps.
    #[arg(long)]
    methods: Option<String>,
    /// Retained MCMC draws per synthesis fit.
    #[arg(long)]
    mcmc_draws: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Start each re-fit from the previous window's latent states.
    #[arg(long)]
    warm_start: bool,
}

fn run(args: Args) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::from_file(p)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&Overrides {
        data: args.data,
        out: args.out,
        seed: args.seed,
        horizons: args.horizons.as_deref().map(parse_horizons).transpose()?,
        methods: args.methods.as_deref().map(parse_methods).transpose()?,
        mcmc_draws: args.mcmc_draws,
        workers: args.workers,
        warm_start: args.warm_start,
    });
    if cfg.output.is_none() {
        cfg.output = Some(PathBuf::from("bps_out"));
    }
    let result = run_and_write(&cfg)?;
    for h in &result.summary.horizons {
        println!("horizon {} (baseline {})", h.horizon, h.baseline);
        for r in &h.rows {
            let lpdr = r.lpdr.map_or("-".to_string(), |v| format!("{v:.2}"));
            println!("  {:<8} msfe {:.4} ({:+.2}%)  lpdr {lpdr}", r.method, r.msfe, r.msfe_pct);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
