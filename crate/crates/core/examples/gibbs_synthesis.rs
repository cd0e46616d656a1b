//! Fits the synthesis model to standard-agent forecasts on simulated data
//! and prints posterior agent weights and a 1-step forecast.

use dynbps::agents::{assemble_panel, build_agent, standard_agents, ForecastBook, ForecastOptions};
use dynbps::bps::{forecast_one_step, gibbs, BpsConfig, McmcSettings};
use dynbps::rng::substream;
use dynbps::simgen::{generate, SimConfig};

fn main() -> dynbps::Result<()> {
    let sim = generate(&SimConfig { length: 100, seed: 5, ..SimConfig::default() })?;
    let table = &sim.table;
    let last = table.len() - 2;
    let agents = standard_agents("p", "r", "u")?
        .iter()
        .map(|s| build_agent(s, table, "p", last))
        .collect::<dynbps::Result<Vec<_>>>()?;
    let opts = ForecastOptions::default();
    let panel = assemble_panel(&agents, table, 30, last, 1, &opts, 1)?;

    let cfg = BpsConfig::one_step(agents.len())?.with_mcmc(McmcSettings::new(500, 1000, 1)?);
    let mut rng = substream(2, &[]);
    let draws = gibbs(&panel, &cfg, &mut rng)?;
    let theta = draws.theta_mean(panel.t_len() - 1);
    println!("posterior mean at {}:", panel.dates.last().expect("non-empty"));
    println!("  intercept {:.3}", theta[0]);
    for (name, w) in panel.names.iter().zip(theta.iter().skip(1)) {
        println!("  {name:<3} weight {w:.3}");
    }

    let book = ForecastBook::build(&agents, table, last..=last, &[1], &opts, 1)?;
    let sample = forecast_one_step(&draws, &book.issued(last, 1)?, &cfg, &mut rng)?;
    let mean = sample.iter().sum::<f64>() / sample.len() as f64;
    println!(
        "1-step forecast for {}: {:.3} (realized {:.3})",
        table.date(last + 1),
        mean,
        table.column("p").expect("target")[last + 1]
    );
    Ok(())
}
