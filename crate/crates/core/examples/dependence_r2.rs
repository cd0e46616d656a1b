//! Posterior dependence among latent agent states: complete-conditional and
//! paired R^2 from the Gibbs draws of a synthesis fit.

use dynbps::agents::{assemble_panel, build_agent, standard_agents, ForecastOptions};
use dynbps::bps::{gibbs, BpsConfig, McmcSettings};
use dynbps::eval::mc_empirical_r2;
use dynbps::rng::substream;
use dynbps::simgen::{generate, SimConfig};

fn main() -> dynbps::Result<()> {
    let sim = generate(&SimConfig { length: 90, seed: 12, ..SimConfig::default() })?;
    let table = &sim.table;
    let last = table.len() - 1;
    let agents = standard_agents("p", "r", "u")?
        .iter()
        .map(|s| build_agent(s, table, "p", last))
        .collect::<dynbps::Result<Vec<_>>>()?;
    let panel = assemble_panel(&agents, table, 30, last, 1, &ForecastOptions::default(), 1)?;
    let cfg = BpsConfig::one_step(agents.len())?.with_mcmc(McmcSettings::new(300, 1000, 1)?);
    let draws = gibbs(&panel, &cfg, &mut substream(4, &[]))?;
    let dep = mc_empirical_r2(&draws)?;

    let t = panel.t_len() - 1;
    println!("dependence at {}:", panel.dates[t]);
    for (name, r2) in panel.names.iter().zip(&dep.complete[t]) {
        println!("  {name:<3} complete R^2 {r2:.3}");
    }
    for ((a, b), r2) in dep.pairs.iter().zip(&dep.paired[t]) {
        println!("  {}-{} paired R^2 {r2:.3}", panel.names[*a], panel.names[*b]);
    }
    Ok(())
}
