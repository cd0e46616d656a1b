//! Fits the four standard agents to simulated data and prints their 1-step
//! and 4-step forecast densities.

use dynbps::agents::{build_agent, standard_agents, ForecastOptions};
use dynbps::rng::substream;
use dynbps::simgen::{generate, SimConfig};

fn main() -> dynbps::Result<()> {
    let sim = generate(&SimConfig { length: 120, seed: 3, ..SimConfig::default() })?;
    let table = &sim.table;
    let issue = table.len() - 5;
    let opts = ForecastOptions::default();
    println!("issued at {} (row {issue})", table.date(issue));
    for spec in standard_agents("p", "r", "u")? {
        let agent = build_agent(&spec, table, "p", issue)?;
        let one = agent.forecast(issue, 1, &opts, &mut substream(1, &[]))?;
        let four = agent.forecast(issue, 4, &opts, &mut substream(4, &[]))?;
        println!(
            "{:<3} 1-step T(loc {:.3}, scale {:.4}, dof {:.1})   4-step T(loc {:.3}, scale {:.4}, dof {:.1})",
            spec.name,
            one.location(),
            one.scale(),
            one.dof().unwrap_or(f64::INFINITY),
            four.location(),
            four.scale(),
            four.dof().unwrap_or(f64::INFINITY),
        );
    }
    let p = table.column("p").expect("target");
    println!("realized: {:.3} (1-step), {:.3} (4-step)", p[issue + 1], p[issue + 4]);
    Ok(())
}
