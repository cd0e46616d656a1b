//! Compares the direct 4-step projection of the 1-step synthesis with the
//! horizon-customized fit on 4-step agent densities.

use dynbps::agents::{build_agent, standard_agents, ForecastBook, ForecastOptions};
use dynbps::bps::{forecast_k_direct, gibbs, run_bps_k, BpsConfig, McmcSettings};
use dynbps::rng::substream;
use dynbps::simgen::{generate, SimConfig};

fn main() -> dynbps::Result<()> {
    let k = 4;
    let sim = generate(&SimConfig { length: 100, seed: 8, ..SimConfig::default() })?;
    let table = &sim.table;
    let issue = table.len() - 1 - k;
    let agents = standard_agents("p", "r", "u")?
        .iter()
        .map(|s| build_agent(s, table, "p", issue))
        .collect::<dynbps::Result<Vec<_>>>()?;
    let book = ForecastBook::build(&agents, table, 26..=issue, &[1, k], &ForecastOptions::default(), 1)?;
    let next = book.issued(issue, k)?;
    let mcmc = McmcSettings::new(500, 1000, 1)?;
    let mut rng = substream(3, &[]);

    let cfg1 = BpsConfig::one_step(agents.len())?.with_mcmc(mcmc);
    let draws = gibbs(&book.panel(30, issue, 1)?, &cfg1, &mut rng)?;
    let direct = forecast_k_direct(&draws, &next, k, &cfg1, &mut rng)?;

    let cfgk = BpsConfig::customized(agents.len(), k)?.with_mcmc(mcmc);
    let custom = run_bps_k(&book.panel(30, issue, k)?, &next, &cfgk, &mut rng)?;

    let summary = |xs: &[f64]| {
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
        (m, v.sqrt())
    };
    let y = table.column("p").expect("target")[issue + k];
    let (m1, s1) = summary(&direct);
    let (mk, sk) = summary(&custom.forecast);
    println!("target {} realized {y:.3}", table.date(issue + k));
    println!("  direct BPS projection: mean {m1:.3} sd {s1:.3}");
    println!("  BPS({k}):              mean {mk:.3} sd {sk:.3}");
    Ok(())
}
