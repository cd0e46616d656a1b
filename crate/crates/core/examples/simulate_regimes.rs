//! Generates regime-switching data and writes it as CSV plus a regime sidecar.
//!
//! `cargo run --example simulate_regimes -- [out_dir] [seed]`

use dynbps::simgen::{generate, SimConfig};

fn main() -> dynbps::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args.next().unwrap_or_else(|| "sim_out".into());
    let seed = args.next().map_or(7, |s| s.parse().expect("seed must be an integer"));

    let cfg = SimConfig { seed, ..SimConfig::default() };
    let sim = generate(&cfg)?;
    sim.write(&dir, "sim")?;

    let mut counts = vec![0usize; sim.regime_names.len()];
    for r in &sim.regimes {
        counts[*r] += 1;
    }
    let switches = sim.regimes.windows(2).filter(|w| w[0] != w[1]).count();
    println!("{} quarters, {} regime switches", sim.table.len(), switches);
    for (name, c) in sim.regime_names.iter().zip(&counts) {
        println!("  {name}: {c} quarters");
    }
    let p = sim.table.column("p").expect("target column");
    println!("p ranges over [{:.2}, {:.2}]", p.iter().cloned().fold(f64::INFINITY, f64::min), p.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    println!("wrote {dir}/sim.csv and {dir}/sim_regimes.csv");
    Ok(())
}
