//! Rolling evaluation on regime-switching simulated data. The agents are the
//! four generating forms with their true coefficients, so each is exact only
//! while its own regime is in force. BPS is compared with the agents, BMA and
//! the pools over several seeds.
//!
//! `cargo run --release --example simulation_study -- [replications] [draws]`

use dynbps::bps::McmcSettings;
use dynbps::pipeline::{run_on_table, AgentEntry, PipelineConfig};
use dynbps::simgen::{generate, known_parameter_agents, SimConfig};

fn main() -> dynbps::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps: u64 = args.next().map_or(3, |s| s.parse().expect("replications"));
    let draws: usize = args.next().map_or(2000, |s| s.parse().expect("draws"));

    for rep in 0..reps {
        let sim_cfg = SimConfig { seed: rep + 1, ..SimConfig::default() };
        let sim = generate(&sim_cfg)?;
        let agents = known_parameter_agents(&sim_cfg)?
            .iter()
            .map(AgentEntry::from_spec)
            .collect::<dynbps::Result<Vec<_>>>()?;
        let cfg = PipelineConfig {
            horizons: vec![1, 4],
            agents,
            seed: rep,
            retrospective: false,
            bps: dynbps::pipeline::BpsSection {
                mcmc: McmcSettings::new(draws / 2, draws, 1)?,
                ..Default::default()
            },
            ..PipelineConfig::default()
        };
        let res = run_on_table(&cfg, &sim.table)?;
        let row = |k, m: &str| res.summary.row(k, m).map_or(f64::NAN, |r| r.msfe);
        let best_agent = ["M1", "M2", "M3", "M4"].iter().map(|m| row(1, m)).fold(f64::INFINITY, f64::min);
        let switches = sim.regimes[100..].windows(2).filter(|w| w[0] != w[1]).count();
        println!(
            "rep {rep} ({switches} test switches): 1-step BPS {:.4}  best agent {:.4}  BMA {:.4}  LinP {:.4} | 4-step BPS(4) {:.4}  direct {:.4}",
            row(1, "BPS"),
            best_agent,
            row(1, "BMA"),
            row(1, "LinP"),
            row(4, "BPS(4)"),
            row(4, "BPS"),
        );
    }
    Ok(())
}
