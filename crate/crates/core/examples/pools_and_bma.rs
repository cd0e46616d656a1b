//! Sequential model averaging and equal-weight opinion pools on a stream of
//! agent densities.

use dynbps::density::ForecastDensity;
use dynbps::pools::{linear_pool, log_pool, BmaState, LogPoolQuadrature};

fn main() -> dynbps::Result<()> {
    let outcomes = [0.9, 1.1, 1.4, 1.2, 1.0, 1.3];
    let mut bma = BmaState::uniform(3);
    for y in outcomes {
        let agents = [
            ForecastDensity::student_t(1.0, 0.04, 8.0)?,
            ForecastDensity::student_t(1.3, 0.02, 8.0)?,
            ForecastDensity::normal(0.5, 0.25)?,
        ];
        let lik: Vec<f64> = agents.iter().map(|d| d.pdf(y)).collect();
        bma = bma.update(&lik)?;
        let lin = linear_pool(&agents)?;
        let log = log_pool(&agents, LogPoolQuadrature::default())?;
        println!(
            "y={y:.2}  BMA [{}]  LinP mean {:.3}  LogP mean {:.3} sd {:.3}",
            bma.probs.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(", "),
            lin.mean(),
            log.mean(),
            log.variance().sqrt()
        );
    }
    Ok(())
}
