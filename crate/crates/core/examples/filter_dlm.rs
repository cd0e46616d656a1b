//! Forward filtering and backward sampling of a discount DLM on a
//! regression whose slope drifts halfway through.

use dynbps::dlm::{backward_sample, forward_filter, Discounts, DlmPosterior};
use dynbps::rng::substream;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> dynbps::Result<()> {
    let mut rng = substream(11, &[]);
    let t_len = 120;
    let mut regressors = Vec::with_capacity(t_len);
    let mut ys = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let x: f64 = rng.sample(StandardNormal);
        let slope = if t < t_len / 2 { 0.5 } else { 1.5 };
        let e: f64 = rng.sample(StandardNormal);
        regressors.push(DVector::from_vec(vec![1.0, x]));
        ys.push(0.3 + slope * x + 0.2 * e);
    }

    let prior = DlmPosterior::isotropic(DVector::zeros(2), 1.0, 2.0, 0.1)?;
    let d = Discounts::new(0.95, 0.98)?;
    let filtered = forward_filter(&prior, &regressors, &ys, d)?;
    for t in [10, 59, 70, 119] {
        let p = &filtered[t];
        println!(
            "t={t:3}  slope {:.3} (sd {:.3})  s {:.4}",
            p.m[1],
            (p.c[(1, 1)]).sqrt(),
            p.s
        );
    }

    let draws = 500;
    let mut mean_slope = vec![0.0; t_len];
    for _ in 0..draws {
        let traj = backward_sample(&filtered, d, &mut rng)?;
        for (acc, th) in mean_slope.iter_mut().zip(&traj.thetas) {
            *acc += th[1] / draws as f64;
        }
    }
    println!("smoothed slope at t=30: {:.3}, t=100: {:.3}", mean_slope[30], mean_slope[100]);
    Ok(())
}
