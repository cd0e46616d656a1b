mod common;

use dynbps::eval::{density_value, r2_from_draws, sample_density_value, Bandwidth};
use dynbps::pools::LogPoolQuadrature;
use dynbps::rng::substream;
use dynbps::{bma_update, linear_pool, log_pool, lpdr, msfe, BmaState, ForecastDensity};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn bma_sequential_equals_batch() {
    let mut rng = substream(77, &[]);
    let liks: Vec<Vec<f64>> = (0..50)
        .map(|_| (0..4).map(|_| rng.random_range(0.01..2.0)).collect())
        .collect();
    let mut seq = BmaState::uniform(4);
    for l in &liks {
        seq = bma_update(&seq, l).unwrap();
    }
    let log_w: Vec<f64> = (0..4).map(|j| liks.iter().map(|l| l[j].ln()).sum()).collect();
    let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_w.iter().map(|w| (w - top).exp()).sum();
    for j in 0..4 {
        let batch = (log_w[j] - top).exp() / total;
        assert!((seq.probs[j] - batch).abs() <= 1e-10);
    }
}

#[test]
fn bma_rejects_all_zero_likelihoods() {
    assert!(bma_update(&BmaState::uniform(3), &[0.0, 0.0, 0.0]).is_err());
}

#[test]
fn equal_likelihoods_keep_probabilities() {
    let s = bma_update(&BmaState::uniform(2), &[0.2, 0.8]).unwrap();
    let t = bma_update(&s, &[0.5, 0.5]).unwrap();
    assert!((t.probs[0] - 0.2).abs() < 1e-15 && (t.probs[1] - 0.8).abs() < 1e-15);
}

fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * f(lo + i as f64 * h)
        })
        .sum::<f64>()
        * h
}

#[test]
fn linear_pool_is_a_proper_density() {
    let comps = vec![
        ForecastDensity::normal(-1.0, 1.0).unwrap(),
        ForecastDensity::student_t(2.0, 0.5, 4.0).unwrap(),
        ForecastDensity::normal(0.5, 0.1).unwrap(),
    ];
    let pool = linear_pool(&comps).unwrap();
    let mass = trapezoid(|y| pool.pdf(y), -400.0, 400.0, 800_000);
    assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    assert!((-50..50).all(|i| pool.pdf(i as f64 * 0.37) >= 0.0));
}

#[test]
fn linear_pool_sampler_picks_components_uniformly() {
    let pool = linear_pool(&[ForecastDensity::normal(-1.0, 1.0).unwrap(), ForecastDensity::normal(1.0, 1.0).unwrap()]).unwrap();
    let mut rng = substream(3, &[]);
    let xs: Vec<f64> = (0..200_000).map(|_| pool.sample(&mut rng)).collect();
    assert!(common::mean(&xs).abs() < 0.015);
    assert!((common::variance(&xs) - 2.0).abs() < 0.03);
}

#[test]
fn log_pool_of_identical_densities_is_that_density() {
    let d = ForecastDensity::student_t(1.0, 0.4, 3.0).unwrap();
    let pool = log_pool(&[d.clone(), d.clone(), d.clone()], LogPoolQuadrature::default()).unwrap();
    for i in -30..=30 {
        let y = 1.0 + i as f64 * 0.25;
        assert!((pool.pdf(y) - d.pdf(y)).abs() < 1e-8);
    }
}

#[test]
fn log_pool_variance_is_harmonic_mean_for_equal_means() {
    let pool = log_pool(
        &[ForecastDensity::normal(0.0, 1.0).unwrap(), ForecastDensity::normal(0.0, 4.0).unwrap()],
        LogPoolQuadrature::default(),
    )
    .unwrap();
    assert!((pool.variance() - 1.6).abs() < 1e-6);
    assert!(pool.mean().abs() < 1e-8);
}

/// Complete-conditional R^2 from a covariance: `1 - Schur / var`.
fn schur_r2(sigma: &DMatrix<f64>, j: usize) -> f64 {
    let p = sigma.nrows();
    let others: Vec<usize> = (0..p).filter(|&i| i != j).collect();
    let s_oo = DMatrix::from_fn(others.len(), others.len(), |a, b| sigma[(others[a], others[b])]);
    let s_jo = DVector::from_fn(others.len(), |a, _| sigma[(j, others[a])]);
    let cond = sigma[(j, j)] - s_jo.dot(&(s_oo.try_inverse().unwrap() * &s_jo));
    1.0 - cond / sigma[(j, j)]
}

#[test]
fn complete_r2_matches_schur_complement() {
    let l = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.6, 0.8, 0.0, -0.3, 0.5, 0.7]);
    let sigma = &l * l.transpose();
    let mut rng = substream(12, &[]);
    let rows: Vec<Vec<f64>> = (0..100_000)
        .map(|_| {
            let z = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
            (&l * z).iter().copied().collect()
        })
        .collect();
    let (complete, paired, singular) = r2_from_draws(&rows).unwrap();
    for j in 0..3 {
        assert!((complete[j] - schur_r2(&sigma, j)).abs() < 0.01, "agent {j}");
        assert!(!singular[j]);
    }
    let corr01 = sigma[(0, 1)] / (sigma[(0, 0)] * sigma[(1, 1)]).sqrt();
    assert!((paired[0] - corr01 * corr01).abs() < 0.01);
}

#[test]
fn msfe_examples_and_ordering() {
    assert_eq!(msfe(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    assert_eq!(msfe(&[0.0, 0.0, 0.0], &[1.0, -1.0, 1.0]).unwrap(), vec![1.0, 1.0, 1.0]);
    assert_eq!(msfe(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), vec![0.0, 2.0]);
    assert!(msfe(&[], &[]).is_err());
}

#[test]
fn lpdr_examples() {
    let e = std::f64::consts::E;
    let got = lpdr(&[e, e], &[1.0, 1.0]).unwrap();
    assert!((got[0] - 1.0).abs() < 1e-15 && (got[1] - 2.0).abs() < 1e-15);
    let b = [0.3, 0.01, 2.0];
    assert!(lpdr(&b, &b).unwrap().iter().all(|&v| v == 0.0));
    assert!(lpdr(&[0.0], &[1.0]).is_err());
}

#[test]
fn density_values() {
    let n = ForecastDensity::normal(0.0, 1.0).unwrap();
    assert!((density_value(&n, 0.0).unwrap() - 0.398_942_280_4).abs() < 1e-9);
    let mut rng = substream(5, &[]);
    let xs: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
    let kde = sample_density_value(&xs, 0.0, Bandwidth::Silverman).unwrap();
    assert!((kde - 0.399).abs() < 0.02);
}

proptest! {
    #[test]
    fn bma_stays_on_the_simplex(liks in prop::collection::vec(prop::collection::vec(1e-6f64..5.0, 3), 1..60)) {
        let mut s = BmaState::uniform(3);
        for l in &liks {
            s = bma_update(&s, l).unwrap();
            prop_assert!(s.probs.iter().all(|&p| p >= 0.0));
            prop_assert!((s.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn msfe_is_monotone_under_error_domination(
        errs in prop::collection::vec(-5.0f64..5.0, 1..40),
        extra in prop::collection::vec(0.0f64..3.0, 40),
    ) {
        let zeros = vec![0.0; errs.len()];
        let bigger: Vec<f64> = errs.iter().zip(&extra).map(|(e, x)| e.signum() * (e.abs() + x)).collect();
        let small = msfe(&errs, &zeros).unwrap();
        let large = msfe(&bigger, &zeros).unwrap();
        prop_assert!(small.iter().zip(&large).all(|(a, b)| a <= b));
    }

    #[test]
    fn complete_r2_dominates_paired(seed in 0u64..5000, mix in prop::collection::vec(-1.0f64..1.0, 9)) {
        let l = DMatrix::from_row_slice(3, 3, &mix) + DMatrix::identity(3, 3) * 0.2;
        let mut rng = substream(seed, &[]);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                let z = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
                (&l * z).iter().copied().collect()
            })
            .collect();
        let (complete, paired, _) = r2_from_draws(&rows).unwrap();
        // pairs in (0,1), (0,2), (1,2) order
        let pairs = [(0, 1), (0, 2), (1, 2)];
        for j in 0..3 {
            prop_assert!((0.0..=1.0).contains(&complete[j]));
            let best = pairs
                .iter()
                .zip(&paired)
                .filter(|((a, b), _)| *a == j || *b == j)
                .map(|(_, &r)| r)
                .fold(0.0, f64::max);
            prop_assert!(complete[j] >= best - 1e-9, "agent {}: {} < {}", j, complete[j], best);
        }
    }
}
