//! Metrics and the comparator checked against independent computations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trustfl_core::engine::{run_realization, RealizationResult};
use trustfl_core::oracle::solve_comparator;
use trustfl_core::taskmodel::{constraint_grad, loss, loss_grad, DataGenerator};
use trustfl_core::{AlgorithmParams, ComparatorSettings, ConstraintParams, DataSample, SimConfig, TaskParams, TopologySpec};

/// Logistic loss written out directly from its definition.
fn logistic(x: &[f64], s: &DataSample) -> f64 {
    let margin: f64 = s.features.iter().zip(x).map(|(p, w)| p * w).sum::<f64>() * f64::from(s.label);
    (-margin).exp().ln_1p()
}

fn tiny_run(horizon: usize) -> (SimConfig, RealizationResult) {
    let cfg = SimConfig {
        topology: TopologySpec::complete(3, 0),
        task: TaskParams {
            dim: 2,
            ..TaskParams::default()
        },
        constraint: ConstraintParams::uniform(0.5),
        algorithm: AlgorithmParams::for_horizon(horizon, 1.0, 1.0),
        realizations: 1,
        seed: 11,
        ..SimConfig::default()
    };
    let r = run_realization(&cfg, 0).unwrap();
    (cfg, r)
}

#[test]
fn regret_equals_resummation() {
    let (_, r) = tiny_run(20);
    let mut total = 0.0;
    for (t, log) in r.logs.iter().enumerate() {
        let mut round = 0.0;
        for (c, star) in log.clients.iter().zip(&r.comparator.models) {
            let direct = logistic(&c.model, &c.sample);
            assert!((direct - c.loss).abs() <= 1e-14 * (1.0 + direct), "{direct} vs {}", c.loss);
            round += c.loss - loss(star, &c.sample);
        }
        total += round;
        assert_eq!(total.to_bits(), r.series.cumulative_regret[t].to_bits(), "round {}", t + 1);
    }
}

#[test]
fn violation_equals_resummation() {
    let (cfg, r) = tiny_run(20);
    let kappa = cfg.constraint.kappa;
    let m = r.logs[0].edges.len();
    assert_eq!(m, 3);
    let mut totals = vec![0.0; m];
    for (t, log) in r.logs.iter().enumerate() {
        for (total, e) in totals.iter_mut().zip(&log.edges) {
            let xa = &log.clients.iter().find(|c| c.id == e.a).unwrap().model;
            let xb = &log.clients.iter().find(|c| c.id == e.b).unwrap().model;
            let direct = xa.iter().zip(xb.iter()).map(|(p, q)| (p - q).powi(2)).sum::<f64>() - kappa * kappa;
            assert!((direct - e.value).abs() <= 1e-14, "{direct} vs {}", e.value);
            *total += e.value;
        }
        let mean = totals.iter().sum::<f64>() / m as f64;
        let max = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(mean.to_bits(), r.series.cumulative_violation_mean[t].to_bits());
        assert_eq!(max.to_bits(), r.series.cumulative_violation_max[t].to_bits());
    }
}

#[test]
fn single_client_comparator_matches_grid_search() {
    let params = TaskParams {
        dim: 2,
        ..TaskParams::default()
    };
    let mut data = DataGenerator::new(params, 1.0, 1, 4, 0);
    let mut samples = Vec::new();
    for _ in 0..60 {
        samples.push(data.sample(0));
        data.advance();
    }
    let dataset = vec![samples];
    let comp = solve_comparator(&dataset, &[], 2, 1.0, &ComparatorSettings::default()).unwrap();

    let mean = |x: &[f64]| dataset[0].iter().map(|s| logistic(x, s)).sum::<f64>() / dataset[0].len() as f64;
    let mut best = f64::INFINITY;
    for i in -100i32..=100 {
        for j in -100i32..=100 {
            let x = [f64::from(i) * 0.01, f64::from(j) * 0.01];
            if x[0] * x[0] + x[1] * x[1] <= 1.0 {
                best = best.min(mean(&x));
            }
        }
    }
    let gap = best - comp.mean_objective();
    assert!(gap.abs() <= 1e-3, "grid {best} comparator {}", comp.mean_objective());
    assert!(gap >= -1e-6, "comparator worse than a grid point");
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = 1e-6;
    for _ in 0..100 {
        let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let v: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let s = rng.random::<f64>() / n.max(1.0);
            v.iter().map(|a| a * s).collect()
        };
        let x = point(&mut rng);
        let u = point(&mut rng);
        let features: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let s = DataSample::new(if rng.random::<bool>() { 1 } else { -1 }, features);

        let fd = |f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
            (0..5)
                .map(|k| {
                    let (mut p, mut m) = (x.clone(), x.clone());
                    p[k] += h;
                    m[k] -= h;
                    (f(&p) - f(&m)) / (2.0 * h)
                })
                .collect()
        };
        let rel = |a: &[f64], b: &[f64]| {
            let diff = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            diff / b.iter().map(|q| q * q).sum::<f64>().sqrt().max(1e-8)
        };
        let g = loss_grad(&x, &s);
        assert!(rel(&fd(&|y| loss(y, &s)), &g) <= 1e-5);
        let c = constraint_grad(&x, &u);
        let sq = |y: &[f64]| y.iter().zip(&u).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        assert!(rel(&fd(&sq), &c) <= 1e-5);
    }
}
