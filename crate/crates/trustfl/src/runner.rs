//! Parallel execution of realizations.
//!
//! Realizations are independent and keyed by index, so the result does not
//! depend on the number of worker threads.

use rayon::prelude::*;
use rayon::ThreadPool;

use trustfl_core::engine::{aggregate, run_realization, ExperimentResult, RealizationResult};
use trustfl_core::metrics::measure_tf;
use trustfl_core::rng::{stream, StreamTag};
use trustfl_core::topology::build_topology;
use trustfl_core::trust::{simulate_trust_process, ClassificationCounts};
use trustfl_core::{SimConfig, TopologySpec, TrustModel};

use crate::error::{CliError, Result};

/// A worker pool with `threads` threads, or one per core.
pub fn pool(threads: Option<usize>) -> Result<ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))
}

/// Runs every realization of `config`, dropping round logs as soon as each
/// realization's metrics are computed.
pub fn run_experiment(config: &SimConfig, threads: Option<usize>) -> Result<ExperimentResult> {
    run_experiment_in(&pool(threads)?, config)
}

/// [`run_experiment`] on an existing pool.
pub fn run_experiment_in(pool: &ThreadPool, config: &SimConfig) -> Result<ExperimentResult> {
    config.validate().map_err(CliError::from_core)?;
    let results: Vec<RealizationResult> = pool.install(|| {
        (0..config.realizations as u64)
            .into_par_iter()
            .map(|i| {
                let mut r = run_realization(config, i)?;
                r.logs = Vec::new();
                Ok(r)
            })
            .collect::<trustfl_core::Result<_>>()
    })?;
    Ok(aggregate(config, results))
}

/// Monte Carlo over the trust process alone.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustStudy {
    /// `histories[k][t]`: classification of realization `k` after `t` rounds.
    pub histories: Vec<Vec<ClassificationCounts>>,
    pub tf: Vec<Option<usize>>,
}

/// Per-round mean and standard error over realizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl TrustStudy {
    pub fn rounds(&self) -> usize {
        self.histories.first().map_or(0, |h| h.len().saturating_sub(1))
    }

    fn estimate(&self, t: usize, f: impl Fn(&ClassificationCounts) -> f64) -> RateEstimate {
        let xs: Vec<f64> = self.histories.iter().map(|h| f(&h[t])).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        RateEstimate {
            mean,
            std_error: (var / n).sqrt(),
        }
    }

    /// Fraction of honest neighbors classified Byzantine after `t` rounds.
    pub fn honest_rate(&self, t: usize) -> RateEstimate {
        self.estimate(t, |c| c.honest_rate())
    }

    /// Fraction of Byzantine neighbors classified honest after `t` rounds.
    pub fn byzantine_rate(&self, t: usize) -> RateEstimate {
        self.estimate(t, |c| c.byzantine_rate())
    }
}

pub fn trust_study(
    topology: &TopologySpec,
    model: &TrustModel,
    rounds: usize,
    realizations: usize,
    seed: u64,
    threads: Option<usize>,
) -> Result<TrustStudy> {
    let g = build_topology(topology).map_err(CliError::from_core)?;
    model.validate().map_err(CliError::from_core)?;
    let histories: Vec<Vec<ClassificationCounts>> = pool(threads)?.install(|| {
        (0..realizations as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream(seed, k, 0, StreamTag::TrustProcess);
                simulate_trust_process(&g, model, rounds, &mut rng)
            })
            .collect()
    });
    let tf = histories.iter().map(|h| measure_tf(h)).collect();
    Ok(TrustStudy { histories, tf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use trustfl_core::{AlgorithmParams, TaskParams};

    #[test]
    fn thread_count_does_not_change_results() {
        let mut c = SimConfig {
            topology: TopologySpec::complete(7, 3),
            task: TaskParams {
                dim: 3,
                ..TaskParams::default()
            },
            algorithm: AlgorithmParams::for_horizon(25, 1.0, 1.0),
            realizations: 6,
            ..SimConfig::default()
        };
        c.seed = 5;
        let one = run_experiment(&c, Some(1)).unwrap();
        let four = run_experiment(&c, Some(4)).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn trust_study_shape() {
        let s = trust_study(&TopologySpec::complete(5, 2), &TrustModel::default(), 30, 4, 1, Some(2)).unwrap();
        assert_eq!(s.histories.len(), 4);
        assert_eq!(s.rounds(), 30);
        assert_eq!(s.byzantine_rate(0).mean, 1.0);
        assert_eq!(s.honest_rate(0).mean, 0.0);
    }
}
