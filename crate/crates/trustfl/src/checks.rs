//! Small-scale invariant and reduction checks behind `trustfl check`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trustfl_core::engine::{describe, run_realization, RealizationResult, RoundLog, World};
use trustfl_core::learner::project_ball;
use trustfl_core::taskmodel::constraint_value;
use trustfl_core::topology::GraphTopology;
use trustfl_core::vector::norm;
use trustfl_core::{
    AlgorithmParams, AttackKind, AttackStrategy, ClientId, SimConfig, TaskParams, TopologySpec, TrustLedger,
    TrustModel, Variant,
};

use crate::error::Result;
use crate::runner;

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

/// A small config: `clients` clients, `byzantine` of them Byzantine, on a
/// complete graph with `d = 2`.
pub fn tiny_config(clients: usize, byzantine: usize, horizon: usize, seed: u64) -> SimConfig {
    SimConfig {
        topology: TopologySpec::complete(clients, byzantine),
        task: TaskParams {
            dim: 2,
            ..TaskParams::default()
        },
        algorithm: AlgorithmParams::for_horizon(horizon, 1.0, 1.0),
        realizations: 1,
        seed,
        ..SimConfig::default()
    }
}

/// Trust that is always on: zero spread, honest mean above one half.
pub fn forced_trust() -> TrustModel {
    TrustModel {
        mean_honest: 0.55,
        mean_byzantine: 0.45,
        spread: 0.0,
    }
}

/// First difference between the honest trajectories of two runs whose
/// honest clients correspond by rank. Models, losses, samples, duals on
/// honest neighbors, consumed payloads, and honest-edge values are compared
/// bit for bit.
pub fn trajectory_difference(a: &RealizationResult, ga: &GraphTopology, b: &RealizationResult, gb: &GraphTopology) -> Option<String> {
    if a.logs.len() != b.logs.len() {
        return Some(format!("horizons differ: {} vs {}", a.logs.len(), b.logs.len()));
    }
    for (la, lb) in a.logs.iter().zip(&b.logs) {
        if let Some(d) = round_difference(la, ga, lb, gb) {
            return Some(format!("round {}: {d}", la.round));
        }
    }
    if a.comparator != b.comparator {
        return Some("comparators differ".into());
    }
    if a.series.cumulative_regret != b.series.cumulative_regret {
        return Some("regret series differ".into());
    }
    if a.series.cumulative_violation_mean != b.series.cumulative_violation_mean {
        return Some("violation series differ".into());
    }
    None
}

fn honest_duals(c: &trustfl_core::engine::ClientRoundLog, g: &GraphTopology) -> Vec<(usize, u64)> {
    let neighbors = g.neighbors(c.id).unwrap_or(&[]);
    neighbors
        .iter()
        .zip(&c.duals)
        .filter_map(|(&u, &l)| g.honest_rank(u).map(|r| (r, l.to_bits())))
        .collect()
}

fn round_difference(la: &RoundLog, ga: &GraphTopology, lb: &RoundLog, gb: &GraphTopology) -> Option<String> {
    if la.clients.len() != lb.clients.len() {
        return Some("honest client counts differ".into());
    }
    for (rank, (ca, cb)) in la.clients.iter().zip(&lb.clients).enumerate() {
        if ca.sample != cb.sample {
            return Some(format!("client rank {rank}: samples differ"));
        }
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if bits(&ca.model) != bits(&cb.model) {
            return Some(format!("client rank {rank}: models differ"));
        }
        if ca.loss.to_bits() != cb.loss.to_bits() {
            return Some(format!("client rank {rank}: losses differ"));
        }
        if honest_duals(ca, ga) != honest_duals(cb, gb) {
            return Some(format!("client rank {rank}: duals differ"));
        }
        let ranks = |c: &trustfl_core::engine::ClientRoundLog, g: &GraphTopology| {
            c.consumed.iter().map(|(u, _)| g.honest_rank(*u)).collect::<Vec<_>>()
        };
        if ranks(ca, ga) != ranks(cb, gb) {
            return Some(format!("client rank {rank}: consumed senders differ"));
        }
    }
    let ev = |l: &RoundLog| l.edges.iter().map(|e| e.value.to_bits()).collect::<Vec<_>>();
    if ev(la) != ev(lb) {
        return Some("honest-edge constraint values differ".into());
    }
    None
}

/// Trust-filtered run with `b = 0` and trust forced on versus the
/// unfiltered baseline.
pub fn reduction_forced_trust(clients: usize, horizon: usize, seed: u64) -> Result<Option<String>> {
    let mut trusted = tiny_config(clients, 0, horizon, seed);
    trusted.trust = forced_trust();
    trusted.variant = Variant::Trusted;
    let mut baseline = trusted.clone();
    baseline.variant = Variant::OldBaseline;
    let a = run_realization(&trusted, 0)?;
    let b = run_realization(&baseline, 0)?;
    let g = trusted.validate()?;
    if a != b {
        return Ok(Some(
            trajectory_difference(&a, &g, &b, &g).unwrap_or_else(|| "logs differ outside the trajectory".into()),
        ));
    }
    Ok(None)
}

/// Oracle-filter run under `attack` versus the `b = 0` run on the honest
/// subgraph.
pub fn reduction_oracle_filter(
    clients: usize,
    byzantine: usize,
    horizon: usize,
    seed: u64,
    attack: AttackStrategy,
) -> Result<Option<String>> {
    let mut oracle = tiny_config(clients, byzantine, horizon, seed);
    oracle.attack = attack;
    oracle.variant = Variant::OracleFilter;
    let mut baseline = oracle.clone();
    baseline.variant = Variant::OldBaseline;
    let full = oracle.validate()?;
    let sub = full.honest_subgraph()?;
    let a = run_realization(&oracle, 0)?;
    let b = run_realization(&baseline, 0)?;
    Ok(trajectory_difference(&a, &full, &b, &sub))
}

/// Every logged dual is nonnegative and every logged model lies in the ball.
pub fn log_invariants(r: &RealizationResult, radius: f64) -> Option<String> {
    for log in &r.logs {
        for c in &log.clients {
            if let Some(l) = c.duals.iter().find(|l| !(**l >= 0.0)) {
                return Some(format!("round {}: client {} has dual {l}", log.round, c.id));
            }
            if norm(&c.model) > radius + 1e-12 {
                return Some(format!("round {}: client {} left the ball", log.round, c.id));
            }
        }
    }
    None
}

fn random_vec(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

/// A random small config: up to 6 clients, any Byzantine count, any attack,
/// `d <= 3`, and a short horizon.
pub fn random_config(rng: &mut ChaCha8Rng) -> SimConfig {
    let clients = rng.random_range(2..7);
    let byzantine = rng.random_range(0..clients - 1);
    let horizon = rng.random_range(1..9);
    let mut c = tiny_config(clients, byzantine, horizon, rng.random());
    c.task.dim = rng.random_range(1..4);
    c.constraint = trustfl_core::ConstraintParams::uniform(rng.random::<f64>());
    let kinds = AttackKind::ALL;
    c.attack = AttackStrategy::new(kinds[rng.random_range(0..kinds.len())], 20.0 * rng.random::<f64>());
    c.algorithm = AlgorithmParams::for_horizon(horizon, 0.2 + 2.0 * rng.random::<f64>(), 0.2 + 2.0 * rng.random::<f64>());
    c.algorithm.clip_received = rng.random();
    if rng.random::<f64>() < 0.2 {
        c.trust.spread = 0.0;
    }
    c
}

/// First violation of dual nonnegativity or model feasibility along a run
/// of `config`, stepping the world directly.
pub fn world_invariants(config: &SimConfig) -> Result<Option<String>> {
    let radius = config.algorithm.radius;
    let mut world = World::new(config, 0)?;
    for _ in 0..config.horizon() {
        let log = world.run_round()?;
        for c in &log.clients {
            if let Some(l) = c.duals.iter().find(|l| !(**l >= 0.0)) {
                return Ok(Some(format!("round {}: client {} has dual {l}", log.round, c.id)));
            }
            if norm(&c.model) > radius + 1e-12 {
                return Ok(Some(format!("round {}: client {} left the ball", log.round, c.id)));
            }
        }
    }
    for c in world.clients() {
        if norm(&c.model) > radius + 1e-12 {
            return Ok(Some(format!("final model of client {} left the ball", c.id)));
        }
    }
    Ok(None)
}

fn outcome(name: &'static str, bad: Option<String>, ok: String) -> CheckOutcome {
    CheckOutcome::new(name, bad.is_none(), bad.unwrap_or(ok))
}

/// Runs the full small-scale suite with `cases` randomized cases for each
/// property check.
pub fn run_checks(cases: usize, seed: u64, threads: Option<usize>) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut bad = None;
    for _ in 0..cases {
        let d = rng.random_range(1..8);
        let r = 0.1 + 2.0 * rng.random::<f64>();
        let mut x = random_vec(&mut rng, d, 5.0);
        project_ball(&mut x, r);
        let once = x.clone();
        project_ball(&mut x, r);
        if once != x || norm(&x) > r + 1e-12 {
            bad = Some(format!("{once:?} with r = {r}"));
            break;
        }
    }
    out.push(outcome("projection idempotence", bad, format!("{cases} cases")));

    let mut bad = None;
    for _ in 0..cases {
        let d = rng.random_range(1..8);
        let a = random_vec(&mut rng, d, 2.0);
        let b = random_vec(&mut rng, d, 2.0);
        let k = rng.random::<f64>();
        if constraint_value(&a, &b, k) != constraint_value(&b, &a, k) {
            bad = Some(format!("{a:?} {b:?}"));
            break;
        }
    }
    out.push(outcome("constraint symmetry", bad, format!("{cases} cases")));

    let g = trustfl_core::topology::build_topology(&TopologySpec::complete(4, 1))?;
    let mut bad = None;
    for _ in 0..cases {
        let n = rng.random_range(1..60);
        let alphas: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut shuffled = alphas.clone();
        shuffled.shuffle(&mut rng);
        let mut first = TrustLedger::new(&g);
        let mut second = TrustLedger::new(&g);
        for (&a, &b) in alphas.iter().zip(&shuffled) {
            first.accumulate(ClientId(1), ClientId(0), a)?;
            second.accumulate(ClientId(1), ClientId(0), b)?;
        }
        let (x, y) = (first.beta(ClientId(1), ClientId(0))?, second.beta(ClientId(1), ClientId(0))?);
        if x.to_bits() != y.to_bits() {
            bad = Some(format!("{alphas:?}"));
            break;
        }
    }
    out.push(outcome("trust score order independence", bad, format!("{cases} permuted sequences")));

    let mut bad = None;
    for _ in 0..cases {
        let cfg = random_config(&mut rng);
        if let Some(d) = world_invariants(&cfg)? {
            bad = Some(format!("{}: {d}", describe(&cfg)));
            break;
        }
    }
    out.push(outcome("dual nonnegativity and model feasibility", bad, format!("{cases} random runs")));

    let diff = reduction_forced_trust(4, 40, seed)?;
    out.push(outcome("b = 0 with forced trust equals the baseline", diff, "bit-identical".into()));

    let mut bad = None;
    for attack in AttackKind::ALL {
        if let Some(d) = reduction_oracle_filter(7, 4, 30, seed, AttackStrategy::new(attack, 10.0))? {
            bad = Some(format!("{attack}: {d}"));
            break;
        }
    }
    out.push(outcome(
        "oracle filter equals the honest-subgraph run",
        bad,
        "bit-identical for every attack kind".into(),
    ));

    let pool_one = runner::pool(Some(1))?;
    let pool_many = runner::pool(threads.or(Some(4)))?;
    let mut bad = None;
    for _ in 0..cases {
        let mut cfg = random_config(&mut rng);
        cfg.realizations = rng.random_range(1..4);
        let one = runner::run_experiment_in(&pool_one, &cfg)?;
        let many = runner::run_experiment_in(&pool_many, &cfg)?;
        if one != many {
            bad = Some(describe(&cfg));
            break;
        }
    }
    out.push(outcome("determinism across worker counts", bad, format!("{cases} random experiments")));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_at_small_scale() {
        for c in run_checks(200, 3, Some(2)).unwrap() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
