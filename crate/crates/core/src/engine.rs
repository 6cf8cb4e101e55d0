//! Round loop, realizations, and experiment aggregation.
//!
//! A round is synchronous: every honest client first broadcasts `(x_v, lambda_vu)`
//! built from its round-`t` state, Byzantine clients inject their payloads,
//! then every honest client observes trust, forms its trusted set, and
//! updates. Updates only touch client-local state, so the order in which
//! clients are stepped is irrelevant.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::adversary::{byzantine_messages, AttackStrategy};
use crate::error::{invalid, Error, Result};
use crate::learner::{outgoing_messages, AlgorithmParams, ClientState, Origin, RoundMessage};
use crate::metrics::{measure_tf, regret_series, violation_series};
use crate::oracle::{solve_comparator, Comparator, ComparatorSettings, RankEdge};
use crate::rng::{stream, StreamRng, StreamTag};
use crate::taskmodel::{constraint_value, ConstraintParams, DataGenerator, DataSample, TaskParams};
use crate::topology::{build_topology, ClientId, GraphTopology, TopologySpec};
use crate::trust::{classification_counts, ClassificationCounts, TrustLedger, TrustModel};
use crate::vector::{dist_sq, ModelVector};

/// Which update rule honest clients run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Variant {
    /// Trust-filtered primal-dual updates.
    #[default]
    Trusted,
    /// Unfiltered online Lagrangian descent on the honest subgraph, no attack.
    OldBaseline,
    /// Trusted set equal to the honest neighbors.
    OracleFilter,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Trusted, Variant::OldBaseline, Variant::OracleFilter];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Trusted => "trusted",
            Variant::OldBaseline => "old-baseline",
            Variant::OracleFilter => "oracle-filter",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| invalid("run.variant", alloc::format!("unknown variant `{s}`")))
    }
}

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub topology: TopologySpec,
    pub trust: TrustModel,
    pub task: TaskParams,
    pub constraint: ConstraintParams,
    pub algorithm: AlgorithmParams,
    pub attack: AttackStrategy,
    pub variant: Variant,
    pub realizations: usize,
    pub seed: u64,
    pub comparator: ComparatorSettings,
}

impl Default for SimConfig {
    /// 45 clients (30 Byzantine) on a complete graph, `T = 1000`,
    /// `eta = 1/sqrt(T)`, `r = 1`, `kappa = 0.5`, `d = 5`, trust means
    /// 0.55 / 0.45 with spread 0.8, Gaussian-noise attack, 50 realizations.
    fn default() -> Self {
        Self {
            topology: TopologySpec::default(),
            trust: TrustModel::default(),
            task: TaskParams::default(),
            constraint: ConstraintParams::default(),
            algorithm: AlgorithmParams::default(),
            attack: AttackStrategy::default(),
            variant: Variant::Trusted,
            realizations: 50,
            seed: 1,
            comparator: ComparatorSettings::default(),
        }
    }
}

impl SimConfig {
    pub fn horizon(&self) -> usize {
        self.algorithm.horizon
    }

    /// Checks every sub-spec and builds the configured graph.
    pub fn validate(&self) -> Result<GraphTopology> {
        if self.realizations == 0 {
            return Err(invalid("run.realizations", "must be at least 1"));
        }
        self.trust.validate()?;
        self.task.validate()?;
        self.constraint.validate()?;
        self.algorithm.validate()?;
        self.attack.validate(self.task.dim)?;
        if !(self.comparator.tol > 0.0) {
            return Err(invalid("comparator.tol", "must be positive"));
        }
        let g = build_topology(&self.topology)?;
        for ((v, u), _) in self.constraint.edge_overrides() {
            if !g.has_edge(v, u) && !g.has_edge(u, v) {
                return Err(invalid(
                    "constraint.edge_kappa",
                    alloc::format!("({}, {}) is not an edge of the topology", v.0, u.0),
                ));
            }
        }
        Ok(g)
    }
}

/// What honest client `id` did in one round.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClientRoundLog {
    pub id: ClientId,
    pub sample: DataSample,
    /// Model `x_v,t` the loss was evaluated at.
    pub model: ModelVector,
    pub loss: f64,
    pub loss_grad_norm: f64,
    pub trusted: Vec<ClientId>,
    /// Duals after the update, aligned with the client's neighbors.
    pub duals: Vec<f64>,
    /// Senders whose payloads were consumed, with their true origin.
    pub consumed: Vec<(ClientId, Origin)>,
}

/// `g(x_a,t, x_b,t)` on an honest edge `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EdgeRoundLog {
    pub a: ClientId,
    pub b: ClientId,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundLog {
    /// One-based round index.
    pub round: usize,
    /// Honest clients in id order.
    pub clients: Vec<ClientRoundLog>,
    pub edges: Vec<EdgeRoundLog>,
    /// Classification after this round's trust observations.
    pub classification: ClassificationCounts,
}

/// Mutable state of one realization.
#[derive(Debug, Clone)]
pub struct World {
    graph: GraphTopology,
    variant: Variant,
    params: AlgorithmParams,
    constraint: ConstraintParams,
    trust: TrustModel,
    attack: AttackStrategy,
    dim: usize,
    clients: Vec<ClientState>,
    ledger: TrustLedger,
    data: DataGenerator,
    trust_rngs: Vec<StreamRng>,
    attack_rngs: Vec<StreamRng>,
    honest_edges: Vec<(ClientId, ClientId)>,
    round: usize,
}

fn honest_view(g: &GraphTopology, c: &ConstraintParams) -> Result<(GraphTopology, ConstraintParams)> {
    let sub = g.honest_subgraph()?;
    let mut mapped = ConstraintParams::uniform(c.kappa);
    for ((v, u), k) in c.edge_overrides() {
        if let (Some(a), Some(b)) = (g.honest_rank(v), g.honest_rank(u)) {
            mapped.set_edge_kappa(ClientId(a), ClientId(b), k);
        }
    }
    Ok((sub, mapped))
}

impl World {
    /// Initial state (`x = 0`, `lambda = 0`, `beta = 0`) of realization `index`.
    pub fn new(config: &SimConfig, index: u64) -> Result<Self> {
        let full = config.validate()?;
        let (graph, constraint) = match config.variant {
            Variant::OldBaseline => honest_view(&full, &config.constraint)?,
            _ => (full, config.constraint.clone()),
        };
        Self::from_graph(config, graph, constraint, index)
    }

    fn from_graph(config: &SimConfig, graph: GraphTopology, constraint: ConstraintParams, index: u64) -> Result<Self> {
        let dim = config.task.dim;
        let seed = config.seed;
        let clients: Vec<ClientState> = graph
            .honest()
            .iter()
            .map(|&v| Ok(ClientState::new(v, graph.neighbors(v)?, dim)))
            .collect::<Result<_>>()?;
        let ledger = TrustLedger::new(&graph);
        let data = DataGenerator::new(config.task, config.algorithm.radius, clients.len(), seed, index);
        let trust_rngs = graph
            .honest()
            .iter()
            .map(|v| stream(seed, index, v.0 as u64, StreamTag::Trust))
            .collect();
        let attack_rngs = graph
            .byzantine()
            .iter()
            .map(|k| stream(seed, index, k.0 as u64, StreamTag::Attack))
            .collect();
        let honest_edges = graph.honest_edges();
        Ok(Self {
            variant: config.variant,
            params: config.algorithm,
            constraint,
            trust: config.trust,
            attack: config.attack.clone(),
            dim,
            clients,
            ledger,
            data,
            trust_rngs,
            attack_rngs,
            honest_edges,
            graph,
            round: 0,
        })
    }

    pub fn graph(&self) -> &GraphTopology {
        &self.graph
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn ledger(&self) -> &TrustLedger {
        &self.ledger
    }

    /// Mutable ledger, for pinning trust scores in experiments.
    pub fn ledger_mut(&mut self) -> &mut TrustLedger {
        &mut self.ledger
    }

    /// Rounds completed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn classification(&self) -> ClassificationCounts {
        classification_counts(&self.ledger, &self.graph)
    }

    /// Runs one synchronous round and returns its log.
    pub fn run_round(&mut self) -> Result<RoundLog> {
        let t = self.round + 1;
        let samples: Vec<DataSample> = (0..self.clients.len()).map(|r| self.data.sample(r)).collect();

        // Exchange: everything sent this round is built from round-t state.
        let mut inboxes: Vec<Vec<RoundMessage>> = alloc::vec![Vec::new(); self.graph.num_clients()];
        for c in &self.clients {
            for m in outgoing_messages(c, &self.graph)? {
                inboxes[m.receiver.0].push(m);
            }
        }
        if !self.graph.byzantine().is_empty() {
            let observed: Vec<&[f64]> = self.clients.iter().map(|c| &c.model[..]).collect();
            for (k, rng) in self.graph.byzantine().iter().zip(&mut self.attack_rngs) {
                let targets: Vec<ClientId> = self
                    .graph
                    .out_neighbors(*k)?
                    .iter()
                    .copied()
                    .filter(|&u| self.graph.is_honest(u))
                    .collect();
                for m in byzantine_messages(&self.attack, *k, &observed, &targets, self.dim, rng) {
                    inboxes[m.receiver.0].push(m);
                }
            }
        }
        for inbox in &mut inboxes {
            inbox.sort_by_key(|m| m.sender);
        }

        // Trust observations for every neighbor, filtered or not.
        for (i, rng) in self.trust_rngs.iter_mut().enumerate() {
            for j in 0..self.ledger.observer_neighbors(i).len() {
                let u = self.ledger.observer_neighbors(i)[j];
                let alpha = self.trust.sample(self.graph.is_byzantine(u), rng);
                self.ledger.accumulate_slot(i, j, alpha);
            }
        }
        self.ledger.close_round();
        let classification = classification_counts(&self.ledger, &self.graph);

        let edges: Vec<EdgeRoundLog> = self
            .honest_edges
            .iter()
            .map(|&(a, b)| {
                let xa = &self.clients[self.graph.honest_rank(a).unwrap_or(0)].model;
                let xb = &self.clients[self.graph.honest_rank(b).unwrap_or(0)].model;
                EdgeRoundLog {
                    a,
                    b,
                    value: constraint_value(xa, xb, self.constraint.kappa_for(a, b)),
                }
            })
            .collect();

        let mut logs = Vec::with_capacity(self.clients.len());
        for (i, (client, sample)) in self.clients.iter_mut().zip(samples).enumerate() {
            let v = client.id;
            let trusted: Vec<ClientId> = match self.variant {
                Variant::Trusted => self.ledger.trusted_set(v)?,
                Variant::OldBaseline => client.neighbors().to_vec(),
                Variant::OracleFilter => client
                    .neighbors()
                    .iter()
                    .copied()
                    .filter(|&u| self.graph.is_honest(u))
                    .collect(),
            };
            let model = client.model.clone();
            let out = client.step(&inboxes[v.0], &trusted, &sample, &self.params, &self.constraint)?;
            debug_assert_eq!(self.graph.honest_rank(v), Some(i));
            logs.push(ClientRoundLog {
                id: v,
                sample,
                model,
                loss: out.loss,
                loss_grad_norm: out.loss_grad_norm,
                trusted,
                duals: client.duals().to_vec(),
                consumed: out.consumed,
            });
        }

        self.data.advance();
        self.round = t;
        Ok(RoundLog {
            round: t,
            clients: logs,
            edges,
            classification,
        })
    }

    /// Honest edges by rank with their radii, for the comparator.
    pub fn rank_edges(&self) -> Vec<RankEdge> {
        self.honest_edges
            .iter()
            .map(|&(a, b)| RankEdge {
                a: self.graph.honest_rank(a).unwrap_or(0),
                b: self.graph.honest_rank(b).unwrap_or(0),
                kappa: self.constraint.kappa_for(a, b),
            })
            .collect()
    }
}

/// Empirical problem constants observed along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmpiricalConstants {
    /// Largest observed loss-gradient norm.
    pub g: f64,
    /// Largest observed `|g_vu|` on honest edges.
    pub c: f64,
    /// Largest observed constraint slope `2 ||x_v - x_u||` on honest edges.
    pub b: f64,
}

impl EmpiricalConstants {
    pub fn from_logs(logs: &[RoundLog]) -> Self {
        let mut k = Self::default();
        for log in logs {
            for c in &log.clients {
                k.g = k.g.max(c.loss_grad_norm);
            }
            for e in &log.edges {
                k.c = k.c.max(e.value.abs());
            }
        }
        // The slope needs both endpoint models; recover them by id.
        for log in logs {
            for e in &log.edges {
                let find = |id: ClientId| log.clients.iter().find(|c| c.id == id).map(|c| &c.model);
                if let (Some(xa), Some(xb)) = (find(e.a), find(e.b)) {
                    k.b = k.b.max(2.0 * libm::sqrt(dist_sq(xa, xb)));
                }
            }
        }
        k
    }

    pub fn max(self, other: Self) -> Self {
        Self {
            g: self.g.max(other.g),
            c: self.c.max(other.c),
            b: self.b.max(other.b),
        }
    }
}

/// Per-round metric series of one realization; entry `i` is round `i + 1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RealizationSeries {
    pub cumulative_regret: Vec<f64>,
    pub cumulative_violation_mean: Vec<f64>,
    pub cumulative_violation_max: Vec<f64>,
    pub misclass_honest: Vec<f64>,
    pub misclass_byz: Vec<f64>,
}

impl RealizationSeries {
    pub fn timeavg(values: &[f64]) -> Vec<f64> {
        values.iter().enumerate().map(|(i, v)| v / (i + 1) as f64).collect()
    }
}

/// Outcome of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationResult {
    pub index: u64,
    /// Full round logs; emptied by [`run_experiment`] to bound memory.
    pub logs: Vec<RoundLog>,
    /// Classification after `t` rounds, `t = 0..=T`.
    pub classification: Vec<ClassificationCounts>,
    pub comparator: Comparator,
    pub series: RealizationSeries,
    pub tf: Option<usize>,
    pub constants: EmpiricalConstants,
}

/// Runs realization `index` of `config` and computes its metrics.
pub fn run_realization(config: &SimConfig, index: u64) -> Result<RealizationResult> {
    let wrap = |e: Error| Error::Realization {
        index: index as usize,
        source: alloc::boxed::Box::new(e),
    };
    let mut world = World::new(config, index).map_err(wrap)?;
    let horizon = config.horizon();
    let mut logs = Vec::with_capacity(horizon);
    let mut classification = Vec::with_capacity(horizon + 1);
    classification.push(world.classification());
    for _ in 0..horizon {
        let log = world.run_round().map_err(wrap)?;
        classification.push(log.classification);
        logs.push(log);
    }

    let n = world.clients().len();
    let mut dataset: Vec<Vec<DataSample>> = (0..n).map(|_| Vec::with_capacity(horizon)).collect();
    for log in &logs {
        for (rank, c) in log.clients.iter().enumerate() {
            dataset[rank].push(c.sample.clone());
        }
    }
    let comparator = solve_comparator(
        &dataset,
        &world.rank_edges(),
        config.task.dim,
        config.algorithm.radius,
        &config.comparator,
    )
    .map_err(wrap)?;

    let regret = regret_series(&logs, &comparator).map_err(wrap)?;
    let (vmean, vmax) = violation_series(&logs);
    let series = RealizationSeries {
        cumulative_regret: regret.values,
        cumulative_violation_mean: vmean.values,
        cumulative_violation_max: vmax.values,
        misclass_honest: classification[1..].iter().map(|c| c.honest_rate()).collect(),
        misclass_byz: classification[1..].iter().map(|c| c.byzantine_rate()).collect(),
    };
    Ok(RealizationResult {
        index,
        tf: measure_tf(&classification),
        constants: EmpiricalConstants::from_logs(&logs),
        logs,
        classification,
        comparator,
        series,
    })
}

/// Realization-averaged series. Time averages are taken per realization
/// and then averaged.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeanSeries {
    pub cumulative_regret: Vec<f64>,
    pub cumulative_violation_mean: Vec<f64>,
    pub timeavg_regret: Vec<f64>,
    pub timeavg_violation_mean: Vec<f64>,
    pub timeavg_violation_max: Vec<f64>,
    pub misclass_honest: Vec<f64>,
    pub misclass_byz: Vec<f64>,
}

/// Averaged results plus per-realization outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub variant: Variant,
    pub horizon: usize,
    /// Sorted by realization index.
    pub realizations: Vec<RealizationResult>,
    pub mean: MeanSeries,
    pub constants: EmpiricalConstants,
}

impl ExperimentResult {
    pub fn tf_values(&self) -> Vec<Option<usize>> {
        self.realizations.iter().map(|r| r.tf).collect()
    }
}

fn mean_of<F: Fn(&RealizationResult) -> Vec<f64>>(rs: &[RealizationResult], horizon: usize, f: F) -> Vec<f64> {
    let mut acc = alloc::vec![0.0; horizon];
    for r in rs {
        for (a, v) in acc.iter_mut().zip(f(r)) {
            *a += v;
        }
    }
    let n = rs.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Averages realization results in index order, so the mean does not
/// depend on the order they were produced in.
pub fn aggregate(config: &SimConfig, mut results: Vec<RealizationResult>) -> ExperimentResult {
    results.sort_by_key(|r| r.index);
    let horizon = config.horizon();
    let rs = &results;
    let mean = MeanSeries {
        cumulative_regret: mean_of(rs, horizon, |r| r.series.cumulative_regret.clone()),
        cumulative_violation_mean: mean_of(rs, horizon, |r| r.series.cumulative_violation_mean.clone()),
        timeavg_regret: mean_of(rs, horizon, |r| RealizationSeries::timeavg(&r.series.cumulative_regret)),
        timeavg_violation_mean: mean_of(rs, horizon, |r| {
            RealizationSeries::timeavg(&r.series.cumulative_violation_mean)
        }),
        timeavg_violation_max: mean_of(rs, horizon, |r| {
            RealizationSeries::timeavg(&r.series.cumulative_violation_max)
        }),
        misclass_honest: mean_of(rs, horizon, |r| r.series.misclass_honest.clone()),
        misclass_byz: mean_of(rs, horizon, |r| r.series.misclass_byz.clone()),
    };
    let constants = results
        .iter()
        .fold(EmpiricalConstants::default(), |k, r| k.max(r.constants));
    ExperimentResult {
        variant: config.variant,
        horizon,
        realizations: results,
        mean,
        constants,
    }
}

/// Runs realizations `0..config.realizations` one after another and
/// averages them. Round logs are dropped after each realization.
pub fn run_experiment(config: &SimConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let mut results = Vec::with_capacity(config.realizations);
    for i in 0..config.realizations {
        let mut r = run_realization(config, i as u64)?;
        r.logs = Vec::new();
        results.push(r);
    }
    Ok(aggregate(config, results))
}

/// Short human-readable description of a config.
pub fn describe(config: &SimConfig) -> String {
    alloc::format!(
        "{} clients ({} Byzantine), T = {}, variant {}, attack {}",
        config.topology.clients,
        config.topology.byzantine,
        config.horizon(),
        config.variant,
        config.attack.kind
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AttackKind;

    fn tiny(variant: Variant, clients: usize, byzantine: usize, horizon: usize) -> SimConfig {
        let mut task = TaskParams::default();
        task.dim = 2;
        SimConfig {
            topology: TopologySpec::complete(clients, byzantine),
            task,
            algorithm: AlgorithmParams::for_horizon(horizon, 1.0, 1.0),
            variant,
            realizations: 1,
            ..SimConfig::default()
        }
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("median".parse::<Variant>().is_err());
    }

    #[test]
    fn empty_horizon() {
        let r = run_realization(&tiny(Variant::Trusted, 4, 1, 0), 0).unwrap();
        assert!(r.logs.is_empty());
        assert!(r.series.cumulative_regret.is_empty());
        assert_eq!(r.comparator.achieved_objective, 0.0);
    }

    #[test]
    fn determinism() {
        let c = tiny(Variant::Trusted, 6, 3, 15);
        let a = run_realization(&c, 2).unwrap();
        let b = run_realization(&c, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_filter_trusts_honest_neighbors() {
        let c = tiny(Variant::OracleFilter, 6, 3, 10);
        let r = run_realization(&c, 0).unwrap();
        for log in &r.logs {
            for cl in &log.clients {
                let honest: Vec<ClientId> = (3..6).map(ClientId).filter(|&u| u != cl.id).collect();
                assert_eq!(cl.trusted, honest);
                assert!(cl.consumed.iter().all(|(_, o)| *o == Origin::Honest));
            }
        }
    }

    #[test]
    fn attack_does_not_perturb_data_or_trust() {
        let mut a = tiny(Variant::Trusted, 6, 3, 12);
        let mut b = a.clone();
        a.attack = AttackStrategy::new(AttackKind::GaussianNoise, 10.0);
        b.attack = AttackStrategy::new(AttackKind::SignFlip, 2.0);
        let ra = run_realization(&a, 0).unwrap();
        let rb = run_realization(&b, 0).unwrap();
        assert_eq!(ra.classification, rb.classification);
        for (la, lb) in ra.logs.iter().zip(&rb.logs) {
            for (ca, cb) in la.clients.iter().zip(&lb.clients) {
                assert_eq!(ca.sample, cb.sample);
                assert_eq!(ca.trusted, cb.trusted);
            }
        }
    }

    #[test]
    fn experiment_of_one_equals_realization() {
        let c = tiny(Variant::Trusted, 5, 2, 20);
        let e = run_experiment(&c).unwrap();
        let r = run_realization(&c, 0).unwrap();
        assert_eq!(e.mean.cumulative_regret, r.series.cumulative_regret);
        assert_eq!(e.mean.misclass_byz, r.series.misclass_byz);
    }

    #[test]
    fn aggregation_ignores_order() {
        let mut c = tiny(Variant::Trusted, 5, 2, 10);
        c.realizations = 3;
        let rs: Vec<RealizationResult> = (0..3).map(|i| run_realization(&c, i).unwrap()).collect();
        let forward = aggregate(&c, rs.clone());
        let mut reversed = rs;
        reversed.reverse();
        assert_eq!(forward, aggregate(&c, reversed));
    }

    #[test]
    fn invalid_configs() {
        let mut c = tiny(Variant::Trusted, 4, 1, 5);
        c.realizations = 0;
        assert!(run_experiment(&c).is_err());
        let c = tiny(Variant::Trusted, 4, 4, 5);
        assert!(World::new(&c, 0).is_err());
    }
}
