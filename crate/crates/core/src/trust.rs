//! Stochastic trust observations and accumulated trust scores.
//!
//! Every round an honest client `v` observes a probability `alpha_vu(t)` for
//! each neighbor `u` and accumulates `beta_vu += alpha_vu - 1/2`. Neighbors
//! with `beta_vu >= 0` form the trusted set.
//!
//! Scores are kept as integers in units of `2^-100`. Every `alpha` that is
//! not astronomically small converts exactly, and integer addition makes the
//! accumulated score independent of the order of observations.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::topology::{ClientId, GraphTopology};

/// Distribution of trust observations for honest and Byzantine senders.
///
/// Observations are uniform on `[mean - spread/2, mean + spread/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrustModel {
    pub mean_honest: f64,
    pub mean_byzantine: f64,
    pub spread: f64,
}

impl Default for TrustModel {
    fn default() -> Self {
        Self {
            mean_honest: 0.55,
            mean_byzantine: 0.45,
            spread: 0.8,
        }
    }
}

impl TrustModel {
    pub fn new(mean_honest: f64, mean_byzantine: f64, spread: f64) -> Result<Self> {
        let m = Self {
            mean_honest,
            mean_byzantine,
            spread,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spread >= 0.0) {
            return Err(invalid("trust.spread", "must be nonnegative"));
        }
        if !(self.honest_drift() >= 0.0) {
            return Err(invalid("trust.mean_honest", "must be at least 0.5"));
        }
        if !(self.byzantine_drift() < 0.0) {
            return Err(invalid("trust.mean_byzantine", "must be below 0.5"));
        }
        let half = self.spread / 2.0;
        for (name, mean) in [
            ("trust.mean_honest", self.mean_honest),
            ("trust.mean_byzantine", self.mean_byzantine),
        ] {
            if mean - half < 0.0 || mean + half > 1.0 {
                return Err(invalid(name, "mean +/- spread/2 must stay within [0, 1]"));
            }
        }
        Ok(())
    }

    /// `E_v = E[alpha] - 1/2` for honest senders.
    pub fn honest_drift(&self) -> f64 {
        self.mean_honest - 0.5
    }

    /// `E_b = E[alpha] - 1/2` for Byzantine senders.
    pub fn byzantine_drift(&self) -> f64 {
        self.mean_byzantine - 0.5
    }

    /// Draws one trust observation for a sender of the given class.
    pub fn sample<R: Rng + ?Sized>(&self, sender_is_byzantine: bool, rng: &mut R) -> f64 {
        let mean = if sender_is_byzantine {
            self.mean_byzantine
        } else {
            self.mean_honest
        };
        if self.spread == 0.0 {
            return mean;
        }
        let lo = mean - self.spread / 2.0;
        (lo + self.spread * rng.random::<f64>()).clamp(0.0, 1.0)
    }
}

/// Free-function form of [`TrustModel::sample`].
pub fn sample_trust<R: Rng + ?Sized>(model: &TrustModel, sender_is_byzantine: bool, rng: &mut R) -> f64 {
    model.sample(sender_is_byzantine, rng)
}

const FIXED_SCALE: f64 = 1_267_650_600_228_229_401_496_703_205_376.0; // 2^100
const FIXED_HALF: i128 = 1 << 99;

#[inline]
fn alpha_to_fixed(alpha: f64) -> i128 {
    (alpha * FIXED_SCALE) as i128
}

#[inline]
fn fixed_to_f64(x: i128) -> f64 {
    x as f64 / FIXED_SCALE
}

/// Accumulated trust scores `beta_vu` for every honest observer and each of
/// its neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustLedger {
    observers: Vec<ClientId>,
    neighbors: Vec<Vec<ClientId>>,
    // Parallel to `neighbors`; fixed point, units of 2^-100.
    scores: Vec<Vec<i128>>,
    rounds: usize,
}

impl TrustLedger {
    /// A ledger with `beta_vu(0) = 0` for every honest `v` and neighbor `u`.
    pub fn new(g: &GraphTopology) -> Self {
        let observers = g.honest().to_vec();
        let neighbors: Vec<Vec<ClientId>> = observers
            .iter()
            .map(|&v| g.neighbors(v).expect("honest ids are valid").to_vec())
            .collect();
        let scores = neighbors.iter().map(|n| alloc::vec![0i128; n.len()]).collect();
        Self {
            observers,
            neighbors,
            scores,
            rounds: 0,
        }
    }

    fn observer_index(&self, v: ClientId) -> Result<usize> {
        self.observers
            .binary_search(&v)
            .map_err(|_| Error::ByzantineObserver(v.0))
    }

    fn slot(&self, v: ClientId, u: ClientId) -> Result<(usize, usize)> {
        let i = self.observer_index(v)?;
        let j = self.neighbors[i]
            .binary_search(&u)
            .map_err(|_| Error::InvalidEdge(u.0, v.0))?;
        Ok((i, j))
    }

    /// Adds one observation `alpha` to `beta_vu` and returns the new score.
    pub fn accumulate(&mut self, v: ClientId, u: ClientId, alpha: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid("alpha", "trust observations must lie in [0, 1]"));
        }
        let (i, j) = self.slot(v, u)?;
        self.accumulate_slot(i, j, alpha);
        Ok(fixed_to_f64(self.scores[i][j]))
    }

    #[inline]
    pub(crate) fn accumulate_slot(&mut self, observer: usize, slot: usize, alpha: f64) {
        self.scores[observer][slot] += alpha_to_fixed(alpha) - FIXED_HALF;
    }

    /// Marks the end of a round of observations.
    pub fn close_round(&mut self) {
        self.rounds += 1;
    }

    /// Number of closed rounds.
    pub fn observation_count(&self) -> usize {
        self.rounds
    }

    pub fn beta(&self, v: ClientId, u: ClientId) -> Result<f64> {
        let (i, j) = self.slot(v, u)?;
        Ok(fixed_to_f64(self.scores[i][j]))
    }

    /// `beta_vu >= 0`, evaluated on the exact accumulated value.
    pub fn is_trusted(&self, v: ClientId, u: ClientId) -> Result<bool> {
        let (i, j) = self.slot(v, u)?;
        Ok(self.scores[i][j] >= 0)
    }

    #[inline]
    pub(crate) fn slot_trusted(&self, observer: usize, slot: usize) -> bool {
        self.scores[observer][slot] >= 0
    }

    /// Overwrites `beta_vu`. Used to pin trust decisions in experiments.
    pub fn set_beta(&mut self, v: ClientId, u: ClientId, beta: f64) -> Result<()> {
        let (i, j) = self.slot(v, u)?;
        self.scores[i][j] = (beta * FIXED_SCALE) as i128;
        Ok(())
    }

    pub fn observers(&self) -> &[ClientId] {
        &self.observers
    }

    pub(crate) fn observer_neighbors(&self, observer: usize) -> &[ClientId] {
        &self.neighbors[observer]
    }

    /// Trusted set of honest client `v`: neighbors with `beta_vu >= 0`.
    pub fn trusted_set(&self, v: ClientId) -> Result<Vec<ClientId>> {
        let i = self.observer_index(v)?;
        Ok(self.neighbors[i]
            .iter()
            .zip(&self.scores[i])
            .filter(|(_, &s)| s >= 0)
            .map(|(&u, _)| u)
            .collect())
    }
}

/// Trusted set of honest client `v` under `ledger`.
pub fn trusted_set(ledger: &TrustLedger, g: &GraphTopology, v: ClientId) -> Result<Vec<ClientId>> {
    if !g.contains(v) {
        return Err(Error::UnknownClient(v.0));
    }
    if g.is_byzantine(v) {
        return Err(Error::ByzantineObserver(v.0));
    }
    ledger.trusted_set(v)
}

/// Whether one directed observation edge is currently classified correctly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeClassification {
    pub observer: ClientId,
    pub sender: ClientId,
    pub sender_is_byzantine: bool,
    pub trusted: bool,
}

impl EdgeClassification {
    /// Correct iff trusted exactly when the sender is honest.
    pub fn correct(&self) -> bool {
        self.trusted != self.sender_is_byzantine
    }
}

/// Misclassification counts split by the sender's class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassificationCounts {
    pub honest_pairs: usize,
    pub honest_misclassified: usize,
    pub byzantine_pairs: usize,
    pub byzantine_misclassified: usize,
}

impl ClassificationCounts {
    pub fn record(&mut self, sender_is_byzantine: bool, trusted: bool) {
        if sender_is_byzantine {
            self.byzantine_pairs += 1;
            self.byzantine_misclassified += usize::from(trusted);
        } else {
            self.honest_pairs += 1;
            self.honest_misclassified += usize::from(!trusted);
        }
    }

    pub fn is_perfect(&self) -> bool {
        self.honest_misclassified == 0 && self.byzantine_misclassified == 0
    }

    pub fn honest_rate(&self) -> f64 {
        ratio(self.honest_misclassified, self.honest_pairs)
    }

    pub fn byzantine_rate(&self) -> f64 {
        ratio(self.byzantine_misclassified, self.byzantine_pairs)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-edge classification record for every honest observer.
pub fn classification_state(ledger: &TrustLedger, g: &GraphTopology) -> Vec<EdgeClassification> {
    let mut out = Vec::new();
    for (i, &v) in ledger.observers.iter().enumerate() {
        for (j, &u) in ledger.neighbors[i].iter().enumerate() {
            out.push(EdgeClassification {
                observer: v,
                sender: u,
                sender_is_byzantine: g.is_byzantine(u),
                trusted: ledger.scores[i][j] >= 0,
            });
        }
    }
    out
}

/// Aggregated form of [`classification_state`].
pub fn classification_counts(ledger: &TrustLedger, g: &GraphTopology) -> ClassificationCounts {
    let mut c = ClassificationCounts::default();
    for (i, nbrs) in ledger.neighbors.iter().enumerate() {
        for (j, &u) in nbrs.iter().enumerate() {
            c.record(g.is_byzantine(u), ledger.slot_trusted(i, j));
        }
    }
    c
}

/// Class of the neighbor whose misclassification probability is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborClass {
    Honest,
    Byzantine,
}

/// Hoeffding-type bound on the misclassification probability after `t`
/// observations with drift `drift = E[alpha] - 1/2`:
/// `max(exp(-2 t drift^2), [drift on the wrong side of zero])`.
///
/// For honest neighbors the wrong side is `drift < 0`; for Byzantine
/// neighbors it is `drift >= 0`.
pub fn misclassification_bound(t: usize, drift: f64, class: NeighborClass) -> f64 {
    let wrong_side = match class {
        NeighborClass::Honest => drift < 0.0,
        NeighborClass::Byzantine => drift >= 0.0,
    };
    if wrong_side {
        return 1.0;
    }
    libm::exp(-2.0 * t as f64 * drift * drift)
}

/// Classification after every round of a trust process run in isolation.
/// Entry `t` describes the state after `t` observations; entry 0 is the
/// initial all-zero ledger.
pub fn simulate_trust_process<R: Rng + ?Sized>(
    g: &GraphTopology,
    model: &TrustModel,
    rounds: usize,
    rng: &mut R,
) -> Vec<ClassificationCounts> {
    let mut ledger = TrustLedger::new(g);
    let classes: Vec<Vec<bool>> = ledger
        .neighbors
        .iter()
        .map(|n| n.iter().map(|&u| g.is_byzantine(u)).collect())
        .collect();
    let mut history = Vec::with_capacity(rounds + 1);
    history.push(classification_counts(&ledger, g));
    for _ in 0..rounds {
        let mut counts = ClassificationCounts::default();
        for (i, cls) in classes.iter().enumerate() {
            for (j, &byz) in cls.iter().enumerate() {
                ledger.accumulate_slot(i, j, model.sample(byz, rng));
                counts.record(byz, ledger.slot_trusted(i, j));
            }
        }
        ledger.close_round();
        history.push(counts);
    }
    history
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamTag};
    use crate::topology::{build_topology, TopologySpec};
    use alloc::vec;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn model_validation() {
        assert!(TrustModel::default().validate().is_ok());
        assert!(TrustModel::new(0.45, 0.45, 0.8).is_err());
        assert!(TrustModel::new(0.55, 0.5, 0.8).is_err());
        assert!(TrustModel::new(0.55, 0.45, 1.0).is_err());
        assert!(TrustModel::new(0.55, 0.45, -0.1).is_err());
        assert!(TrustModel::new(0.5, 0.2, 0.0).is_ok());
    }

    #[test]
    fn samples_stay_in_interval_with_right_mean() {
        let m = TrustModel::default();
        let mut rng = stream(1, 0, 0, StreamTag::Trust);
        let n = 100_000;
        for (byz, lo, hi, mean) in [(false, 0.15, 0.95, 0.55), (true, 0.05, 0.85, 0.45)] {
            let mut sum = 0.0;
            for _ in 0..n {
                let a = m.sample(byz, &mut rng);
                assert!((lo..=hi).contains(&a));
                sum += a;
            }
            assert!((sum / n as f64 - mean).abs() < 0.01);
        }
    }

    #[test]
    fn zero_spread_returns_mean() {
        let m = TrustModel::new(0.6, 0.3, 0.0).unwrap();
        let mut rng = stream(1, 0, 0, StreamTag::Trust);
        assert_eq!(m.sample(false, &mut rng), 0.6);
        assert_eq!(m.sample(true, &mut rng), 0.3);
    }

    fn two_client_ledger() -> (GraphTopology, TrustLedger) {
        let g = build_topology(&TopologySpec::complete(3, 0)).unwrap();
        let l = TrustLedger::new(&g);
        (g, l)
    }

    #[test]
    fn accumulate_arithmetic() {
        let (_, mut l) = two_client_ledger();
        let (v, u) = (ClientId(0), ClientId(1));
        assert_eq!(l.accumulate(v, u, 0.5).unwrap(), 0.0);
        l.accumulate(v, u, 0.6).unwrap();
        assert!(approx(l.accumulate(v, u, 0.7).unwrap(), 0.3));

        let w = ClientId(2);
        l.set_beta(v, w, 0.1).unwrap();
        assert!(approx(l.accumulate(v, w, 0.2).unwrap(), -0.2));
        assert!(l.accumulate(v, w, 1.5).is_err());
    }

    #[test]
    fn trusted_set_threshold_is_inclusive() {
        let (g, mut l) = two_client_ledger();
        let v = ClientId(0);
        assert_eq!(trusted_set(&l, &g, v).unwrap(), vec![ClientId(1), ClientId(2)]);
        l.set_beta(v, ClientId(1), 0.2).unwrap();
        l.set_beta(v, ClientId(2), -0.1).unwrap();
        assert_eq!(trusted_set(&l, &g, v).unwrap(), vec![ClientId(1)]);
        l.set_beta(v, ClientId(1), 0.0).unwrap();
        assert!(l.is_trusted(v, ClientId(1)).unwrap());
    }

    #[test]
    fn byzantine_observer_is_rejected() {
        let g = build_topology(&TopologySpec::complete(3, 1)).unwrap();
        let l = TrustLedger::new(&g);
        assert_eq!(trusted_set(&l, &g, ClientId(0)), Err(Error::ByzantineObserver(0)));
    }

    #[test]
    fn classification_records() {
        let g = build_topology(&TopologySpec::complete(3, 1)).unwrap();
        let mut l = TrustLedger::new(&g);
        // t = 0: every Byzantine neighbor is misclassified.
        let c0 = classification_counts(&l, &g);
        assert_eq!(c0.byzantine_misclassified, c0.byzantine_pairs);
        assert_eq!(c0.honest_misclassified, 0);

        l.set_beta(ClientId(1), ClientId(2), -0.05).unwrap();
        l.set_beta(ClientId(1), ClientId(0), -3.1).unwrap();
        let state = classification_state(&l, &g);
        let find = |v, u| {
            *state
                .iter()
                .find(|e| e.observer == ClientId(v) && e.sender == ClientId(u))
                .unwrap()
        };
        assert!(!find(1, 2).correct());
        assert!(find(1, 0).correct());
    }

    #[test]
    fn misclassification_bound_values() {
        assert_eq!(misclassification_bound(0, 0.05, NeighborClass::Honest), 1.0);
        assert!((misclassification_bound(50, 0.05, NeighborClass::Honest) - libm::exp(-0.25)).abs() < 1e-15);
        assert!((misclassification_bound(50, 0.05, NeighborClass::Honest) - 0.7788).abs() < 1e-4);
        assert_eq!(misclassification_bound(50, -0.05, NeighborClass::Honest), 1.0);
        assert_eq!(misclassification_bound(50, 0.0, NeighborClass::Byzantine), 1.0);
        assert!((misclassification_bound(50, -0.05, NeighborClass::Byzantine) - libm::exp(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn process_history_starts_at_initial_state() {
        let g = build_topology(&TopologySpec::complete(5, 2)).unwrap();
        let mut rng = stream(3, 0, 0, StreamTag::TrustProcess);
        let h = simulate_trust_process(&g, &TrustModel::default(), 10, &mut rng);
        assert_eq!(h.len(), 11);
        assert_eq!(h[0].byzantine_misclassified, h[0].byzantine_pairs);
    }
}
