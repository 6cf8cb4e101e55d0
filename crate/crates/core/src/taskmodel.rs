//! Time-varying logistic regression tasks and the proximity constraint.
//!
//! Each honest client classifies Gaussian features with a hidden ground
//! truth `w_v,t`. Ground truths start as perturbations of a shared center
//! and rotate together under a shared random drift, so tasks are distinct
//! but related. Neighbors are coupled through
//! `g_vu(x_v, x_u) = ||x_v - x_u||^2 - kappa_vu^2 <= 0`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::rng::{stream, StreamRng, StreamTag};
use crate::topology::ClientId;
use crate::vector::{axpy, dist_sq, dot, norm, scale};

/// One labeled observation `(l, psi)` with `l` in `{-1, +1}`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DataSample {
    pub label: i8,
    pub features: Vec<f64>,
}

impl DataSample {
    pub fn new(label: i8, features: Vec<f64>) -> Self {
        debug_assert!(label == 1 || label == -1);
        Self { label, features }
    }

    #[inline]
    pub fn sign(&self) -> f64 {
        f64::from(self.label)
    }
}

/// Parameters of the data distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TaskParams {
    pub dim: usize,
    /// Scale of the shared per-round Gaussian drift of the ground truths.
    pub drift_rate: f64,
    /// Size of each client's perturbation away from the shared center.
    pub heterogeneity: f64,
    /// Probability of flipping a label.
    pub label_noise: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        Self {
            dim: 5,
            drift_rate: 0.01,
            heterogeneity: 0.3,
            label_noise: 0.05,
        }
    }
}

impl TaskParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("task.dim", "must be positive"));
        }
        if !(self.drift_rate >= 0.0) || !self.drift_rate.is_finite() {
            return Err(invalid("task.drift_rate", "must be a nonnegative number"));
        }
        if !(self.heterogeneity >= 0.0) || !self.heterogeneity.is_finite() {
            return Err(invalid("task.heterogeneity", "must be a nonnegative number"));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(invalid("task.label_noise", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize_to(v: &mut [f64], radius: f64) -> bool {
    let n = norm(v);
    if n > 0.0 && n.is_finite() {
        scale(radius / n, v);
        true
    } else {
        false
    }
}

/// Builds a sample with label `sign(psi . w)` (ties count as `+1`),
/// flipped when `flip` is set.
pub fn labeled_sample(features: Vec<f64>, ground_truth: &[f64], flip: bool) -> DataSample {
    let clean: i8 = if dot(&features, ground_truth) >= 0.0 { 1 } else { -1 };
    DataSample::new(if flip { -clean } else { clean }, features)
}

/// Draws one sample for ground truth `w`: standard Gaussian features and a
/// label flipped with probability `label_noise`.
pub fn generate_sample<R: Rng + ?Sized>(ground_truth: &[f64], label_noise: f64, rng: &mut R) -> DataSample {
    let features = gaussian(ground_truth.len(), rng);
    // Always consume the flip draw so the stream layout does not depend on
    // the noise level.
    let u: f64 = rng.random();
    labeled_sample(features, ground_truth, u < label_noise)
}

/// Stateful data source for the honest clients of one realization.
///
/// Clients are addressed by honest rank. Feature draws use one stream per
/// client, the initial perturbation another, and the shared center and
/// drift a third, so the generator is reproducible regardless of how many
/// other consumers exist.
#[derive(Debug, Clone)]
pub struct DataGenerator {
    params: TaskParams,
    radius: f64,
    ground_truth: Vec<Vec<f64>>,
    data_rngs: Vec<StreamRng>,
    drift_rng: StreamRng,
}

impl DataGenerator {
    pub fn new(params: TaskParams, radius: f64, clients: usize, seed: u64, realization: u64) -> Self {
        let d = params.dim;
        let mut drift_rng = stream(seed, realization, 0, StreamTag::Drift);
        let mut center = gaussian(d, &mut drift_rng);
        if !normalize_to(&mut center, 1.0) {
            center = alloc::vec![0.0; d];
            center[0] = 1.0;
        }
        let ground_truth = (0..clients)
            .map(|rank| {
                let mut task_rng = stream(seed, realization, rank as u64, StreamTag::Task);
                let mut dir = gaussian(d, &mut task_rng);
                if !normalize_to(&mut dir, 1.0) {
                    dir = alloc::vec![0.0; d];
                }
                let mut w = center.clone();
                axpy(params.heterogeneity, &dir, &mut w);
                if !normalize_to(&mut w, radius) {
                    w = center.clone();
                    scale(radius, &mut w);
                }
                w
            })
            .collect();
        let data_rngs = (0..clients)
            .map(|rank| stream(seed, realization, rank as u64, StreamTag::Data))
            .collect();
        Self {
            params,
            radius,
            ground_truth,
            data_rngs,
            drift_rng,
        }
    }

    pub fn clients(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn ground_truth(&self, rank: usize) -> &[f64] {
        &self.ground_truth[rank]
    }

    /// Draws client `rank`'s sample for the current round.
    pub fn sample(&mut self, rank: usize) -> DataSample {
        generate_sample(&self.ground_truth[rank], self.params.label_noise, &mut self.data_rngs[rank])
    }

    /// Moves every ground truth one round forward:
    /// `w <- r * normalize(w / r + drift_rate * z)` with a shared Gaussian `z`.
    pub fn advance(&mut self) {
        if self.params.drift_rate == 0.0 {
            return;
        }
        let z = gaussian(self.params.dim, &mut self.drift_rng);
        let inv_r = 1.0 / self.radius;
        for w in &mut self.ground_truth {
            scale(inv_r, w);
            axpy(self.params.drift_rate, &z, w);
            normalize_to(w, self.radius);
        }
    }
}

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Logistic loss `log(1 + exp(-l psi . x))`.
pub fn loss(x: &[f64], s: &DataSample) -> f64 {
    softplus(-s.sign() * dot(&s.features, x))
}

/// Gradient of [`loss`] written into `out`.
pub fn loss_grad_into(x: &[f64], s: &DataSample, out: &mut [f64]) {
    let l = s.sign();
    let coef = -l * sigmoid(-l * dot(&s.features, x));
    for (o, p) in out.iter_mut().zip(&s.features) {
        *o = coef * p;
    }
}

/// Gradient of [`loss`]: `-l psi sigma(-l psi . x)`.
pub fn loss_grad(x: &[f64], s: &DataSample) -> Vec<f64> {
    let mut out = alloc::vec![0.0; x.len()];
    loss_grad_into(x, s, &mut out);
    out
}

/// Similarity radii for the proximity constraint: a global `kappa` with
/// optional per-edge overrides. Overrides are keyed by the unordered pair so
/// `kappa_vu == kappa_uv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintParams {
    pub kappa: f64,
    edge_kappa: BTreeMap<(ClientId, ClientId), f64>,
}

impl Default for ConstraintParams {
    fn default() -> Self {
        Self::uniform(0.5)
    }
}

impl ConstraintParams {
    pub fn uniform(kappa: f64) -> Self {
        Self {
            kappa,
            edge_kappa: BTreeMap::new(),
        }
    }

    fn key(v: ClientId, u: ClientId) -> (ClientId, ClientId) {
        if v <= u {
            (v, u)
        } else {
            (u, v)
        }
    }

    pub fn set_edge_kappa(&mut self, v: ClientId, u: ClientId, kappa: f64) {
        self.edge_kappa.insert(Self::key(v, u), kappa);
    }

    pub fn edge_overrides(&self) -> impl Iterator<Item = ((ClientId, ClientId), f64)> + '_ {
        self.edge_kappa.iter().map(|(&k, &v)| (k, v))
    }

    pub fn kappa_for(&self, v: ClientId, u: ClientId) -> f64 {
        self.edge_kappa
            .get(&Self::key(v, u))
            .copied()
            .unwrap_or(self.kappa)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |k: f64| k >= 0.0 && k.is_finite();
        if !ok(self.kappa) {
            return Err(invalid("constraint.kappa", "must be a nonnegative number"));
        }
        if !self.edge_kappa.values().all(|&k| ok(k)) {
            return Err(invalid("constraint.edge_kappa", "radii must be nonnegative numbers"));
        }
        Ok(())
    }
}

/// `g(x_v, x_u) = ||x_v - x_u||^2 - kappa^2`.
#[inline]
pub fn constraint_value(x_v: &[f64], x_u: &[f64], kappa: f64) -> f64 {
    dist_sq(x_v, x_u) - kappa * kappa
}

/// Gradient of [`constraint_value`] with respect to `x_v`: `2 (x_v - x_u)`.
pub fn constraint_grad(x_v: &[f64], x_u: &[f64]) -> Vec<f64> {
    x_v.iter().zip(x_u).map(|(a, b)| 2.0 * (a - b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn labels_follow_ground_truth() {
        let s = labeled_sample(vec![0.3, -2.0], &[1.0, 0.0], false);
        assert_eq!(s.label, 1);
        let s = labeled_sample(vec![0.3, -2.0], &[1.0, 0.0], true);
        assert_eq!(s.label, -1);
        let mut rng = stream(1, 0, 0, StreamTag::Data);
        for _ in 0..100 {
            let s = generate_sample(&[1.0, 0.0], 1.0, &mut rng);
            assert_eq!(f64::from(s.label) * s.features[0] <= 0.0, true);
        }
    }

    #[test]
    fn feature_moments() {
        let mut rng = stream(2, 0, 0, StreamTag::Data);
        let n = 100_000;
        let d = 5;
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for _ in 0..n {
            let s = generate_sample(&[1.0, 0.0, 0.0, 0.0, 0.0], 0.05, &mut rng);
            for k in 0..d {
                sum[k] += s.features[k];
                sq[k] += s.features[k] * s.features[k];
            }
        }
        for k in 0..d {
            let mean = sum[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            assert!(mean.abs() < 0.02, "mean {mean}");
            assert!((var - 1.0).abs() < 0.03, "var {var}");
        }
    }

    #[test]
    fn generator_keeps_ground_truth_on_sphere() {
        let p = TaskParams::default();
        let mut g = DataGenerator::new(p, 1.0, 4, 11, 0);
        for _ in 0..500 {
            g.advance();
        }
        for r in 0..4 {
            assert!((norm(g.ground_truth(r)) - 1.0).abs() < 1e-12);
        }
        let fresh = DataGenerator::new(p, 1.0, 4, 11, 0);
        assert_ne!(g.ground_truth(0), fresh.ground_truth(0));
        assert_eq!(g.sample(0).features.len(), 5);
    }

    #[test]
    fn generator_is_per_client_reproducible() {
        // Client streams do not depend on how many clients exist.
        let p = TaskParams::default();
        let mut small = DataGenerator::new(p, 1.0, 2, 5, 3);
        let mut large = DataGenerator::new(p, 1.0, 9, 5, 3);
        for _ in 0..20 {
            assert_eq!(small.sample(1), large.sample(1));
            small.advance();
            large.advance();
        }
        assert_eq!(small.ground_truth(1), large.ground_truth(1));
    }

    #[test]
    fn loss_values() {
        let zero = DataSample::new(1, vec![1.0, 0.0]);
        assert!((loss(&[0.0, 0.0], &zero) - core::f64::consts::LN_2).abs() < 1e-15);
        let s = DataSample::new(1, vec![10.0]);
        assert!((loss(&[1.0], &s) - 4.5399e-5).abs() < 1e-8);
        let s = DataSample::new(1, vec![-1000.0]);
        let v = loss(&[1.0], &s);
        assert!(v.is_finite() && (v - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn loss_grad_values() {
        let s = DataSample::new(1, vec![1.0, 0.0]);
        assert_eq!(loss_grad(&[0.0, 0.0], &s), vec![-0.5, 0.0]);
        let s = DataSample::new(1, vec![1000.0, 0.0]);
        let g = loss_grad(&[1.0, 0.0], &s);
        assert!(g.iter().all(|v| v.abs() < 1e-300));
    }

    #[test]
    fn constraint_values() {
        assert!((constraint_value(&[0.2, 0.1], &[0.2, 0.1], 0.5) + 0.25).abs() < 1e-15);
        assert!((constraint_value(&[1.0, 0.0], &[0.0, 0.0], 0.5) - 0.75).abs() < 1e-15);
        let (a, b) = ([0.3, -0.7], [0.1, 0.4]);
        assert_eq!(constraint_value(&a, &b, 0.5), constraint_value(&b, &a, 0.5));
        assert_eq!(constraint_grad(&[1.0, 0.0], &[0.0, 0.0]), vec![2.0, 0.0]);
        assert_eq!(constraint_grad(&[1.0, 0.5], &[1.0, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn edge_kappa_is_symmetric() {
        let mut c = ConstraintParams::uniform(0.5);
        c.set_edge_kappa(ClientId(3), ClientId(1), 0.2);
        assert_eq!(c.kappa_for(ClientId(1), ClientId(3)), 0.2);
        assert_eq!(c.kappa_for(ClientId(3), ClientId(1)), 0.2);
        assert_eq!(c.kappa_for(ClientId(0), ClientId(1)), 0.5);
    }
}
