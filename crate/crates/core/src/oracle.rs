//! Offline comparator and regret / violation bound curves.
//!
//! The comparator is the best set of static per-client models in
//! hindsight:
//!
//! ```text
//! min_{||x_v|| <= r}  sum_t sum_v f_v,t(x_v)   s.t.  ||x_v - x_u||^2 <= kappa_vu^2  on honest edges
//! ```
//!
//! It is solved with an augmented Lagrangian method whose inner problems
//! (smooth, over a product of balls) are solved by accelerated projected
//! gradient with backtracking. The penalty doubles whenever feasibility
//! stalls. Internally the objective is divided by `T` so tolerances do not
//! depend on the horizon.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::learner::project_ball;
use crate::taskmodel::{loss, DataSample};
use crate::vector::{dist_sq, dot, ModelVector};

/// Solver budget and tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparatorSettings {
    /// Bound on the constraint residual and on the change of the per-round
    /// objective between outer iterations.
    pub tol: f64,
    /// Budget of inner gradient iterations across all outer iterations.
    pub max_iterations: usize,
}

impl Default for ComparatorSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 100_000,
        }
    }
}

/// Optimal static models for the honest clients, with certificates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Comparator {
    /// One model per honest client, in honest-rank order.
    pub models: Vec<ModelVector>,
    /// `sum_t sum_v f_v,t(x*_v)`.
    pub achieved_objective: f64,
    /// `max(0, max_e g_e(x*))` over the constrained edges.
    pub max_constraint_residual: f64,
    /// Multiplier estimates, one per constrained edge.
    pub multipliers: Vec<f64>,
    pub horizon: usize,
    pub iterations: usize,
}

impl Comparator {
    /// Objective divided by the horizon (zero when the horizon is empty).
    pub fn mean_objective(&self) -> f64 {
        if self.horizon == 0 {
            0.0
        } else {
            self.achieved_objective / self.horizon as f64
        }
    }
}

/// A constrained pair of clients by honest rank, with its radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEdge {
    pub a: usize,
    pub b: usize,
    pub kappa: f64,
}

/// `sum_v sum_t f(x_v; D_v,t)`.
pub fn total_objective(models: &[ModelVector], dataset: &[Vec<DataSample>]) -> f64 {
    models
        .iter()
        .zip(dataset)
        .map(|(x, samples)| samples.iter().map(|s| loss(x, s)).sum::<f64>())
        .sum()
}

/// Largest constraint value over `edges`, or `-inf` without edges.
pub fn max_constraint_value(models: &[ModelVector], edges: &[RankEdge]) -> f64 {
    edges
        .iter()
        .map(|e| dist_sq(&models[e.a], &models[e.b]) - e.kappa * e.kappa)
        .fold(f64::NEG_INFINITY, f64::max)
}

struct Problem<'a> {
    dataset: &'a [Vec<DataSample>],
    edges: &'a [RankEdge],
    dim: usize,
    radius: f64,
    inv_t: f64,
}

impl Problem<'_> {
    fn block<'b>(&self, x: &'b [f64], v: usize) -> &'b [f64] {
        &x[v * self.dim..(v + 1) * self.dim]
    }

    fn constraint(&self, x: &[f64], e: &RankEdge) -> f64 {
        dist_sq(self.block(x, e.a), self.block(x, e.b)) - e.kappa * e.kappa
    }

    /// Per-round loss `F(x) = (1/T) sum_v sum_t f`.
    fn loss_value(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (v, samples) in self.dataset.iter().enumerate() {
            let xv = self.block(x, v);
            for s in samples {
                total += loss(xv, s);
            }
        }
        total * self.inv_t
    }

    fn penalty_value(&self, x: &[f64], mu: &[f64], rho: f64) -> f64 {
        self.edges
            .iter()
            .zip(mu)
            .map(|(e, &m)| {
                let shifted = (m + rho * self.constraint(x, e)).max(0.0);
                (shifted * shifted - m * m) / (2.0 * rho)
            })
            .sum()
    }

    fn value(&self, x: &[f64], mu: &[f64], rho: f64) -> f64 {
        self.loss_value(x) + self.penalty_value(x, mu, rho)
    }

    fn value_and_grad(&self, x: &[f64], mu: &[f64], rho: f64, grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let d = self.dim;
        let mut total = 0.0;
        for (v, samples) in self.dataset.iter().enumerate() {
            let xv = &x[v * d..(v + 1) * d];
            let gv = &mut grad[v * d..(v + 1) * d];
            for s in samples {
                let l = s.sign();
                let z = -l * dot(&s.features, xv);
                total += if z > 0.0 {
                    z + libm::log1p(libm::exp(-z))
                } else {
                    libm::log1p(libm::exp(z))
                };
                let sig = if z >= 0.0 {
                    1.0 / (1.0 + libm::exp(-z))
                } else {
                    let e = libm::exp(z);
                    e / (1.0 + e)
                };
                let coef = -l * sig * self.inv_t;
                for (g, p) in gv.iter_mut().zip(&s.features) {
                    *g += coef * p;
                }
            }
        }
        total *= self.inv_t;
        for (e, &m) in self.edges.iter().zip(mu) {
            let c = self.constraint(x, e);
            let shifted = (m + rho * c).max(0.0);
            total += (shifted * shifted - m * m) / (2.0 * rho);
            if shifted > 0.0 {
                for k in 0..d {
                    let diff = 2.0 * shifted * (x[e.a * d + k] - x[e.b * d + k]);
                    grad[e.a * d + k] += diff;
                    grad[e.b * d + k] -= diff;
                }
            }
        }
        total
    }

    fn project(&self, x: &mut [f64]) {
        for block in x.chunks_exact_mut(self.dim) {
            project_ball(block, self.radius);
        }
    }
}

struct InnerResult {
    iterations: usize,
    mapping_norm: f64,
}

/// Accelerated projected gradient with backtracking and adaptive restart on
/// the augmented Lagrangian for fixed `(mu, rho)`.
fn inner_solve(
    p: &Problem<'_>,
    x: &mut Vec<f64>,
    mu: &[f64],
    rho: f64,
    lipschitz: &mut f64,
    tol: f64,
    budget: usize,
) -> InnerResult {
    let len = x.len();
    let mut y = x.clone();
    let mut grad = vec![0.0; len];
    let mut candidate = vec![0.0; len];
    let mut grad_c = vec![0.0; len];
    let mut momentum = 1.0f64;
    let mut current = p.value(x, mu, rho);
    let mut mapping_norm = f64::INFINITY;
    let mut iterations = 0;

    while iterations < budget {
        iterations += 1;
        let fy = p.value_and_grad(&y, mu, rho, &mut grad);
        let mut fc;
        loop {
            for i in 0..len {
                candidate[i] = y[i] - grad[i] / *lipschitz;
            }
            p.project(&mut candidate);
            fc = p.value(&candidate, mu, rho);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for i in 0..len {
                let s = candidate[i] - y[i];
                lin += grad[i] * s;
                sq += s * s;
            }
            // Near convergence the value test drowns in rounding; fall back
            // to a Lipschitz test on the gradients.
            let accept = fc <= fy + lin + 0.5 * *lipschitz * sq || {
                p.value_and_grad(&candidate, mu, rho, &mut grad_c);
                let gap: f64 = grad_c.iter().zip(&grad).map(|(a, b)| (a - b) * (a - b)).sum();
                gap <= *lipschitz * *lipschitz * sq
            };
            if accept || *lipschitz > 1e16 {
                mapping_norm = *lipschitz * libm::sqrt(sq);
                break;
            }
            *lipschitz *= 2.0;
        }

        if fc > current && momentum > 1.0 {
            // Restart momentum from the last accepted point.
            momentum = 1.0;
            y.copy_from_slice(x);
            if mapping_norm <= tol {
                break;
            }
            continue;
        }

        let next_momentum = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * momentum * momentum));
        let beta = (momentum - 1.0) / next_momentum;
        for i in 0..len {
            y[i] = candidate[i] + beta * (candidate[i] - x[i]);
        }
        x.copy_from_slice(&candidate);
        momentum = next_momentum;
        current = fc;
        if mapping_norm <= tol {
            break;
        }
    }
    InnerResult {
        iterations,
        mapping_norm,
    }
}

struct Groups {
    /// Group of every client.
    of: Vec<usize>,
    members: Vec<Vec<usize>>,
}

/// Connected components of the `kappa = 0` edges, numbered by smallest member.
fn consensus_groups(n: usize, edges: &[RankEdge]) -> Groups {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for e in edges.iter().filter(|e| e.kappa == 0.0) {
        let (a, b) = (find(&mut parent, e.a), find(&mut parent, e.b));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut of = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut root_group = vec![usize::MAX; n];
    for v in 0..n {
        let r = find(&mut parent, v);
        if root_group[r] == usize::MAX {
            root_group[r] = members.len();
            members.push(Vec::new());
        }
        of[v] = root_group[r];
        members[root_group[r]].push(v);
    }
    Groups { of, members }
}

/// Solves for the static comparator over honest clients.
///
/// `dataset[v]` holds client `v`'s samples for every round; all clients
/// must cover the same horizon.
pub fn solve_comparator(
    dataset: &[Vec<DataSample>],
    edges: &[RankEdge],
    dim: usize,
    radius: f64,
    settings: &ComparatorSettings,
) -> Result<Comparator> {
    let original = dataset;
    let n = dataset.len();
    let horizon = dataset.first().map_or(0, Vec::len);
    if let Some(bad) = dataset.iter().find(|s| s.len() != horizon) {
        return Err(Error::HorizonMismatch {
            expected: horizon,
            got: bad.len(),
        });
    }
    for e in edges {
        if e.a >= n || e.b >= n || e.a == e.b {
            return Err(Error::InvalidEdge(e.a, e.b));
        }
    }
    if !(settings.tol > 0.0) {
        return Err(invalid("comparator.tol", "must be positive"));
    }
    if !(radius > 0.0) {
        return Err(invalid("algorithm.radius", "must be positive"));
    }

    if horizon == 0 {
        return Ok(Comparator {
            models: vec![ModelVector::zeros(dim); n],
            achieved_objective: 0.0,
            max_constraint_residual: max_constraint_value(&vec![ModelVector::zeros(dim); n], edges).max(0.0),
            multipliers: vec![0.0; edges.len()],
            horizon,
            iterations: 0,
        });
    }

    // Edges with kappa = 0 force exact consensus; solving on the contracted
    // graph avoids the degenerate constraint altogether.
    let groups = consensus_groups(n, edges);
    let merged: Vec<Vec<DataSample>> = groups
        .members
        .iter()
        .map(|m| m.iter().flat_map(|&v| dataset[v].iter().cloned()).collect())
        .collect();
    let contracted: Vec<RankEdge> = edges
        .iter()
        .filter(|e| groups.of[e.a] != groups.of[e.b])
        .map(|e| RankEdge {
            a: groups.of[e.a],
            b: groups.of[e.b],
            kappa: e.kappa,
        })
        .collect();
    let dataset = &merged[..];
    let edges_in = edges;
    let edges = &contracted[..];

    let problem = Problem {
        dataset,
        edges,
        dim,
        radius,
        inv_t: 1.0 / horizon as f64,
    };

    // Curvature of the per-round logistic loss is at most ||psi||^2 / 4.
    let mut lipschitz = dataset
        .iter()
        .map(|s| s.iter().map(|d| dot(&d.features, &d.features)).sum::<f64>() * 0.25 / horizon as f64)
        .fold(1e-3, f64::max);

    let tol = settings.tol;
    let n = dataset.len();
    let mut x = vec![0.0; n * dim];
    let mut mu = vec![0.0; edges.len()];
    let mut rho = 10.0;
    let mut used = 0usize;
    let mut prev_objective = f64::INFINITY;
    let mut prev_residual = f64::INFINITY;
    let mut inner_tol = 1e-3f64.max(tol);

    loop {
        let budget = settings.max_iterations.saturating_sub(used);
        let inner = inner_solve(&problem, &mut x, &mu, rho, &mut lipschitz, inner_tol, budget);
        used += inner.iterations;

        let objective = problem.loss_value(&x);
        let residual = edges
            .iter()
            .map(|e| problem.constraint(&x, e).max(0.0))
            .fold(0.0, f64::max);
        let change = (objective - prev_objective).abs();

        // Multiplier step; keep the pre-update values for the stationarity
        // test below.
        let mut complementarity = 0.0f64;
        for (m, e) in mu.iter_mut().zip(edges) {
            let c = problem.constraint(&x, e);
            *m = (*m + rho * c).max(0.0);
            complementarity = complementarity.max((*m * c).abs());
        }

        let inner_done = inner.mapping_norm <= inner_tol;
        if inner_done && inner_tol <= tol && residual <= tol && change <= tol && complementarity <= tol {
            let models: Vec<ModelVector> = groups
                .of
                .iter()
                .map(|&c| ModelVector(x[c * dim..(c + 1) * dim].to_vec()))
                .collect();
            let mut multipliers = Vec::with_capacity(edges_in.len());
            let mut k = 0;
            for e in edges_in {
                if groups.of[e.a] == groups.of[e.b] {
                    multipliers.push(0.0);
                } else {
                    multipliers.push(mu[k]);
                    k += 1;
                }
            }
            return Ok(Comparator {
                achieved_objective: total_objective(&models, original),
                max_constraint_residual: max_constraint_value(&models, edges_in).max(0.0),
                models,
                multipliers,
                horizon,
                iterations: used,
            });
        }
        if used >= settings.max_iterations {
            return Err(Error::ComparatorNotConverged {
                iterations: used,
                residual,
                objective_change: change,
            });
        }

        if residual > 0.25 * prev_residual && residual > tol {
            rho = (rho * 2.0).min(1e12);
        }
        prev_residual = residual;
        prev_objective = objective;
        inner_tol = (inner_tol * 0.1).max(tol);
        // Penalty growth changes the curvature; let backtracking find it again.
        lipschitz = (lipschitz * 0.25).max(1e-3);
    }
}

/// Constants of the regret and violation bounds.
///
/// `beta` is the free parameter appearing in the regret bound's
/// `(1 + beta / zeta) / (1 - (1 + zeta) beta)` factor and in the admissible
/// range `zeta in (0, 1/beta - 1)`; it is supplied by the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundConstants {
    pub a: f64,
    pub zeta: f64,
    pub beta: f64,
    /// Edge count `m = |E|`.
    pub edges: f64,
    /// Bound on `|g|`.
    pub c: f64,
    /// Lipschitz constant of the losses.
    pub g: f64,
    /// Lipschitz constant of the constraint in its first argument.
    pub b: f64,
    pub radius: f64,
    /// Client count `V`.
    pub clients: f64,
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0) {
            return Err(invalid("bounds.a", "must be positive"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(invalid("bounds.beta", "must lie in (0, 1)"));
        }
        let upper = 1.0 / self.beta - 1.0;
        if !(self.zeta > 0.0 && self.zeta < upper) {
            return Err(invalid(
                "bounds.zeta",
                alloc::format!("must lie in (0, {upper}) for beta = {}", self.beta),
            ));
        }
        for (name, v) in [
            ("bounds.edges", self.edges),
            ("bounds.c", self.c),
            ("bounds.g", self.g),
            ("bounds.b", self.b),
            ("bounds.radius", self.radius),
            ("bounds.clients", self.clients),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be a nonnegative number"));
            }
        }
        Ok(())
    }
}

/// `(2r^2/a^2 + mC^2 + VG^2) a sqrt(T)
///   + (5aG^2/2) * V * (1 + beta/zeta) / (1 - (1+zeta) beta) * sqrt(T)`.
pub fn regret_bound(k: &BoundConstants, horizon: usize) -> Result<f64> {
    k.validate()?;
    let sqrt_t = libm::sqrt(horizon as f64);
    let a = k.a;
    let first = (2.0 * k.radius * k.radius / (a * a) + k.edges * k.c * k.c + k.clients * k.g * k.g) * a * sqrt_t;
    let ratio = (1.0 + k.beta / k.zeta) / (1.0 - (1.0 + k.zeta) * k.beta);
    let second = 2.5 * a * k.g * k.g * k.clients * ratio * sqrt_t;
    Ok(first + second)
}

/// `2 sqrt(V G r) (1/a + a zeta + 2 a B^2)^(1/2) T^(3/4)
///   + (1 + a^2 zeta + 2 a^2 B^2) (4r^2/a^2 + 2mC^2 + 2VG^2)^(1/2)`.
pub fn violation_bound(k: &BoundConstants, horizon: usize) -> Result<f64> {
    k.validate()?;
    let a = k.a;
    let t34 = libm::pow(horizon as f64, 0.75);
    let lead = 2.0
        * libm::sqrt(k.clients * k.g * k.radius)
        * libm::sqrt(1.0 / a + a * k.zeta + 2.0 * a * k.b * k.b)
        * t34;
    let tail = (1.0 + a * a * k.zeta + 2.0 * a * a * k.b * k.b)
        * libm::sqrt(4.0 * k.radius * k.radius / (a * a) + 2.0 * k.edges * k.c * k.c + 2.0 * k.clients * k.g * k.g);
    Ok(lead + tail)
}
