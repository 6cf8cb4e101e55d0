//! Per-client primal-dual state and the trust-filtered update.
//!
//! One round for honest client `v`, given the trusted neighbors `N_v^h(t)`:
//!
//! ```text
//! q_v   = grad f_v,t(x_v) + sum_{u trusted} (lambda_vu + lambda_uv) * 2 (x_v - x_u)
//! r_vu  = g_vu(x_v, x_u) - delta * eta * lambda_vu
//! x_v  <- Proj_ball(x_v - eta * q_v)
//! lambda_vu <- max(lambda_vu + eta * r_vu, 0)      for trusted u
//! lambda_vu <- 0                                   otherwise
//! ```
//!
//! Both gradients are evaluated at the round-`t` iterate before either
//! update is applied.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::taskmodel::{constraint_value, loss, loss_grad_into, ConstraintParams, DataSample};
use crate::topology::{ClientId, GraphTopology};
use crate::vector::{axpy, norm, scale, ModelVector};

/// Stepsize, dual regularization, feasible-ball radius, and horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlgorithmParams {
    pub eta: f64,
    pub delta: f64,
    pub radius: f64,
    pub horizon: usize,
    /// Project received models onto the feasible ball before use.
    pub clip_received: bool,
}

impl AlgorithmParams {
    /// `eta = a / sqrt(T)` and `delta = 1 / (4 eta^2)`.
    pub fn for_horizon(horizon: usize, a: f64, radius: f64) -> Self {
        let eta = default_eta(horizon, a);
        Self {
            eta,
            delta: default_delta(eta),
            radius,
            horizon,
            clip_received: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(invalid("algorithm.eta", "must be a positive number"));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(invalid("algorithm.delta", "must be a positive number"));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(invalid("algorithm.radius", "must be a positive number"));
        }
        Ok(())
    }
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self::for_horizon(1000, 1.0, 1.0)
    }
}

/// `a / sqrt(T)`, treating `T = 0` as a single round.
pub fn default_eta(horizon: usize, a: f64) -> f64 {
    a / libm::sqrt(horizon.max(1) as f64)
}

pub fn default_delta(eta: f64) -> f64 {
    1.0 / (4.0 * eta * eta)
}

/// Who actually produced a message. Honest logic never reads this; it
/// exists so logs can attribute every consumed payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Origin {
    Honest,
    Byzantine,
}

/// Model and dual variable sent from `sender` to `receiver` in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMessage {
    pub sender: ClientId,
    pub receiver: ClientId,
    pub model: ModelVector,
    pub dual: f64,
    pub origin: Origin,
}

/// Local model and per-neighbor duals of one honest client.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub id: ClientId,
    pub model: ModelVector,
    neighbors: Vec<ClientId>,
    duals: Vec<f64>,
}

impl ClientState {
    /// `x = 0` and `lambda = 0` for every neighbor.
    pub fn new(id: ClientId, neighbors: &[ClientId], dim: usize) -> Self {
        Self {
            id,
            model: ModelVector::zeros(dim),
            neighbors: neighbors.to_vec(),
            duals: vec![0.0; neighbors.len()],
        }
    }

    pub fn neighbors(&self) -> &[ClientId] {
        &self.neighbors
    }

    /// Duals aligned with [`ClientState::neighbors`].
    pub fn duals(&self) -> &[f64] {
        &self.duals
    }

    fn slot(&self, u: ClientId) -> Option<usize> {
        self.neighbors.binary_search(&u).ok()
    }

    pub fn dual(&self, u: ClientId) -> Option<f64> {
        self.slot(u).map(|i| self.duals[i])
    }

    pub fn set_dual(&mut self, u: ClientId, value: f64) -> Result<()> {
        let i = self.slot(u).ok_or(Error::InvalidEdge(u.0, self.id.0))?;
        self.duals[i] = value;
        Ok(())
    }

    /// Runs steps 10-14 of a round: loss, resilient gradients, primal and
    /// dual updates, using only messages from `trusted` senders.
    ///
    /// `inbox` may contain messages from any neighbor; those from senders
    /// outside `trusted` are never read.
    pub fn step(
        &mut self,
        inbox: &[RoundMessage],
        trusted: &[ClientId],
        sample: &DataSample,
        params: &AlgorithmParams,
        constraint: &ConstraintParams,
    ) -> Result<StepOutcome> {
        let mut used: Vec<&RoundMessage> = Vec::with_capacity(trusted.len());
        for &u in trusted {
            if let Some(m) = inbox.iter().find(|m| m.sender == u) {
                used.push(m);
            }
        }

        let clipped: Vec<RoundMessage>;
        let used: Vec<&RoundMessage> = if params.clip_received {
            clipped = used
                .iter()
                .map(|m| {
                    let mut m = (*m).clone();
                    project_ball(&mut m.model, params.radius);
                    m
                })
                .collect();
            clipped.iter().collect()
        } else {
            used
        };

        let value = loss(&self.model, sample);
        let mut loss_gradient = vec![0.0; self.model.dim()];
        loss_grad_into(&self.model, sample, &mut loss_gradient);
        let loss_grad_norm = norm(&loss_gradient);

        let q = primal_gradient(self, &used, sample)?;
        let residuals: Vec<(ClientId, f64)> = used
            .iter()
            .map(|m| {
                let kappa = constraint.kappa_for(self.id, m.sender);
                (m.sender, dual_residual(self, m.sender, &m.model, params, kappa))
            })
            .collect();

        primal_step(self, &q, params);

        let mut next = vec![0.0; self.duals.len()];
        for &(u, r) in &residuals {
            let i = self.slot(u).ok_or(Error::InvalidEdge(u.0, self.id.0))?;
            next[i] = dual_update(self.duals[i], r, params.eta);
        }
        self.duals = next;

        Ok(StepOutcome {
            loss: value,
            loss_grad_norm,
            consumed: used.iter().map(|m| (m.sender, m.origin)).collect(),
        })
    }
}

/// What a client consumed and observed in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    /// `f_v,t(x_v,t)` at the pre-update model.
    pub loss: f64,
    pub loss_grad_norm: f64,
    /// Senders whose payloads entered the update, with their true origin.
    pub consumed: Vec<(ClientId, Origin)>,
}

/// One message per out-neighbor carrying `x_v` and `lambda_vu`.
pub fn outgoing_messages(state: &ClientState, g: &GraphTopology) -> Result<Vec<RoundMessage>> {
    Ok(g.out_neighbors(state.id)?
        .iter()
        .map(|&u| RoundMessage {
            sender: state.id,
            receiver: u,
            model: state.model.clone(),
            dual: state.dual(u).unwrap_or(0.0),
            origin: Origin::Honest,
        })
        .collect())
}

/// `q_v = grad f(x_v) + sum (lambda_vu + lambda_uv) * 2 (x_v - x_u)` over
/// the given (already trusted) messages, in message order.
pub fn primal_gradient(state: &ClientState, trusted_inbox: &[&RoundMessage], sample: &DataSample) -> Result<Vec<f64>> {
    let d = state.model.dim();
    if sample.features.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: sample.features.len(),
        });
    }
    let mut q = vec![0.0; d];
    loss_grad_into(&state.model, sample, &mut q);
    let mut diff = vec![0.0; d];
    for m in trusted_inbox {
        if m.model.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: m.model.dim(),
            });
        }
        let own = state
            .dual(m.sender)
            .ok_or(Error::InvalidEdge(m.sender.0, state.id.0))?;
        for ((o, a), b) in diff.iter_mut().zip(state.model.iter()).zip(m.model.iter()) {
            *o = a - b;
        }
        axpy(2.0 * (own + m.dual), &diff, &mut q);
    }
    Ok(q)
}

/// `r_vu = g_vu(x_v, x_u) - delta * eta * lambda_vu`.
pub fn dual_residual(state: &ClientState, u: ClientId, x_u: &[f64], params: &AlgorithmParams, kappa: f64) -> f64 {
    let lambda = state.dual(u).unwrap_or(0.0);
    constraint_value(&state.model, x_u, kappa) - params.delta * params.eta * lambda
}

/// Euclidean projection onto the ball of radius `r`, in place.
///
/// Points within a few ulps of the sphere are left alone, which makes the
/// projection exactly idempotent in floating point.
pub fn project_ball(x: &mut [f64], r: f64) {
    let n = norm(x);
    if n > r * (1.0 + 4.0 * f64::EPSILON) {
        scale(r / n, x);
    }
}

/// `x <- Proj(x - eta q)`.
pub fn primal_step(state: &mut ClientState, q: &[f64], params: &AlgorithmParams) {
    axpy(-params.eta, q, &mut state.model);
    project_ball(&mut state.model, params.radius);
}

#[inline]
fn dual_update(lambda: f64, residual: f64, eta: f64) -> f64 {
    (lambda + eta * residual).max(0.0)
}

/// `lambda_vu <- max(lambda_vu + eta r_vu, 0)`.
pub fn dual_step(state: &mut ClientState, u: ClientId, r_vu: f64, params: &AlgorithmParams) -> Result<f64> {
    let i = state.slot(u).ok_or(Error::InvalidEdge(u.0, state.id.0))?;
    state.duals[i] = dual_update(state.duals[i], r_vu, params.eta);
    Ok(state.duals[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taskmodel::loss_grad;
    use crate::topology::{build_topology, TopologySpec};

    fn msg(sender: usize, receiver: usize, model: Vec<f64>, dual: f64) -> RoundMessage {
        RoundMessage {
            sender: ClientId(sender),
            receiver: ClientId(receiver),
            model: model.into(),
            dual,
            origin: Origin::Honest,
        }
    }

    fn params(eta: f64, delta: f64) -> AlgorithmParams {
        AlgorithmParams {
            eta,
            delta,
            radius: 1.0,
            horizon: 10,
            clip_received: false,
        }
    }

    #[test]
    fn default_stepsizes() {
        let p = AlgorithmParams::for_horizon(100, 1.0, 1.0);
        assert!((p.eta - 0.1).abs() < 1e-15);
        assert!((p.delta - 25.0).abs() < 1e-9);
        assert!(AlgorithmParams { eta: 0.0, ..p }.validate().is_err());
    }

    #[test]
    fn broadcast_messages() {
        let g = build_topology(&TopologySpec::complete(3, 0)).unwrap();
        let mut s = ClientState::new(ClientId(0), g.neighbors(ClientId(0)).unwrap(), 2);
        s.model = vec![0.1, 0.2].into();
        s.set_dual(ClientId(1), 0.2).unwrap();
        let out = outgoing_messages(&s, &g).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].model, out[1].model);
        assert_eq!(out[0].dual, 0.2);
        assert_eq!(out[1].dual, 0.0);

        // Client 0 is the only honest client and has no edges at all.
        let iso = GraphTopology::from_parts(3, &[(1, 2), (2, 1)], &[1, 2]).unwrap();
        let lonely = ClientState::new(ClientId(0), iso.neighbors(ClientId(0)).unwrap(), 2);
        assert!(outgoing_messages(&lonely, &iso).unwrap().is_empty());
    }

    #[test]
    fn primal_gradient_cases() {
        let sample = DataSample::new(1, vec![1.0, 0.0]);
        let mut s = ClientState::new(ClientId(0), &[ClientId(1)], 2);
        // No trusted neighbors.
        let q = primal_gradient(&s, &[], &sample).unwrap();
        assert_eq!(q, vec![-0.5, 0.0]);
        // Zero multipliers.
        let m = msg(1, 0, vec![0.4, 0.4], 0.0);
        assert_eq!(primal_gradient(&s, &[&m], &sample).unwrap(), vec![-0.5, 0.0]);
        // x_v = [1,0], x_u = 0, multipliers 0.1 + 0.3: the neighbor term is 0.4 * [2, 0].
        s.model = vec![1.0, 0.0].into();
        s.set_dual(ClientId(1), 0.1).unwrap();
        let base = loss_grad(&s.model, &sample);
        let m = msg(1, 0, vec![0.0, 0.0], 0.3);
        let q = primal_gradient(&s, &[&m], &sample).unwrap();
        assert!((q[0] - (base[0] + 0.8)).abs() < 1e-15);
        assert_eq!(q[1], base[1]);

        let bad = msg(1, 0, vec![0.0], 0.0);
        assert!(matches!(
            primal_gradient(&s, &[&bad], &sample),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dual_residual_cases() {
        let mut s = ClientState::new(ClientId(0), &[ClientId(1)], 2);
        s.model = vec![1.0, 0.0].into();
        s.set_dual(ClientId(1), 0.1).unwrap();
        // g = 0.75, delta * eta * lambda = 1 * 1 * 0.1
        let r = dual_residual(&s, ClientId(1), &[0.0, 0.0], &params(1.0, 1.0), 0.5);
        assert!((r - 0.65).abs() < 1e-15);

        let s0 = ClientState::new(ClientId(0), &[ClientId(1)], 2);
        let r = dual_residual(&s0, ClientId(1), &[0.0, 0.0], &params(0.1, 1.0), 0.5);
        assert!((r + 0.25).abs() < 1e-15);

        let mut s2 = ClientState::new(ClientId(0), &[ClientId(1)], 1);
        s2.set_dual(ClientId(1), 2.0).unwrap();
        // delta * eta = 0.5, kappa = 0 so g = 0.
        let r = dual_residual(&s2, ClientId(1), &[0.0], &params(0.5, 1.0), 0.0);
        assert!((r + 1.0).abs() < 1e-15);
    }

    #[test]
    fn projection_cases() {
        let mut x = vec![3.0, 4.0];
        project_ball(&mut x, 1.0);
        assert!((x[0] - 0.6).abs() < 1e-15 && (x[1] - 0.8).abs() < 1e-15);
        let mut y = vec![0.3, 0.4];
        project_ball(&mut y, 1.0);
        assert_eq!(y, vec![0.3, 0.4]);
        let mut z = vec![0.0, 0.0];
        project_ball(&mut z, 1.0);
        assert_eq!(z, vec![0.0, 0.0]);
    }

    #[test]
    fn primal_step_cases() {
        let p = params(0.1, 1.0);
        let mut s = ClientState::new(ClientId(0), &[], 2);
        s.model = vec![0.2, -0.1].into();
        primal_step(&mut s, &[0.0, 0.0], &p);
        assert_eq!(&s.model[..], &[0.2, -0.1]);

        let mut s = ClientState::new(ClientId(0), &[], 2);
        primal_step(&mut s, &[1.0, 0.0], &p);
        assert!((s.model[0] + 0.1).abs() < 1e-15);

        s.model = vec![0.99, 0.0].into();
        primal_step(&mut s, &[-1.0, 0.0], &p);
        assert!((s.model[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_step_cases() {
        let p = params(0.1, 1.0);
        let mut s = ClientState::new(ClientId(0), &[ClientId(1)], 1);
        s.set_dual(ClientId(1), 0.1).unwrap();
        assert_eq!(dual_step(&mut s, ClientId(1), -2.0, &p).unwrap(), 0.0);
        assert!((dual_step(&mut s, ClientId(1), 1.0, &p).unwrap() - 0.1).abs() < 1e-15);
        let before = s.dual(ClientId(1)).unwrap();
        assert_eq!(dual_step(&mut s, ClientId(1), 0.0, &p).unwrap(), before);
    }

    #[test]
    fn untrusted_neighbor_dual_resets() {
        let p = params(0.1, 1.0);
        let c = ConstraintParams::uniform(0.5);
        let mut s = ClientState::new(ClientId(0), &[ClientId(1), ClientId(2)], 2);
        s.set_dual(ClientId(1), 0.7).unwrap();
        s.set_dual(ClientId(2), 0.7).unwrap();
        let inbox = vec![msg(1, 0, vec![0.5, 0.5], 0.1), msg(2, 0, vec![-0.5, 0.5], 0.1)];
        let sample = DataSample::new(-1, vec![0.3, 0.2]);
        let out = s.step(&inbox, &[ClientId(2)], &sample, &p, &c).unwrap();
        assert_eq!(s.dual(ClientId(1)), Some(0.0));
        assert!(s.dual(ClientId(2)).unwrap() > 0.0);
        assert_eq!(out.consumed, vec![(ClientId(2), Origin::Honest)]);
    }

    #[test]
    fn untrusted_messages_have_no_influence() {
        let p = params(0.1, 2.0);
        let c = ConstraintParams::uniform(0.3);
        let mut a = ClientState::new(ClientId(0), &[ClientId(1), ClientId(2)], 2);
        a.model = vec![0.1, 0.2].into();
        let mut b = a.clone();
        let sample = DataSample::new(1, vec![0.7, -1.2]);
        let full = vec![msg(1, 0, vec![50.0, -50.0], 99.0), msg(2, 0, vec![0.3, 0.1], 0.2)];
        let filtered = vec![full[1].clone()];
        let oa = a.step(&full, &[ClientId(2)], &sample, &p, &c).unwrap();
        let ob = b.step(&filtered, &[ClientId(2)], &sample, &p, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(oa, ob);
    }

    #[test]
    fn clipping_bounds_received_models() {
        let mut p = params(0.1, 1.0);
        p.clip_received = true;
        let c = ConstraintParams::uniform(0.5);
        let mut a = ClientState::new(ClientId(0), &[ClientId(1)], 1);
        let mut b = a.clone();
        let sample = DataSample::new(1, vec![0.0]);
        a.step(&[msg(1, 0, vec![100.0], 0.5)], &[ClientId(1)], &sample, &p, &c).unwrap();
        b.step(&[msg(1, 0, vec![1.0], 0.5)], &[ClientId(1)], &sample, &p, &c).unwrap();
        assert_eq!(a, b);
    }
}
