//! Byzantine message generation.
//!
//! A Byzantine client sends one message per honest target each round. It
//! may see every honest model broadcast in the current round, but never the
//! honest clients' trust ledgers.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::learner::{Origin, RoundMessage};
use crate::topology::ClientId;
use crate::vector::{mean, norm, scale, ModelVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    /// The same vector of norm `magnitude` every round.
    FixedVector,
    /// `magnitude * z` with one standard Gaussian `z` shared by all targets.
    GaussianNoise,
    /// `-magnitude * mean(honest models)`.
    SignFlip,
    /// The honest mean as model, with dual `magnitude`.
    DualInflation,
    /// An independent `magnitude * z` for every target.
    TwoFaced,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [
        AttackKind::FixedVector,
        AttackKind::GaussianNoise,
        AttackKind::SignFlip,
        AttackKind::DualInflation,
        AttackKind::TwoFaced,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::FixedVector => "fixed-vector",
            AttackKind::GaussianNoise => "gaussian-noise",
            AttackKind::SignFlip => "sign-flip",
            AttackKind::DualInflation => "dual-inflation",
            AttackKind::TwoFaced => "two-faced",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid("attack.kind", alloc::format!("unknown attack `{s}`")))
    }
}

/// A configured attack.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackStrategy {
    pub kind: AttackKind,
    pub magnitude: f64,
    /// Dual scalar attached to every message; defaults to `magnitude`.
    pub dual: Option<f64>,
    /// Direction for [`AttackKind::FixedVector`]; defaults to all ones.
    pub direction: Option<Vec<f64>>,
}

impl AttackStrategy {
    pub fn new(kind: AttackKind, magnitude: f64) -> Self {
        Self {
            kind,
            magnitude,
            dual: None,
            direction: None,
        }
    }

    /// Gaussian noise of magnitude `10 r`.
    pub fn default_for_radius(radius: f64) -> Self {
        Self::new(AttackKind::GaussianNoise, 10.0 * radius)
    }

    pub fn dual_value(&self) -> f64 {
        self.dual.unwrap_or(self.magnitude)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.magnitude >= 0.0) || !self.magnitude.is_finite() {
            return Err(invalid("attack.magnitude", "must be a nonnegative number"));
        }
        if let Some(d) = self.dual {
            if !d.is_finite() {
                return Err(invalid("attack.dual", "must be finite"));
            }
        }
        if let Some(dir) = &self.direction {
            if dir.len() != dim {
                return Err(invalid(
                    "attack.direction",
                    alloc::format!("has {} entries but the model dimension is {dim}", dir.len()),
                ));
            }
            if !(norm(dir) > 0.0) {
                return Err(invalid("attack.direction", "must be a nonzero vector"));
            }
        }
        Ok(())
    }
}

impl Default for AttackStrategy {
    fn default() -> Self {
        Self::default_for_radius(1.0)
    }
}

fn gaussian<R: Rng + ?Sized>(dim: usize, scale_by: f64, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| scale_by * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Messages from Byzantine client `k` to each of `targets`.
///
/// `observed` holds the honest models broadcast this round.
pub fn byzantine_messages<R: Rng + ?Sized>(
    strategy: &AttackStrategy,
    k: ClientId,
    observed: &[&[f64]],
    targets: &[ClientId],
    dim: usize,
    rng: &mut R,
) -> Vec<RoundMessage> {
    let mag = strategy.magnitude;
    let dual = strategy.dual_value();
    let honest_mean = || mean(dim, observed.iter().copied());
    let shared: Option<Vec<f64>> = match strategy.kind {
        AttackKind::FixedVector => {
            let mut v = strategy
                .direction
                .clone()
                .unwrap_or_else(|| alloc::vec![1.0; dim]);
            let n = norm(&v);
            if n > 0.0 {
                scale(mag / n, &mut v);
            }
            Some(v)
        }
        AttackKind::GaussianNoise => Some(gaussian(dim, mag, rng)),
        AttackKind::SignFlip => {
            let mut m = honest_mean();
            scale(-mag, &mut m);
            Some(m)
        }
        AttackKind::DualInflation => Some(honest_mean()),
        AttackKind::TwoFaced => None,
    };
    targets
        .iter()
        .map(|&t| RoundMessage {
            sender: k,
            receiver: t,
            model: ModelVector(match &shared {
                Some(v) => v.clone(),
                None => gaussian(dim, mag, rng),
            }),
            dual,
            origin: Origin::Byzantine,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamTag};
    use alloc::vec;

    fn targets(n: usize) -> Vec<ClientId> {
        (1..=n).map(ClientId).collect()
    }

    #[test]
    fn parse_names() {
        for k in AttackKind::ALL {
            assert_eq!(k.name().parse::<AttackKind>().unwrap(), k);
        }
        assert!("label-flip".parse::<AttackKind>().is_err());
    }

    #[test]
    fn zero_magnitude_fixed_vector() {
        let s = AttackStrategy::new(AttackKind::FixedVector, 0.0);
        let mut rng = stream(0, 0, 0, StreamTag::Attack);
        let msgs = byzantine_messages(&s, ClientId(0), &[], &targets(3), 2, &mut rng);
        assert_eq!(msgs.len(), 3);
        assert!(msgs.iter().all(|m| m.model.iter().all(|&x| x == 0.0)));
        assert!(msgs.iter().all(|m| m.origin == Origin::Byzantine));
    }

    #[test]
    fn fixed_vector_norm() {
        let s = AttackStrategy::new(AttackKind::FixedVector, 3.0);
        let mut rng = stream(0, 0, 0, StreamTag::Attack);
        let msgs = byzantine_messages(&s, ClientId(0), &[], &targets(1), 4, &mut rng);
        assert!((norm(&msgs[0].model) - 3.0).abs() < 1e-12);
        assert_eq!(msgs[0].dual, 3.0);
    }

    #[test]
    fn two_faced_payloads_differ() {
        let s = AttackStrategy::new(AttackKind::TwoFaced, 1.0);
        let mut rng = stream(0, 0, 0, StreamTag::Attack);
        let msgs = byzantine_messages(&s, ClientId(0), &[], &targets(3), 3, &mut rng);
        for i in 0..3 {
            for j in (i + 1)..3 {
                assert_ne!(msgs[i].model, msgs[j].model);
            }
        }
    }

    #[test]
    fn gaussian_noise_is_shared_across_targets() {
        let s = AttackStrategy::default();
        let mut rng = stream(0, 0, 0, StreamTag::Attack);
        let msgs = byzantine_messages(&s, ClientId(0), &[], &targets(3), 3, &mut rng);
        assert_eq!(msgs[0].model, msgs[2].model);
        assert_eq!(msgs[0].dual, 10.0);
    }

    #[test]
    fn sign_flip_and_dual_inflation() {
        let a = [0.2, 0.4];
        let b = [0.4, 0.0];
        let observed: Vec<&[f64]> = vec![&a, &b];
        let mut rng = stream(0, 0, 0, StreamTag::Attack);
        let s = AttackStrategy::new(AttackKind::SignFlip, 1.0);
        let msgs = byzantine_messages(&s, ClientId(0), &observed, &targets(2), 2, &mut rng);
        for m in &msgs {
            assert!((m.model[0] + 0.3).abs() < 1e-15 && (m.model[1] + 0.2).abs() < 1e-15);
        }
        let s = AttackStrategy::new(AttackKind::DualInflation, 7.0);
        let msgs = byzantine_messages(&s, ClientId(0), &observed, &targets(2), 2, &mut rng);
        assert!((msgs[0].model[0] - 0.3).abs() < 1e-15);
        assert_eq!(msgs[0].dual, 7.0);
    }

    #[test]
    fn validation() {
        assert!(AttackStrategy::new(AttackKind::GaussianNoise, -1.0).validate(2).is_err());
        let mut s = AttackStrategy::new(AttackKind::FixedVector, 1.0);
        s.direction = Some(vec![1.0]);
        assert!(s.validate(2).is_err());
        s.direction = Some(vec![0.0, 0.0]);
        assert!(s.validate(2).is_err());
    }
}
