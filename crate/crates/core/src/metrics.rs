//! Regret, constraint violation, trust misclassification, and `T_f`.
//!
//! All cumulative series are left-to-right prefix sums of per-round terms
//! read from the round logs, so an independent re-summation in round order
//! reproduces them bit for bit.

use alloc::vec::Vec;

use crate::engine::RoundLog;
use crate::error::{Error, Result};
use crate::oracle::Comparator;
use crate::taskmodel::loss;
use crate::topology::{ClientId, GraphTopology};
use crate::trust::ClassificationCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SeriesKind {
    CumulativeRegret,
    TimeAvgRegret,
    CumulativeViolationMean,
    CumulativeViolationMax,
    TimeAvgViolation,
    MisclassificationRate,
}

/// Per-round values; `values[i]` belongs to round `i + 1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricSeries {
    pub kind: SeriesKind,
    pub values: Vec<f64>,
}

impl MetricSeries {
    pub fn new(kind: SeriesKind, values: Vec<f64>) -> Self {
        Self { kind, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

fn check_comparator(logs: &[RoundLog], comp: &Comparator) -> Result<()> {
    if comp.horizon != logs.len() {
        return Err(Error::HorizonMismatch {
            expected: logs.len(),
            got: comp.horizon,
        });
    }
    Ok(())
}

/// `sum_v [f_v,t(x_v,t) - f_v,t(x*_v)]` for one round.
pub fn instantaneous_regret(log: &RoundLog, comp: &Comparator) -> f64 {
    let mut total = 0.0;
    for (c, star) in log.clients.iter().zip(&comp.models) {
        total += c.loss - loss(star, &c.sample);
    }
    total
}

/// Cumulative regret through round `upto`.
pub fn cumulative_regret(logs: &[RoundLog], comp: &Comparator, upto: usize) -> Result<f64> {
    check_comparator(logs, comp)?;
    if upto > logs.len() {
        return Err(Error::HorizonMismatch {
            expected: logs.len(),
            got: upto,
        });
    }
    let mut total = 0.0;
    for log in &logs[..upto] {
        total += instantaneous_regret(log, comp);
    }
    Ok(total)
}

/// Cumulative regret after every round.
pub fn regret_series(logs: &[RoundLog], comp: &Comparator) -> Result<MetricSeries> {
    check_comparator(logs, comp)?;
    let mut total = 0.0;
    let values = logs
        .iter()
        .map(|log| {
            total += instantaneous_regret(log, comp);
            total
        })
        .collect();
    Ok(MetricSeries::new(SeriesKind::CumulativeRegret, values))
}

fn edge_index(logs: &[RoundLog], g: &GraphTopology, v: ClientId, u: ClientId) -> Result<Option<usize>> {
    for w in [v, u] {
        if !g.contains(w) {
            return Err(Error::UnknownClient(w.0));
        }
        if g.is_byzantine(w) {
            return Err(Error::ByzantineEdge(v.0, u.0));
        }
    }
    if !g.has_edge(v, u) && !g.has_edge(u, v) {
        return Err(Error::InvalidEdge(v.0, u.0));
    }
    let key = if v < u { (v, u) } else { (u, v) };
    Ok(logs
        .first()
        .and_then(|l| l.edges.iter().position(|e| (e.a, e.b) == key)))
}

/// Cumulative `g_vu` over honest edge `(v, u)` through round `upto`.
pub fn cumulative_violation(logs: &[RoundLog], g: &GraphTopology, v: ClientId, u: ClientId, upto: usize) -> Result<f64> {
    if upto > logs.len() {
        return Err(Error::HorizonMismatch {
            expected: logs.len(),
            got: upto,
        });
    }
    let idx = edge_index(logs, g, v, u)?;
    let mut total = 0.0;
    if let Some(i) = idx {
        for log in &logs[..upto] {
            total += log.edges[i].value;
        }
    }
    Ok(total)
}

/// Cumulative violation per honest edge, in the order of `RoundLog::edges`.
pub fn per_edge_violation(logs: &[RoundLog]) -> Vec<Vec<f64>> {
    let m = logs.first().map_or(0, |l| l.edges.len());
    let mut totals = alloc::vec![0.0; m];
    logs.iter()
        .map(|log| {
            for (t, e) in totals.iter_mut().zip(&log.edges) {
                *t += e.value;
            }
            totals.clone()
        })
        .collect()
}

/// Mean and max over honest edges of the cumulative violation, after every
/// round. Both series are zero when there are no honest edges.
pub fn violation_series(logs: &[RoundLog]) -> (MetricSeries, MetricSeries) {
    let m = logs.first().map_or(0, |l| l.edges.len());
    let mut totals = alloc::vec![0.0; m];
    let mut mean = Vec::with_capacity(logs.len());
    let mut max = Vec::with_capacity(logs.len());
    for log in logs {
        for (t, e) in totals.iter_mut().zip(&log.edges) {
            *t += e.value;
        }
        if m == 0 {
            mean.push(0.0);
            max.push(0.0);
        } else {
            mean.push(totals.iter().sum::<f64>() / m as f64);
            max.push(totals.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
    }
    (
        MetricSeries::new(SeriesKind::CumulativeViolationMean, mean),
        MetricSeries::new(SeriesKind::CumulativeViolationMax, max),
    )
}

/// Divides the value at round `t` by `t`.
pub fn time_average(series: &MetricSeries) -> MetricSeries {
    let kind = match series.kind {
        SeriesKind::CumulativeRegret => SeriesKind::TimeAvgRegret,
        SeriesKind::CumulativeViolationMean | SeriesKind::CumulativeViolationMax => SeriesKind::TimeAvgViolation,
        other => other,
    };
    MetricSeries::new(
        kind,
        series
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v / (i + 1) as f64)
            .collect(),
    )
}

/// Smallest `t` such that classification is perfect at every round `>= t`.
///
/// `history[t]` is the classification after `t` rounds, with `history[0]`
/// the initial state. Returns `None` when the final round is imperfect.
pub fn measure_tf(history: &[ClassificationCounts]) -> Option<usize> {
    let last_bad = history.iter().rposition(|c| !c.is_perfect());
    match last_bad {
        None => Some(0),
        Some(t) if t + 1 < history.len() => Some(t + 1),
        Some(_) => None,
    }
}

/// Misclassified fractions split by the neighbor's true class.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Misclassification {
    pub honest: f64,
    pub byzantine: f64,
}

/// Misclassification fractions at round `t` (`history[t]`).
pub fn misclassification_rate(history: &[ClassificationCounts], t: usize) -> Result<Misclassification> {
    let c = history.get(t).ok_or(Error::HorizonMismatch {
        expected: history.len().saturating_sub(1),
        got: t,
    })?;
    Ok(Misclassification {
        honest: c.honest_rate(),
        byzantine: c.byzantine_rate(),
    })
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn counts(hm: usize, bm: usize) -> ClassificationCounts {
        ClassificationCounts {
            honest_pairs: 4,
            honest_misclassified: hm,
            byzantine_pairs: 4,
            byzantine_misclassified: bm,
        }
    }

    #[test]
    fn time_average_cases() {
        let s = MetricSeries::new(SeriesKind::CumulativeRegret, vec![1.0, 2.0, 3.0]);
        assert_eq!(time_average(&s).values, vec![1.0, 1.0, 1.0]);
        let s = MetricSeries::new(SeriesKind::CumulativeRegret, vec![4.0, 4.0, 4.0]);
        assert_eq!(time_average(&s).values, vec![4.0, 2.0, 4.0 / 3.0]);
        assert_eq!(time_average(&s).kind, SeriesKind::TimeAvgRegret);
        let s = MetricSeries::new(SeriesKind::CumulativeViolationMax, vec![0.0; 5]);
        assert!(time_average(&s).values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tf_cases() {
        // Imperfect at t = 0 only.
        let h = vec![counts(0, 4), counts(0, 0), counts(0, 0)];
        assert_eq!(measure_tf(&h), Some(1));
        let mut h = vec![counts(0, 4)];
        h.extend((1..=50).map(|t| if t == 37 { counts(1, 0) } else { counts(0, 0) }));
        assert_eq!(measure_tf(&h), Some(38));
        let h = vec![counts(0, 4), counts(0, 0), counts(0, 1)];
        assert_eq!(measure_tf(&h), None);
        assert_eq!(measure_tf(&[counts(0, 0)]), Some(0));
    }

    #[test]
    fn misclassification_cases() {
        let h = vec![counts(0, 4), counts(0, 0)];
        let m0 = misclassification_rate(&h, 0).unwrap();
        assert_eq!(m0.byzantine, 1.0);
        assert_eq!(m0.honest, 0.0);
        let m1 = misclassification_rate(&h, 1).unwrap();
        assert_eq!((m1.honest, m1.byzantine), (0.0, 0.0));
        assert!(misclassification_rate(&h, 2).is_err());
    }

    #[test]
    fn slope() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        assert!((ols_slope(&x, &y) - 2.0).abs() < 1e-15);
    }
}
