//! Sufficient conditions for optimality of the myopic policy, and the
//! value-sensitivity bounds they are built from.
//!
//! | regime   | finite horizon          | infinite horizon                        |
//! |----------|-------------------------|-----------------------------------------|
//! | positive | `beta <= Rl / Ru`       | `delta / (1 - delta) < Rl / Ru`         |
//! | negative | `beta <= Rl / (Rl + Ru)`| `min(delta, 1 / (2 (1 - delta))) <= Rl / Ru` |
//!
//! `Ru`, `Rl` are the reward-gap bounds of [`crate::reward::reward_gap_bounds`].
//! With `k >= N - 1` the myopic policy is optimal unconditionally.

use serde::{Deserialize, Serialize};

use crate::error::{OsaError, Result};
use crate::model::{ChannelModel, Regime};
use crate::reward::{reward_gap_bounds, RewardGapBounds};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonKind {
    Finite,
    Infinite,
}

pub const BELIEF_DOMAIN_NOTE: &str =
    "guarantee covers beliefs with every coordinate between p01 and p11; \
     any belief enters that range after one step";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub regime: Regime,
    pub horizon: HorizonKind,
    pub r_upper: f64,
    pub r_lower: f64,
    /// Right-hand side of the comparison.
    pub threshold: f64,
    /// Left-hand side: `beta` for finite horizons, the `delta` expression
    /// for infinite ones.
    pub lhs: f64,
    pub satisfied: bool,
    /// `k >= N - 1`: optimal without any condition.
    pub unconditional: bool,
    pub belief_domain_note: String,
    /// Negative infinite horizon only: the summary-table form
    /// `lhs <= Ru / Rl`, which is weaker than the one used for `satisfied`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_variant_satisfied: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

fn check_counts(k: usize, m: usize, n: usize) -> Result<()> {
    if m == 0 || m > k || k > n {
        return Err(OsaError::InvalidParameter(format!(
            "need 1 <= m <= k <= N, got m = {m}, k = {k}, N = {n}"
        )));
    }
    Ok(())
}

/// Finite-horizon condition on the discount factor.
pub fn finite_condition(
    model: &ChannelModel,
    k: usize,
    m: usize,
    n: usize,
    beta: f64,
) -> Result<ConditionReport> {
    check_counts(k, m, n)?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(OsaError::InvalidParameter(format!(
            "need 0 <= beta <= 1, got {beta}"
        )));
    }
    let bounds = reward_gap_bounds(model, k, m)?;
    let regime = model.regime();
    let threshold = match regime {
        Regime::Positive => bounds.ratio(),
        Regime::Negative => bounds.r_lower / (bounds.r_lower + bounds.r_upper),
    };
    let unconditional = k + 1 >= n;
    Ok(ConditionReport {
        regime,
        horizon: HorizonKind::Finite,
        r_upper: bounds.r_upper,
        r_lower: bounds.r_lower,
        threshold,
        lhs: beta,
        satisfied: unconditional || beta <= threshold,
        unconditional,
        belief_domain_note: BELIEF_DOMAIN_NOTE.into(),
        table_variant_satisfied: None,
        diagnostic: None,
    })
}

/// Infinite-horizon condition on `(p11, p01)`, valid for every `0 < beta < 1`.
pub fn infinite_condition(
    model: &ChannelModel,
    k: usize,
    m: usize,
    n: usize,
) -> Result<ConditionReport> {
    check_counts(k, m, n)?;
    let bounds = reward_gap_bounds(model, k, m)?;
    let regime = model.regime();
    let delta = model.delta();
    let ratio = bounds.ratio();
    let unconditional = k + 1 >= n;
    let mut diagnostic = None;
    let (lhs, holds, table_variant_satisfied) = match regime {
        Regime::Positive => {
            if delta >= 1.0 {
                diagnostic = Some("delta = 1: delta / (1 - delta) is undefined".to_string());
                (f64::INFINITY, false, None)
            } else {
                let lhs = delta / (1.0 - delta);
                (lhs, lhs < ratio, None)
            }
        }
        Regime::Negative => {
            let lhs = delta.min(1.0 / (2.0 * (1.0 - delta)));
            let inverse = if bounds.r_lower > 0.0 {
                bounds.r_upper / bounds.r_lower
            } else {
                f64::INFINITY
            };
            (lhs, lhs <= ratio, Some(unconditional || lhs <= inverse))
        }
    };
    Ok(ConditionReport {
        regime,
        horizon: HorizonKind::Infinite,
        r_upper: bounds.r_upper,
        r_lower: bounds.r_lower,
        threshold: ratio,
        lhs,
        satisfied: unconditional || holds,
        unconditional,
        belief_domain_note: BELIEF_DOMAIN_NOTE.into(),
        table_variant_satisfied,
        diagnostic,
    })
}

/// Per-coordinate sensitivity bounds of the myopic value function:
/// `(x - y) lower[t-1] <= W_t(.., x, ..) - W_t(.., y, ..) <= (x - y) upper[t-1]`
/// for `x >= y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSequence {
    pub regime: Regime,
    pub steps: usize,
    pub beta: f64,
    pub delta: f64,
    pub r_upper: f64,
    pub r_lower: f64,
    /// `Delta_t` (positive) or `Delta-bar_t` (negative), indexed by `t - 1`.
    pub upper: Vec<f64>,
    /// Zero (positive) or `Delta-underbar_t` (negative).
    pub lower: Vec<f64>,
    /// Negative regime: `Rl - beta delta Ru`.
    pub eta: Option<f64>,
    /// Infinite-horizon limit of `upper[0]`; `None` when `beta delta = 1`.
    pub upper_inf: Option<f64>,
    /// Infinite-horizon limit of `lower[0]`; `None` when `beta delta = 1`.
    pub lower_inf: Option<f64>,
}

impl BoundSequence {
    pub fn at(&self, t: usize) -> (f64, f64) {
        (self.lower[t - 1], self.upper[t - 1])
    }
}

/// `(1 - x^n) / (1 - x^2)`, continuous at `x = 1`.
fn even_geometric(x: f64, n: usize) -> f64 {
    let x2 = x * x;
    if (1.0 - x2).abs() < 1e-15 {
        n as f64 / 2.0
    } else {
        (1.0 - x.powi(n as i32)) / (1.0 - x2)
    }
}

pub fn delta_bounds(
    model: &ChannelModel,
    k: usize,
    m: usize,
    beta: f64,
    steps: usize,
) -> Result<BoundSequence> {
    if steps == 0 {
        return Err(OsaError::InvalidParameter("horizon T must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(OsaError::InvalidParameter(format!(
            "need 0 <= beta <= 1, got {beta}"
        )));
    }
    let RewardGapBounds { r_upper, r_lower } = reward_gap_bounds(model, k, m)?;
    let delta = model.delta();
    let x = beta * delta;
    let regime = model.regime();
    let mut seq = BoundSequence {
        regime,
        steps,
        beta,
        delta,
        r_upper,
        r_lower,
        upper: Vec::with_capacity(steps),
        lower: vec![0.0; steps],
        eta: None,
        upper_inf: None,
        lower_inf: None,
    };
    match regime {
        Regime::Positive => {
            for t in 1..=steps {
                let sum: f64 = (0..=steps - t).map(|i| x.powi(i as i32)).sum();
                seq.upper.push(r_upper * sum);
            }
            seq.upper_inf = (x < 1.0).then(|| r_upper / (1.0 - x));
        }
        Regime::Negative => {
            let eta = r_lower - beta * delta * r_upper;
            seq.eta = Some(eta);
            for t in 1..=steps {
                if eta < 0.0 {
                    let g = even_geometric(x, steps - t + 3) * eta;
                    seq.lower[t - 1] = g;
                    seq.upper.push(r_upper - g);
                } else {
                    seq.upper.push(r_upper);
                }
            }
            if x < 1.0 {
                let tail = eta / (1.0 - x * x);
                seq.lower_inf = Some(tail.min(0.0));
                seq.upper_inf = Some((r_upper - x * tail).max(r_upper));
            }
        }
    }
    Ok(seq)
}
