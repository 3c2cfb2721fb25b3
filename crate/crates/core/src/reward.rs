//! One-step reward of the (k, m) access model.
//!
//! Sensing `k` channels and using at most `m` of those found good pays
//! `min(L, m)` where `L` counts the good sensed channels. `L` is
//! Poisson-binomial over the sensed beliefs, so the expectation is exact in
//! `O(k^2)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, OsaError, Result};
use crate::model::{Action, BeliefState, ChannelModel};

/// `probs[l] = P(exactly l successes)` for independent Bernoulli trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessCountDistribution {
    probs: Vec<f64>,
}

impl SuccessCountDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(l, p)| l as f64 * p).sum()
    }

    /// `P(L <= l)`.
    pub fn cdf(&self, l: usize) -> f64 {
        if l + 1 >= self.probs.len() {
            return 1.0;
        }
        self.probs.iter().take(l + 1).sum::<f64>().clamp(0.0, 1.0)
    }

    /// `E[min(L, cap)]`.
    pub fn expected_capped(&self, cap: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(l, p)| l.min(cap) as f64 * p)
            .sum()
    }
}

/// Exact success-count distribution by iterative convolution.
pub fn success_count_distribution(probs: &[f64]) -> Result<SuccessCountDistribution> {
    for &p in probs {
        check_probability("success probability", p)?;
    }
    Ok(poisson_binomial(probs))
}

pub(crate) fn poisson_binomial(probs: &[f64]) -> SuccessCountDistribution {
    let mut dist = Vec::with_capacity(probs.len() + 1);
    dist.push(1.0);
    for &p in probs {
        dist.push(0.0);
        for l in (1..dist.len()).rev() {
            dist[l] = dist[l] * (1.0 - p) + dist[l - 1] * p;
        }
        dist[0] *= 1.0 - p;
    }
    SuccessCountDistribution { probs: dist }
}

fn check_m(m: usize, k: usize) -> Result<()> {
    if m == 0 || m > k {
        return Err(OsaError::InvalidParameter(format!(
            "need 1 <= m <= k, got m = {m}, k = {k}"
        )));
    }
    Ok(())
}

/// `E[min(L, m)]` for the sensed probabilities `sensed`.
pub fn expected_reward_of(sensed: &[f64], m: usize) -> Result<f64> {
    check_m(m, sensed.len())?;
    Ok(success_count_distribution(sensed)?.expected_capped(m))
}

#[inline]
pub(crate) fn capped_mean(sensed: &[f64], m: usize) -> f64 {
    poisson_binomial(sensed).expected_capped(m)
}

/// Expected reward of sensing `action` under `belief`, using up to `m`
/// good channels.
pub fn expected_reward(belief: &BeliefState, action: &Action, m: usize) -> Result<f64> {
    action.validate(belief.len())?;
    let sensed: Vec<f64> = action
        .channels()
        .iter()
        .map(|&c| belief.omegas()[c])
        .collect();
    expected_reward_of(&sensed, m)
}

/// `E[R(1, rest)] - E[R(0, rest)]`, the reward sensitivity to one sensed
/// channel. Equals `P(L_rest <= m - 1)`.
pub fn reward_gap(omega_rest: &[f64], m: usize) -> Result<f64> {
    check_m(m, omega_rest.len() + 1)?;
    Ok(success_count_distribution(omega_rest)?.cdf(m - 1))
}

/// Extremes of [`reward_gap`] over the model's belief box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardGapBounds {
    pub r_upper: f64,
    pub r_lower: f64,
}

impl RewardGapBounds {
    /// `r_lower / r_upper`; 1 when the gap vanishes identically.
    pub fn ratio(&self) -> f64 {
        if self.r_upper > 0.0 {
            self.r_lower / self.r_upper
        } else {
            1.0
        }
    }
}

/// The gap is nonincreasing in every coordinate, so the maximum sits at the
/// all-lower corner of the box and the minimum at the all-upper corner.
pub fn reward_gap_bounds(model: &ChannelModel, k: usize, m: usize) -> Result<RewardGapBounds> {
    check_m(m, k)?;
    let (lo, hi) = model.belief_box();
    let r_upper = reward_gap(&vec![lo; k - 1], m)?;
    let r_lower = reward_gap(&vec![hi; k - 1], m)?;
    Ok(RewardGapBounds { r_upper, r_lower })
}

/// Brute-force version of [`reward_gap_bounds`]: max and min of the gap over
/// a grid with `points` values per axis. Cross-check only.
pub fn reward_gap_bounds_grid(
    model: &ChannelModel,
    k: usize,
    m: usize,
    points: usize,
) -> Result<RewardGapBounds> {
    check_m(m, k)?;
    if points < 2 {
        return Err(OsaError::InvalidParameter("grid needs >= 2 points per axis".into()));
    }
    let dims = k - 1;
    let cells = (points as f64).powi(dims as i32);
    if cells > 5e6 {
        return Err(OsaError::ScaleGuard(format!(
            "{points}^{dims} grid points for the gap search"
        )));
    }
    let (lo, hi) = model.belief_box();
    let axis: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let mut idx = vec![0usize; dims];
    let mut point = vec![lo; dims];
    let mut r_upper = f64::NEG_INFINITY;
    let mut r_lower = f64::INFINITY;
    loop {
        for (p, &i) in point.iter_mut().zip(&idx) {
            *p = axis[i];
        }
        let g = poisson_binomial(&point).cdf(m - 1);
        r_upper = r_upper.max(g);
        r_lower = r_lower.min(g);
        // odometer increment
        let mut d = 0;
        while d < dims {
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }
    Ok(RewardGapBounds { r_upper, r_lower })
}
