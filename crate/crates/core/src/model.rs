//! Channel model and belief dynamics.
//!
//! Every channel is an independent two-state Markov chain with
//! `P(1 -> 1) = p11` and `P(0 -> 1) = p01`. The information state is the
//! vector of per-channel probabilities of being in state 1 (good).
//!
//! Channel indices are 0-based in this API. The serde layer of [`Action`]
//! converts to and from the 1-based indices used in every file and on the
//! command line.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, OsaError, Result};

/// Sign of the chain's correlation: `p11 >= p01` is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct ChannelModel {
    p11: f64,
    p01: f64,
}

#[derive(Deserialize)]
struct RawModel {
    p11: f64,
    p01: f64,
}

impl TryFrom<RawModel> for ChannelModel {
    type Error = OsaError;

    fn try_from(raw: RawModel) -> Result<Self> {
        ChannelModel::new(raw.p11, raw.p01)
    }
}

impl ChannelModel {
    pub fn new(p11: f64, p01: f64) -> Result<Self> {
        let p11 = check_probability("p11", p11)?;
        let p01 = check_probability("p01", p01)?;
        Ok(Self { p11, p01 })
    }

    pub fn p11(&self) -> f64 {
        self.p11
    }

    pub fn p01(&self) -> f64 {
        self.p01
    }

    pub fn p10(&self) -> f64 {
        1.0 - self.p11
    }

    pub fn p00(&self) -> f64 {
        1.0 - self.p01
    }

    /// `|p11 - p01|`, the contraction factor of [`ChannelModel::tau`].
    pub fn delta(&self) -> f64 {
        (self.p11 - self.p01).abs()
    }

    pub fn regime(&self) -> Regime {
        if self.p11 >= self.p01 {
            Regime::Positive
        } else {
            Regime::Negative
        }
    }

    /// `(min(p01, p11), max(p01, p11))`: every propagated belief lands here.
    pub fn belief_box(&self) -> (f64, f64) {
        (self.p01.min(self.p11), self.p01.max(self.p11))
    }

    /// Fixed point of `tau`, `p01 / (1 - p11 + p01)`. `None` for the
    /// identity chain `p11 = 1, p01 = 0`, where every belief is fixed.
    pub fn stationary(&self) -> Option<f64> {
        let denom = 1.0 - self.p11 + self.p01;
        (denom > 0.0).then(|| self.p01 / denom)
    }

    /// One-step propagation of an unobserved channel's belief.
    pub fn tau(&self, omega: f64) -> Result<f64> {
        let omega = check_probability("omega", omega)?;
        Ok(self.propagate(omega))
    }

    #[inline]
    pub(crate) fn propagate(&self, omega: f64) -> f64 {
        omega * self.p11 + (1.0 - omega) * self.p01
    }

    /// Belief of a channel just observed in the given state.
    #[inline]
    pub fn after_observation(&self, good: bool) -> f64 {
        if good {
            self.p11
        } else {
            self.p01
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBelief")]
pub struct BeliefState {
    omegas: Vec<f64>,
}

#[derive(Deserialize)]
struct RawBelief {
    omegas: Vec<f64>,
}

impl TryFrom<RawBelief> for BeliefState {
    type Error = OsaError;

    fn try_from(raw: RawBelief) -> Result<Self> {
        BeliefState::new(raw.omegas)
    }
}

impl BeliefState {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(OsaError::InvalidParameter(
                "belief needs at least one channel".into(),
            ));
        }
        let omegas = omegas
            .into_iter()
            .map(|w| check_probability("omega", w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { omegas })
    }

    /// `n` copies of `omega`.
    pub fn uniform(n: usize, omega: f64) -> Result<Self> {
        Self::new(vec![omega; n])
    }

    pub(crate) fn from_vec_unchecked(omegas: Vec<f64>) -> Self {
        debug_assert!(omegas.iter().all(|w| (0.0..=1.0).contains(w)));
        Self { omegas }
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// True when every coordinate lies in the model's belief box.
    pub fn in_range(&self, model: &ChannelModel) -> bool {
        let (lo, hi) = model.belief_box();
        self.omegas
            .iter()
            .all(|&w| w >= lo - crate::TOL && w <= hi + crate::TOL)
    }

    pub fn with_coordinate(&self, index: usize, value: f64) -> Result<Self> {
        if index >= self.len() {
            return Err(OsaError::InvalidParameter(format!(
                "channel {index} out of range for N = {}",
                self.len()
            )));
        }
        let mut omegas = self.omegas.clone();
        omegas[index] = check_probability("omega", value)?;
        Ok(Self { omegas })
    }
}

/// A set of `k` channels to sense, stored as strictly increasing 0-based
/// indices. Serialized as a 1-based list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Action {
    channels: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Action {
    type Error = OsaError;

    fn try_from(one_based: Vec<usize>) -> Result<Self> {
        if one_based.contains(&0) {
            return Err(OsaError::InvalidParameter(
                "channel indices are 1-based".into(),
            ));
        }
        Self::from_indices(one_based.into_iter().map(|c| c - 1).collect())
    }
}

impl From<Action> for Vec<usize> {
    fn from(action: Action) -> Self {
        action.to_one_based()
    }
}

impl Action {
    /// Builds an action from 0-based indices in any order. Duplicates are
    /// rejected; the bound against `N` is checked by [`Action::validate`].
    pub fn from_indices(mut channels: Vec<usize>) -> Result<Self> {
        if channels.is_empty() {
            return Err(OsaError::InvalidParameter(
                "an action senses at least one channel".into(),
            ));
        }
        channels.sort_unstable();
        if channels.windows(2).any(|w| w[0] == w[1]) {
            return Err(OsaError::InvalidParameter(format!(
                "duplicate channel in action {channels:?}"
            )));
        }
        Ok(Self { channels })
    }

    pub fn new(channels: Vec<usize>, n: usize) -> Result<Self> {
        let action = Self::from_indices(channels)?;
        action.validate(n)?;
        Ok(action)
    }

    pub fn from_one_based(channels: &[usize], n: usize) -> Result<Self> {
        let action = Self::try_from(channels.to_vec())?;
        action.validate(n)?;
        Ok(action)
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.channels.len() > n {
            return Err(OsaError::InvalidParameter(format!(
                "k = {} exceeds N = {n}",
                self.channels.len()
            )));
        }
        if let Some(&c) = self.channels.iter().find(|&&c| c >= n) {
            return Err(OsaError::InvalidParameter(format!(
                "channel {} out of range for N = {n}",
                c + 1
            )));
        }
        Ok(())
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn k(&self) -> usize {
        self.channels.len()
    }

    pub fn contains(&self, channel: usize) -> bool {
        self.channels.binary_search(&channel).is_ok()
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.channels.iter().map(|c| c + 1).collect()
    }

    /// Every size-`k` subset of `0..n` in lexicographic order.
    pub fn all(n: usize, k: usize) -> Vec<Action> {
        let mut out = Vec::new();
        if k == 0 || k > n {
            return out;
        }
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(Action {
                channels: idx.clone(),
            });
            let mut i = k;
            while i > 0 && idx[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                return out;
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.to_one_based().iter().map(|c| c.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Observed states of the sensed channels, aligned with the action's
/// (increasing) channel order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensingOutcome {
    bits: Vec<bool>,
}

impl SensingOutcome {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        bits.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(OsaError::InvalidParameter(format!(
                    "outcome bit {other} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn successes(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// All `2^k` outcomes; bit `i` of the enumeration counter drives entry `i`.
    pub fn all(k: usize) -> impl Iterator<Item = SensingOutcome> {
        assert!(k < usize::BITS as usize, "k too large to enumerate");
        (0usize..1 << k).map(move |mask| SensingOutcome {
            bits: (0..k).map(|i| mask >> i & 1 == 1).collect(),
        })
    }
}

fn check_alignment(belief: &BeliefState, action: &Action, outcome: &SensingOutcome) -> Result<()> {
    action.validate(belief.len())?;
    if outcome.len() != action.k() {
        return Err(OsaError::LengthMismatch {
            what: "sensing outcome",
            expected: action.k(),
            got: outcome.len(),
        });
    }
    Ok(())
}

/// Next-step belief after sensing `action` and observing `outcome`.
/// Positions are preserved.
pub fn transition_belief(
    belief: &BeliefState,
    action: &Action,
    outcome: &SensingOutcome,
    model: &ChannelModel,
) -> Result<BeliefState> {
    check_alignment(belief, action, outcome)?;
    let mut next: Vec<f64> = belief.omegas.iter().map(|&w| model.propagate(w)).collect();
    for (&c, &good) in action.channels.iter().zip(&outcome.bits) {
        next[c] = model.after_observation(good);
    }
    Ok(BeliefState { omegas: next })
}

/// `q(l; omega)`: probability of observing `outcome` on the sensed channels.
pub fn outcome_probability(
    belief: &BeliefState,
    action: &Action,
    outcome: &SensingOutcome,
) -> Result<f64> {
    check_alignment(belief, action, outcome)?;
    Ok(action
        .channels
        .iter()
        .zip(&outcome.bits)
        .map(|(&c, &good)| {
            let w = belief.omegas[c];
            if good {
                w
            } else {
                1.0 - w
            }
        })
        .product())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn tau_boundaries() {
        let m = ChannelModel::new(0.7, 0.3).unwrap();
        assert!(close(m.tau(0.0).unwrap(), 0.3));
        assert!(close(m.tau(1.0).unwrap(), 0.7));
        let sym = ChannelModel::new(0.9, 0.1).unwrap();
        assert!(close(sym.tau(0.5).unwrap(), 0.5));
    }

    #[test]
    fn tau_rejects_out_of_domain() {
        let m = ChannelModel::new(0.7, 0.3).unwrap();
        assert!(m.tau(1.0 + 1e-9).is_err());
        assert!(m.tau(-1e-9).is_err());
        assert!(m.tau(f64::NAN).is_err());
        // within tolerance is clamped
        assert!(close(m.tau(1.0 + 1e-13).unwrap(), 0.7));
    }

    #[test]
    fn regime_ties_are_positive() {
        assert_eq!(ChannelModel::new(0.4, 0.4).unwrap().regime(), Regime::Positive);
        assert_eq!(ChannelModel::new(0.3, 0.4).unwrap().regime(), Regime::Negative);
        assert!(ChannelModel::new(1.0, 0.0).is_ok());
        assert!(ChannelModel::new(1.1, 0.0).is_err());
    }

    #[test]
    fn tau_monotone_by_regime_and_fixed_point() {
        for &(p11, p01) in &[(0.8, 0.2), (0.2, 0.8), (0.5, 0.5), (1.0, 0.0), (0.05, 0.95)] {
            let m = ChannelModel::new(p11, p01).unwrap();
            let vals: Vec<f64> = (0..100).map(|i| m.tau(i as f64 / 99.0).unwrap()).collect();
            let (lo, hi) = m.belief_box();
            assert!(vals.iter().all(|&v| v >= lo - 1e-15 && v <= hi + 1e-15));
            match m.regime() {
                Regime::Positive => assert!(vals.windows(2).all(|w| w[1] >= w[0])),
                Regime::Negative => assert!(vals.windows(2).all(|w| w[1] <= w[0])),
            }
            if let Some(star) = m.stationary() {
                assert!(close(m.tau(star).unwrap(), star));
            }
        }
        assert!(ChannelModel::new(1.0, 0.0).unwrap().stationary().is_none());
        assert_eq!(ChannelModel::new(0.0, 1.0).unwrap().stationary(), Some(0.5));
    }

    #[test]
    fn transition_examples() {
        let m = ChannelModel::new(0.8, 0.2).unwrap();
        let b = BeliefState::new(vec![0.9, 0.5, 0.2]).unwrap();
        let a = Action::new(vec![0], 3).unwrap();
        let good = transition_belief(&b, &a, &SensingOutcome::new(vec![true]), &m).unwrap();
        let want = [0.8, 0.5, 0.32];
        assert!(good.omegas().iter().zip(want).all(|(x, y)| close(*x, y)));
        let bad = transition_belief(&b, &a, &SensingOutcome::new(vec![false]), &m).unwrap();
        let want = [0.2, 0.5, 0.32];
        assert!(bad.omegas().iter().zip(want).all(|(x, y)| close(*x, y)));

        let all = Action::new(vec![0, 1, 2], 3).unwrap();
        for o in SensingOutcome::all(3) {
            let next = transition_belief(&b, &all, &o, &m).unwrap();
            assert!(next.omegas().iter().all(|&w| w == 0.8 || w == 0.2));
        }
    }

    #[test]
    fn transition_rejects_misaligned_outcome() {
        let m = ChannelModel::new(0.8, 0.2).unwrap();
        let b = BeliefState::new(vec![0.9, 0.5, 0.2]).unwrap();
        let a = Action::new(vec![0, 2], 3).unwrap();
        let err = transition_belief(&b, &a, &SensingOutcome::new(vec![true]), &m);
        assert!(matches!(err, Err(OsaError::LengthMismatch { .. })));
        let far = Action::from_indices(vec![5]).unwrap();
        assert!(transition_belief(&b, &far, &SensingOutcome::new(vec![true]), &m).is_err());
    }

    #[test]
    fn outcome_probability_examples() {
        let b = BeliefState::new(vec![0.9, 0.5]).unwrap();
        let a = Action::new(vec![0, 1], 2).unwrap();
        let p = |bits: &[u8]| {
            outcome_probability(&b, &a, &SensingOutcome::from_bits(bits).unwrap()).unwrap()
        };
        assert!(close(p(&[1, 0]), 0.45));
        assert!(close(p(&[1, 1]), 0.45));
        let total: f64 = SensingOutcome::all(2)
            .map(|o| outcome_probability(&b, &a, &o).unwrap())
            .sum();
        assert!(close(total, 1.0));
    }

    #[test]
    fn action_enumeration_and_validation() {
        let all = Action::all(5, 2);
        assert_eq!(all.len(), 10);
        assert_eq!(all[0].channels(), &[0, 1]);
        assert_eq!(all[9].channels(), &[3, 4]);
        assert!(Action::new(vec![1, 1], 3).is_err());
        assert!(Action::new(vec![3], 3).is_err());
        assert!(Action::from_one_based(&[0], 3).is_err());
        assert_eq!(Action::from_one_based(&[3, 1], 3).unwrap().channels(), &[0, 2]);
        assert_eq!(Action::all(4, 4).len(), 1);
    }

    #[test]
    fn json_shapes() {
        let m: ChannelModel = serde_json::from_str(r#"{"p11": 0.9, "p01": 0.1}"#).unwrap();
        assert_eq!(m, ChannelModel::new(0.9, 0.1).unwrap());
        assert!(serde_json::from_str::<ChannelModel>(r#"{"p11": 1.5, "p01": 0.1}"#).is_err());
        let b: BeliefState = serde_json::from_str(r#"{"omegas": [0.2, 0.4]}"#).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), r#"{"omegas":[0.2,0.4]}"#);
        assert!(serde_json::from_str::<BeliefState>(r#"{"omegas": []}"#).is_err());
        let a: Action = serde_json::from_str("[1,3]").unwrap();
        assert_eq!(a.channels(), &[0, 2]);
        assert_eq!(serde_json::to_string(&a).unwrap(), "[1,3]");
    }
}
