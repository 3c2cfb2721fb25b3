//! Sensing policies.
//!
//! The myopic policy senses the `k` channels with the largest beliefs. Since
//! `tau` is monotone, it can also be run from the initial ordering alone:
//! [`OrderedBelief`] and [`advance_order`] keep the list sorted by moving
//! observed channels to the ends after every step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OsaError, Result};
use crate::model::{Action, BeliefState, ChannelModel, Regime, SensingOutcome};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyKind {
    Myopic,
    /// Sense a fixed set at `t = 1`, then act myopically.
    FixedFirstThenMyopic(Action),
    /// Open-loop uniform random sets; the set at step `t` is a pure function
    /// of `(seed, t)`.
    Random { seed: u64 },
    /// Exact optimum, only available through [`crate::dp::optimal_value`].
    ExhaustiveOptimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPolicySpec", into = "RawPolicySpec")]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub k: usize,
    pub m: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPolicySpec {
    kind: String,
    k: usize,
    m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    first_action: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl TryFrom<RawPolicySpec> for PolicySpec {
    type Error = OsaError;

    fn try_from(raw: RawPolicySpec) -> Result<Self> {
        let kind = match raw.kind.as_str() {
            "myopic" => PolicyKind::Myopic,
            "optimal" => PolicyKind::ExhaustiveOptimal,
            "fixed" => PolicyKind::FixedFirstThenMyopic(raw.first_action.ok_or_else(|| {
                OsaError::InvalidParameter("policy \"fixed\" needs first_action".into())
            })?),
            "random" => PolicyKind::Random {
                seed: raw.seed.ok_or_else(|| {
                    OsaError::InvalidParameter("policy \"random\" needs seed".into())
                })?,
            },
            other => {
                return Err(OsaError::InvalidParameter(format!(
                    "unknown policy kind {other:?}"
                )))
            }
        };
        PolicySpec::new(kind, raw.k, raw.m)
    }
}

impl From<PolicySpec> for RawPolicySpec {
    fn from(spec: PolicySpec) -> Self {
        let (kind, first_action, seed) = match spec.kind {
            PolicyKind::Myopic => ("myopic", None, None),
            PolicyKind::ExhaustiveOptimal => ("optimal", None, None),
            PolicyKind::FixedFirstThenMyopic(a) => ("fixed", Some(a), None),
            PolicyKind::Random { seed } => ("random", None, Some(seed)),
        };
        RawPolicySpec {
            kind: kind.into(),
            k: spec.k,
            m: spec.m,
            first_action,
            seed,
        }
    }
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, k: usize, m: usize) -> Result<Self> {
        if m == 0 || m > k {
            return Err(OsaError::InvalidParameter(format!(
                "need 1 <= m <= k, got m = {m}, k = {k}"
            )));
        }
        if let PolicyKind::FixedFirstThenMyopic(a) = &kind {
            if a.k() != k {
                return Err(OsaError::InvalidParameter(format!(
                    "fixed first action {a} has {} channels, expected k = {k}",
                    a.k()
                )));
            }
        }
        Ok(Self { kind, k, m })
    }

    pub fn myopic(k: usize, m: usize) -> Result<Self> {
        Self::new(PolicyKind::Myopic, k, m)
    }

    pub fn fixed_first(first: Action, m: usize) -> Result<Self> {
        let k = first.k();
        Self::new(PolicyKind::FixedFirstThenMyopic(first), k, m)
    }

    /// Checks the spec against a system of `n` channels.
    pub fn bind(&self, n: usize) -> Result<()> {
        if self.k > n {
            return Err(OsaError::InvalidParameter(format!(
                "k = {} exceeds N = {n}",
                self.k
            )));
        }
        if let PolicyKind::FixedFirstThenMyopic(a) = &self.kind {
            a.validate(n)?;
        }
        Ok(())
    }

    pub fn is_stepwise(&self) -> bool {
        !matches!(self.kind, PolicyKind::ExhaustiveOptimal)
    }
}

/// Indices of the `k` largest beliefs, ties to the lowest index.
pub fn myopic_action(belief: &BeliefState, k: usize) -> Result<Action> {
    let n = belief.len();
    if k == 0 || k > n {
        return Err(OsaError::InvalidParameter(format!(
            "need 1 <= k <= N, got k = {k}, N = {n}"
        )));
    }
    Ok(Action::from_indices(top_k(belief.omegas(), k)).expect("distinct indices"))
}

pub(crate) fn top_k(omegas: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..omegas.len()).collect();
    // stable sort keeps lower indices first among equal beliefs
    idx.sort_by(|&a, &b| omegas[b].total_cmp(&omegas[a]));
    idx.truncate(k);
    idx
}

/// Action at 1-based step `t`.
pub fn policy_action(spec: &PolicySpec, belief: &BeliefState, t: usize) -> Result<Action> {
    spec.bind(belief.len())?;
    match &spec.kind {
        PolicyKind::Myopic => myopic_action(belief, spec.k),
        PolicyKind::FixedFirstThenMyopic(first) if t <= 1 => Ok(first.clone()),
        PolicyKind::FixedFirstThenMyopic(_) => myopic_action(belief, spec.k),
        PolicyKind::Random { seed } => Ok(random_action(*seed, t, belief.len(), spec.k)),
        PolicyKind::ExhaustiveOptimal => Err(OsaError::Unsupported(
            "the exhaustive optimum is not a stepwise rule; use dp::optimal_value".into(),
        )),
    }
}

/// Uniform size-`k` subset drawn from ChaCha8 seeded with `seed`, stream `t`.
pub fn random_action(seed: u64, t: usize, n: usize, k: usize) -> Action {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    let picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    Action::from_indices(picked).expect("sample yields distinct indices")
}

/// Belief values sorted nonincreasing, with `perm[pos]` the original
/// (0-based) channel at position `pos`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedBelief {
    pub values: Vec<f64>,
    pub perm: Vec<usize>,
}

impl OrderedBelief {
    pub fn from_belief(belief: &BeliefState) -> Self {
        let perm = top_k(belief.omegas(), belief.len());
        let values = perm.iter().map(|&i| belief.omegas()[i]).collect();
        Self { values, perm }
    }

    pub fn is_sorted(&self) -> bool {
        self.values.windows(2).all(|w| w[0] >= w[1])
    }

    /// Channels the myopic policy senses: the first `k` positions.
    pub fn front(&self, k: usize) -> Result<Action> {
        if k == 0 || k > self.perm.len() {
            return Err(OsaError::InvalidParameter(format!(
                "need 1 <= k <= N, got k = {k}, N = {}",
                self.perm.len()
            )));
        }
        Action::from_indices(self.perm[..k].to_vec())
    }

    /// Values in original channel order.
    pub fn to_belief(&self) -> BeliefState {
        let mut omegas = vec![0.0; self.values.len()];
        for (&v, &c) in self.values.iter().zip(&self.perm) {
            omegas[c] = v;
        }
        BeliefState::from_vec_unchecked(omegas)
    }
}

/// Reorders the list after the first `outcome.len()` positions were sensed.
///
/// Positive regime: good channels first, unsensed in order, bad last.
/// Negative regime: bad channels first, unsensed reversed, good last.
pub fn advance_order(
    ordered: &OrderedBelief,
    outcome: &SensingOutcome,
    model: &ChannelModel,
) -> Result<OrderedBelief> {
    let n = ordered.values.len();
    let k = outcome.len();
    if k == 0 || k > n {
        return Err(OsaError::LengthMismatch {
            what: "sensing outcome",
            expected: n.min(k.max(1)),
            got: k,
        });
    }
    let sensed = || outcome.bits().iter().zip(&ordered.perm[..k]);
    let good: Vec<usize> = sensed().filter(|(&b, _)| b).map(|(_, &c)| c).collect();
    let bad: Vec<usize> = sensed().filter(|(&b, _)| !b).map(|(_, &c)| c).collect();
    let middle = ordered.values[k..].iter().zip(&ordered.perm[k..]);

    let mut values = Vec::with_capacity(n);
    let mut perm = Vec::with_capacity(n);
    let (head, head_value, tail, tail_value) = match model.regime() {
        Regime::Positive => (&good, model.p11(), &bad, model.p01()),
        Regime::Negative => (&bad, model.p01(), &good, model.p11()),
    };
    for &c in head {
        values.push(head_value);
        perm.push(c);
    }
    let mut push_middle = |(&w, &c): (&f64, &usize)| {
        values.push(model.propagate(w));
        perm.push(c);
    };
    match model.regime() {
        Regime::Positive => middle.for_each(&mut push_middle),
        Regime::Negative => middle.rev().for_each(&mut push_middle),
    }
    for &c in tail {
        values.push(tail_value);
        perm.push(c);
    }
    Ok(OrderedBelief { values, perm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn belief(w: &[f64]) -> BeliefState {
        BeliefState::new(w.to_vec()).unwrap()
    }

    fn close_all(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn myopic_examples() {
        let a = myopic_action(&belief(&[0.2, 0.9, 0.5]), 2).unwrap();
        assert_eq!(a.to_one_based(), vec![2, 3]);
        let a = myopic_action(&belief(&[0.5, 0.5, 0.1]), 1).unwrap();
        assert_eq!(a.to_one_based(), vec![1]);
        let a = myopic_action(&belief(&[0.3; 4]), 2).unwrap();
        assert_eq!(a.to_one_based(), vec![1, 2]);
        assert!(myopic_action(&belief(&[0.3; 2]), 3).is_err());
    }

    #[test]
    fn advance_order_positive_example() {
        let m = ChannelModel::new(0.8, 0.2).unwrap();
        let o = OrderedBelief {
            values: vec![0.7, 0.6, 0.5, 0.4],
            perm: vec![0, 1, 2, 3],
        };
        let out = SensingOutcome::from_bits(&[1, 0]).unwrap();
        let next = advance_order(&o, &out, &m).unwrap();
        assert!(close_all(&next.values, &[0.8, 0.5, 0.44, 0.2]));
        assert_eq!(next.perm, vec![0, 2, 3, 1]);
    }

    #[test]
    fn advance_order_negative_example() {
        let m = ChannelModel::new(0.2, 0.8).unwrap();
        let o = OrderedBelief {
            values: vec![0.7, 0.6, 0.5, 0.4],
            perm: vec![0, 1, 2, 3],
        };
        let out = SensingOutcome::from_bits(&[1, 0]).unwrap();
        let next = advance_order(&o, &out, &m).unwrap();
        assert!(close_all(&next.values, &[0.8, 0.56, 0.5, 0.2]));
        assert_eq!(next.perm, vec![1, 3, 2, 0]);
    }

    #[test]
    fn advance_order_all_sensed() {
        for (p11, p01) in [(0.8, 0.2), (0.2, 0.8)] {
            let m = ChannelModel::new(p11, p01).unwrap();
            let o = OrderedBelief::from_belief(&belief(&[0.3, 0.6, 0.5]));
            let out = SensingOutcome::from_bits(&[1, 1, 1]).unwrap();
            let next = advance_order(&o, &out, &m).unwrap();
            assert!(close_all(&next.values, &[p11; 3]));
            let mixed = advance_order(&o, &SensingOutcome::from_bits(&[1, 0, 1]).unwrap(), &m).unwrap();
            assert!(mixed.is_sorted());
        }
    }

    #[test]
    fn policy_dispatch() {
        let b = belief(&[0.2, 0.9, 0.5]);
        let myopic = PolicySpec::myopic(2, 1).unwrap();
        assert_eq!(policy_action(&myopic, &b, 3).unwrap().to_one_based(), vec![2, 3]);
        let fixed = PolicySpec::fixed_first(Action::from_one_based(&[1, 3], 3).unwrap(), 1).unwrap();
        assert_eq!(policy_action(&fixed, &b, 1).unwrap().to_one_based(), vec![1, 3]);
        assert_eq!(policy_action(&fixed, &b, 2).unwrap().to_one_based(), vec![2, 3]);
        let opt = PolicySpec::new(PolicyKind::ExhaustiveOptimal, 2, 1).unwrap();
        assert!(matches!(policy_action(&opt, &b, 1), Err(OsaError::Unsupported(_))));
        let too_big = PolicySpec::myopic(4, 1).unwrap();
        assert!(policy_action(&too_big, &b, 1).is_err());
    }

    #[test]
    fn random_policy_is_reproducible() {
        let spec = PolicySpec::new(PolicyKind::Random { seed: 7 }, 2, 1).unwrap();
        let b = belief(&[0.5; 6]);
        let a1: Vec<Action> = (1..20).map(|t| policy_action(&spec, &b, t).unwrap()).collect();
        let a2: Vec<Action> = (1..20).map(|t| policy_action(&spec, &b, t).unwrap()).collect();
        assert_eq!(a1, a2);
        assert!(a1.iter().all(|a| a.k() == 2));
        assert!(a1.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn spec_json() {
        let s: PolicySpec =
            serde_json::from_str(r#"{"kind":"fixed","k":2,"m":1,"first_action":[1,3]}"#).unwrap();
        assert_eq!(
            s.kind,
            PolicyKind::FixedFirstThenMyopic(Action::new(vec![0, 2], 3).unwrap())
        );
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"kind":"fixed","k":2,"m":1,"first_action":[1,3]}"#);
        let r: PolicySpec = serde_json::from_str(r#"{"kind":"random","k":1,"m":1,"seed":9}"#).unwrap();
        assert_eq!(r.kind, PolicyKind::Random { seed: 9 });
        assert!(serde_json::from_str::<PolicySpec>(r#"{"kind":"fixed","k":2,"m":1}"#).is_err());
        assert!(serde_json::from_str::<PolicySpec>(r#"{"kind":"myopic","k":1,"m":2}"#).is_err());
        assert!(serde_json::from_str::<PolicySpec>(r#"{"kind":"whittle","k":1,"m":1}"#).is_err());
    }
}
