//! Exact dynamic programming over belief states.
//!
//! After every step the sensed channels collapse to `p11` or `p01`, so the
//! next belief depends only on how many sensed channels were good. Myopic
//! continuation values are symmetric in the channel labels, which lets them
//! be tabulated over sorted beliefs: [`MyopicChain`] collects the states
//! reachable from a set of roots and runs backward induction over them.
//! No belief is rounded or quantized; states are keyed by their exact bits.

use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OsaError, Result};
use crate::model::{Action, BeliefState, ChannelModel, Regime};
use crate::policy::{policy_action, PolicyKind, PolicySpec};
use crate::reward::{capped_mean, poisson_binomial};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Finite { steps: usize },
    /// Truncated at the first `T` whose tail bound `m beta^T / (1 - beta)`
    /// is at most `epsilon`.
    Infinite { epsilon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonSpec {
    pub horizon: Horizon,
    pub beta: f64,
}

impl HorizonSpec {
    pub fn finite(steps: usize, beta: f64) -> Result<Self> {
        let spec = Self {
            horizon: Horizon::Finite { steps },
            beta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn infinite(beta: f64, epsilon: f64) -> Result<Self> {
        let spec = Self {
            horizon: Horizon::Infinite { epsilon },
            beta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self.horizon {
            Horizon::Finite { steps } => {
                if steps == 0 {
                    return Err(OsaError::InvalidParameter("horizon T must be >= 1".into()));
                }
                if !(0.0..=1.0).contains(&self.beta) {
                    return Err(OsaError::InvalidParameter(format!(
                        "finite horizon needs 0 <= beta <= 1, got {}",
                        self.beta
                    )));
                }
            }
            Horizon::Infinite { epsilon } => {
                if !(self.beta > 0.0 && self.beta < 1.0) {
                    return Err(OsaError::InvalidParameter(format!(
                        "infinite horizon needs 0 < beta < 1, got {} (beta = 1 only with finite T)",
                        self.beta
                    )));
                }
                if epsilon.is_nan() || epsilon <= 0.0 {
                    return Err(OsaError::InvalidParameter(format!(
                        "truncation tolerance must be positive, got {epsilon}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Size limits for the exact solvers. [`DpLimits::default`] is the desk-scale
/// guard; callers can widen it explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpLimits {
    /// Max `C(N, k) * 2^k` for the exhaustive optimum.
    pub optimal_branching: u64,
    /// Max horizon for the exhaustive optimum.
    pub optimal_steps: usize,
    /// Max horizon for policy evaluation (including truncation horizons).
    pub max_steps: usize,
    /// Max distinct beliefs held in one table.
    pub max_states: usize,
    /// Max candidate beliefs for the deviation audit.
    pub max_audit_beliefs: usize,
}

impl Default for DpLimits {
    fn default() -> Self {
        Self {
            optimal_branching: 4096,
            optimal_steps: 8,
            max_steps: 20_000,
            max_states: 2_000_000,
            max_audit_beliefs: 250_000,
        }
    }
}

impl DpLimits {
    pub fn unlimited() -> Self {
        Self {
            optimal_branching: u64::MAX,
            optimal_steps: usize::MAX,
            max_steps: usize::MAX,
            max_states: usize::MAX,
            max_audit_beliefs: usize::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueResult {
    pub value: f64,
    /// Truncation bound; 0 for exact finite-horizon results.
    pub error_bound: f64,
    /// Maximizing first actions (optimal-value runs only).
    pub first_actions: Vec<Action>,
    /// Number of steps actually evaluated.
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub profitable_found: bool,
    pub witness_belief: Option<BeliefState>,
    pub witness_action: Option<Action>,
    /// Best deviation value minus the myopic value over all audited pairs.
    pub gain: f64,
    /// Gains must exceed this to count as profitable.
    pub threshold: f64,
    pub beliefs_audited: usize,
    pub steps: usize,
}

fn key(state: &[f64]) -> Vec<u64> {
    state.iter().map(|w| w.to_bits()).collect()
}

fn sort_desc(v: &mut [f64]) {
    v.sort_by(|a, b| b.total_cmp(a));
}

/// `(probability, sorted next belief)` for each success count of sensing
/// `sensed` while `unsensed` evolves unobserved. Zero-probability counts are
/// dropped.
fn grouped_successors(
    model: &ChannelModel,
    sensed: &[f64],
    unsensed: &[f64],
) -> Vec<(f64, Vec<f64>)> {
    let k = sensed.len();
    let dist = poisson_binomial(sensed);
    let propagated: Vec<f64> = unsensed.iter().map(|&w| model.propagate(w)).collect();
    dist.probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(good, &p)| {
            let mut next = Vec::with_capacity(k + unsensed.len());
            next.extend(std::iter::repeat_n(model.p11(), good));
            next.extend_from_slice(&propagated);
            next.extend(std::iter::repeat_n(model.p01(), k - good));
            sort_desc(&mut next);
            (p, next)
        })
        .collect()
}

fn split_action(omegas: &[f64], action: &Action) -> (Vec<f64>, Vec<f64>) {
    let sensed = action.channels().iter().map(|&c| omegas[c]).collect();
    let unsensed = (0..omegas.len())
        .filter(|&i| !action.contains(i))
        .map(|i| omegas[i])
        .collect();
    (sensed, unsensed)
}

/// Beliefs reachable under the myopic policy, in sorted form, with their
/// one-step rewards and grouped transitions.
pub(crate) struct MyopicChain {
    model: ChannelModel,
    k: usize,
    m: usize,
    max_states: usize,
    states: Vec<Vec<f64>>,
    index: HashMap<Vec<u64>, usize>,
    depth: Vec<usize>,
    reward: Vec<f64>,
    succ: Vec<Vec<(f64, usize)>>,
}

impl MyopicChain {
    pub(crate) fn new(model: ChannelModel, k: usize, m: usize, max_states: usize) -> Self {
        Self {
            model,
            k,
            m,
            max_states,
            states: Vec::new(),
            index: HashMap::new(),
            depth: Vec::new(),
            reward: Vec::new(),
            succ: Vec::new(),
        }
    }

    fn intern(&mut self, state: Vec<f64>, depth: usize) -> Result<usize> {
        let key = key(&state);
        if let Some(&i) = self.index.get(&key) {
            return Ok(i);
        }
        if self.states.len() >= self.max_states {
            return Err(OsaError::ScaleGuard(format!(
                "more than {} distinct beliefs reachable",
                self.max_states
            )));
        }
        let i = self.states.len();
        self.reward.push(capped_mean(&state[..self.k], self.m));
        self.states.push(state);
        self.index.insert(key, i);
        self.depth.push(depth);
        self.succ.push(Vec::new());
        Ok(i)
    }

    /// Adds a sorted root belief.
    pub(crate) fn add_root(&mut self, state: Vec<f64>) -> Result<usize> {
        debug_assert!(state.windows(2).all(|w| w[0] >= w[1]));
        self.intern(state, 0)
    }

    /// Expands every state whose value is needed with more than one step to
    /// go, so that `values(beta, h)` is exact at the roots for `h <= steps`.
    pub(crate) fn expand(&mut self, steps: usize) -> Result<()> {
        let mut queue: VecDeque<usize> = (0..self.states.len()).collect();
        while let Some(s) = queue.pop_front() {
            if self.depth[s] + 2 > steps || !self.succ[s].is_empty() {
                continue;
            }
            let state = self.states[s].clone();
            let next = grouped_successors(&self.model, &state[..self.k], &state[self.k..]);
            let mut edges = Vec::with_capacity(next.len());
            for (p, n) in next {
                let before = self.states.len();
                let j = self.intern(n, self.depth[s] + 1)?;
                if j == before {
                    queue.push_back(j);
                }
                edges.push((p, j));
            }
            self.succ[s] = edges;
        }
        Ok(())
    }

    /// `V_h` for every state (exact where [`MyopicChain::expand`] allows).
    pub(crate) fn values(&self, beta: f64, h: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.states.len()];
        for _ in 0..h {
            v = (0..self.states.len())
                .into_par_iter()
                .with_min_len(512)
                .map(|s| {
                    let future: f64 = self.succ[s].iter().map(|&(p, j)| p * v[j]).sum();
                    self.reward[s] + beta * future
                })
                .collect();
        }
        v
    }

    fn successor_ids(&self, sensed: &[f64], unsensed: &[f64]) -> Vec<(f64, usize)> {
        grouped_successors(&self.model, sensed, unsensed)
            .into_iter()
            .map(|(p, n)| (p, self.index[&key(&n)]))
            .collect()
    }
}

fn check_m_k(k: usize, m: usize, n: usize) -> Result<()> {
    if m == 0 || m > k || k > n {
        return Err(OsaError::InvalidParameter(format!(
            "need 1 <= m <= k <= N, got m = {m}, k = {k}, N = {n}"
        )));
    }
    Ok(())
}

/// Value of sensing `first` now and acting myopically for `steps - 1` more.
fn first_then_myopic(
    model: &ChannelModel,
    belief: &BeliefState,
    first: &Action,
    m: usize,
    beta: f64,
    steps: usize,
    limits: &DpLimits,
) -> Result<f64> {
    let (sensed, unsensed) = split_action(belief.omegas(), first);
    let now = capped_mean(&sensed, m);
    if steps == 1 {
        return Ok(now);
    }
    let mut chain = MyopicChain::new(*model, first.k(), m, limits.max_states);
    for (_, n) in grouped_successors(model, &sensed, &unsensed) {
        chain.add_root(n)?;
    }
    chain.expand(steps - 1)?;
    let v = chain.values(beta, steps - 1);
    let future: f64 = chain
        .successor_ids(&sensed, &unsensed)
        .iter()
        .map(|&(p, j)| p * v[j])
        .sum();
    Ok(now + beta * future)
}

/// Exact expected discounted reward by propagating the full belief
/// distribution forward, merging identical beliefs. Works for any stepwise
/// policy, including open-loop ones that care about channel labels.
fn evaluate_forward(
    model: &ChannelModel,
    belief: &BeliefState,
    spec: &PolicySpec,
    beta: f64,
    steps: usize,
    limits: &DpLimits,
) -> Result<f64> {
    let mut layer: HashMap<Vec<u64>, (Vec<f64>, f64)> = HashMap::new();
    layer.insert(key(belief.omegas()), (belief.omegas().to_vec(), 1.0));
    let mut total = 0.0;
    let mut discount = 1.0;
    for t in 1..=steps {
        let mut entries: Vec<(Vec<f64>, f64)> = layer.into_values().collect();
        // fixed summation order regardless of hash layout
        entries.sort_by_key(|e| key(&e.0));
        let mut next: HashMap<Vec<u64>, (Vec<f64>, f64)> = HashMap::new();
        let mut step_reward = 0.0;
        for (omegas, mass) in entries {
            let b = BeliefState::from_vec_unchecked(omegas);
            let action = policy_action(spec, &b, t)?;
            let (sensed, _) = split_action(b.omegas(), &action);
            step_reward += mass * capped_mean(&sensed, spec.m);
            if t == steps {
                continue;
            }
            for outcome in crate::model::SensingOutcome::all(action.k()) {
                let q = crate::model::outcome_probability(&b, &action, &outcome)?;
                if q == 0.0 {
                    continue;
                }
                let nb = crate::model::transition_belief(&b, &action, &outcome, model)?;
                let entry = next
                    .entry(key(nb.omegas()))
                    .or_insert_with(|| (nb.omegas().to_vec(), 0.0));
                entry.1 += mass * q;
            }
            if next.len() > limits.max_states {
                return Err(OsaError::ScaleGuard(format!(
                    "more than {} distinct beliefs at step {t}",
                    limits.max_states
                )));
            }
        }
        total += discount * step_reward;
        discount *= beta;
        layer = next;
    }
    Ok(total)
}

pub fn evaluate_policy(
    model: &ChannelModel,
    belief: &BeliefState,
    spec: &PolicySpec,
    horizon: &HorizonSpec,
) -> Result<ValueResult> {
    evaluate_policy_with_limits(model, belief, spec, horizon, &DpLimits::default())
}

/// Exact finite-horizon value of a stepwise policy.
pub fn evaluate_policy_with_limits(
    model: &ChannelModel,
    belief: &BeliefState,
    spec: &PolicySpec,
    horizon: &HorizonSpec,
    limits: &DpLimits,
) -> Result<ValueResult> {
    horizon.validate()?;
    let steps = match horizon.horizon {
        Horizon::Finite { steps } => steps,
        Horizon::Infinite { .. } => {
            return Err(OsaError::Unsupported(
                "infinite horizon: use infinite_value_truncated".into(),
            ))
        }
    };
    spec.bind(belief.len())?;
    if steps > limits.max_steps {
        return Err(OsaError::ScaleGuard(format!(
            "horizon {steps} exceeds {}",
            limits.max_steps
        )));
    }
    let beta = horizon.beta;
    let value = match &spec.kind {
        PolicyKind::Myopic => {
            let first = crate::policy::myopic_action(belief, spec.k)?;
            first_then_myopic(model, belief, &first, spec.m, beta, steps, limits)?
        }
        PolicyKind::FixedFirstThenMyopic(first) => {
            first_then_myopic(model, belief, first, spec.m, beta, steps, limits)?
        }
        PolicyKind::Random { .. } => evaluate_forward(model, belief, spec, beta, steps, limits)?,
        PolicyKind::ExhaustiveOptimal => {
            return Err(OsaError::Unsupported(
                "the exhaustive optimum is computed by optimal_value".into(),
            ))
        }
    };
    Ok(ValueResult {
        value,
        error_bound: 0.0,
        first_actions: Vec::new(),
        steps,
    })
}

struct OptimalSolver<'a> {
    model: &'a ChannelModel,
    k: usize,
    m: usize,
    beta: f64,
    memo: HashMap<(usize, Vec<u64>), f64>,
}

impl OptimalSolver<'_> {
    /// Q-values of all actions at `omegas`, `h` steps to go.
    fn q_values(&mut self, omegas: &[f64], h: usize, actions: &[Action]) -> Vec<f64> {
        let mut seen: HashMap<(Vec<u64>, Vec<u64>), f64> = HashMap::new();
        actions
            .iter()
            .map(|a| {
                let (mut sensed, mut unsensed) = split_action(omegas, a);
                sort_desc(&mut sensed);
                sort_desc(&mut unsensed);
                let sig = (key(&sensed), key(&unsensed));
                if let Some(&q) = seen.get(&sig) {
                    return q;
                }
                let mut q = capped_mean(&sensed, self.m);
                if h > 1 {
                    let future: f64 = grouped_successors(self.model, &sensed, &unsensed)
                        .into_iter()
                        .map(|(p, n)| p * self.value(n, h - 1))
                        .sum();
                    q += self.beta * future;
                }
                seen.insert(sig, q);
                q
            })
            .collect()
    }

    fn value(&mut self, sorted: Vec<f64>, h: usize) -> f64 {
        let memo_key = (h, key(&sorted));
        if let Some(&v) = self.memo.get(&memo_key) {
            return v;
        }
        let actions = Action::all(sorted.len(), self.k);
        let best = self
            .q_values(&sorted, h, &actions)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        self.memo.insert(memo_key, best);
        best
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

pub fn optimal_value(
    model: &ChannelModel,
    belief: &BeliefState,
    k: usize,
    m: usize,
    horizon: &HorizonSpec,
) -> Result<ValueResult> {
    optimal_value_with_limits(model, belief, k, m, horizon, &DpLimits::default())
}

/// Exact optimal value `V_1` by enumerating every action at every node.
pub fn optimal_value_with_limits(
    model: &ChannelModel,
    belief: &BeliefState,
    k: usize,
    m: usize,
    horizon: &HorizonSpec,
    limits: &DpLimits,
) -> Result<ValueResult> {
    horizon.validate()?;
    let steps = match horizon.horizon {
        Horizon::Finite { steps } => steps,
        Horizon::Infinite { .. } => {
            return Err(OsaError::Unsupported(
                "the exhaustive optimum is only computed for finite horizons".into(),
            ))
        }
    };
    let n = belief.len();
    check_m_k(k, m, n)?;
    let branching = binomial(n, k).saturating_mul(1u64 << k.min(63));
    if branching > limits.optimal_branching || steps > limits.optimal_steps {
        return Err(OsaError::ScaleGuard(format!(
            "C(N,k)*2^k = {branching} (max {}), T = {steps} (max {})",
            limits.optimal_branching, limits.optimal_steps
        )));
    }
    let mut solver = OptimalSolver {
        model,
        k,
        m,
        beta: horizon.beta,
        memo: HashMap::new(),
    };
    let actions = Action::all(n, k);
    let q = solver.q_values(belief.omegas(), steps, &actions);
    let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first_actions = actions
        .into_iter()
        .zip(&q)
        .filter(|(_, &v)| v >= best - 1e-9)
        .map(|(a, _)| a)
        .collect();
    Ok(ValueResult {
        value: best,
        error_bound: 0.0,
        first_actions,
        steps,
    })
}

/// Smallest `T >= 1` with `m beta^T / (1 - beta) <= epsilon`, and that bound.
pub fn truncation_steps(m: usize, beta: f64, epsilon: f64) -> Result<(usize, f64)> {
    HorizonSpec::infinite(beta, epsilon)?;
    let scale = m as f64 / (1.0 - beta);
    let mut steps = ((epsilon / scale).ln() / beta.ln()).ceil().max(1.0) as usize;
    while steps > 1 && scale * beta.powi(steps as i32 - 1) <= epsilon {
        steps -= 1;
    }
    while scale * beta.powi(steps as i32) > epsilon {
        steps += 1;
    }
    Ok((steps, scale * beta.powi(steps as i32)))
}

pub fn infinite_value_truncated(
    model: &ChannelModel,
    belief: &BeliefState,
    spec: &PolicySpec,
    beta: f64,
    epsilon: f64,
) -> Result<ValueResult> {
    infinite_value_truncated_with_limits(model, belief, spec, beta, epsilon, &DpLimits::default())
}

/// Discounted infinite-horizon value, truncated so the neglected tail is at
/// most `epsilon`. The bound is returned as `error_bound`.
pub fn infinite_value_truncated_with_limits(
    model: &ChannelModel,
    belief: &BeliefState,
    spec: &PolicySpec,
    beta: f64,
    epsilon: f64,
    limits: &DpLimits,
) -> Result<ValueResult> {
    let (steps, bound) = truncation_steps(spec.m, beta, epsilon)?;
    if steps > limits.max_steps {
        return Err(OsaError::ScaleGuard(format!(
            "truncation needs {steps} steps (max {})",
            limits.max_steps
        )));
    }
    let horizon = HorizonSpec::finite(steps, beta)?;
    let mut result = evaluate_policy_with_limits(model, belief, spec, &horizon, limits)?;
    result.error_bound = bound;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditHorizon {
    Infinite { epsilon: f64 },
    Finite { steps: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditBeliefs {
    /// All multisets of `N` values drawn from `{tau^j(p01), tau^j(p11)}`,
    /// `0 <= j <= depth`.
    Lattice { depth: usize },
    Explicit(Vec<BeliefState>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub beta: f64,
    pub horizon: AuditHorizon,
    pub beliefs: AuditBeliefs,
}

impl AuditConfig {
    pub fn lattice(n: usize, k: usize, m: usize, beta: f64, epsilon: f64, depth: usize) -> Self {
        Self {
            n,
            k,
            m,
            beta,
            horizon: AuditHorizon::Infinite { epsilon },
            beliefs: AuditBeliefs::Lattice { depth },
        }
    }
}

/// Distinct belief values of the depth-`depth` iterate lattice, descending.
pub fn lattice_values(model: &ChannelModel, depth: usize) -> Vec<f64> {
    let mut values = Vec::new();
    for start in [model.p01(), model.p11()] {
        let mut w = start;
        for _ in 0..=depth {
            values.push(w);
            w = model.propagate(w);
        }
    }
    sort_desc(&mut values);
    values.dedup_by(|a, b| a.to_bits() == b.to_bits());
    values
}

/// Nonincreasing length-`n` sequences over `values` (given descending).
fn multisets(values: &[f64], n: usize, cap: usize) -> Result<Vec<Vec<f64>>> {
    let count = binomial(values.len() + n - 1, n);
    if count > cap as u64 {
        return Err(OsaError::ScaleGuard(format!(
            "{count} lattice beliefs (max {cap})"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; n];
    loop {
        out.push(idx.iter().map(|&i| values[i]).collect());
        let mut d = n;
        while d > 0 && idx[d - 1] == values.len() - 1 {
            d -= 1;
        }
        if d == 0 {
            return Ok(out);
        }
        idx[d - 1] += 1;
        let v = idx[d - 1];
        for slot in idx.iter_mut().skip(d) {
            *slot = v;
        }
    }
}

pub fn deviation_audit(model: &ChannelModel, config: &AuditConfig) -> Result<DeviationReport> {
    deviation_audit_with_limits(model, config, &DpLimits::default())
}

/// Searches for a profitable one-step deviation from the myopic policy:
/// a belief and a first action whose value (then myopic) beats myopic by
/// more than twice the truncation bound plus `1e-9`.
pub fn deviation_audit_with_limits(
    model: &ChannelModel,
    config: &AuditConfig,
    limits: &DpLimits,
) -> Result<DeviationReport> {
    let AuditConfig { n, k, m, beta, .. } = *config;
    check_m_k(k, m, n)?;
    let (steps, bound) = match config.horizon {
        AuditHorizon::Infinite { epsilon } => {
            let (steps, bound) = truncation_steps(m, beta, epsilon)?;
            (steps, bound)
        }
        AuditHorizon::Finite { steps } => {
            HorizonSpec::finite(steps, beta)?;
            (steps, 0.0)
        }
    };
    if steps > limits.max_steps {
        return Err(OsaError::ScaleGuard(format!(
            "audit horizon {steps} exceeds {}",
            limits.max_steps
        )));
    }
    let threshold = 2.0 * bound + 1e-9;

    let candidates: Vec<Vec<f64>> = match &config.beliefs {
        AuditBeliefs::Lattice { depth } => {
            multisets(&lattice_values(model, *depth), n, limits.max_audit_beliefs)?
        }
        AuditBeliefs::Explicit(beliefs) => {
            for b in beliefs {
                if b.len() != n {
                    return Err(OsaError::LengthMismatch {
                        what: "audit belief",
                        expected: n,
                        got: b.len(),
                    });
                }
            }
            beliefs.iter().map(|b| b.omegas().to_vec()).collect()
        }
    };
    let actions = Action::all(n, k);

    let mut chain = MyopicChain::new(*model, k, m, limits.max_states);
    if steps > 1 {
        for omegas in &candidates {
            for a in &actions {
                let (sensed, unsensed) = split_action(omegas, a);
                for (_, next) in grouped_successors(model, &sensed, &unsensed) {
                    chain.add_root(next)?;
                }
            }
        }
        chain.expand(steps - 1)?;
    }
    let future = if steps > 1 {
        chain.values(beta, steps - 1)
    } else {
        Vec::new()
    };

    let q = |omegas: &[f64], a: &Action| -> f64 {
        let (sensed, unsensed) = split_action(omegas, a);
        let mut v = capped_mean(&sensed, m);
        if steps > 1 {
            let cont: f64 = chain
                .successor_ids(&sensed, &unsensed)
                .iter()
                .map(|&(p, j)| p * future[j])
                .sum();
            v += beta * cont;
        }
        v
    };

    // (gain, candidate index, action index), best per candidate
    let best: Option<(f64, usize, usize)> = candidates
        .par_iter()
        .enumerate()
        .filter_map(|(ci, omegas)| {
            let myopic = Action::from_indices(crate::policy::top_k(omegas, k)).ok()?;
            let w = q(omegas, &myopic);
            actions
                .iter()
                .enumerate()
                .filter(|(_, a)| **a != myopic)
                .map(|(ai, a)| (q(omegas, a) - w, ci, ai))
                .fold(None, |acc: Option<(f64, usize, usize)>, x| match acc {
                    Some(b) if b.0 >= x.0 => Some(b),
                    _ => Some(x),
                })
        })
        .collect::<Vec<_>>()
        .into_iter()
        // merged in candidate order; earliest wins ties
        .fold(None, |acc, x| match acc {
            Some(b) if b.0 >= x.0 => Some(b),
            _ => Some(x),
        });

    let (gain, witness) = match best {
        Some((gain, ci, ai)) => (gain, Some((ci, ai))),
        None => (0.0, None),
    };
    let profitable_found = gain > threshold;
    let (witness_belief, witness_action) = match witness.filter(|_| profitable_found) {
        Some((ci, ai)) => (
            Some(BeliefState::from_vec_unchecked(candidates[ci].clone())),
            Some(actions[ai].clone()),
        ),
        None => (None, None),
    };
    Ok(DeviationReport {
        profitable_found,
        witness_belief,
        witness_action,
        gain,
        threshold,
        beliefs_audited: candidates.len(),
        steps,
    })
}

/// Value of the ordered-list rule on a list of beliefs in any order: sense
/// the first `k` positions, then rebuild the list as
/// `(p11..., tau(rest)..., p01...)` in the positive regime or
/// `(p01..., tau(rest) reversed..., p11...)` in the negative regime.
/// On a sorted list this is the myopic value.
pub fn ordered_list_value(
    model: &ChannelModel,
    list: &[f64],
    k: usize,
    m: usize,
    beta: f64,
    steps: usize,
) -> Result<f64> {
    check_m_k(k, m, list.len())?;
    BeliefState::new(list.to_vec())?;
    HorizonSpec::finite(steps, beta)?;
    let mut memo = HashMap::new();
    Ok(list_value(model, list, k, m, beta, steps, &mut memo))
}

fn list_value(
    model: &ChannelModel,
    list: &[f64],
    k: usize,
    m: usize,
    beta: f64,
    h: usize,
    memo: &mut HashMap<(usize, Vec<u64>), f64>,
) -> f64 {
    let memo_key = (h, key(list));
    if let Some(&v) = memo.get(&memo_key) {
        return v;
    }
    let sensed = &list[..k];
    let mut v = capped_mean(sensed, m);
    if h > 1 {
        let dist = poisson_binomial(sensed);
        let n = list.len();
        let mut future = 0.0;
        for (good, &p) in dist.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let mut next = Vec::with_capacity(n);
            let rest = list[k..].iter().map(|&w| model.propagate(w));
            match model.regime() {
                Regime::Positive => {
                    next.extend(std::iter::repeat_n(model.p11(), good));
                    next.extend(rest);
                    next.extend(std::iter::repeat_n(model.p01(), k - good));
                }
                Regime::Negative => {
                    next.extend(std::iter::repeat_n(model.p01(), k - good));
                    next.extend(rest.rev());
                    next.extend(std::iter::repeat_n(model.p11(), good));
                }
            }
            future += p * list_value(model, &next, k, m, beta, h - 1, memo);
        }
        v += beta * future;
    }
    memo.insert(memo_key, v);
    v
}

/// Upper bound on any discounted total over `steps` steps.
pub fn value_ceiling(m: usize, beta: f64, steps: usize) -> f64 {
    if beta == 1.0 {
        m as f64 * steps as f64
    } else {
        m as f64 * (1.0 - beta.powi(steps as i32)) / (1.0 - beta)
    }
}

/// `C(n, k)`, saturating.
pub fn choose(n: usize, k: usize) -> u64 {
    if k > n {
        0
    } else {
        binomial(n, k)
    }
}
