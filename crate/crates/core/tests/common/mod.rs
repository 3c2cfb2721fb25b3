//! Brute-force reference implementations shared by the integration tests.
//! Nothing here reuses the library's DP tables, sorting or memoization.

#![allow(dead_code)]

use osa_core::model::{outcome_probability, transition_belief};
use osa_core::policy::policy_action;
use osa_core::{Action, BeliefState, ChannelModel, PolicySpec, SensingOutcome};

/// `E[min(L, m)]` by enumerating all `2^k` sensing outcomes.
pub fn brute_reward(sensed: &[f64], m: usize) -> f64 {
    let k = sensed.len();
    (0u64..1 << k)
        .map(|mask| {
            let mut p = 1.0;
            let mut good = 0;
            for (i, &w) in sensed.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    p *= w;
                    good += 1;
                } else {
                    p *= 1.0 - w;
                }
            }
            p * good.min(m) as f64
        })
        .sum()
}

fn sensed(belief: &BeliefState, action: &Action) -> Vec<f64> {
    action.channels().iter().map(|&c| belief.omegas()[c]).collect()
}

/// Value of a stepwise policy over `steps` steps, by walking every outcome
/// sequence.
pub fn policy_value(
    model: &ChannelModel,
    belief: &BeliefState,
    spec: &PolicySpec,
    beta: f64,
    steps: usize,
) -> f64 {
    walk(model, belief, spec, beta, 1, steps)
}

fn walk(
    model: &ChannelModel,
    belief: &BeliefState,
    spec: &PolicySpec,
    beta: f64,
    t: usize,
    steps: usize,
) -> f64 {
    let action = policy_action(spec, belief, t).unwrap();
    let mut v = brute_reward(&sensed(belief, &action), spec.m);
    if t < steps {
        for outcome in SensingOutcome::all(action.k()) {
            let q = outcome_probability(belief, &action, &outcome).unwrap();
            let next = transition_belief(belief, &action, &outcome, model).unwrap();
            v += beta * q * walk(model, &next, spec, beta, t + 1, steps);
        }
    }
    v
}

/// Optimal value over `steps` steps by trying every action at every node.
pub fn brute_optimal(
    model: &ChannelModel,
    belief: &BeliefState,
    k: usize,
    m: usize,
    beta: f64,
    steps: usize,
) -> f64 {
    Action::all(belief.len(), k)
        .iter()
        .map(|a| brute_q(model, belief, a, k, m, beta, steps))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Value of playing `action` now and acting optimally afterwards.
pub fn brute_q(
    model: &ChannelModel,
    belief: &BeliefState,
    action: &Action,
    k: usize,
    m: usize,
    beta: f64,
    steps: usize,
) -> f64 {
    let mut v = brute_reward(&sensed(belief, action), m);
    if steps > 1 {
        for outcome in SensingOutcome::all(k) {
            let q = outcome_probability(belief, action, &outcome).unwrap();
            let next = transition_belief(belief, action, &outcome, model).unwrap();
            v += beta * q * brute_optimal(model, &next, k, m, beta, steps - 1);
        }
    }
    v
}

/// Max and min of `P(L_rest <= m - 1)` over a grid of the belief box, with
/// the probability computed by outcome enumeration.
pub fn grid_gap_bounds(model: &ChannelModel, k: usize, m: usize, points: usize) -> (f64, f64) {
    let (lo, hi) = (model.p01().min(model.p11()), model.p01().max(model.p11()));
    let dims = k - 1;
    let total = points.pow(dims as u32);
    let (mut best, mut worst) = (f64::NEG_INFINITY, f64::INFINITY);
    for cell in 0..total {
        let mut c = cell;
        let rest: Vec<f64> = (0..dims)
            .map(|_| {
                let i = c % points;
                c /= points;
                lo + (hi - lo) * i as f64 / (points - 1) as f64
            })
            .collect();
        let gap = brute_reward(&[&[1.0][..], &rest].concat(), m)
            - brute_reward(&[&[0.0][..], &rest].concat(), m);
        best = best.max(gap);
        worst = worst.min(gap);
    }
    (best, worst)
}
