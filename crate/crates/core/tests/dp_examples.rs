use osa_core::dp::{
    deviation_audit, evaluate_policy, infinite_value_truncated, optimal_value, AuditConfig,
    HorizonSpec,
};
use osa_core::reward::{expected_reward, reward_gap_bounds};
use osa_core::sim::{simulate, SimConfig};
use osa_core::{Action, BeliefState, ChannelModel, PolicySpec};

#[test]
fn one_step_optimum_is_the_best_immediate_reward() {
    let model = ChannelModel::new(0.7, 0.2).unwrap();
    let belief = BeliefState::new(vec![0.3, 0.9, 0.1, 0.6, 0.5]).unwrap();
    for (k, m) in [(1, 1), (2, 1), (3, 2), (4, 4)] {
        let opt = optimal_value(&model, &belief, k, m, &HorizonSpec::finite(1, 0.9).unwrap()).unwrap();
        let best = Action::all(5, k)
            .iter()
            .map(|a| expected_reward(&belief, a, m).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((opt.value - best).abs() <= 1e-12);
    }
}

#[test]
fn myopic_is_optimal_on_a_theorem_instance() {
    let model = ChannelModel::new(0.7, 0.3).unwrap();
    let b = reward_gap_bounds(&model, 2, 1).unwrap();
    assert!((b.ratio() - 3.0 / 7.0).abs() <= 1e-12);
    let h = HorizonSpec::finite(3, 0.1).unwrap();
    for w in [
        vec![0.7, 0.5, 0.4, 0.3],
        vec![0.35, 0.65, 0.3, 0.6],
        vec![0.5, 0.5, 0.5, 0.5],
        vec![0.31, 0.33, 0.69, 0.42],
    ] {
        let belief = BeliefState::new(w).unwrap();
        let opt = optimal_value(&model, &belief, 2, 1, &h).unwrap().value;
        let myopic = evaluate_policy(&model, &belief, &PolicySpec::myopic(2, 1).unwrap(), &h)
            .unwrap()
            .value;
        assert!((opt - myopic).abs() <= 1e-9);
    }
}

#[test]
fn truncated_infinite_value_matches_simulation() {
    let model = ChannelModel::new(0.6, 0.4).unwrap();
    let w = model.stationary().unwrap();
    let belief = BeliefState::uniform(3, w).unwrap();
    let spec = PolicySpec::myopic(1, 1).unwrap();
    let exact = infinite_value_truncated(&model, &belief, &spec, 0.5, 1e-8).unwrap();
    assert!(exact.error_bound <= 1e-8);
    let sim = simulate(
        &model,
        &belief,
        &spec,
        &SimConfig::discounted(exact.steps, 0.5, 100_000, 17),
    )
    .unwrap();
    assert!(
        sim.ci95.0 <= exact.value && exact.value <= sim.ci95.1,
        "{} outside {:?}",
        exact.value,
        sim.ci95
    );
}

#[test]
fn lattice_audit_is_clean_when_delta_is_small() {
    let model = ChannelModel::new(0.6, 0.5).unwrap();
    let report = deviation_audit(&model, &AuditConfig::lattice(4, 2, 1, 0.9, 1e-7, 6)).unwrap();
    assert!(!report.profitable_found);
    assert!(report.witness_action.is_none() && report.witness_belief.is_none());
    assert!(report.beliefs_audited > 0);
}

#[test]
fn memoryless_channels_admit_no_deviation() {
    for beta in [0.3, 0.9, 0.99] {
        let model = ChannelModel::new(0.35, 0.35).unwrap();
        let report = deviation_audit(&model, &AuditConfig::lattice(5, 2, 1, beta, 1e-7, 6)).unwrap();
        assert!(!report.profitable_found);
    }
}
