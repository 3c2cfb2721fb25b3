//! Monte Carlo simulation of the channel system under a stepwise policy.
//!
//! Replication `r` draws from ChaCha8 seeded with `config.seed` on stream
//! `r`, so results do not depend on how replications are scheduled across
//! threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OsaError, Result};
use crate::model::{transition_belief, Action, BeliefState, ChannelModel, SensingOutcome};
use crate::policy::{policy_action, PolicySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    /// `sum_t beta^(t-1) r_t`.
    Discounted { beta: f64 },
    /// Mean reward per step after discarding `burn_in` steps
    /// (default: `horizon / 10`).
    Average { burn_in: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialStates {
    /// Channel `i` starts good with probability `omega_i`.
    SampleFromBelief,
    Fixed(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: usize,
    pub mode: SimMode,
    pub replications: usize,
    pub seed: u64,
    pub initial_states: InitialStates,
    #[serde(default)]
    pub keep_per_replication: bool,
}

impl SimConfig {
    pub fn discounted(horizon: usize, beta: f64, replications: usize, seed: u64) -> Self {
        Self {
            horizon,
            mode: SimMode::Discounted { beta },
            replications,
            seed,
            initial_states: InitialStates::SampleFromBelief,
            keep_per_replication: false,
        }
    }

    pub fn average(horizon: usize, replications: usize, seed: u64) -> Self {
        Self {
            mode: SimMode::Average { burn_in: None },
            ..Self::discounted(horizon, 1.0, replications, seed)
        }
    }

    fn burn_in(&self) -> usize {
        match self.mode {
            SimMode::Average { burn_in } => burn_in.unwrap_or(self.horizon / 10),
            SimMode::Discounted { .. } => 0,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.horizon == 0 || self.replications == 0 {
            return Err(OsaError::InvalidParameter(
                "simulation needs horizon >= 1 and replications >= 1".into(),
            ));
        }
        match self.mode {
            SimMode::Discounted { beta } if !(0.0..=1.0).contains(&beta) => {
                return Err(OsaError::InvalidParameter(format!(
                    "need 0 <= beta <= 1, got {beta}"
                )))
            }
            SimMode::Average { .. } if self.burn_in() >= self.horizon => {
                return Err(OsaError::InvalidParameter(format!(
                    "burn-in {} leaves no steps out of {}",
                    self.burn_in(),
                    self.horizon
                )))
            }
            _ => {}
        }
        if let InitialStates::Fixed(states) = &self.initial_states {
            if states.len() != n {
                return Err(OsaError::LengthMismatch {
                    what: "fixed initial states",
                    expected: n,
                    got: states.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_replication: Option<Vec<f64>>,
}

impl SimResult {
    fn from_samples(samples: Vec<f64>, keep: bool) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std_error = if samples.len() > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std_error,
            ci95: (mean - 1.96 * std_error, mean + 1.96 * std_error),
            per_replication: keep.then_some(samples),
        }
    }
}

/// Next hidden state of one channel.
pub fn sample_channel_step<R: Rng + ?Sized>(state: bool, model: &ChannelModel, rng: &mut R) -> bool {
    let p = if state { model.p11() } else { model.p01() };
    rng.gen::<f64>() < p
}

/// What happened at one step of one replication.
#[derive(Debug, Clone)]
pub struct StepRecord<'a> {
    pub t: usize,
    /// Belief before sensing.
    pub belief: &'a BeliefState,
    /// Hidden states at step `t`.
    pub states: &'a [bool],
    pub action: &'a Action,
    pub reward: usize,
}

/// Runs replication `rep` and returns its score under `config.mode`.
pub fn run_replication(
    model: &ChannelModel,
    belief: &BeliefState,
    spec: &PolicySpec,
    config: &SimConfig,
    rep: u64,
    mut observer: impl FnMut(&StepRecord<'_>),
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(rep);
    let mut states: Vec<bool> = match &config.initial_states {
        InitialStates::SampleFromBelief => belief
            .omegas()
            .iter()
            .map(|&w| rng.gen::<f64>() < w)
            .collect(),
        InitialStates::Fixed(s) => s.clone(),
    };
    let burn_in = config.burn_in();
    let mut belief = belief.clone();
    let mut score = 0.0;
    let mut discount = 1.0;
    for t in 1..=config.horizon {
        let action = policy_action(spec, &belief, t)?;
        let good = action.channels().iter().filter(|&&c| states[c]).count();
        let reward = good.min(spec.m);
        observer(&StepRecord {
            t,
            belief: &belief,
            states: &states,
            action: &action,
            reward,
        });
        match config.mode {
            SimMode::Discounted { beta } => {
                score += discount * reward as f64;
                discount *= beta;
            }
            SimMode::Average { .. } if t > burn_in => score += reward as f64,
            SimMode::Average { .. } => {}
        }
        if t == config.horizon {
            break;
        }
        let outcome =
            SensingOutcome::new(action.channels().iter().map(|&c| states[c]).collect());
        belief = transition_belief(&belief, &action, &outcome, model)?;
        for s in states.iter_mut() {
            *s = sample_channel_step(*s, model, &mut rng);
        }
    }
    if let SimMode::Average { .. } = config.mode {
        score /= (config.horizon - burn_in) as f64;
    }
    Ok(score)
}

pub fn simulate(
    model: &ChannelModel,
    belief: &BeliefState,
    spec: &PolicySpec,
    config: &SimConfig,
) -> Result<SimResult> {
    if !spec.is_stepwise() {
        return Err(OsaError::Unsupported(
            "the exhaustive optimum cannot be simulated stepwise".into(),
        ));
    }
    spec.bind(belief.len())?;
    config.validate(belief.len())?;
    let samples = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| run_replication(model, belief, spec, config, rep, |_| {}))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SimResult::from_samples(samples, config.keep_per_replication))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sticky = ChannelModel::new(1.0, 0.0).unwrap();
        assert!((0..1000).all(|_| sample_channel_step(true, &sticky, &mut rng)));
        assert!((0..1000).all(|_| !sample_channel_step(false, &sticky, &mut rng)));
    }

    #[test]
    fn step_frequency() {
        // binomial sd at 1e5 draws is ~0.0014; 0.01 is ~7 sd
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let m = ChannelModel::new(0.7, 0.2).unwrap();
        let hits = (0..100_000)
            .filter(|_| sample_channel_step(true, &m, &mut rng))
            .count();
        assert!((hits as f64 / 1e5 - 0.7).abs() < 0.01);
    }

    #[test]
    fn always_good_channels_have_no_variance() {
        let m = ChannelModel::new(1.0, 1.0).unwrap();
        let b = BeliefState::uniform(4, 1.0).unwrap();
        let spec = PolicySpec::myopic(3, 2).unwrap();
        let r = simulate(&m, &b, &spec, &SimConfig::discounted(6, 0.5, 200, 9)).unwrap();
        let want = 2.0 * (1.0 - 0.5f64.powi(6)) / 0.5;
        assert!((r.mean - want).abs() < 1e-12);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.ci95, (r.mean, r.mean));
    }

    #[test]
    fn config_errors() {
        let m = ChannelModel::new(0.7, 0.2).unwrap();
        let b = BeliefState::uniform(3, 0.5).unwrap();
        let spec = PolicySpec::myopic(1, 1).unwrap();
        let mut cfg = SimConfig::discounted(5, 0.9, 10, 1);
        cfg.initial_states = InitialStates::Fixed(vec![true, false]);
        assert!(matches!(
            simulate(&m, &b, &spec, &cfg),
            Err(OsaError::LengthMismatch { .. })
        ));
        assert!(simulate(&m, &b, &spec, &SimConfig::discounted(5, 0.9, 0, 1)).is_err());
        let cfg = SimConfig {
            mode: SimMode::Average { burn_in: Some(5) },
            ..SimConfig::average(5, 10, 1)
        };
        assert!(simulate(&m, &b, &spec, &cfg).is_err());
    }

    #[test]
    fn fixed_initial_states_are_used() {
        let m = ChannelModel::new(1.0, 0.0).unwrap();
        let b = BeliefState::new(vec![0.5, 0.5]).unwrap();
        let spec = PolicySpec::myopic(1, 1).unwrap();
        let mut cfg = SimConfig::discounted(1, 1.0, 5, 3);
        cfg.initial_states = InitialStates::Fixed(vec![true, false]);
        cfg.keep_per_replication = true;
        let r = simulate(&m, &b, &spec, &cfg).unwrap();
        // myopic picks channel 1 on the tie, which is good
        assert_eq!(r.per_replication.unwrap(), vec![1.0; 5]);
    }
}
