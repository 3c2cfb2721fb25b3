//! Myopic sensing in multichannel opportunistic access.
//!
//! `N` independent two-state Markov channels share one transition model. At
//! each step a user senses `k` channels and collects one unit of reward from
//! each of up to `m` channels found good. The crate provides
//!
//! - belief dynamics ([`model`]) and the exact one-step reward ([`reward`]),
//! - the myopic policy and baselines ([`policy`]),
//! - exact finite-horizon evaluation, the exhaustive optimum, truncated
//!   infinite-horizon values and a one-step-deviation audit ([`dp`]),
//! - sufficient conditions for optimality of the myopic policy and the
//!   value-sensitivity bounds behind them ([`conditions`]),
//! - a seeded Monte Carlo simulator ([`sim`]).

pub mod conditions;
pub mod dp;
mod error;
pub mod model;
pub mod policy;
pub mod reward;
pub mod sim;

pub use error::{OsaError, Result, TOL};
pub use model::{Action, BeliefState, ChannelModel, Regime, SensingOutcome};
pub use policy::{PolicyKind, PolicySpec};
