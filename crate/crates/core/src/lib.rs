//! Best-arm identification with minimal regret.
//!
//! * [`exp_family`]: divergences, KL inversions and sampling for
//!   single-parameter exponential families.
//! * [`oracles`]: gaps, the regret hardness `I*`, the regret lower bound,
//!   and the max-min sample-complexity constant `Gamma*`.
//! * [`dkl_ucb`]: the Double KL-UCB algorithm.
//! * [`baselines`]: KL-UCB sampling and round-robin sampling with the same
//!   stopping rule.
//! * [`harness`]: seeded parallel Monte Carlo campaigns.
//! * [`validation`]: property suites and trace replay.

pub mod baselines;
pub mod dkl_ucb;
pub mod error;
pub mod exp_family;
pub mod harness;
pub mod oracles;
pub mod trace;
pub mod validation;

pub use dkl_ucb::{run, AlgState, RandomSource, SamplingRule, StepOutcome, TrialResult};
pub use error::{Error, Result};
pub use exp_family::RewardFamily;
pub use harness::{AggregateStats, ExperimentConfig};
pub use oracles::{BanditInstance, OptimalWeights};
