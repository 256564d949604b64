//! Comparison algorithms sharing DKL-UCB's indices and stopping rule.
//!
//! `run_klucb_stop` always pulls the f-UCB leader (plain KL-UCB sampling)
//! and `run_uniform_stop` pulls arms round-robin. Both stop and recommend
//! exactly as DKL-UCB does, so any difference in regret or stopping time is
//! due to the sampling rule alone.

use crate::dkl_ucb::{run_with_rule, RandomSource, SamplingRule, TrialResult};
use crate::error::Result;
use crate::oracles::BanditInstance;

pub fn run_klucb_stop(
    instance: &BanditInstance,
    delta: f64,
    rng: RandomSource,
    horizon_cap: u64,
) -> Result<TrialResult> {
    run_with_rule(SamplingRule::KlUcb, instance, delta, rng, horizon_cap, None)
}

pub fn run_uniform_stop(
    instance: &BanditInstance,
    delta: f64,
    rng: RandomSource,
    horizon_cap: u64,
) -> Result<TrialResult> {
    run_with_rule(
        SamplingRule::RoundRobin,
        instance,
        delta,
        rng,
        horizon_cap,
        None,
    )
}
