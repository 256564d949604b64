//! Per-step trace records, written as newline-delimited JSON by the CLI.
//!
//! A trace starts with one [`TraceHeader`] line, then one [`TraceRecord`]
//! per initialization pull, per sampling step, and a final `stop` or
//! `censored` record. Indices are listed per arm in arm order.

use serde::{Deserialize, Serialize};

use crate::exp_family::RewardFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub kind: String,
    pub algorithm: String,
    pub delta: f64,
    pub family: RewardFamily,
    pub means: Vec<f64>,
    pub trial: u64,
    pub seed: u64,
}

impl TraceHeader {
    pub const KIND: &'static str = "cell";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    /// One of the `K` initial pulls.
    Init { t: u64, arm: usize, reward: f64 },
    /// A sampling step that did not stop.
    Step {
        t: u64,
        arm: usize,
        reward: f64,
        a_f: usize,
        a_g: usize,
        upper_f: Vec<f64>,
        upper_g: Vec<f64>,
        lower_g: Vec<f64>,
    },
    /// The stopping rule fired at step `t`; no pull was made.
    Stop {
        t: u64,
        a_f: usize,
        a_g: usize,
        upper_f: Vec<f64>,
        upper_g: Vec<f64>,
        lower_g: Vec<f64>,
        recommendation: usize,
    },
    /// The horizon cap was reached after `t` pulls.
    Censored { t: u64, recommendation: usize },
}
