//! Double KL-UCB as an explicit state machine.
//!
//! Each step computes, for every arm, an f-UCB (budget `f(t)/N_i`), a g-UCB
//! and a g-LCB (budget `g(delta, t)/N_i`) from the statistics collected
//! through step `t - 1`. The f-UCB leader `A_f` and the g-UCB runner-up
//! `A_g` are the two candidates. The run stops as soon as the leader's
//! g-LCB exceeds the runner-up's g-UCB and recommends the leader; otherwise
//! a coin with bias `beta(delta)` picks which candidate to pull.
//!
//! The stopping predicate is checked before the coin is flipped, so a
//! stopped step makes no pull and `tau` is the first step at which the
//! predicate holds.
//!
//! The same engine drives the baselines through [`SamplingRule`]; only the
//! choice of arm to pull differs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exp_family::{invert, sample_unchecked, RewardFamily, Side};
use crate::oracles::BanditInstance;
use crate::trace::TraceRecord;

/// Random source owned by one trial.
pub type RandomSource = ChaCha8Rng;

/// Default per-trial horizon cap.
pub const DEFAULT_HORIZON_CAP: u64 = 10_000_000;

/// `f(t) = 3 ln t`, the exploration function of the f-UCB.
pub fn f_exploration(t: u64) -> Result<f64> {
    if t < 1 {
        return domain("f_exploration needs t >= 1");
    }
    Ok(3.0 * (t as f64).ln())
}

/// `g(delta, t) = ln(2 K t^2 / delta)`, the exploration function of the
/// g-UCB and g-LCB.
pub fn g_exploration(delta: f64, t: u64, k: usize) -> Result<f64> {
    check_delta(delta)?;
    if t < 1 || k < 2 {
        return domain(format!(
            "g_exploration needs t >= 1 and K >= 2, got t={t}, K={k}"
        ));
    }
    Ok(g_unchecked(delta, t, k))
}

fn g_unchecked(delta: f64, t: u64, k: usize) -> f64 {
    let t = t as f64;
    (2.0 * k as f64 * t * t / delta).ln()
}

/// Probability of pulling the f-UCB leader:
/// `beta = 1 - min(1 / ln ln(1/delta), 1/2)`, and `1/2` when `ln ln(1/delta) <= 0`.
pub fn coin_bias(delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(coin_bias_unchecked(delta))
}

fn coin_bias_unchecked(delta: f64) -> f64 {
    let gamma = (1.0 / delta).ln().ln();
    if gamma > 0.0 {
        1.0 - (1.0 / gamma).min(0.5)
    } else {
        0.5
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        domain(format!("delta must lie in (0,1), got {delta}"))
    }
}

/// How the arm to pull is chosen once the candidates are known. All rules
/// share the indices, the candidates and the stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplingRule {
    /// Pull `A_f` with probability `beta(delta)`, otherwise `A_g`.
    #[serde(rename = "dkl_ucb")]
    DoubleKlUcb,
    /// Always pull `A_f`, with the KL-UCB schedule `ln t + ln ln t` for the f-UCB.
    #[serde(rename = "klucb_stop")]
    KlUcb,
    /// Pull arms in round-robin order.
    #[serde(rename = "uniform_stop")]
    RoundRobin,
}

impl SamplingRule {
    pub const ALL: [SamplingRule; 3] = [
        SamplingRule::DoubleKlUcb,
        SamplingRule::KlUcb,
        SamplingRule::RoundRobin,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.name() == name)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplingRule::DoubleKlUcb => "dkl_ucb",
            SamplingRule::KlUcb => "klucb_stop",
            SamplingRule::RoundRobin => "uniform_stop",
        }
    }

    fn f_budget(&self, t: u64) -> f64 {
        let lt = (t as f64).ln();
        match self {
            SamplingRule::KlUcb => (lt + lt.ln()).max(0.0),
            _ => 3.0 * lt,
        }
    }
}

/// Forces the coin outcome of a DKL-UCB step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coin {
    Random,
    Heads,
    Tails,
}

/// The f-UCB, g-UCB and g-LCB of every arm at one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Indices {
    pub upper_f: Vec<f64>,
    pub upper_g: Vec<f64>,
    pub lower_g: Vec<f64>,
}

/// Sufficient statistics of a running trial.
#[derive(Debug, Clone)]
pub struct AlgState {
    family: RewardFamily,
    delta: f64,
    rule: SamplingRule,
    /// Number of pulls so far; the next decision happens at step `t + 1`.
    t: u64,
    counts: Vec<u64>,
    sums: Vec<f64>,
    rng: RandomSource,
    indices: Indices,
}

/// What happened at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Step counter at which the decision was made.
    pub t: u64,
    pub pulled_arm: Option<usize>,
    pub reward: Option<f64>,
    pub candidate_f: usize,
    pub candidate_g: usize,
    pub coin_heads: bool,
    pub stopped: bool,
    pub recommendation: Option<usize>,
}

impl AlgState {
    pub fn new(
        family: RewardFamily,
        num_arms: usize,
        delta: f64,
        rule: SamplingRule,
        rng: RandomSource,
    ) -> Result<Self> {
        family.validate()?;
        check_delta(delta)?;
        if num_arms < 2 {
            return Err(Error::Config(format!(
                "need at least 2 arms, got {num_arms}"
            )));
        }
        Ok(AlgState {
            family,
            delta,
            rule,
            t: 0,
            counts: vec![0; num_arms],
            sums: vec![0.0; num_arms],
            rng,
            indices: Indices {
                upper_f: vec![0.0; num_arms],
                upper_g: vec![0.0; num_arms],
                lower_g: vec![0.0; num_arms],
            },
        })
    }

    pub fn family(&self) -> RewardFamily {
        self.family
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn rule(&self) -> SamplingRule {
        self.rule
    }

    pub fn num_arms(&self) -> usize {
        self.counts.len()
    }

    /// Total number of pulls so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn mean(&self, arm: usize) -> f64 {
        self.sums[arm] / self.counts[arm] as f64
    }

    /// Indices from the most recent step.
    pub fn indices(&self) -> &Indices {
        &self.indices
    }

    pub fn rng_mut(&mut self) -> &mut RandomSource {
        &mut self.rng
    }

    pub fn is_initialized(&self) -> bool {
        self.counts.iter().all(|&n| n >= 1)
    }

    /// Record one observed reward for `arm`.
    pub fn record(&mut self, arm: usize, reward: f64) -> Result<()> {
        if arm >= self.num_arms() {
            return domain(format!("arm {arm} out of range"));
        }
        if !reward.is_finite() {
            return domain(format!("non-finite reward {reward}"));
        }
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        self.t += 1;
        Ok(())
    }

    /// Pull every arm once, in order.
    pub fn initialize(
        &mut self,
        env: &BanditInstance,
        mut on_pull: impl FnMut(u64, usize, f64),
    ) -> Result<()> {
        self.check_env(env)?;
        for arm in 0..self.num_arms() {
            let reward = sample_unchecked(self.family, env.means()[arm], &mut self.rng);
            self.record(arm, reward)?;
            on_pull(self.t, arm, reward);
        }
        Ok(())
    }

    fn check_env(&self, env: &BanditInstance) -> Result<()> {
        if env.family() != self.family || env.num_arms() != self.num_arms() {
            return Err(Error::Config(
                "environment does not match the algorithm state".into(),
            ));
        }
        Ok(())
    }

    fn require_initialized(&self) -> Result<()> {
        if self.is_initialized() {
            Ok(())
        } else {
            domain("every arm must be pulled once before indices are defined")
        }
    }

    fn empirical_mean(&self, arm: usize) -> f64 {
        let mean = self.mean(arm);
        // Guard against round-off pushing a Bernoulli mean outside [0, 1].
        match self.family {
            RewardFamily::Bernoulli => mean.clamp(0.0, 1.0),
            RewardFamily::Poisson => mean.max(0.0),
            _ => mean,
        }
    }

    fn budget_index(&self, arm: usize, budget: f64, side: Side) -> f64 {
        invert(
            self.family,
            self.empirical_mean(arm),
            budget / self.counts[arm] as f64,
            side,
        )
    }

    /// f-UCB of `arm` for the step about to be decided.
    pub fn index_f(&self, arm: usize) -> Result<f64> {
        self.require_initialized()?;
        Ok(self.budget_index(arm, self.rule.f_budget(self.t + 1), Side::Upper))
    }

    /// g-UCB of `arm` for the step about to be decided.
    pub fn index_g_upper(&self, arm: usize) -> Result<f64> {
        self.require_initialized()?;
        let g = g_unchecked(self.delta, self.t + 1, self.num_arms());
        Ok(self.budget_index(arm, g, Side::Upper))
    }

    /// g-LCB of `arm` for the step about to be decided.
    pub fn index_g_lower(&self, arm: usize) -> Result<f64> {
        self.require_initialized()?;
        let g = g_unchecked(self.delta, self.t + 1, self.num_arms());
        Ok(self.budget_index(arm, g, Side::Lower))
    }

    fn compute_indices(&mut self) {
        let step = self.t + 1;
        let f = self.rule.f_budget(step);
        let g = g_unchecked(self.delta, step, self.num_arms());
        for arm in 0..self.num_arms() {
            let mean = self.empirical_mean(arm);
            let n = self.counts[arm] as f64;
            self.indices.upper_f[arm] = invert(self.family, mean, f / n, Side::Upper);
            self.indices.upper_g[arm] = invert(self.family, mean, g / n, Side::Upper);
            self.indices.lower_g[arm] = invert(self.family, mean, g / n, Side::Lower);
        }
    }

    /// The f-UCB leader for the step about to be decided.
    pub fn leader(&self) -> Result<usize> {
        self.require_initialized()?;
        let f = self.rule.f_budget(self.t + 1);
        let upper_f: Vec<f64> = (0..self.num_arms())
            .map(|arm| self.budget_index(arm, f, Side::Upper))
            .collect();
        Ok(argmax_excluding(&upper_f, None))
    }

    /// Run one step with a random coin.
    pub fn step(&mut self, env: &BanditInstance) -> Result<StepOutcome> {
        self.step_with(env, Coin::Random)
    }

    /// Run one step. `coin` forces the DKL-UCB coin; it is ignored by the
    /// other sampling rules.
    pub fn step_with(&mut self, env: &BanditInstance, coin: Coin) -> Result<StepOutcome> {
        self.check_env(env)?;
        self.require_initialized()?;
        let step = self.t + 1;
        self.compute_indices();
        let (a_f, a_g) = select_candidates(&self.indices.upper_f, &self.indices.upper_g);
        if should_stop(&self.indices, a_f, a_g) {
            return Ok(StepOutcome {
                t: step,
                pulled_arm: None,
                reward: None,
                candidate_f: a_f,
                candidate_g: a_g,
                coin_heads: false,
                stopped: true,
                recommendation: Some(a_f),
            });
        }
        let (arm, heads) = match self.rule {
            SamplingRule::DoubleKlUcb => {
                let heads = match coin {
                    Coin::Heads => true,
                    Coin::Tails => false,
                    Coin::Random => self.rng.random::<f64>() < coin_bias_unchecked(self.delta),
                };
                (if heads { a_f } else { a_g }, heads)
            }
            SamplingRule::KlUcb => (a_f, true),
            SamplingRule::RoundRobin => {
                let arm = (self.t % self.num_arms() as u64) as usize;
                (arm, arm == a_f)
            }
        };
        let reward = sample_unchecked(self.family, env.means()[arm], &mut self.rng);
        self.record(arm, reward)?;
        Ok(StepOutcome {
            t: step,
            pulled_arm: Some(arm),
            reward: Some(reward),
            candidate_f: a_f,
            candidate_g: a_g,
            coin_heads: heads,
            stopped: false,
            recommendation: None,
        })
    }
}

/// Index of the largest value, skipping `exclude`; ties go to the lowest index.
fn argmax_excluding(values: &[f64], exclude: Option<usize>) -> usize {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        match best {
            Some(b) if values[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best.expect("at least two arms")
}

/// `A_f = argmax U^f`, `A_g = argmax_{i != A_f} U^g`, ties to the lowest index.
pub fn select_candidates(upper_f: &[f64], upper_g: &[f64]) -> (usize, usize) {
    let a_f = argmax_excluding(upper_f, None);
    let a_g = argmax_excluding(upper_g, Some(a_f));
    (a_f, a_g)
}

/// True iff the g-LCB of `a_f` strictly exceeds the g-UCB of `a_g`.
pub fn should_stop(indices: &Indices, a_f: usize, a_g: usize) -> bool {
    indices.lower_g[a_f] > indices.upper_g[a_g]
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Stopping step, or the horizon cap if censored.
    pub tau: u64,
    /// Sum of the gaps of the pulled arms.
    pub pseudo_regret: f64,
    /// Sum of `mu_best - X_s` over the observed rewards.
    pub realized_regret: f64,
    pub recommendation: usize,
    pub correct: bool,
    pub censored: bool,
    /// Pulls per arm.
    pub counts: Vec<u64>,
}

/// Run DKL-UCB until it stops or reaches `horizon_cap` pulls.
pub fn run(
    instance: &BanditInstance,
    delta: f64,
    rng: RandomSource,
    horizon_cap: u64,
) -> Result<TrialResult> {
    run_with_rule(
        SamplingRule::DoubleKlUcb,
        instance,
        delta,
        rng,
        horizon_cap,
        None,
    )
}

/// Shared trial loop for every sampling rule, optionally emitting a trace.
pub fn run_with_rule(
    rule: SamplingRule,
    instance: &BanditInstance,
    delta: f64,
    rng: RandomSource,
    horizon_cap: u64,
    mut trace: Option<&mut dyn FnMut(TraceRecord)>,
) -> Result<TrialResult> {
    let k = instance.num_arms();
    if horizon_cap < k as u64 {
        return Err(Error::Config(format!(
            "horizon cap {horizon_cap} is below the number of arms {k}"
        )));
    }
    let mut state = AlgState::new(instance.family(), k, delta, rule, rng)?;
    let best = instance.best_mean();
    let mut pseudo = 0.0;
    let mut realized = 0.0;
    let mut account = |arm: usize, reward: f64| {
        pseudo += instance.gap(arm);
        realized += best - reward;
    };

    state.initialize(instance, |t, arm, reward| {
        account(arm, reward);
        if let Some(sink) = trace.as_mut() {
            sink(TraceRecord::Init { t, arm, reward });
        }
    })?;

    let mut stop = None;
    while state.t() < horizon_cap {
        let out = state.step(instance)?;
        if let Some(sink) = trace.as_mut() {
            let idx = state.indices().clone();
            sink(match (out.pulled_arm, out.reward) {
                (Some(arm), Some(reward)) => TraceRecord::Step {
                    t: out.t,
                    arm,
                    reward,
                    a_f: out.candidate_f,
                    a_g: out.candidate_g,
                    upper_f: idx.upper_f,
                    upper_g: idx.upper_g,
                    lower_g: idx.lower_g,
                },
                _ => TraceRecord::Stop {
                    t: out.t,
                    a_f: out.candidate_f,
                    a_g: out.candidate_g,
                    upper_f: idx.upper_f,
                    upper_g: idx.upper_g,
                    lower_g: idx.lower_g,
                    recommendation: out.candidate_f,
                },
            });
        }
        if let (Some(arm), Some(reward)) = (out.pulled_arm, out.reward) {
            account(arm, reward);
        }
        if out.stopped {
            stop = Some((out.t, out.candidate_f));
            break;
        }
    }

    let (tau, recommendation, censored) = match stop {
        Some((tau, rec)) => (tau, rec, false),
        None => {
            let rec = state.leader()?;
            if let Some(sink) = trace.as_mut() {
                sink(TraceRecord::Censored {
                    t: state.t(),
                    recommendation: rec,
                });
            }
            (state.t(), rec, true)
        }
    };
    Ok(TrialResult {
        tau,
        pseudo_regret: pseudo,
        realized_regret: realized,
        recommendation,
        correct: recommendation == instance.best_arm(),
        censored,
        counts: state.counts().to_vec(),
    })
}
