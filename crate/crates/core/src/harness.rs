//! Seeded, parallel Monte Carlo campaigns.
//!
//! A campaign runs `trials_per_cell` independent trials for every
//! (algorithm, delta) cell. Trial `i` of a cell is seeded from
//! `(base_seed, algorithm id, delta index, i)` through [`trial_seed`], so
//! results do not depend on scheduling. Trials run on a worker pool and
//! are then folded in trial order, which makes the aggregates bit-identical
//! for any parallelism.

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::dkl_ucb::{run_with_rule, RandomSource, SamplingRule, TrialResult};
use crate::error::{Error, Result};
use crate::oracles::{confidence_kl, BanditInstance};
use crate::trace::{TraceHeader, TraceRecord};

/// Confidence level of the reported Clopper-Pearson upper bound.
pub const ERROR_CI_LEVEL: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instance: BanditInstance,
    pub algorithms: Vec<SamplingRule>,
    pub deltas: Vec<f64>,
    pub trials_per_cell: u64,
    pub base_seed: u64,
    pub horizon_cap: u64,
    pub parallelism: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.algorithms.is_empty() {
            return fail("algorithm list is empty".into());
        }
        if self.deltas.is_empty() {
            return fail("delta grid is empty".into());
        }
        for (i, &d) in self.deltas.iter().enumerate() {
            if !(d > 0.0 && d < 1.0) {
                return fail(format!("delta {d} is outside (0,1)"));
            }
            if self.deltas[..i].contains(&d) {
                return fail(format!("delta {d} appears twice"));
            }
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                return fail(format!("algorithm {} appears twice", a.name()));
            }
        }
        if self.trials_per_cell < 1 {
            return fail("trials_per_cell must be at least 1".into());
        }
        if self.parallelism < 1 {
            return fail("parallelism must be at least 1".into());
        }
        if self.horizon_cap < self.instance.num_arms() as u64 {
            return fail(format!(
                "horizon cap {} is below the number of arms {}",
                self.horizon_cap,
                self.instance.num_arms()
            ));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn algorithm_id(rule: SamplingRule) -> u64 {
    match rule {
        SamplingRule::DoubleKlUcb => 0,
        SamplingRule::KlUcb => 1,
        SamplingRule::RoundRobin => 2,
    }
}

/// Seed of trial `trial` in cell `(rule, delta_index)`:
/// `mix64(mix64(mix64(mix64(base) ^ alg) ^ delta_index) ^ trial)`.
pub fn trial_seed(base_seed: u64, rule: SamplingRule, delta_index: usize, trial: u64) -> u64 {
    let h = mix64(mix64(base_seed) ^ algorithm_id(rule));
    mix64(mix64(h ^ delta_index as u64) ^ trial)
}

/// Single-pass mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&self, other: &RunningStats) -> RunningStats {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        RunningStats { n, mean, m2 }
    }

    /// Unbiased sample variance; zero below two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Two-sided Clopper-Pearson upper limit for `errors` failures in `n` trials.
pub fn clopper_pearson_upper(errors: u64, n: u64, level: f64) -> f64 {
    if errors >= n {
        return 1.0;
    }
    let alpha = 1.0 - level;
    // upper limit is the 1 - alpha/2 quantile of Beta(errors + 1, n - errors)
    let (a, b) = ((errors + 1) as f64, (n - errors) as f64);
    let target = 1.0 - alpha / 2.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Aggregated results of one (algorithm, delta) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub algorithm: SamplingRule,
    pub delta: f64,
    pub trials: u64,
    /// Wrong recommendations plus censored trials.
    pub errors: u64,
    pub error_rate: f64,
    pub error_ub99: f64,
    pub pseudo_regret: RunningStats,
    pub realized_regret: RunningStats,
    pub tau: RunningStats,
    pub censored: u64,
    /// Mean pseudo-regret over `ln(1/delta)`.
    pub regret_ratio: f64,
    /// Mean `tau` over `ln(1/delta) (ln ln(1/delta))^2`.
    pub tau_loglog_ratio: f64,
}

impl CellStats {
    fn from_trials(algorithm: SamplingRule, delta: f64, results: &[TrialResult]) -> Self {
        let mut pseudo = RunningStats::default();
        let mut realized = RunningStats::default();
        let mut tau = RunningStats::default();
        let (mut errors, mut censored) = (0, 0);
        for r in results {
            pseudo.push(r.pseudo_regret);
            realized.push(r.realized_regret);
            tau.push(r.tau as f64);
            if r.censored {
                censored += 1;
            }
            if r.censored || !r.correct {
                errors += 1;
            }
        }
        let n = results.len() as u64;
        let log_inv = (1.0 / delta).ln();
        CellStats {
            algorithm,
            delta,
            trials: n,
            errors,
            error_rate: errors as f64 / n as f64,
            error_ub99: clopper_pearson_upper(errors, n, ERROR_CI_LEVEL),
            pseudo_regret: pseudo,
            realized_regret: realized,
            tau,
            censored,
            regret_ratio: pseudo.mean / log_inv,
            tau_loglog_ratio: tau.mean / (log_inv * log_inv.ln().powi(2)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    /// Cells in algorithm-major order, deltas in config order.
    pub cells: Vec<CellStats>,
}

impl AggregateStats {
    pub fn cell(&self, algorithm: SamplingRule, delta: f64) -> Option<&CellStats> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.delta == delta)
    }
}

/// The trace of the first trial of a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellTrace {
    pub header: TraceHeader,
    pub records: Vec<TraceRecord>,
}

pub fn run_campaign(config: &ExperimentConfig) -> Result<AggregateStats> {
    run_campaign_traced(config, false).map(|(stats, _)| stats)
}

/// Run a campaign; with `trace`, also capture the first trial of each cell.
pub fn run_campaign_traced(
    config: &ExperimentConfig,
    trace: bool,
) -> Result<(AggregateStats, Vec<CellTrace>)> {
    config.validate()?;
    let cells: Vec<(SamplingRule, usize)> = config
        .algorithms
        .iter()
        .flat_map(|&a| (0..config.deltas.len()).map(move |d| (a, d)))
        .collect();
    let n = config.trials_per_cell;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..n).map(move |i| (c, i)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let outcomes: Vec<Result<(TrialResult, Option<Vec<TraceRecord>>)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, i)| {
                let (rule, d) = cells[c];
                let seed = trial_seed(config.base_seed, rule, d, i);
                let rng = RandomSource::seed_from_u64(seed);
                let delta = config.deltas[d];
                if trace && i == 0 {
                    let mut records = Vec::new();
                    let mut sink = |r: TraceRecord| records.push(r);
                    let res = run_with_rule(
                        rule,
                        &config.instance,
                        delta,
                        rng,
                        config.horizon_cap,
                        Some(&mut sink),
                    )?;
                    Ok((res, Some(records)))
                } else {
                    Ok((
                        run_with_rule(
                            rule,
                            &config.instance,
                            delta,
                            rng,
                            config.horizon_cap,
                            None,
                        )?,
                        None,
                    ))
                }
            })
            .collect()
    });

    let mut results = Vec::with_capacity(outcomes.len());
    let mut traces = Vec::new();
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let (res, records) = outcome?;
        if let Some(records) = records {
            let (rule, d) = cells[job.0];
            traces.push(CellTrace {
                header: TraceHeader {
                    kind: TraceHeader::KIND.to_string(),
                    algorithm: rule.name().to_string(),
                    delta: config.deltas[d],
                    family: config.instance.family(),
                    means: config.instance.means().to_vec(),
                    trial: 0,
                    seed: trial_seed(config.base_seed, rule, d, 0),
                },
                records,
            });
        }
        results.push(res);
    }
    let stats = cells
        .iter()
        .zip(results.chunks(n as usize))
        .map(|(&(rule, d), chunk)| CellStats::from_trials(rule, config.deltas[d], chunk))
        .collect();
    Ok((AggregateStats { cells: stats }, traces))
}

/// One row of the ratio table. `regret_lb_ratio` is `None` where the
/// lower bound vanishes (delta = 1/2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub algorithm: SamplingRule,
    pub delta: f64,
    pub regret_ratio: f64,
    pub regret_lb_ratio: Option<f64>,
    pub tau_ratio: f64,
}

/// Regret and stopping time normalized by `ln(1/delta)` and by the regret
/// lower bound `i_star * kl_B(delta, 1 - delta)`.
pub fn ratio_table(stats: &AggregateStats, i_star: f64) -> Vec<RatioRow> {
    stats
        .cells
        .iter()
        .map(|c| {
            let log_inv = (1.0 / c.delta).ln();
            let bound = i_star * confidence_kl(c.delta).unwrap_or(0.0);
            RatioRow {
                algorithm: c.algorithm,
                delta: c.delta,
                regret_ratio: c.pseudo_regret.mean / log_inv,
                regret_lb_ratio: (bound > 0.0).then(|| c.pseudo_regret.mean / bound),
                tau_ratio: c.tau.mean / log_inv,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp_family::RewardFamily;
    use approx::assert_abs_diff_eq;
    use statrs::distribution::{Binomial, DiscreteCDF};

    fn config(trials: u64, parallelism: usize) -> ExperimentConfig {
        ExperimentConfig {
            instance: BanditInstance::new(RewardFamily::Bernoulli, vec![0.6, 0.4]).unwrap(),
            algorithms: vec![SamplingRule::DoubleKlUcb, SamplingRule::RoundRobin],
            deltas: vec![0.2, 0.05],
            trials_per_cell: trials,
            base_seed: 42,
            horizon_cap: 1_000_000,
            parallelism,
        }
    }

    #[test]
    fn parallelism_does_not_change_results() {
        for trials in [1, 17] {
            let a = run_campaign(&config(trials, 1)).unwrap();
            let b = run_campaign(&config(trials, 8)).unwrap();
            assert_eq!(a, b);
            assert!(a.cells.iter().all(|c| c.trials == trials));
        }
    }

    #[test]
    fn config_errors() {
        let mut c = config(1, 1);
        c.algorithms.clear();
        assert!(matches!(run_campaign(&c), Err(Error::Config(_))));
        let mut c = config(1, 1);
        c.deltas = vec![0.1, 0.1];
        assert!(c.validate().is_err());
        c.deltas = vec![1.0];
        assert!(c.validate().is_err());
        let mut c = config(0, 1);
        assert!(c.validate().is_err());
        c.trials_per_cell = 1;
        c.parallelism = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn seeds_differ_across_cells() {
        let mut seen = std::collections::HashSet::new();
        for rule in SamplingRule::ALL {
            for d in 0..4 {
                for i in 0..100 {
                    assert!(seen.insert(trial_seed(7, rule, d, i)));
                }
            }
        }
    }

    #[test]
    fn running_stats_match_two_pass() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| ((i * 7919) % 1013) as f64 * 0.37)
            .collect();
        let mut s = RunningStats::default();
        xs.iter().for_each(|&x| s.push(x));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert_abs_diff_eq!(s.mean, mean, epsilon = 1e-9);
        assert_abs_diff_eq!(s.variance(), var, epsilon = 1e-6);
        let (mut a, mut b) = (RunningStats::default(), RunningStats::default());
        xs[..300].iter().for_each(|&x| a.push(x));
        xs[300..].iter().for_each(|&x| b.push(x));
        let m = a.merge(&b);
        assert_eq!(m.n, 1000);
        assert_abs_diff_eq!(m.mean, mean, epsilon = 1e-9);
        assert_abs_diff_eq!(m.variance(), var, epsilon = 1e-6);
    }

    #[test]
    fn clopper_pearson_inverts_binomial_cdf() {
        for &(x, n) in &[(0u64, 10u64), (3, 50), (150, 2000), (9, 10)] {
            let ub = clopper_pearson_upper(x, n, 0.99);
            let cdf = Binomial::new(ub, n).unwrap().cdf(x);
            assert_abs_diff_eq!(cdf, 0.005, epsilon = 1e-9);
        }
        assert_eq!(clopper_pearson_upper(10, 10, 0.99), 1.0);
        // zero failures: 1 - 0.005^(1/n)
        assert_abs_diff_eq!(
            clopper_pearson_upper(0, 2000, 0.99),
            1.0 - 0.005f64.powf(1.0 / 2000.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn ratio_table_marks_vanishing_bound() {
        let mut c = config(2, 2);
        c.deltas = vec![0.5, 0.1];
        c.algorithms = vec![SamplingRule::DoubleKlUcb];
        let stats = run_campaign(&c).unwrap();
        let rows = ratio_table(&stats, 2.46631);
        assert_eq!(rows[0].regret_lb_ratio, None);
        assert!(rows[1].regret_lb_ratio.unwrap() > 0.0);
        assert_abs_diff_eq!(
            rows[1].regret_ratio,
            stats.cells[1].pseudo_regret.mean / 10f64.ln()
        );
    }

    #[test]
    fn traces_cover_first_trial_of_each_cell() {
        let (stats, traces) = run_campaign_traced(&config(3, 4), true).unwrap();
        assert_eq!(traces.len(), stats.cells.len());
        for (t, cell) in traces.iter().zip(&stats.cells) {
            assert_eq!(t.header.algorithm, cell.algorithm.name());
            assert!(matches!(
                t.records.last(),
                Some(TraceRecord::Stop { .. } | TraceRecord::Censored { .. })
            ));
        }
    }
}
