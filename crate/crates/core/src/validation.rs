//! Property suites run by `bai validate`.
//!
//! Every suite takes the divergence as a parameter so a deliberately broken
//! implementation can be plugged in as a negative control. The checks use
//! their own plain bisection and brute-force grids rather than the solvers
//! they are checking.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};

use crate::dkl_ucb::{run_with_rule, RandomSource, SamplingRule};
use crate::exp_family::{kl_lower_inverse, kl_upper_inverse, variance_bound, RewardFamily};
use crate::oracles::{gamma_star, phi, transport_objective, BanditInstance};
use crate::trace::{TraceHeader, TraceRecord};

/// Divergence under test.
pub type KlFn = fn(RewardFamily, f64, f64) -> crate::error::Result<f64>;

pub const SUITES: [&str; 6] = ["kl", "pinsker", "inversion", "phi", "gamma", "stopping"];

const PAIRS_PER_FAMILY: usize = 10_000;

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

type Outcome = std::result::Result<String, String>;

/// Run every suite, or only `only`. Unknown names yield `None`.
pub fn run_suites(only: Option<&str>, kl: KlFn) -> Option<Vec<SuiteReport>> {
    if let Some(name) = only {
        if !SUITES.contains(&name) {
            return None;
        }
    }
    Some(
        SUITES
            .iter()
            .filter(|&&name| only.is_none_or(|o| o == name))
            .map(|&name| {
                let start = Instant::now();
                let outcome = match name {
                    "kl" => suite_kl(kl),
                    "pinsker" => suite_pinsker(kl),
                    "inversion" => suite_inversion(kl),
                    "phi" => suite_phi(kl),
                    "gamma" => suite_gamma(kl),
                    _ => suite_stopping(kl),
                };
                let (passed, detail) = match outcome {
                    Ok(d) => (true, d),
                    Err(d) => (false, d),
                };
                SuiteReport {
                    name,
                    passed,
                    detail,
                    elapsed: start.elapsed(),
                }
            })
            .collect(),
    )
}

/// Families exercised by the random suites, with a sampler for interior means.
pub fn test_families() -> Vec<(RewardFamily, f64, f64)> {
    vec![
        (RewardFamily::Bernoulli, 1e-3, 1.0 - 1e-3),
        (RewardFamily::Gaussian { variance: 1.7 }, -10.0, 10.0),
        (RewardFamily::Poisson, 0.01, 50.0),
        (RewardFamily::Exponential, 0.01, 50.0),
    ]
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn suite_kl(kl: KlFn) -> Outcome {
    let b = RewardFamily::Bernoulli;
    let direct = |p: f64, q: f64| p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
    let cases = [
        (b, 0.4, 0.6, direct(0.4, 0.6)),
        (b, 0.1, 0.9, 0.8 * 9f64.ln()),
        (RewardFamily::Gaussian { variance: 1.0 }, 0.0, 1.0, 0.5),
        (RewardFamily::Poisson, 1.0, 2.0, 0.5f64.ln() + 1.0),
        (RewardFamily::Exponential, 1.0, 2.0, 0.5 - 1.0 + 2f64.ln()),
    ];
    for (family, p, q, want) in cases {
        let got = kl(family, p, q).map_err(|e| e.to_string())?;
        check((got - want).abs() <= 1e-12, || {
            format!("kl {family} ({p}, {q}) = {got}, expected {want}")
        })?;
    }
    let mut rng = RandomSource::seed_from_u64(1);
    for (family, lo, hi) in test_families() {
        for _ in 0..1000 {
            let m = rng.random_range(lo..hi);
            let v = kl(family, m, m).map_err(|e| e.to_string())?;
            check(v.abs() <= 1e-12, || {
                format!("kl {family} ({m}, {m}) = {v} is not zero")
            })?;
        }
    }
    Ok(format!(
        "{} closed-form cases, identity on 4 families",
        cases.len()
    ))
}

fn suite_pinsker(kl: KlFn) -> Outcome {
    let mut rng = RandomSource::seed_from_u64(2);
    for (family, lo, hi) in test_families() {
        for _ in 0..PAIRS_PER_FAMILY {
            let (a, b) = (rng.random_range(lo..hi), rng.random_range(lo..hi));
            if a == b {
                continue;
            }
            let v = kl(family, a, b).map_err(|e| e.to_string())?;
            check(v > 0.0, || {
                format!("pinsker: kl {family} ({a}, {b}) = {v} is not positive")
            })?;
            let var = variance_bound(family, a.min(b), a.max(b)).map_err(|e| e.to_string())?;
            let bound = (a - b) * (a - b) / (2.0 * var);
            check(v >= bound * (1.0 - 1e-12), || {
                format!("pinsker: kl {family} ({a}, {b}) = {v} below (mu - mu')^2 / 2V = {bound}")
            })?;
        }
    }
    Ok(format!("{PAIRS_PER_FAMILY} pairs per family"))
}

/// Whether `kl(mu_hat, x) = c` can be resolved to 1e-9 at `x` in double precision.
pub fn root_is_resolvable(family: RewardFamily, mu_hat: f64, x: f64) -> bool {
    if !family.contains(x) {
        return false;
    }
    let slope = (x - mu_hat).abs() / family.variance_at(x);
    slope * x.abs().max(f64::MIN_POSITIVE) * f64::EPSILON <= 1e-10
}

fn suite_inversion(kl: KlFn) -> Outcome {
    let mut rng = RandomSource::seed_from_u64(3);
    let mut checked = 0;
    for (family, lo, hi) in test_families() {
        for _ in 0..PAIRS_PER_FAMILY {
            let m = rng.random_range(lo..hi);
            let c = rng.random_range(-12.0f64..2.5).exp();
            let u = kl_upper_inverse(family, m, c).map_err(|e| e.to_string())?;
            let l = kl_lower_inverse(family, m, c).map_err(|e| e.to_string())?;
            check(l <= m && m <= u, || {
                format!("inversion order broken: {l} <= {m} <= {u} ({family}, c={c})")
            })?;
            for x in [u, l] {
                if root_is_resolvable(family, m, x) {
                    let v = kl(family, m, x).map_err(|e| e.to_string())?;
                    check((v - c).abs() <= 1e-9, || {
                        format!("inversion {family} ({m}, {c}) -> {x}: kl = {v}")
                    })?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} interior roots"))
}

fn suite_phi(kl: KlFn) -> Outcome {
    let mut rng = RandomSource::seed_from_u64(4);
    let mut n = 0;
    for (family, lo, hi) in test_families() {
        for _ in 0..200 {
            let (a, b) = (rng.random_range(lo..hi), rng.random_range(lo..hi));
            if a == b {
                continue;
            }
            let (mu1, muj) = (a.max(b), a.min(b));
            let (x, y) = (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0));
            let t = phi(x, y, mu1, muj, family).map_err(|e| e.to_string())?;
            let objective = |l: f64| -> std::result::Result<f64, String> {
                Ok(x * kl(family, mu1, l).map_err(|e| e.to_string())?
                    + y * kl(family, muj, l).map_err(|e| e.to_string())?)
            };
            let at_argmin = objective(t.argmin)?;
            check(
                (at_argmin - t.value).abs() <= 1e-9 * at_argmin.abs().max(1.0),
                || {
                    format!(
                        "phi value {} disagrees with objective {at_argmin} at its argmin",
                        t.value
                    )
                },
            )?;
            for k in 0..=400 {
                let l = muj + (mu1 - muj) * k as f64 / 400.0;
                let v = objective(l)?;
                check(t.value <= v + 1e-12 * v.abs().max(1.0), || {
                    format!(
                        "phi {family} ({x}, {y}, {mu1}, {muj}) = {} exceeds grid value {v} at {l}",
                        t.value
                    )
                })?;
            }
            n += 1;
        }
    }
    Ok(format!("{n} random cases against a 401-point grid"))
}

/// Largest max-min objective over the simplex grid with the given step (K = 3).
pub fn simplex_grid_max(instance: &BanditInstance, steps: usize) -> f64 {
    let mut best = 0.0f64;
    for i in 0..=steps {
        for j in 0..=(steps - i) {
            let w = [
                i as f64 / steps as f64,
                j as f64 / steps as f64,
                (steps - i - j) as f64 / steps as f64,
            ];
            if let Ok(v) = transport_objective(instance, &w) {
                best = best.max(v);
            }
        }
    }
    best
}

fn suite_gamma(kl: KlFn) -> Outcome {
    let gauss = BanditInstance::new(RewardFamily::Gaussian { variance: 1.0 }, vec![1.0, 0.0])
        .map_err(|e| e.to_string())?;
    let g = gamma_star(&gauss).map_err(|e| e.to_string())?;
    check(
        (g.value - 8.0).abs() <= 1e-6 && (g.w[0] - 0.5).abs() <= 1e-6,
        || format!("two gaussians: Gamma* = {}, w = {:?}", g.value, g.w),
    )?;
    let bern =
        BanditInstance::new(RewardFamily::Bernoulli, vec![0.7, 0.3]).map_err(|e| e.to_string())?;
    let g = gamma_star(&bern).map_err(|e| e.to_string())?;
    check((g.w[0] - 0.5).abs() <= 1e-4, || {
        format!("symmetric bernoulli weights {:?}", g.w)
    })?;
    // uniform weights: inner value is phi(1/2, 1/2), evaluated here from kl directly
    let direct = 0.5 * kl(RewardFamily::Bernoulli, 0.7, 0.5).map_err(|e| e.to_string())?
        + 0.5 * kl(RewardFamily::Bernoulli, 0.3, 0.5).map_err(|e| e.to_string())?;
    check((1.0 / g.value - direct).abs() <= 1e-6 * direct, || {
        format!(
            "symmetric bernoulli: 1/Gamma* = {} but uniform transport = {direct}",
            1.0 / g.value
        )
    })?;
    let three = BanditInstance::new(RewardFamily::Bernoulli, vec![0.5, 0.4, 0.3])
        .map_err(|e| e.to_string())?;
    let g = gamma_star(&three).map_err(|e| e.to_string())?;
    let grid = 1.0 / simplex_grid_max(&three, 1000);
    check((g.value - grid).abs() <= 1e-3 * grid, || {
        format!("K=3 Gamma* {} vs grid {grid}", g.value)
    })?;
    Ok(format!(
        "closed forms and K=3 grid (Gamma* = {:.6})",
        g.value
    ))
}

/// Plain bisection for `sup`/`inf { x : kl(mu_hat, x) <= c }`.
fn bisect_index(
    kl: KlFn,
    family: RewardFamily,
    mu_hat: f64,
    c: f64,
    upper: bool,
) -> std::result::Result<f64, String> {
    let (lo_end, hi_end) = family.mean_interval();
    let (mut lo, mut hi) = if upper {
        let mut hi = if hi_end.is_finite() {
            hi_end
        } else {
            mu_hat + 1.0
        };
        while !hi_end.is_finite() && kl(family, mu_hat, hi).map_err(|e| e.to_string())? <= c {
            hi = mu_hat + 2.0 * (hi - mu_hat);
        }
        (mu_hat, hi)
    } else {
        let mut lo = if lo_end.is_finite() {
            lo_end
        } else {
            mu_hat - 1.0
        };
        while !lo_end.is_finite() && kl(family, mu_hat, lo).map_err(|e| e.to_string())? <= c {
            lo = mu_hat - 2.0 * (mu_hat - lo);
        }
        (lo, mu_hat)
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let inside = kl(family, mu_hat, mid).map_err(|e| e.to_string())? <= c;
        if inside == upper {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Summary of a replayed trace.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayReport {
    pub steps_checked: u64,
    /// Steps where the two sides were within the replay tolerance.
    pub ambiguous: u64,
    pub stopped: bool,
}

/// Replay a trace from its raw pull history: rebuild the statistics,
/// recompute every g-index by bisection, and confirm the stopping rule did
/// not hold at any non-final step and held at the `stop` record.
pub fn replay_trace(
    header: &TraceHeader,
    records: &[TraceRecord],
    kl: KlFn,
) -> std::result::Result<ReplayReport, String> {
    const MARGIN: f64 = 1e-7;
    let k = header.means.len();
    let family = header.family;
    let mut counts = vec![0u64; k];
    let mut sums = vec![0.0f64; k];
    let mut report = ReplayReport::default();
    let predicate = |counts: &[u64],
                     sums: &[f64],
                     t: u64,
                     a_f: usize|
     -> std::result::Result<(f64, f64), String> {
        let g = (2.0 * k as f64 * (t as f64).powi(2) / header.delta).ln();
        let mean = |i: usize| {
            let m = sums[i] / counts[i] as f64;
            if family == RewardFamily::Bernoulli {
                m.clamp(0.0, 1.0)
            } else {
                m
            }
        };
        let lower = bisect_index(kl, family, mean(a_f), g / counts[a_f] as f64, false)?;
        let mut upper = f64::NEG_INFINITY;
        for i in (0..k).filter(|&i| i != a_f) {
            upper = upper.max(bisect_index(
                kl,
                family,
                mean(i),
                g / counts[i] as f64,
                true,
            )?);
        }
        Ok((lower, upper))
    };
    let mut pulls = 0u64;
    for (pos, rec) in records.iter().enumerate() {
        match rec {
            TraceRecord::Init { arm, reward, .. } => {
                counts[*arm] += 1;
                sums[*arm] += reward;
                pulls += 1;
            }
            TraceRecord::Step {
                t,
                arm,
                reward,
                a_f,
                a_g,
                ..
            } => {
                check(*t == pulls + 1, || format!("step {t} after {pulls} pulls"))?;
                check(a_f != a_g, || format!("step {t}: candidates coincide"))?;
                if header.algorithm == SamplingRule::DoubleKlUcb.name() {
                    check(arm == a_f || arm == a_g, || {
                        format!("step {t}: pulled arm {arm} is not a candidate")
                    })?;
                }
                let (lower, upper) = predicate(&counts, &sums, *t, *a_f)?;
                if (lower - upper).abs() <= MARGIN {
                    report.ambiguous += 1;
                } else {
                    check(lower <= upper, || {
                        format!("step {t}: stopping rule held ({lower} > {upper}) but the run continued")
                    })?;
                }
                report.steps_checked += 1;
                counts[*arm] += 1;
                sums[*arm] += reward;
                pulls += 1;
            }
            TraceRecord::Stop {
                t,
                a_f,
                recommendation,
                ..
            } => {
                check(pos + 1 == records.len(), || {
                    "stop record is not last".to_string()
                })?;
                check(*t == pulls + 1, || {
                    format!("stop at {t} after {pulls} pulls")
                })?;
                check(recommendation == a_f, || {
                    "recommendation is not the f-UCB leader".to_string()
                })?;
                let (lower, upper) = predicate(&counts, &sums, *t, *a_f)?;
                if (lower - upper).abs() <= MARGIN {
                    report.ambiguous += 1;
                } else {
                    check(lower > upper, || {
                        format!("stop at {t}: g-LCB {lower} does not exceed g-UCB {upper}")
                    })?;
                }
                report.steps_checked += 1;
                report.stopped = true;
            }
            TraceRecord::Censored { t, .. } => {
                check(*t == pulls, || {
                    format!("censored at {t} after {pulls} pulls")
                })?;
            }
        }
    }
    check(counts.iter().sum::<u64>() == pulls, || {
        "count conservation violated".to_string()
    })?;
    Ok(report)
}

fn suite_stopping(kl: KlFn) -> Outcome {
    let cases: Vec<(RewardFamily, Vec<f64>, SamplingRule, f64)> = vec![
        (
            RewardFamily::Bernoulli,
            vec![0.6, 0.4],
            SamplingRule::DoubleKlUcb,
            0.1,
        ),
        (
            RewardFamily::Bernoulli,
            vec![0.3, 0.7, 0.5],
            SamplingRule::RoundRobin,
            0.05,
        ),
        (
            RewardFamily::Gaussian { variance: 1.0 },
            vec![0.0, 1.0],
            SamplingRule::DoubleKlUcb,
            0.01,
        ),
        (
            RewardFamily::Poisson,
            vec![2.0, 3.0],
            SamplingRule::DoubleKlUcb,
            0.1,
        ),
        (
            RewardFamily::Exponential,
            vec![1.0, 2.0, 0.5],
            SamplingRule::RoundRobin,
            0.1,
        ),
        (
            RewardFamily::Bernoulli,
            vec![0.9, 0.1],
            SamplingRule::KlUcb,
            0.1,
        ),
    ];
    let mut steps = 0;
    for (seed, (family, means, rule, delta)) in cases.into_iter().enumerate() {
        let instance = BanditInstance::new(family, means.clone()).map_err(|e| e.to_string())?;
        let mut records = Vec::new();
        let mut sink = |r: TraceRecord| records.push(r);
        run_with_rule(
            rule,
            &instance,
            delta,
            RandomSource::seed_from_u64(seed as u64),
            200_000,
            Some(&mut sink),
        )
        .map_err(|e| e.to_string())?;
        let header = TraceHeader {
            kind: TraceHeader::KIND.into(),
            algorithm: rule.name().into(),
            delta,
            family,
            means,
            trial: 0,
            seed: seed as u64,
        };
        steps += replay_trace(&header, &records, kl)?.steps_checked;
    }
    Ok(format!("{steps} replayed steps"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp_family::kl;

    fn flipped(family: RewardFamily, a: f64, b: f64) -> crate::error::Result<f64> {
        kl(family, a, b).map(|v| -v)
    }

    #[test]
    fn all_suites_pass() {
        for r in run_suites(None, kl).unwrap() {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn sign_flip_fails_pinsker() {
        let reports = run_suites(Some("pinsker"), flipped).unwrap();
        assert_eq!(reports.len(), 1);
        assert!(!reports[0].passed);
        assert!(reports[0].detail.contains("pinsker"));
    }

    #[test]
    fn unknown_suite() {
        assert!(run_suites(Some("nope"), kl).is_none());
    }
}
