//! Single-parameter exponential families parameterized by their mean.
//!
//! Every confidence index in the crate is a KL inversion: the largest (or
//! smallest) mean whose divergence from an empirical mean stays within a
//! budget. This module owns the per-family closed forms for `kl`, those
//! inversions, and reward sampling for the simulator.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Absolute tolerance on the KL value at an inverted root.
pub const INVERSION_TOL: f64 = 1e-9;
/// Hard cap on root-finding iterations for one inversion.
pub const INVERSION_MAX_ITER: usize = 200;

/// The exponential family shared by all arms of an instance.
///
/// All families are indexed by their mean; `Exponential` uses mean = 1/rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "type",
    content = "params",
    rename_all = "lowercase",
    deny_unknown_fields
)]
pub enum RewardFamily {
    Bernoulli,
    /// Gaussian with known variance.
    Gaussian {
        variance: f64,
    },
    Poisson,
    Exponential,
}

impl fmt::Display for RewardFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewardFamily::Bernoulli => write!(f, "bernoulli"),
            RewardFamily::Gaussian { variance } => write!(f, "gaussian(variance={variance})"),
            RewardFamily::Poisson => write!(f, "poisson"),
            RewardFamily::Exponential => write!(f, "exponential"),
        }
    }
}

impl RewardFamily {
    pub fn gaussian(variance: f64) -> Result<Self> {
        let family = RewardFamily::Gaussian { variance };
        family.validate()?;
        Ok(family)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RewardFamily::Gaussian { variance } if !(variance.is_finite() && variance > 0.0) => {
                domain(format!(
                    "gaussian variance must be positive and finite, got {variance}"
                ))
            }
            _ => Ok(()),
        }
    }

    /// Endpoints of the open mean interval `I`.
    pub fn mean_interval(&self) -> (f64, f64) {
        match self {
            RewardFamily::Bernoulli => (0.0, 1.0),
            RewardFamily::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            RewardFamily::Poisson | RewardFamily::Exponential => (0.0, f64::INFINITY),
        }
    }

    /// True if `mu` lies strictly inside the mean interval.
    pub fn contains(&self, mu: f64) -> bool {
        let (lo, hi) = self.mean_interval();
        mu.is_finite() && mu > lo && mu < hi
    }

    /// True if `mu` may appear as an empirical mean: interior points, plus
    /// the observable boundary values (Bernoulli 0 and 1, Poisson 0).
    pub fn admits_empirical(&self, mu: f64) -> bool {
        if self.contains(mu) {
            return true;
        }
        match self {
            RewardFamily::Bernoulli => mu == 0.0 || mu == 1.0,
            RewardFamily::Poisson => mu == 0.0,
            _ => false,
        }
    }

    /// Variance of the family member with mean `mu`.
    pub fn variance_at(&self, mu: f64) -> f64 {
        match *self {
            RewardFamily::Bernoulli => mu * (1.0 - mu),
            RewardFamily::Gaussian { variance } => variance,
            RewardFamily::Poisson => mu,
            RewardFamily::Exponential => mu * mu,
        }
    }

    /// KL divergence between the members with means `mu` and `mu_prime`.
    pub fn kl(&self, mu: f64, mu_prime: f64) -> Result<f64> {
        kl(*self, mu, mu_prime)
    }
}

fn check_first(family: RewardFamily, mu: f64) -> Result<()> {
    if family.admits_empirical(mu) {
        Ok(())
    } else {
        domain(format!(
            "mean {mu} is outside the mean interval of {family}"
        ))
    }
}

fn check_second(family: RewardFamily, mu: f64) -> Result<()> {
    let (lo, hi) = family.mean_interval();
    if mu.is_finite() && mu >= lo && mu <= hi {
        Ok(())
    } else {
        domain(format!(
            "mean {mu} is outside the closed mean interval of {family}"
        ))
    }
}

/// `x ln(x / y)` with the convention `0 ln 0 = 0`.
fn xlogx_over(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

/// Divergence without argument validation. Both arguments must be admissible.
pub(crate) fn kl_unchecked(family: RewardFamily, mu: f64, mu_prime: f64) -> f64 {
    if mu == mu_prime {
        return 0.0;
    }
    match family {
        RewardFamily::Bernoulli => {
            let v = xlogx_over(mu, mu_prime) + xlogx_over(1.0 - mu, 1.0 - mu_prime);
            v.max(0.0)
        }
        RewardFamily::Gaussian { variance } => {
            let d = mu - mu_prime;
            d * d / (2.0 * variance)
        }
        RewardFamily::Poisson => (xlogx_over(mu, mu_prime) + mu_prime - mu).max(0.0),
        RewardFamily::Exponential => {
            let r = mu / mu_prime;
            if r.is_infinite() {
                return f64::INFINITY;
            }
            (r - 1.0 - r.ln()).max(0.0)
        }
    }
}

/// KL divergence `kl(mu, mu_prime)` between two members of `family`.
///
/// The first argument may be an observable boundary mean (Bernoulli 0 or 1,
/// Poisson 0); the second may lie anywhere in the closure of the mean
/// interval, in which case the limit value (possibly `+inf`) is returned.
pub fn kl(family: RewardFamily, mu: f64, mu_prime: f64) -> Result<f64> {
    family.validate()?;
    check_first(family, mu)?;
    check_second(family, mu_prime)?;
    Ok(kl_unchecked(family, mu, mu_prime))
}

/// Bernoulli divergence `p ln(p/q) + (1-p) ln((1-p)/(1-q))` for `p, q` in (0,1).
pub fn kl_bernoulli(p: f64, q: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0) {
        return domain(format!(
            "kl_bernoulli requires p, q in (0,1), got ({p}, {q})"
        ));
    }
    Ok(kl_unchecked(RewardFamily::Bernoulli, p, q))
}

fn check_budget(c: f64) -> Result<()> {
    if c.is_finite() && c >= 0.0 {
        Ok(())
    } else {
        domain(format!("KL budget must be finite and nonnegative, got {c}"))
    }
}

/// `sup { mu in I : kl(mu_hat, mu) <= c }`.
pub fn kl_upper_inverse(family: RewardFamily, mu_hat: f64, c: f64) -> Result<f64> {
    family.validate()?;
    check_first(family, mu_hat)?;
    check_budget(c)?;
    Ok(invert(family, mu_hat, c, Side::Upper))
}

/// `inf { mu in I : kl(mu_hat, mu) <= c }`.
pub fn kl_lower_inverse(family: RewardFamily, mu_hat: f64, c: f64) -> Result<f64> {
    family.validate()?;
    check_first(family, mu_hat)?;
    check_budget(c)?;
    Ok(invert(family, mu_hat, c, Side::Lower))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Upper,
    Lower,
}

/// Inversion on validated inputs.
pub(crate) fn invert(family: RewardFamily, mu_hat: f64, c: f64, side: Side) -> f64 {
    if c == 0.0 {
        return mu_hat;
    }
    if let RewardFamily::Gaussian { variance } = family {
        let radius = (2.0 * variance * c).sqrt();
        return match side {
            Side::Upper => mu_hat + radius,
            Side::Lower => mu_hat - radius,
        };
    }
    let (lo_end, hi_end) = family.mean_interval();
    let f = |x: f64| kl_unchecked(family, mu_hat, x) - c;
    match side {
        Side::Upper => {
            if mu_hat >= hi_end {
                return hi_end;
            }
            let hi = if hi_end.is_finite() {
                // root closer to the endpoint than one ulp
                let below_end = hi_end - f64::EPSILON / 2.0;
                if f(below_end) <= 0.0 {
                    return hi_end;
                }
                below_end
            } else {
                // grow the bracket geometrically on the offset from mu_hat
                let mut offset = mu_hat.abs().max(1.0);
                while f(mu_hat + offset) <= 0.0 {
                    offset *= 2.0;
                }
                mu_hat + offset
            };
            let log_scale = lo_end == 0.0 && family != RewardFamily::Bernoulli;
            solve_increasing(family, mu_hat, &f, mu_hat, hi, log_scale)
        }
        Side::Lower => {
            if mu_hat <= lo_end {
                return lo_end;
            }
            // kl(mu_hat, .) decreases on [lo_end, mu_hat]; flip the sign to
            // reuse the increasing solver.
            let g = |x: f64| -f(x);
            let lo = if lo_end == 0.0 {
                // root below the smallest normal number
                if f(f64::MIN_POSITIVE) <= 0.0 {
                    return lo_end;
                }
                f64::MIN_POSITIVE
            } else {
                lo_end
            };
            solve_increasing(family, mu_hat, &g, lo, mu_hat, lo_end == 0.0)
        }
    }
}

/// Root of an increasing `h` on `[lo, hi]` where `h(lo) <= 0 < h(hi)` (the
/// endpoint values may be infinite). Newton steps use the exponential-family
/// derivative `d/dx kl(mu_hat, x) = (x - mu_hat) / V(x)` and fall back to
/// bisection whenever a step leaves the bracket. With `log_scale` the Newton
/// step is taken in `ln x`, where divergences toward 0 or infinity are close
/// to linear, and bisection uses geometric midpoints.
fn solve_increasing(
    family: RewardFamily,
    mu_hat: f64,
    h: &dyn Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    log_scale: bool,
) -> f64 {
    let midpoint = |lo: f64, hi: f64| {
        if log_scale && lo > 0.0 && hi > 4.0 * lo {
            lo.sqrt() * hi.sqrt()
        } else {
            0.5 * (lo + hi)
        }
    };
    let width = |lo: f64, hi: f64| {
        if log_scale {
            hi.ln() - lo.ln()
        } else {
            hi - lo
        }
    };
    let mut x = midpoint(lo, hi);
    let mut last_width = f64::INFINITY;
    for _ in 0..INVERSION_MAX_ITER {
        let hx = h(x);
        if hx.abs() <= INVERSION_TOL {
            return x;
        }
        if hx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // Newton is only trusted while it at least halves the bracket
        let newton_ok = width(lo, hi) <= 0.5 * last_width;
        last_width = width(lo, hi);
        let mid = midpoint(lo, hi);
        if mid <= lo || mid >= hi {
            // bracket exhausted at floating-point resolution
            return x;
        }
        // |dh/dx| is the same for both sides
        let slope = ((x - mu_hat) / family.variance_at(x)).abs();
        let newton = if log_scale {
            x * (-hx / (slope * x)).exp()
        } else {
            x - hx / slope
        };
        x = if newton_ok && slope.is_finite() && slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            mid
        };
    }
    x
}

/// Supremum of the family variance over means in `[mean_lo, mean_hi]`.
pub fn variance_bound(family: RewardFamily, mean_lo: f64, mean_hi: f64) -> Result<f64> {
    family.validate()?;
    if mean_lo > mean_hi || !family.contains(mean_lo) || !family.contains(mean_hi) {
        return domain(format!(
            "variance_bound needs mean_lo <= mean_hi inside the mean interval, got [{mean_lo}, {mean_hi}]"
        ));
    }
    Ok(match family {
        RewardFamily::Bernoulli => {
            if mean_lo <= 0.5 && 0.5 <= mean_hi {
                0.25
            } else {
                family.variance_at(mean_lo).max(family.variance_at(mean_hi))
            }
        }
        RewardFamily::Gaussian { variance } => variance,
        RewardFamily::Poisson => mean_hi,
        RewardFamily::Exponential => mean_hi * mean_hi,
    })
}

/// One reward draw from the member of `family` with mean `mu`.
pub fn sample<R: Rng + ?Sized>(family: RewardFamily, mu: f64, rng: &mut R) -> Result<f64> {
    family.validate()?;
    if !family.contains(mu) {
        return domain(format!("cannot sample {family} at mean {mu}"));
    }
    Ok(sample_unchecked(family, mu, rng))
}

pub(crate) fn sample_unchecked<R: Rng + ?Sized>(family: RewardFamily, mu: f64, rng: &mut R) -> f64 {
    match family {
        RewardFamily::Bernoulli => {
            if rng.random::<f64>() < mu {
                1.0
            } else {
                0.0
            }
        }
        RewardFamily::Gaussian { variance } => Normal::new(mu, variance.sqrt())
            .map(|d| d.sample(rng))
            .unwrap_or(mu),
        RewardFamily::Poisson => Poisson::new(mu).map(|d| d.sample(rng)).unwrap_or(0.0),
        RewardFamily::Exponential => Exp::new(1.0 / mu).map(|d| d.sample(rng)).unwrap_or(mu),
    }
}
