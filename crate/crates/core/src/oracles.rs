//! Analytic ground truth for an instance: gaps, the regret hardness `I*`,
//! the finite-confidence regret lower bound, the transport function `phi`,
//! and the max-min sample-complexity constant `Gamma*` with its weights.

use crate::error::{domain, Error, Result};
use crate::exp_family::{kl_unchecked, RewardFamily};

/// Two means closer than this are treated as tied at the maximum.
pub const TIE_TOL: f64 = 1e-12;
/// Smallest gap `gamma_star` accepts; `Gamma*` grows like `1 / gap^2`.
pub const MIN_GAMMA_GAP: f64 = 1e-6;
/// Tolerance for the scalar root-finds in the `Gamma*` solver.
const ROOT_TOL: f64 = 1e-9;
const MAX_BISECTIONS: usize = 400;

/// A bandit instance: one family, `K >= 2` arm means, a unique best arm.
///
/// Means are kept in the caller's labels. `order` is the canonical
/// relabeling: `order[0]` is the best arm, followed by the remaining arms
/// in their original order.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    family: RewardFamily,
    means: Vec<f64>,
    order: Vec<usize>,
}

impl BanditInstance {
    pub fn new(family: RewardFamily, means: Vec<f64>) -> Result<Self> {
        family.validate()?;
        if means.len() < 2 {
            return Err(Error::Config(format!(
                "an instance needs at least 2 arms, got {}",
                means.len()
            )));
        }
        if let Some(bad) = means.iter().position(|m| !m.is_finite()) {
            return domain(format!("mean of arm {bad} is not finite"));
        }
        let best = (0..means.len()).fold(0, |b, i| if means[i] > means[b] { i } else { b });
        if let Some(other) =
            (0..means.len()).find(|&i| i != best && means[best] - means[i] <= TIE_TOL)
        {
            return Err(Error::TiedBestArm(best.min(other), best.max(other)));
        }
        if let Some(bad) = means.iter().position(|&m| !family.contains(m)) {
            return domain(format!(
                "mean {} of arm {bad} is outside the mean interval of {family}",
                means[bad]
            ));
        }
        let order = std::iter::once(best)
            .chain((0..means.len()).filter(|&i| i != best))
            .collect();
        Ok(BanditInstance {
            family,
            means,
            order,
        })
    }

    pub fn family(&self) -> RewardFamily {
        self.family
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn num_arms(&self) -> usize {
        self.means.len()
    }

    /// Index of the best arm, in the caller's labels.
    pub fn best_arm(&self) -> usize {
        self.order[0]
    }

    pub fn best_mean(&self) -> f64 {
        self.means[self.order[0]]
    }

    /// Canonical relabeling (best arm first).
    pub fn canonical_order(&self) -> &[usize] {
        &self.order
    }

    /// Means in canonical order.
    pub fn canonical_means(&self) -> Vec<f64> {
        self.order.iter().map(|&i| self.means[i]).collect()
    }

    pub fn gap(&self, arm: usize) -> f64 {
        self.best_mean() - self.means[arm]
    }
}

/// Suboptimality gaps `mu_best - mu_i`, in the caller's labels.
pub fn gaps(instance: &BanditInstance) -> Vec<f64> {
    (0..instance.num_arms()).map(|i| instance.gap(i)).collect()
}

/// `I*(mu) = sum_{i != best} gap_i / kl(mu_i, mu_best)`.
pub fn hardness_i_star(instance: &BanditInstance) -> f64 {
    let family = instance.family();
    let best = instance.best_mean();
    instance.canonical_order()[1..]
        .iter()
        .map(|&i| {
            let mu = instance.means()[i];
            (best - mu) / kl_unchecked(family, mu, best)
        })
        .sum()
}

/// `I*(mu) * kl_B(delta, 1 - delta)`: no delta-PAC algorithm has smaller
/// expected regret.
pub fn regret_lower_bound(instance: &BanditInstance, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0,1), got {delta}"));
    }
    Ok(hardness_i_star(instance) * confidence_kl(delta)?)
}

/// `kl_B(delta, 1 - delta) = (1 - 2 delta) ln((1 - delta) / delta)`, written
/// so that it stays exact when `1 - delta` rounds to 1.
pub fn confidence_kl(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0,1), got {delta}"));
    }
    Ok((1.0 - 2.0 * delta) * ((-delta).ln_1p() - delta.ln()))
}

/// Value and minimizer of `inf_lambda x kl(mu1, lambda) + y kl(muj, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transport {
    pub value: f64,
    pub argmin: f64,
}

/// The transport function: the cheapest way to move arms `1` and `j` to a
/// common mean, weighted by `x` and `y`. The minimizer is the weighted
/// average of the two means.
pub fn phi(x: f64, y: f64, mu1: f64, muj: f64, family: RewardFamily) -> Result<Transport> {
    family.validate()?;
    if !(x >= 0.0 && y >= 0.0 && x.is_finite() && y.is_finite() && x + y > 0.0) {
        return domain(format!(
            "phi needs nonnegative weights with positive sum, got ({x}, {y})"
        ));
    }
    if !(family.contains(mu1) && family.contains(muj) && mu1 > muj) {
        return domain(format!(
            "phi needs mu1 > muj inside the mean interval, got ({mu1}, {muj})"
        ));
    }
    Ok(phi_unchecked(x, y, mu1, muj, family))
}

fn phi_unchecked(x: f64, y: f64, mu1: f64, muj: f64, family: RewardFamily) -> Transport {
    let argmin = (x * mu1 + y * muj) / (x + y);
    let value = x * kl_unchecked(family, mu1, argmin) + y * kl_unchecked(family, muj, argmin);
    Transport { value, argmin }
}

/// Optimal allocation for identifying the best arm with the fewest samples.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalWeights {
    /// Probability vector over arms, in the caller's labels.
    pub w: Vec<f64>,
    /// `Gamma*`, the optimal sample complexity per `ln(1/delta)`.
    pub value: f64,
}

/// `min_j phi(w_best, w_j)` over suboptimal arms `j`: the inner infimum of
/// the max-min problem at weights `w` (caller's labels).
pub fn transport_objective(instance: &BanditInstance, w: &[f64]) -> Result<f64> {
    Ok(transport_values(instance, w)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// `phi(w_best, w_j)` for each suboptimal arm `j`, in canonical order.
pub fn transport_values(instance: &BanditInstance, w: &[f64]) -> Result<Vec<f64>> {
    if w.len() != instance.num_arms() {
        return domain(format!(
            "weight vector has {} entries for {} arms",
            w.len(),
            instance.num_arms()
        ));
    }
    if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return domain("weights must be finite and nonnegative");
    }
    let family = instance.family();
    let order = instance.canonical_order();
    let (b, mu1) = (order[0], instance.best_mean());
    Ok(order[1..]
        .iter()
        .map(|&j| {
            if w[b] + w[j] == 0.0 {
                0.0
            } else {
                phi_unchecked(w[b], w[j], mu1, instance.means()[j], family).value
            }
        })
        .collect())
}

/// Increasing scalar root: smallest `x` in `[lo, hi]` with `h(x) >= 0`,
/// to within `ROOT_TOL` relative width.
fn bisect(mut lo: f64, mut hi: f64, h: impl Fn(f64) -> f64) -> Result<f64> {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= ROOT_TOL * ROOT_TOL * hi.abs().max(1.0) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence(format!(
        "bisection did not converge on [{lo}, {hi}]"
    )))
}

/// Solve the max-min problem through its transport equations.
///
/// With the best arm's weight fixed to 1, arm `j` gets weight `x_j(y)`, the
/// inverse of `x -> phi(1, x)` at level `y`. The optimum is the level where
/// `sum_j kl(mu1, lambda_j) / kl(mu_j, lambda_j) = 1`, with `lambda_j` the
/// transport argmin for arm `j`.
pub fn gamma_star(instance: &BanditInstance) -> Result<OptimalWeights> {
    let family = instance.family();
    let mu1 = instance.best_mean();
    let order = instance.canonical_order();
    let subopt: Vec<f64> = order[1..].iter().map(|&j| instance.means()[j]).collect();
    if let Some(&muj) = subopt.iter().find(|&&m| mu1 - m < MIN_GAMMA_GAP) {
        return domain(format!(
            "gap {} between {mu1} and {muj} is below {MIN_GAMMA_GAP}; Gamma* is not computed this close to a tie",
            mu1 - muj
        ));
    }

    let x_of = |muj: f64, y: f64| -> Result<f64> {
        // phi(1, x) rises from 0 to kl(mu1, muj) as x grows; grow a bracket first.
        let mut hi = 1.0;
        let mut guard = 0;
        while phi_unchecked(1.0, hi, mu1, muj, family).value < y {
            hi *= 2.0;
            guard += 1;
            if guard > 2000 {
                return Err(Error::Convergence(format!(
                    "no bracket for transport level {y}"
                )));
            }
        }
        bisect(0.0, hi, |x| {
            phi_unchecked(1.0, x, mu1, muj, family).value - y
        })
    };
    let ratio_sum = |y: f64| -> Result<f64> {
        subopt.iter().try_fold(0.0, |acc, &muj| {
            let x = x_of(muj, y)?;
            let lambda = (mu1 + x * muj) / (1.0 + x);
            Ok(acc + kl_unchecked(family, mu1, lambda) / kl_unchecked(family, muj, lambda))
        })
    };

    let y_max = subopt
        .iter()
        .map(|&muj| kl_unchecked(family, mu1, muj))
        .fold(f64::INFINITY, f64::min);
    // sum of ratios increases from 0 (y -> 0) to infinity (y -> y_max)
    let (mut lo, mut hi) = (0.0, y_max);
    let mut y = 0.5 * (lo + hi);
    let mut converged = false;
    for _ in 0..MAX_BISECTIONS {
        y = 0.5 * (lo + hi);
        if y <= lo || y >= hi || hi - lo <= 1e-15 * y_max {
            converged = true;
            break;
        }
        let s = ratio_sum(y)?;
        if (s - 1.0).abs() <= ROOT_TOL {
            converged = true;
            break;
        }
        if s < 1.0 {
            lo = y;
        } else {
            hi = y;
        }
    }
    if !converged {
        return Err(Error::Convergence(
            "transport equation did not converge".into(),
        ));
    }

    let xs = subopt
        .iter()
        .map(|&muj| x_of(muj, y))
        .collect::<Result<Vec<f64>>>()?;
    let total = 1.0 + xs.iter().sum::<f64>();
    let mut w = vec![0.0; instance.num_arms()];
    w[order[0]] = 1.0 / total;
    for (&j, &x) in order[1..].iter().zip(&xs) {
        w[j] = x / total;
    }
    let inner = transport_objective(instance, &w)?;
    if !(inner > 0.0 && inner.is_finite()) {
        return Err(Error::Convergence(format!(
            "degenerate max-min value {inner}"
        )));
    }
    Ok(OptimalWeights {
        w,
        value: 1.0 / inner,
    })
}
