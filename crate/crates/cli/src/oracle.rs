//! Plain-text report of the analytic quantities of an instance.

use std::fmt::Write;

use bai_core::oracles::{gamma_star, gaps, hardness_i_star, regret_lower_bound};
use bai_core::BanditInstance;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub num_arms: usize,
    pub best_arm: usize,
    pub gaps: Vec<f64>,
    pub i_star: f64,
    pub lower_bounds: Vec<(f64, f64)>,
    pub gamma_star: f64,
    pub weights: Vec<f64>,
    /// Regret rate `Gamma* sum_i w_i gap_i` of sampling at the
    /// sample-optimal proportions, over the regret-optimal rate `I*`.
    pub regret_rate_ratio: f64,
}

pub fn oracle_report(instance: &BanditInstance, deltas: &[f64]) -> Result<OracleReport, CliError> {
    let g = gaps(instance);
    let i_star = hardness_i_star(instance);
    let opt = gamma_star(instance)?;
    let lower_bounds = deltas
        .iter()
        .map(|&d| Ok((d, regret_lower_bound(instance, d)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let sample_optimal_rate = opt.value * opt.w.iter().zip(&g).map(|(w, d)| w * d).sum::<f64>();
    Ok(OracleReport {
        num_arms: instance.num_arms(),
        best_arm: instance.best_arm(),
        gaps: g,
        i_star,
        lower_bounds,
        gamma_star: opt.value,
        weights: opt.w,
        regret_rate_ratio: sample_optimal_rate / i_star,
    })
}

fn list(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

impl OracleReport {
    pub fn render(&self, instance: &BanditInstance) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "family        {}", instance.family());
        let _ = writeln!(s, "means         {}", list(instance.means()));
        let _ = writeln!(s, "K             {}", self.num_arms);
        let _ = writeln!(s, "best arm      {}", self.best_arm);
        let _ = writeln!(s, "gaps          {}", list(&self.gaps));
        let _ = writeln!(s, "I*            {}", self.i_star);
        for (d, lb) in &self.lower_bounds {
            let _ = writeln!(s, "regret LB     delta={d}  {lb}");
        }
        let _ = writeln!(s, "Gamma*        {}", self.gamma_star);
        let _ = writeln!(s, "weights       {}", list(&self.weights));
        let _ = writeln!(
            s,
            "regret rate at Gamma* weights / I*  {}",
            self.regret_rate_ratio
        );
        s
    }
}
