//! Result artifacts.
//!
//! Both formats carry one row per (algorithm, delta) cell with these fields,
//! in this order:
//!
//! | field | meaning |
//! |---|---|
//! | `algorithm` | `dkl_ucb`, `klucb_stop` or `uniform_stop` |
//! | `delta` | confidence parameter |
//! | `trials` | trials in the cell |
//! | `error_rate` | fraction of wrong or censored recommendations |
//! | `error_ub99` | two-sided 99% Clopper-Pearson upper bound on the error rate |
//! | `mean_pseudo_regret` | mean of `sum_s gap(A_s)` |
//! | `mean_realized_regret` | mean of `sum_s (mu_best - X_s)` |
//! | `mean_tau` | mean stopping step (censored trials count as the cap) |
//! | `regret_ratio` | `mean_pseudo_regret / ln(1/delta)` |
//! | `regret_lb_ratio` | `mean_pseudo_regret` over the regret lower bound; `inf` at `delta = 0.5` |
//! | `tau_ratio` | `mean_tau / ln(1/delta)` |
//! | `censored` | trials that hit the horizon cap |
//! | `version` | version of the `bai` binary |
//! | `config_hash` | SHA-256 of the config file bytes |
//!
//! CSV floats are written as `{:.16e}` (17 significant digits). JSON is an
//! array of objects with the same keys; floats use the shortest
//! representation that round-trips, and an undefined `regret_lb_ratio` is
//! the string `"inf"` in both formats.

use std::io::Write;

use bai_core::harness::{ratio_table, AggregateStats, CellTrace};
use bai_core::oracles::hardness_i_star;
use bai_core::BanditInstance;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::Format;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const COLUMNS: [&str; 14] = [
    "algorithm",
    "delta",
    "trials",
    "error_rate",
    "error_ub99",
    "mean_pseudo_regret",
    "mean_realized_regret",
    "mean_tau",
    "regret_ratio",
    "regret_lb_ratio",
    "tau_ratio",
    "censored",
    "version",
    "config_hash",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub delta: f64,
    pub trials: u64,
    pub error_rate: f64,
    pub error_ub99: f64,
    pub mean_pseudo_regret: f64,
    pub mean_realized_regret: f64,
    pub mean_tau: f64,
    pub regret_ratio: f64,
    #[serde(serialize_with = "ser_ratio", deserialize_with = "de_ratio")]
    pub regret_lb_ratio: f64,
    pub tau_ratio: f64,
    pub censored: u64,
    pub version: String,
    pub config_hash: String,
}

fn ser_ratio<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_str("inf")
    }
}

fn de_ratio<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
    }
}

pub fn rows(
    stats: &AggregateStats,
    instance: &BanditInstance,
    config_hash: &str,
) -> Vec<ResultRow> {
    let ratios = ratio_table(stats, hardness_i_star(instance));
    stats
        .cells
        .iter()
        .zip(ratios)
        .map(|(c, r)| ResultRow {
            algorithm: c.algorithm.name().to_string(),
            delta: c.delta,
            trials: c.trials,
            error_rate: c.error_rate,
            error_ub99: c.error_ub99,
            mean_pseudo_regret: c.pseudo_regret.mean,
            mean_realized_regret: c.realized_regret.mean,
            mean_tau: c.tau.mean,
            regret_ratio: r.regret_ratio,
            regret_lb_ratio: r.regret_lb_ratio.unwrap_or(f64::INFINITY),
            tau_ratio: r.tau_ratio,
            censored: c.censored,
            version: VERSION.to_string(),
            config_hash: config_hash.to_string(),
        })
        .collect()
}

fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "inf".to_string()
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            float(r.delta),
            r.trials.to_string(),
            float(r.error_rate),
            float(r.error_ub99),
            float(r.mean_pseudo_regret),
            float(r.mean_realized_regret),
            float(r.mean_tau),
            float(r.regret_ratio),
            float(r.regret_lb_ratio),
            float(r.tau_ratio),
            r.censored.to_string(),
            r.version.clone(),
            r.config_hash.clone(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_json<W: Write>(rows: &[ResultRow], mut out: W) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out).map_err(|e| CliError::Io(e.to_string()))
}

pub fn write_rows<W: Write>(rows: &[ResultRow], format: Format, out: W) -> Result<(), CliError> {
    match format {
        Format::Csv => write_csv(rows, out),
        Format::Json => write_json(rows, out),
    }
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>, CliError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Io(e.to_string()))
}

pub fn read_json<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>, CliError> {
    serde_json::from_reader(input).map_err(|e| CliError::Io(e.to_string()))
}

/// Newline-delimited JSON: for each cell a header line, then its records.
pub fn write_traces<W: Write>(traces: &[CellTrace], mut out: W) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    for t in traces {
        serde_json::to_writer(&mut out, &t.header).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(out).map_err(io)?;
        for r in &t.records {
            serde_json::to_writer(&mut out, r).map_err(|e| CliError::Io(e.to_string()))?;
            writeln!(out).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(lb: f64) -> ResultRow {
        ResultRow {
            algorithm: "dkl_ucb".into(),
            delta: 0.1,
            trials: 3,
            error_rate: 1.0 / 3.0,
            error_ub99: 0.9,
            mean_pseudo_regret: 12.345678901234567,
            mean_realized_regret: -0.1,
            mean_tau: 100.0,
            regret_ratio: 5.0,
            regret_lb_ratio: lb,
            tau_ratio: 43.4,
            censored: 0,
            version: VERSION.into(),
            config_hash: "ab".into(),
        }
    }

    #[test]
    fn csv_and_json_round_trip() {
        let rows = vec![row(2.5), row(f64::INFINITY)];
        let mut csv = Vec::new();
        write_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv.clone()).unwrap();
        assert!(text.starts_with(&COLUMNS.join(",")));
        assert!(text.lines().nth(2).unwrap().contains(",inf,"));
        assert_eq!(read_csv(csv.as_slice()).unwrap(), rows);
        let mut json = Vec::new();
        write_json(&rows, &mut json).unwrap();
        assert!(String::from_utf8(json.clone()).unwrap().contains("\"inf\""));
        assert_eq!(read_json(json.as_slice()).unwrap(), rows);
    }
}
