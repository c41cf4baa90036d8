use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::trace::TraceRecord;
use crate::error::{Error, Result};

/// Aggregates of one agent over all runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub name: String,
    pub num_runs: usize,
    /// Run-averaged throughput per TTI; index 0 is TTI 1.
    pub throughput_per_tti: Vec<f64>,
    pub mean_throughput: f64,
    pub bler: f64,
    /// Selection counts, index 0 is MCS 1.
    pub mcs_histogram: Vec<u64>,
    /// Run-averaged SINR estimate per TTI, for agents that report one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hat_per_tti: Option<Vec<f64>>,
    /// Run-averaged `|theta_hat - theta_true|` per TTI.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_sinr_error_per_tti: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_abs_sinr_error_db: Option<f64>,
}

impl AgentSummary {
    /// Mean of the per-TTI throughput over 1-based TTIs `first..=last`.
    pub fn mean_throughput_between(&self, first: usize, last: usize) -> f64 {
        window_mean(&self.throughput_per_tti, first, last)
    }

    pub fn mean_abs_sinr_error_between(&self, first: usize, last: usize) -> Option<f64> {
        self.abs_sinr_error_per_tti
            .as_ref()
            .map(|s| window_mean(s, first, last))
    }
}

fn window_mean(series: &[f64], first: usize, last: usize) -> f64 {
    let slice = &series[first - 1..last.min(series.len())];
    slice.iter().sum::<f64>() / slice.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub num_runs: usize,
    pub num_ttis: usize,
    pub agents: Vec<AgentSummary>,
    /// Run-averaged genie throughput at the true SINR per TTI.
    pub oracle_throughput_per_tti: Vec<f64>,
    /// Belief resets per agent, summed over runs.
    #[serde(default)]
    pub belief_collapses: BTreeMap<String, u64>,
}

impl Summary {
    pub fn agent(&self, name: &str) -> Option<&AgentSummary> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn oracle_mean_between(&self, first: usize, last: usize) -> f64 {
        window_mean(&self.oracle_throughput_per_tti, first, last)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Default)]
struct Acc {
    runs: Vec<usize>,
    tput: Vec<f64>,
    count: Vec<usize>,
    theta_hat: Vec<f64>,
    abs_err: Vec<f64>,
    est_count: Vec<usize>,
    nacks: u64,
    total: u64,
    hist: Vec<u64>,
}

fn grow<T: Clone + Default>(v: &mut Vec<T>, len: usize) {
    if v.len() < len {
        v.resize(len, T::default());
    }
}

/// Per-agent statistics in order of first appearance. Sums run in record
/// order, so a trace file read back from CSV yields the identical summary.
pub fn summarize(traces: &[TraceRecord], num_mcs: usize) -> Vec<AgentSummary> {
    let mut order: Vec<String> = Vec::new();
    let mut accs: BTreeMap<&str, Acc> = BTreeMap::new();
    for r in traces {
        let acc = accs.entry(r.agent.as_str()).or_insert_with(|| {
            order.push(r.agent.clone());
            Acc {
                hist: vec![0; num_mcs],
                ..Acc::default()
            }
        });
        let t = r.tti - 1;
        grow(&mut acc.tput, t + 1);
        grow(&mut acc.count, t + 1);
        acc.tput[t] += r.throughput;
        acc.count[t] += 1;
        if let Some(hat) = r.theta_hat_db {
            grow(&mut acc.theta_hat, t + 1);
            grow(&mut acc.abs_err, t + 1);
            grow(&mut acc.est_count, t + 1);
            acc.theta_hat[t] += hat;
            acc.abs_err[t] += (hat - r.theta_true_db).abs();
            acc.est_count[t] += 1;
        }
        grow(&mut acc.hist, r.mcs);
        acc.hist[r.mcs - 1] += 1;
        acc.total += 1;
        acc.nacks += u64::from(!r.ack);
        if acc.runs.last() != Some(&r.run) && !acc.runs.contains(&r.run) {
            acc.runs.push(r.run);
        }
    }

    order
        .into_iter()
        .map(|name| {
            let acc = &accs[name.as_str()];
            let per_tti = divide(&acc.tput, &acc.count);
            let total_tput: f64 = acc.tput.iter().sum();
            let has_estimates = acc.est_count.iter().any(|&c| c > 0);
            let (theta_hat, abs_err, mean_err) = if has_estimates {
                let total_err: f64 = acc.abs_err.iter().sum();
                let n: usize = acc.est_count.iter().sum();
                (
                    Some(divide(&acc.theta_hat, &acc.est_count)),
                    Some(divide(&acc.abs_err, &acc.est_count)),
                    Some(total_err / n as f64),
                )
            } else {
                (None, None, None)
            };
            AgentSummary {
                num_runs: acc.runs.len(),
                throughput_per_tti: per_tti,
                mean_throughput: total_tput / acc.total as f64,
                bler: acc.nacks as f64 / acc.total as f64,
                mcs_histogram: acc.hist.clone(),
                theta_hat_per_tti: theta_hat,
                abs_sinr_error_per_tti: abs_err,
                mean_abs_sinr_error_db: mean_err,
                name,
            }
        })
        .collect()
}

fn divide(sums: &[f64], counts: &[usize]) -> Vec<f64> {
    sums.iter()
        .zip(counts)
        .map(|(s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
        .collect()
}

/// Throughput of one agent relative to another.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub numerator: String,
    pub denominator: String,
    pub aggregate_ratio: f64,
    pub per_tti: Vec<f64>,
    pub max_ratio: f64,
    /// 1-based TTI of `max_ratio`.
    pub max_ratio_tti: usize,
    /// 1-based TTIs where the ratio reaches the flag factor.
    pub flagged: Vec<usize>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

fn ratio_report(num: (&str, &AgentSummary), den: (&str, &AgentSummary), factor: f64) -> RatioReport {
    let per_tti: Vec<f64> = num
        .1
        .throughput_per_tti
        .iter()
        .zip(&den.1.throughput_per_tti)
        .map(|(a, b)| ratio(*a, *b))
        .collect();
    let mut max_ratio = f64::NEG_INFINITY;
    let mut max_ratio_tti = 1;
    for (i, r) in per_tti.iter().enumerate() {
        if *r > max_ratio {
            max_ratio = *r;
            max_ratio_tti = i + 1;
        }
    }
    let flagged = per_tti
        .iter()
        .enumerate()
        .filter(|(_, r)| **r >= factor)
        .map(|(i, _)| i + 1)
        .collect();
    RatioReport {
        numerator: num.0.to_string(),
        denominator: den.0.to_string(),
        aggregate_ratio: ratio(num.1.mean_throughput, den.1.mean_throughput),
        per_tti,
        max_ratio,
        max_ratio_tti,
        flagged,
    }
}

fn check_lengths(summaries: &[&Summary]) -> Result<usize> {
    let t = summaries
        .first()
        .ok_or_else(|| Error::invalid("summaries", "nothing to compare"))?
        .num_ttis;
    for (i, s) in summaries.iter().enumerate() {
        if s.num_ttis != t {
            return Err(Error::invalid(
                format!("summaries.{i}.num_ttis"),
                format!("has {} TTIs, expected {t}", s.num_ttis),
            ));
        }
    }
    Ok(t)
}

/// Every agent of every later summary against the same-named agent of the
/// first summary. Labels are `<summary index>:<agent>`.
pub fn compare_matched(summaries: &[&Summary], factor: f64) -> Result<Vec<RatioReport>> {
    check_lengths(summaries)?;
    let base = summaries[0];
    let mut out = Vec::new();
    for (i, s) in summaries.iter().enumerate().skip(1) {
        for a in &s.agents {
            if let Some(b) = base.agent(&a.name) {
                out.push(ratio_report(
                    (&format!("{i}:{}", a.name), a),
                    (&format!("0:{}", b.name), b),
                    factor,
                ));
            }
        }
    }
    Ok(out)
}

/// Every ordered pair of distinct agents within each summary.
pub fn compare_within(summaries: &[&Summary], factor: f64) -> Result<Vec<RatioReport>> {
    check_lengths(summaries)?;
    let mut out = Vec::new();
    for (i, s) in summaries.iter().enumerate() {
        for a in &s.agents {
            for b in &s.agents {
                if a.name != b.name {
                    out.push(ratio_report(
                        (&format!("{i}:{}", a.name), a),
                        (&format!("{i}:{}", b.name), b),
                        factor,
                    ));
                }
            }
        }
    }
    Ok(out)
}
