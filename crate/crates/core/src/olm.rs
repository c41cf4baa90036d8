//! Offline link model: ACK probability as a function of MCS and effective SINR.
//!
//! The model is stored as a lookup table on a dB grid. Lookups snap to the
//! nearest grid bin and clamp outside the grid, so every consumer (MCS
//! selection, the Bayesian belief update) sees the same piecewise-constant
//! curves.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcs::{argmax_throughput, McsTable};

const MONOTONE_SLACK: f64 = 1e-12;

/// A uniform dB grid, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min_db: f64,
    pub max_db: f64,
    pub spacing_db: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            min_db: -10.0,
            max_db: 20.0,
            spacing_db: 0.1,
        }
    }
}

impl GridSpec {
    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.spacing_db > 0.0 && self.spacing_db.is_finite()) {
            return Err(Error::invalid(
                format!("{field}.spacing_db"),
                "must be positive and finite",
            ));
        }
        if !(self.max_db > self.min_db) || !self.min_db.is_finite() || !self.max_db.is_finite() {
            return Err(Error::invalid(
                format!("{field}.max_db"),
                "must be finite and exceed min_db",
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.max_db - self.min_db) / self.spacing_db + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bin centers `min_db + k * spacing_db`.
    pub fn centers(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.min_db + k as f64 * self.spacing_db)
            .collect()
    }
}

/// Logistic waterfall-curve parameters, one midpoint/slope pair per MCS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmoidParams {
    /// SINR (dB) of 50% ACK probability, strictly increasing with MCS index.
    pub midpoints_db: Vec<f64>,
    /// Steepness per dB.
    pub slopes_per_db: Vec<f64>,
}

impl SigmoidParams {
    /// Framework default for `m` schemes: midpoints at `-9 + 1.9 (m - 1)` dB,
    /// slope 2.5 / dB.
    pub fn evenly_spaced(m: usize) -> Self {
        Self {
            midpoints_db: (0..m).map(|i| -9.0 + 1.9 * i as f64).collect(),
            slopes_per_db: vec![2.5; m],
        }
    }
}

pub fn sigmoid(slope: f64, theta_db: f64, midpoint_db: f64) -> f64 {
    1.0 / (1.0 + (-slope * (theta_db - midpoint_db)).exp())
}

/// Table of `ack_prob[m][k]` over SINR bin centers `grid[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Olm {
    grid: Vec<f64>,
    ack: Vec<Vec<f64>>,
}

impl Olm {
    /// Builds a table and checks range, grid ordering and both monotonicity
    /// invariants (non-decreasing in SINR, non-increasing in MCS index).
    pub fn from_table(grid: Vec<f64>, ack: Vec<Vec<f64>>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::invalid("olm.grid", "empty SINR grid"));
        }
        if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("olm.grid", "must be finite and strictly increasing"));
        }
        if ack.is_empty() {
            return Err(Error::invalid("olm.ack_prob", "no MCS rows"));
        }
        for (m, row) in ack.iter().enumerate() {
            if row.len() != grid.len() {
                return Err(Error::invalid(
                    format!("olm.ack_prob.{m}"),
                    format!("row has {} bins, grid has {}", row.len(), grid.len()),
                ));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::invalid(
                    format!("olm.ack_prob.{m}"),
                    "probabilities must lie in [0, 1]",
                ));
            }
            if let Some(k) = row
                .windows(2)
                .position(|w| w[1] + MONOTONE_SLACK < w[0])
            {
                return Err(Error::invalid(
                    format!("olm.ack_prob.{m}"),
                    format!("ACK probability decreases with SINR at bin {}", k + 1),
                ));
            }
        }
        for (m, pair) in ack.windows(2).enumerate() {
            if let Some(k) = pair[0]
                .iter()
                .zip(&pair[1])
                .position(|(lo, hi)| hi > &(lo + MONOTONE_SLACK))
            {
                return Err(Error::invalid(
                    format!("olm.ack_prob.{}", m + 1),
                    format!("MCS {} is more reliable than MCS {} at bin {k}", m + 2, m + 1),
                ));
            }
        }
        Ok(Self { grid, ack })
    }

    /// Logistic waterfall curves `1 / (1 + exp(-slope_m (theta - midpoint_m)))`.
    pub fn sigmoid(table: &McsTable, params: &SigmoidParams, grid: &GridSpec) -> Result<Self> {
        grid.validate("olm.grid")?;
        let m = table.len();
        if params.midpoints_db.len() != m {
            return Err(Error::invalid(
                "olm.midpoints_db",
                format!("expected {m} values, got {}", params.midpoints_db.len()),
            ));
        }
        if params.slopes_per_db.len() != m {
            return Err(Error::invalid(
                "olm.slopes_per_db",
                format!("expected {m} values, got {}", params.slopes_per_db.len()),
            ));
        }
        if let Some(i) = params.midpoints_db.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                format!("olm.midpoints_db.{}", i + 1),
                "midpoints must be strictly increasing with MCS index",
            ));
        }
        if let Some(i) = params.slopes_per_db.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::invalid(
                format!("olm.slopes_per_db.{i}"),
                "slopes must be positive",
            ));
        }
        let centers = grid.centers();
        let ack = params
            .midpoints_db
            .iter()
            .zip(&params.slopes_per_db)
            .map(|(&mid, &slope)| centers.iter().map(|&t| sigmoid(slope, t, mid)).collect())
            .collect();
        Self::from_table(centers, ack)
    }

    pub fn num_mcs(&self) -> usize {
        self.ack.len()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// ACK probabilities of the 1-based MCS `m` over the grid.
    pub fn row(&self, m: usize) -> &[f64] {
        &self.ack[m - 1]
    }

    /// Index of the grid bin nearest `theta_db`; ties go to the lower bin and
    /// out-of-range values clamp to the edge bins.
    pub fn bin_index(&self, theta_db: f64) -> usize {
        nearest_bin(&self.grid, theta_db)
    }

    pub fn lookup(&self, m: usize, theta_db: f64) -> f64 {
        self.ack[m - 1][self.bin_index(theta_db)]
    }

    /// Throughput-maximizing MCS at `theta_db`, ties toward the lowest index.
    pub fn select_mcs(&self, table: &McsTable, theta_db: f64) -> usize {
        self.select_mcs_at_bin(table.rates(), self.bin_index(theta_db))
    }

    pub(crate) fn select_mcs_at_bin(&self, rates: &[f64], bin: usize) -> usize {
        debug_assert_eq!(rates.len(), self.ack.len());
        argmax_throughput(rates, self.ack.iter().map(|row| row[bin])) + 1
    }

    /// Largest expected throughput `max_m r_m * G(m, theta)` at `theta_db`.
    pub fn best_throughput(&self, table: &McsTable, theta_db: f64) -> f64 {
        let bin = self.bin_index(theta_db);
        table
            .rates()
            .iter()
            .zip(&self.ack)
            .map(|(r, row)| r * row[bin])
            .fold(0.0, f64::max)
    }

    /// The same curves shifted right by `bias_db`: the result looked up at
    /// `theta` equals `self` looked up at `theta - bias_db`.
    pub fn perturbed(&self, bias_db: f64) -> Olm {
        let ack = (1..=self.num_mcs())
            .map(|m| self.grid.iter().map(|&t| self.lookup(m, t - bias_db)).collect())
            .collect();
        Olm {
            grid: self.grid.clone(),
            ack,
        }
    }

    /// Lowest grid SINR at which `self` selects MCS `m`. If `m` is never
    /// selected, the lowest SINR at which any MCS at or above `m` is selected;
    /// the top of the grid if none is.
    pub fn sinr_for_mcs(&self, table: &McsTable, m: usize) -> f64 {
        let rates = table.rates();
        let picks: Vec<usize> = (0..self.grid.len())
            .map(|k| self.select_mcs_at_bin(rates, k))
            .collect();
        picks
            .iter()
            .position(|&p| p == m)
            .or_else(|| picks.iter().position(|&p| p >= m))
            .map_or(self.grid[self.grid.len() - 1], |k| self.grid[k])
    }

    /// CSV with a header row `mcs,<grid SINRs...>` and one row per MCS.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["mcs".to_string()];
        header.extend(self.grid.iter().map(f64::to_string));
        w.write_record(&header)?;
        for (m, row) in self.ack.iter().enumerate() {
            let mut rec = vec![(m + 1).to_string()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers()?.clone();
        let grid = header
            .iter()
            .skip(1)
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse("OLM CSV header", format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ack = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let m: usize = rec
                .get(0)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| Error::parse("OLM CSV row", format!("row {}: {e}", i + 1)))?;
            if m != i + 1 {
                return Err(Error::parse("OLM CSV row", format!("expected MCS {}, got {m}", i + 1)));
            }
            let row = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::parse("OLM CSV row", format!("MCS {m}: {s:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            ack.push(row);
        }
        Self::from_table(grid, ack)
    }
}

pub(crate) fn nearest_bin(grid: &[f64], theta_db: f64) -> usize {
    let upper = grid.partition_point(|&g| g < theta_db);
    if upper == 0 {
        return 0;
    }
    if upper == grid.len() {
        return grid.len() - 1;
    }
    let lower = upper - 1;
    if theta_db - grid[lower] <= grid[upper] - theta_db {
        lower
    } else {
        upper
    }
}
