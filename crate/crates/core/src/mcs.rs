//! Modulation and coding schemes and their data rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One modulation and coding scheme.
///
/// The data rate is the number of information bits per resource element,
/// `code_rate * log2(modulation_order)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    /// 1-based position in the table.
    pub index: usize,
    /// Constellation size, a power of two (4 = QPSK, 16 = 16-QAM, ...).
    pub modulation_order: u32,
    pub code_rate: f64,
}

impl McsEntry {
    pub fn bits_per_symbol(&self) -> f64 {
        f64::from(self.modulation_order.trailing_zeros())
    }

    pub fn data_rate(&self) -> f64 {
        self.code_rate * self.bits_per_symbol()
    }
}

/// An ordered set of MCS entries with strictly increasing data rates.
///
/// Serialized as a bare JSON array of `{index, modulation_order, code_rate}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<McsEntry>", into = "Vec<McsEntry>")]
pub struct McsTable {
    entries: Vec<McsEntry>,
    rates: Vec<f64>,
}

/// 4-bit CQI reference set: (modulation order, code rate x 1024). The
/// out-of-range entry (CQI 0) is omitted.
const CQI_REFERENCE: [(u32, u32); 15] = [
    (4, 78),
    (4, 120),
    (4, 193),
    (4, 308),
    (4, 449),
    (4, 602),
    (16, 378),
    (16, 490),
    (16, 616),
    (64, 466),
    (64, 567),
    (64, 666),
    (64, 772),
    (64, 873),
    (64, 948),
];

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::invalid(
                "mcs_table",
                format!("need at least 2 entries, got {}", entries.len()),
            ));
        }
        for (pos, e) in entries.iter().enumerate() {
            let field = format!("mcs_table.{pos}");
            if e.index != pos + 1 {
                return Err(Error::invalid(
                    format!("{field}.index"),
                    format!("expected contiguous index {}, got {}", pos + 1, e.index),
                ));
            }
            if e.modulation_order < 2 || !e.modulation_order.is_power_of_two() {
                return Err(Error::invalid(
                    format!("{field}.modulation_order"),
                    format!("{} is not a power of two >= 2", e.modulation_order),
                ));
            }
            if !(e.code_rate > 0.0 && e.code_rate <= 1.0) {
                return Err(Error::invalid(
                    format!("{field}.code_rate"),
                    format!("{} is outside (0, 1]", e.code_rate),
                ));
            }
        }
        let rates: Vec<f64> = entries.iter().map(McsEntry::data_rate).collect();
        if let Some(pos) = rates.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                format!("mcs_table.{}", pos + 1),
                "data rates must be strictly increasing",
            ));
        }
        Ok(Self { entries, rates })
    }

    /// The 15-entry LTE-like table emulating the 4-bit CQI reference set.
    pub fn lte_cqi() -> Self {
        let entries = CQI_REFERENCE
            .iter()
            .enumerate()
            .map(|(i, &(order, rate_x1024))| McsEntry {
                index: i + 1,
                modulation_order: order,
                code_rate: f64::from(rate_x1024) / 1024.0,
            })
            .collect();
        Self::new(entries).expect("reference table is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    /// Data rates `r_m` in table order (position `m - 1`).
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Data rate of the 1-based MCS `m`.
    pub fn rate(&self, m: usize) -> f64 {
        self.rates[m - 1]
    }

    /// Bits carried by one transport block of MCS `m` over a `duration_s` x
    /// `bandwidth_hz` allocation.
    pub fn block_bits(&self, m: usize, duration_s: f64, bandwidth_hz: f64) -> f64 {
        self.rate(m) * duration_s * bandwidth_hz
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

impl TryFrom<Vec<McsEntry>> for McsTable {
    type Error = Error;

    fn try_from(entries: Vec<McsEntry>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<McsTable> for Vec<McsEntry> {
    fn from(table: McsTable) -> Self {
        table.entries
    }
}

/// Index of the largest `rates[i] * probs[i]`, ties toward the lowest index.
pub(crate) fn argmax_throughput(rates: &[f64], probs: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, (r, p)) in rates.iter().zip(probs).enumerate() {
        let value = r * p;
        if value > best_value {
            best = i;
            best_value = value;
        }
    }
    best
}
