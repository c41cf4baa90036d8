use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One transmission of one agent in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub agent: String,
    pub run: usize,
    /// 1-based.
    pub tti: usize,
    /// 1-based.
    pub mcs: usize,
    #[serde(with = "as_bit")]
    pub ack: bool,
    /// Bits per resource element actually delivered: `r_mcs` on ACK, else 0.
    pub throughput: f64,
    pub theta_hat_db: Option<f64>,
    pub theta_true_db: f64,
}

mod as_bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("ack must be 0 or 1, got {other}"))),
        }
    }
}

/// Header `agent,run,tti,mcs,ack,throughput,theta_hat_db,theta_true_db`;
/// `theta_hat_db` is empty for agents without an SINR estimate.
pub fn write_traces<W: Write>(writer: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record([
            "agent",
            "run",
            "tti",
            "mcs",
            "ack",
            "throughput",
            "theta_hat_db",
            "theta_true_db",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_traces<R: Read>(reader: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
