use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mcs::McsTable;
use crate::olm::Olm;

/// A channel quality report: the receiver-optimal MCS index, usable by the
/// transmitter from `available_at` on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CqiReport {
    pub generated_at: usize,
    pub available_at: usize,
    /// 4-bit index; 0 is the out-of-range code.
    pub cqi_index: u8,
}

/// Receiver-side CQI: the throughput-maximizing MCS under the receiver's OLM at
/// the (perfectly known) effective SINR.
pub fn generate_cqi(truth: &Olm, table: &McsTable, theta_eff_db: f64, tti: usize, delay: usize) -> CqiReport {
    let m = truth.select_mcs(table, theta_eff_db);
    CqiReport {
        generated_at: tti,
        available_at: tti + delay,
        cqi_index: m.min(15) as u8,
    }
}

/// One HARQ outcome: ACK with probability `truth(m, theta)`.
pub fn draw_ack<R: Rng + ?Sized>(truth: &Olm, m: usize, theta_eff_db: f64, rng: &mut R) -> bool {
    ack_from_uniform(truth.lookup(m, theta_eff_db), rng.random::<f64>())
}

/// `u` uniform on `[0, 1)`.
pub(crate) fn ack_from_uniform(p: f64, u: f64) -> bool {
    u < p
}
