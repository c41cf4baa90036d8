use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LinkAgent, LinkModel, Proposal};
use crate::channel::CqiReport;
use crate::error::FieldError;
use crate::mcs::McsTable;
use crate::olm::Olm;
use crate::seed::SimRng;

fn default_eta() -> f64 {
    0.1
}
fn default_sinr_min() -> f64 {
    -8.5
}
fn default_sinr_max() -> f64 {
    18.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OllaConfig {
    /// Target BLER.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Step size parameter, dB.
    pub step: f64,
    #[serde(default = "default_sinr_min")]
    pub sinr_min: f64,
    #[serde(default = "default_sinr_max")]
    pub sinr_max: f64,
    /// Fixed initial SINR estimate; drawn uniformly over the OLM grid if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_sinr: Option<f64>,
}

impl OllaConfig {
    pub fn with_step(step: f64) -> Self {
        Self {
            eta: default_eta(),
            step,
            sinr_min: default_sinr_min(),
            sinr_max: default_sinr_max(),
            initial_sinr: None,
        }
    }

    pub(crate) fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        let mut fail = |f: &str, r: &str| {
            errors.push(FieldError {
                field: format!("{prefix}.{f}"),
                reason: r.into(),
            })
        };
        if !(self.eta > 0.0 && self.eta < 1.0) {
            fail("eta", "target BLER must lie in (0, 1)");
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            fail("step", "must be positive");
        }
        if !(self.sinr_min < self.sinr_max) {
            fail("sinr_max", "must exceed sinr_min");
        }
        if let Some(t) = self.initial_sinr {
            if !t.is_finite() {
                fail("initial_sinr", "must be finite");
            }
        }
    }
}

/// Outer-loop offset state: the estimate is `theta0 - delta`, thresholded to
/// `[sinr_min, sinr_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OllaState {
    pub theta0: f64,
    pub delta: f64,
    pub eta: f64,
    pub step: f64,
    pub sinr_min: f64,
    pub sinr_max: f64,
}

impl OllaState {
    pub fn new(config: &OllaConfig, theta0: f64) -> Self {
        Self {
            theta0,
            delta: 0.0,
            eta: config.eta,
            step: config.step,
            sinr_min: config.sinr_min,
            sinr_max: config.sinr_max,
        }
    }

    pub fn estimate(&self) -> f64 {
        (self.theta0 - self.delta).clamp(self.sinr_min, self.sinr_max)
    }

    pub fn propose(&self, olm: &Olm, table: &McsTable) -> usize {
        olm.select_mcs(table, self.estimate())
    }

    /// ACK lowers the offset by `eta * step`, NACK raises it by
    /// `(1 - eta) * step`. The offset is then held so that `theta0 - delta`
    /// stays within the SINR thresholds, which keeps a run of identical
    /// outcomes from winding it up beyond them.
    pub fn update(&mut self, ack: bool) {
        if ack {
            self.delta -= self.eta * self.step;
        } else {
            self.delta += (1.0 - self.eta) * self.step;
        }
        self.delta = self
            .delta
            .clamp(self.theta0 - self.sinr_max, self.theta0 - self.sinr_min);
    }

    /// Restart from a fresh initial estimate with zero offset.
    pub fn reset(&mut self, theta0: f64) {
        self.theta0 = theta0;
        self.delta = 0.0;
    }
}

/// OLLA agent: the offset loop plus throughput-maximizing MCS selection
/// through the transmitter's OLM. A CQI report restarts the loop at the SINR
/// the report implies.
pub struct Olla {
    state: OllaState,
    model: Arc<LinkModel>,
}

impl Olla {
    pub fn new(config: &OllaConfig, model: Arc<LinkModel>, feasible: (f64, f64), rng: &mut SimRng) -> Self {
        let theta0 = config
            .initial_sinr
            .unwrap_or_else(|| rng.random_range(feasible.0..=feasible.1));
        Self {
            state: OllaState::new(config, theta0),
            model,
        }
    }

    pub fn state(&self) -> &OllaState {
        &self.state
    }
}

impl LinkAgent for Olla {
    fn propose(&mut self, _rng: &mut SimRng) -> Proposal {
        let theta = self.state.estimate();
        Proposal {
            mcs: self.model.tx_olm.select_mcs(&self.model.table, theta),
            theta_hat_db: Some(theta),
        }
    }

    fn observe(&mut self, _mcs: usize, ack: bool) {
        self.state.update(ack);
    }

    fn on_cqi(&mut self, report: &CqiReport) {
        self.state.reset(self.model.cqi_to_sinr(report.cqi_index));
    }
}
