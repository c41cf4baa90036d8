//! Link-adaptation agents behind a common propose/observe interface.

mod ltsla;
mod olla;
mod uts;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use ltsla::{sigma2_from_doppler, Ltsla, LtslaConfig, LtslaModel, Sigma2};
pub use olla::{Olla, OllaConfig, OllaState};
pub use uts::{Uts, UtsConfig, UtsState};

use crate::channel::CqiReport;
use crate::error::FieldError;
use crate::mcs::McsTable;
use crate::olm::Olm;
use crate::pmf::SinrPmf;
use crate::seed::SimRng;

/// What an agent transmits with in one TTI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    /// 1-based MCS index.
    pub mcs: usize,
    /// The SINR estimate behind the choice, for agents that track one.
    pub theta_hat_db: Option<f64>,
}

/// One link-adaptation policy instance, owned by a single simulated link.
///
/// Per TTI the harness calls [`propose`](LinkAgent::propose) and then feeds the
/// HARQ outcome back through [`observe`](LinkAgent::observe).
pub trait LinkAgent: Send {
    fn propose(&mut self, rng: &mut SimRng) -> Proposal;

    fn observe(&mut self, mcs: usize, ack: bool);

    /// Delivers a CQI report. Agents without a CQI mechanism ignore it.
    fn on_cqi(&mut self, _report: &CqiReport) {}

    /// Number of times the belief had to be reset after contradicting evidence.
    fn belief_collapses(&self) -> u64 {
        0
    }

    /// Current SINR belief, for agents that keep one.
    fn belief(&self) -> Option<&SinrPmf> {
        None
    }
}

/// Transmitter-side knowledge shared by every agent of an experiment.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub table: McsTable,
    pub tx_olm: Olm,
    /// SINR implied by each CQI index (0..=15) under the transmitter's OLM.
    pub cqi_sinr_db: Vec<f64>,
}

impl LinkModel {
    pub fn new(table: McsTable, tx_olm: Olm) -> Self {
        let bottom = tx_olm.grid()[0];
        let cqi_sinr_db = (0..=15usize)
            .map(|cqi| match cqi {
                0 => bottom,
                m if m <= table.len() => tx_olm.sinr_for_mcs(&table, m),
                _ => tx_olm.sinr_for_mcs(&table, table.len()),
            })
            .collect();
        Self {
            table,
            tx_olm,
            cqi_sinr_db,
        }
    }

    /// SINR the transmitter associates with a CQI index: the lowest grid SINR
    /// at which its own OLM picks the reported MCS.
    pub fn cqi_to_sinr(&self, cqi_index: u8) -> f64 {
        self.cqi_sinr_db[usize::from(cqi_index.min(15))]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentKind {
    Olla(OllaConfig),
    Uts(UtsConfig),
    Ltsla(LtslaConfig),
}

/// A named agent entry of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub name: String,
    #[serde(flatten)]
    pub kind: AgentKind,
}

impl AgentConfig {
    pub(crate) fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        if self.name.is_empty() {
            errors.push(FieldError {
                field: format!("{prefix}.name"),
                reason: "must not be empty".into(),
            });
        }
        match &self.kind {
            AgentKind::Olla(c) => c.check(prefix, errors),
            AgentKind::Uts(c) => c.check(prefix, errors),
            AgentKind::Ltsla(c) => c.check(prefix, errors),
        }
    }

    pub fn uses_sinr_estimate(&self) -> bool {
        !matches!(self.kind, AgentKind::Uts(_))
    }

    pub fn type_name(&self) -> &'static str {
        match self.kind {
            AgentKind::Olla(_) => "olla",
            AgentKind::Uts(_) => "uts",
            AgentKind::Ltsla(_) => "ltsla",
        }
    }
}

/// Per-experiment state from which fresh agents are stamped out per run.
pub enum AgentFactory {
    Olla {
        config: OllaConfig,
        model: Arc<LinkModel>,
        feasible: (f64, f64),
    },
    Uts {
        config: UtsConfig,
        rates: Arc<Vec<f64>>,
    },
    Ltsla {
        model: Arc<LtslaModel>,
        sigma2: f64,
        cqi_std: f64,
    },
}

impl AgentFactory {
    /// `normalized_doppler` feeds `sigma2 = "auto"`.
    pub fn new(config: &AgentConfig, model: &Arc<LinkModel>, normalized_doppler: f64) -> crate::Result<Self> {
        let grid = model.tx_olm.grid();
        let feasible = (grid[0], grid[grid.len() - 1]);
        Ok(match &config.kind {
            AgentKind::Olla(c) => AgentFactory::Olla {
                config: c.clone(),
                model: Arc::clone(model),
                feasible,
            },
            AgentKind::Uts(c) => AgentFactory::Uts {
                config: c.clone(),
                rates: Arc::new(model.table.rates().to_vec()),
            },
            AgentKind::Ltsla(c) => AgentFactory::Ltsla {
                model: Arc::new(LtslaModel::new(Arc::clone(model), c.grid_spacing_db)?),
                sigma2: c.sigma2.resolve(normalized_doppler, c.doppler_scale),
                cqi_std: c.cqi_std,
            },
        })
    }

    /// A fresh agent. `rng` supplies any randomized initial state.
    pub fn build(&self, rng: &mut SimRng) -> Box<dyn LinkAgent> {
        match self {
            AgentFactory::Olla {
                config,
                model,
                feasible,
            } => Box::new(Olla::new(config, Arc::clone(model), *feasible, rng)),
            AgentFactory::Uts { config, rates } => Box::new(Uts::new(config, Arc::clone(rates))),
            AgentFactory::Ltsla {
                model,
                sigma2,
                cqi_std,
            } => Box::new(Ltsla::new(Arc::clone(model), *sigma2, *cqi_std)),
        }
    }

    /// The LTSLA relaxation variance actually used, if this is an LTSLA agent.
    pub fn sigma2(&self) -> Option<f64> {
        match self {
            AgentFactory::Ltsla { sigma2, .. } => Some(*sigma2),
            _ => None,
        }
    }
}
