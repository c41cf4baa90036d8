//! Experiment configuration: one scenario, a set of named agents, run counts,
//! seeding and link-model settings. TOML and JSON share one schema.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::{AgentConfig, LinkModel};
use crate::channel::ScenarioConfig;
use crate::error::{Error, FieldError, Result};
use crate::mcs::{McsEntry, McsTable};
use crate::olm::{GridSpec, Olm, SigmoidParams};

fn default_runs() -> usize {
    200
}
fn default_ttis() -> usize {
    500
}
fn default_cqi_period() -> usize {
    80
}
fn default_cqi_delay() -> usize {
    4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CqiConfig {
    /// Reports are generated at TTIs that are multiples of the period.
    #[serde(default = "default_cqi_period")]
    pub period_ttis: usize,
    #[serde(default = "default_cqi_delay")]
    pub delay_ttis: usize,
}

impl Default for CqiConfig {
    fn default() -> Self {
        Self {
            period_ttis: default_cqi_period(),
            delay_ttis: default_cqi_delay(),
        }
    }
}

/// Where the ground-truth link model comes from and how the transmitter's
/// copy differs from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OlmConfig {
    /// MCS table; the 15-entry LTE CQI table when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcs_table: Option<Vec<McsEntry>>,
    #[serde(default)]
    pub grid: GridSpec,
    /// Waterfall parameters; evenly spaced defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmoid: Option<SigmoidParams>,
    /// Load the truth OLM from CSV instead of generating it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_path: Option<PathBuf>,
    /// The transmitter's OLM is the truth shifted by this many dB.
    #[serde(default)]
    pub tx_bias_db: f64,
}

impl OlmConfig {
    pub fn table(&self) -> Result<McsTable> {
        match &self.mcs_table {
            Some(entries) => McsTable::new(entries.clone()),
            None => Ok(McsTable::lte_cqi()),
        }
    }

    /// (truth OLM, transmitter link model).
    pub fn build(&self) -> Result<(Olm, LinkModel)> {
        let table = self.table()?;
        let truth = match &self.csv_path {
            Some(path) => Olm::read_csv(std::fs::File::open(path)?)?,
            None => {
                self.grid.validate("olm.grid")?;
                let params = self
                    .sigmoid
                    .clone()
                    .unwrap_or_else(|| SigmoidParams::evenly_spaced(table.len()));
                Olm::sigmoid(&table, &params, &self.grid)?
            }
        };
        if truth.num_mcs() != table.len() {
            return Err(Error::invalid(
                "olm",
                format!("OLM has {} rows but the MCS table has {} entries", truth.num_mcs(), table.len()),
            ));
        }
        let tx = if self.tx_bias_db == 0.0 {
            truth.clone()
        } else {
            truth.perturbed(self.tx_bias_db)
        };
        Ok((truth, LinkModel::new(table, tx)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub agents: Vec<AgentConfig>,
    #[serde(default = "default_runs")]
    pub num_runs: usize,
    #[serde(default = "default_ttis")]
    pub num_ttis: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cqi: Option<CqiConfig>,
    /// HARQ outcomes reach the agent this many TTIs after transmission.
    #[serde(default)]
    pub feedback_delay_ttis: usize,
    #[serde(default)]
    pub olm: OlmConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// All problems at once, each addressed by its dotted path.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.scenario.check("scenario", &mut errors);
        let mut fail = |field: String, reason: &str| {
            errors.push(FieldError {
                field,
                reason: reason.into(),
            })
        };
        if self.num_runs == 0 {
            fail("num_runs".into(), "must be at least 1");
        }
        if self.num_ttis == 0 {
            fail("num_ttis".into(), "must be at least 1");
        }
        if self.agents.is_empty() {
            fail("agents".into(), "at least one agent is required");
        }
        if let Some(cqi) = &self.cqi {
            if cqi.period_ttis == 0 {
                fail("cqi.period_ttis".into(), "must be at least 1");
            }
        }
        if let Err(e) = self.olm.grid.validate("olm.grid") {
            for f in e.fields() {
                fail(f.into(), "invalid grid");
            }
        }
        if !self.olm.tx_bias_db.is_finite() {
            fail("olm.tx_bias_db".into(), "must be finite");
        }
        let mut seen = HashSet::new();
        for (i, agent) in self.agents.iter().enumerate() {
            if !seen.insert(agent.name.as_str()) {
                fail(format!("agents.{i}.name"), "agent names must be unique");
            }
        }
        for (i, agent) in self.agents.iter().enumerate() {
            agent.check(&format!("agents.{i}"), &mut errors);
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }

    /// Fills in everything that defaults implicitly, e.g. delay-profile taps.
    pub fn resolved(&self) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.scenario.resolve_profile()?;
        Ok(cfg)
    }

    /// Applies `key=value` with a dotted key such as `scenario.mean_snr_db` or
    /// `agents.0.step`. The value is read as JSON, falling back to a plain
    /// string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::invalid(assignment, "override must look like KEY=VALUE"))?;
        let key = key.trim();
        let value = serde_json::from_str::<Value>(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().into()));
        let mut doc = serde_json::to_value(&*self)?;
        set_path(&mut doc, key, value)?;
        *self = serde_json::from_value(doc).map_err(|e| Error::invalid(key, e.to_string()))?;
        Ok(())
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::invalid(key, "empty path segment"));
    }
    let mut node = doc;
    for (depth, part) in parts.iter().enumerate() {
        let last = depth + 1 == parts.len();
        let here = parts[..=depth].join(".");
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert((*part).to_string(), value);
                    return Ok(());
                }
                map.entry((*part).to_string()).or_insert(Value::Null)
            }
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| Error::invalid(here.clone(), "expected an array index"))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::invalid(here.clone(), format!("index out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::invalid(here, "cannot descend into a scalar")),
        };
    }
    unreachable!("loop returns on the last segment")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::AgentKind;

    const SAMPLE: &str = r#"
        num_runs = 3
        num_ttis = 10
        base_seed = 7

        [scenario]
        kind = "awgn"
        mean_snr_db = 10.0

        [[agents]]
        name = "olla"
        type = "olla"
        step = 1.0

        [[agents]]
        name = "uts"
        type = "uts"
        window = 50

        [[agents]]
        name = "ltsla"
        type = "ltsla"
        sigma2 = "auto"
    "#;

    #[test]
    fn toml_and_json_share_schema() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.agents.len(), 3);
        assert!(matches!(cfg.agents[0].kind, AgentKind::Olla(ref c) if c.eta == 0.1));
        let json = cfg.to_json_pretty().unwrap();
        assert_eq!(ExperimentConfig::from_json_str(&json).unwrap(), cfg);
    }

    #[test]
    fn overrides() {
        let mut cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        cfg.set("num_runs=50").unwrap();
        cfg.set("scenario.mean_snr_db=3.5").unwrap();
        cfg.set("agents.0.step=0.1").unwrap();
        cfg.set("agents.2.sigma2=0.3").unwrap();
        cfg.set("cqi.delay_ttis=2").unwrap();
        assert_eq!(cfg.num_runs, 50);
        assert_eq!(cfg.scenario.mean_snr_db, 3.5);
        assert!(matches!(cfg.agents[0].kind, AgentKind::Olla(ref c) if c.step == 0.1));
        assert_eq!(cfg.cqi.unwrap().period_ttis, 80);

        let e = cfg.set("scenario.bogus=1").unwrap_err();
        assert_eq!(e.fields(), vec!["scenario.bogus"]);
        let e = cfg.set("agents.9.step=1").unwrap_err();
        assert_eq!(e.fields(), vec!["agents.9"]);
        assert!(cfg.set("num_runs").is_err());
    }

    #[test]
    fn validation_lists_every_field() {
        let mut cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        cfg.num_runs = 0;
        cfg.agents[1].name = "olla".into();
        cfg.set("agents.0.eta=1.5").unwrap();
        let e = cfg.validate().unwrap_err();
        let fields = e.fields();
        assert!(fields.contains(&"num_runs"));
        assert!(fields.contains(&"agents.1.name"));
        assert!(fields.contains(&"agents.0.eta"));
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = SAMPLE.replace("num_runs = 3", "num_runz = 3");
        assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn olm_bias_shifts_transmitter_copy() {
        let cfg = OlmConfig {
            tx_bias_db: 2.0,
            ..OlmConfig::default()
        };
        let (truth, link) = cfg.build().unwrap();
        assert_eq!(link.tx_olm.lookup(5, 10.0), truth.lookup(5, 8.0));
    }
}
