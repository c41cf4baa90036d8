use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{LinkAgent, LinkModel, Proposal};
use crate::channel::CqiReport;
use crate::error::{Error, FieldError, Result};
use crate::olm::GridSpec;
use crate::pmf::{SinrPmf, UpdateOutcome};
use crate::seed::SimRng;

fn default_cqi_std() -> f64 {
    2.0
}
fn default_doppler_scale() -> f64 {
    1e4
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

/// Relaxation variance: a fixed value in dB^2, or `"auto"` to derive it from
/// the scenario's normalized Doppler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma2 {
    Fixed(f64),
    Auto(AutoTag),
}

impl Default for Sigma2 {
    fn default() -> Self {
        Sigma2::Auto(AutoTag::Auto)
    }
}

impl Sigma2 {
    pub fn resolve(self, normalized_doppler: f64, doppler_scale: f64) -> f64 {
        match self {
            Sigma2::Fixed(v) => v,
            Sigma2::Auto(_) => sigma2_from_doppler(normalized_doppler, doppler_scale),
        }
    }
}

/// Linear map from normalized Doppler to relaxation variance.
pub fn sigma2_from_doppler(normalized_doppler: f64, scale: f64) -> f64 {
    scale * normalized_doppler
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LtslaConfig {
    #[serde(default)]
    pub sigma2: Sigma2,
    /// Std of the Gaussian likelihood a CQI report contributes, dB.
    #[serde(default = "default_cqi_std")]
    pub cqi_std: f64,
    /// Belief grid spacing; the OLM grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_spacing_db: Option<f64>,
    #[serde(default = "default_doppler_scale")]
    pub doppler_scale: f64,
}

impl LtslaConfig {
    pub fn with_sigma2(sigma2: f64) -> Self {
        Self {
            sigma2: Sigma2::Fixed(sigma2),
            cqi_std: default_cqi_std(),
            grid_spacing_db: None,
            doppler_scale: default_doppler_scale(),
        }
    }

    pub(crate) fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        let mut fail = |f: &str, r: &str| {
            errors.push(FieldError {
                field: format!("{prefix}.{f}"),
                reason: r.into(),
            })
        };
        if let Sigma2::Fixed(v) = self.sigma2 {
            if !(v >= 0.0) || !v.is_finite() {
                fail("sigma2", "must be a non-negative number or \"auto\"");
            }
        }
        if !(self.cqi_std > 0.0) {
            fail("cqi_std", "must be positive");
        }
        if !(self.doppler_scale > 0.0) || !self.doppler_scale.is_finite() {
            fail("doppler_scale", "must be positive");
        }
        if let Some(s) = self.grid_spacing_db {
            if !(s > 0.0) || !s.is_finite() {
                fail("grid_spacing_db", "must be positive");
            }
        }
    }
}

/// Belief grid plus the transmitter OLM's ACK/NACK likelihood rows on it.
#[derive(Debug, Clone)]
pub struct LtslaModel {
    link: Arc<LinkModel>,
    centers: Vec<f64>,
    ack_rows: Vec<Vec<f64>>,
    nack_rows: Vec<Vec<f64>>,
}

impl LtslaModel {
    /// With `spacing_db` absent the belief lives on the OLM grid; otherwise
    /// the OLM is resampled (nearest bin) onto a grid of that spacing over the
    /// same range.
    pub fn new(link: Arc<LinkModel>, spacing_db: Option<f64>) -> Result<Self> {
        let olm_grid = link.tx_olm.grid();
        let centers = match spacing_db {
            None => olm_grid.to_vec(),
            Some(spacing) => {
                let spec = GridSpec {
                    min_db: olm_grid[0],
                    max_db: olm_grid[olm_grid.len() - 1],
                    spacing_db: spacing,
                };
                spec.validate("grid_spacing_db")?;
                spec.centers()
            }
        };
        if centers.len() < 2 {
            return Err(Error::invalid("grid_spacing_db", "belief grid needs at least two bins"));
        }
        let ack_rows: Vec<Vec<f64>> = (1..=link.table.len())
            .map(|m| centers.iter().map(|&c| link.tx_olm.lookup(m, c)).collect())
            .collect();
        let nack_rows = ack_rows
            .iter()
            .map(|row| row.iter().map(|g| 1.0 - g).collect())
            .collect();
        Ok(Self {
            link,
            centers,
            ack_rows,
            nack_rows,
        })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn link(&self) -> &LinkModel {
        &self.link
    }

    /// Per-bin probability of the observed outcome of `m`.
    pub fn likelihood(&self, m: usize, ack: bool) -> &[f64] {
        if ack {
            &self.ack_rows[m - 1]
        } else {
            &self.nack_rows[m - 1]
        }
    }

    pub fn uniform_belief(&self) -> SinrPmf {
        SinrPmf::uniform(self.centers.clone()).expect("grid checked on construction")
    }
}

/// Latent-SINR Thompson sampling agent.
pub struct Ltsla {
    model: Arc<LtslaModel>,
    belief: SinrPmf,
    sigma2: f64,
    cqi_std: f64,
    collapses: u64,
}

impl Ltsla {
    pub fn new(model: Arc<LtslaModel>, sigma2: f64, cqi_std: f64) -> Self {
        Self {
            belief: model.uniform_belief(),
            model,
            sigma2,
            cqi_std,
            collapses: 0,
        }
    }

    pub fn belief(&self) -> &SinrPmf {
        &self.belief
    }

    pub fn set_belief(&mut self, belief: SinrPmf) {
        assert_eq!(belief.centers(), self.model.centers(), "belief grid mismatch");
        self.belief = belief;
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Posterior update from one HARQ outcome followed by the drift relaxation.
    pub fn update(&mut self, mcs: usize, ack: bool) -> UpdateOutcome {
        let outcome = self.belief.bayes_update(self.model.likelihood(mcs, ack));
        if outcome == UpdateOutcome::Collapsed {
            self.collapses += 1;
        }
        self.belief.relax(self.sigma2);
        outcome
    }

    /// Fuses a CQI report as a Gaussian likelihood around the SINR it implies.
    pub fn absorb_cqi(&mut self, report: &CqiReport) -> UpdateOutcome {
        let theta = self.model.link.cqi_to_sinr(report.cqi_index);
        let outcome = self.belief.absorb_gaussian(theta, self.cqi_std);
        if outcome == UpdateOutcome::Collapsed {
            self.collapses += 1;
        }
        outcome
    }
}

impl LinkAgent for Ltsla {
    fn propose(&mut self, rng: &mut SimRng) -> Proposal {
        let theta = self.belief.pessimistic_estimate(rng);
        let link = &self.model.link;
        Proposal {
            mcs: link.tx_olm.select_mcs(&link.table, theta),
            theta_hat_db: Some(theta),
        }
    }

    fn observe(&mut self, mcs: usize, ack: bool) {
        let _ = self.update(mcs, ack);
    }

    fn on_cqi(&mut self, report: &CqiReport) {
        let _ = self.absorb_cqi(report);
    }

    fn belief_collapses(&self) -> u64 {
        self.collapses
    }

    fn belief(&self) -> Option<&SinrPmf> {
        Some(&self.belief)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcs::McsTable;
    use crate::olm::{Olm, SigmoidParams};
    use crate::seed::StreamKey;

    fn link() -> Arc<LinkModel> {
        let table = McsTable::lte_cqi();
        let olm = Olm::sigmoid(&table, &SigmoidParams::evenly_spaced(15), &GridSpec::default()).unwrap();
        Arc::new(LinkModel::new(table, olm))
    }

    fn agent(sigma2: f64) -> Ltsla {
        Ltsla::new(Arc::new(LtslaModel::new(link(), None).unwrap()), sigma2, 2.0)
    }

    fn point_mass(a: &Ltsla, bin: usize) -> SinrPmf {
        let mut w = vec![0.0; a.model.centers().len()];
        w[bin] = 1.0;
        SinrPmf::from_weights(a.model.centers().to_vec(), w).unwrap()
    }

    #[test]
    fn sigma2_mapping() {
        assert!((sigma2_from_doppler(0.3e-4, 1e4) - 0.3).abs() < 1e-12);
        assert!((sigma2_from_doppler(3.0e-4, 1e4) - 3.0).abs() < 1e-12);
        assert_eq!(sigma2_from_doppler(0.0, 1e4), 0.0);
        assert_eq!(Sigma2::Fixed(0.7).resolve(1.0, 1e4), 0.7);
    }

    #[test]
    fn sigma2_serde() {
        let c: LtslaConfig = serde_json::from_str(r#"{"sigma2": "auto"}"#).unwrap();
        assert_eq!(c.sigma2, Sigma2::Auto(AutoTag::Auto));
        let c: LtslaConfig = serde_json::from_str(r#"{"sigma2": 0.3}"#).unwrap();
        assert_eq!(c.sigma2, Sigma2::Fixed(0.3));
        assert!(serde_json::from_str::<LtslaConfig>(r#"{"sigma2": "fast"}"#).is_err());
        assert_eq!(serde_json::to_string(&Sigma2::default()).unwrap(), r#""auto""#);
    }

    #[test]
    fn default_belief_lives_on_olm_grid() {
        let a = agent(0.0);
        assert_eq!(a.belief().len(), 301);
        let coarse = LtslaModel::new(link(), Some(0.5)).unwrap();
        assert_eq!(coarse.centers().len(), 61);
    }

    #[test]
    fn degenerate_beliefs_pick_extreme_mcs() {
        let mut a = agent(0.0);
        let mut rng = StreamKey::new(1).rng();
        a.set_belief(point_mass(&a, 300));
        let p = a.propose(&mut rng);
        assert_eq!(p.mcs, 15);
        assert_eq!(p.theta_hat_db, Some(20.0));
        a.set_belief(point_mass(&a, 0));
        assert_eq!(a.propose(&mut rng).mcs, 1);
    }

    #[test]
    fn estimate_never_exceeds_mean() {
        let mut a = agent(0.3);
        let mut rng = StreamKey::new(2).rng();
        for t in 0..500 {
            let mean = a.belief().mean();
            let p = a.propose(&mut rng);
            assert!(p.theta_hat_db.unwrap() <= mean);
            a.observe(p.mcs, t % 3 != 0);
        }
    }

    #[test]
    fn impossible_outcome_collapses_to_uniform() {
        let table = McsTable::lte_cqi();
        // MCS 1 always decodes, everything else never does
        let grid = vec![0.0, 1.0, 2.0];
        let mut ack = vec![vec![0.0; 3]; 15];
        ack[0] = vec![1.0; 3];
        let olm = Olm::from_table(grid, ack).unwrap();
        let link = Arc::new(LinkModel::new(table, olm));
        let mut a = Ltsla::new(Arc::new(LtslaModel::new(link, None).unwrap()), 0.0, 2.0);
        assert_eq!(a.update(1, false), UpdateOutcome::Collapsed);
        assert_eq!(a.belief_collapses(), 1);
        assert!(a.belief().probs().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn cqi_fusion_sharpens_like_halved_variance() {
        let mut once = agent(0.0);
        let mut twice = agent(0.0);
        twice.cqi_std = 2.0;
        once.cqi_std = 2.0 / 2f64.sqrt();
        let report = CqiReport {
            generated_at: 0,
            available_at: 4,
            cqi_index: 9,
        };
        let _ = once.absorb_cqi(&report);
        let _ = twice.absorb_cqi(&report);
        let _ = twice.absorb_cqi(&report);
        for (a, b) in once.belief().probs().iter().zip(twice.belief().probs()) {
            assert!((a - b).abs() < 1e-12);
        }
        let center = link().cqi_to_sinr(9);
        assert!((once.belief().mean() - center).abs() < 0.5);
    }

    #[test]
    fn converges_at_fixed_sinr() {
        let link = link();
        let model = Arc::new(LtslaModel::new(Arc::clone(&link), None).unwrap());
        let mut a = Ltsla::new(model, 0.0, 2.0);
        let mut rng = StreamKey::new(3).rng();
        let best = link.tx_olm.select_mcs(&link.table, 10.0);
        let mut hits = 0;
        for t in 0..400 {
            let p = a.propose(&mut rng);
            let ack = crate::channel::draw_ack(&link.tx_olm, p.mcs, 10.0, &mut rng);
            a.observe(p.mcs, ack);
            if t >= 200 && p.mcs >= best - 1 {
                hits += 1;
            }
        }
        assert!(hits > 150, "{hits}");
    }
}
