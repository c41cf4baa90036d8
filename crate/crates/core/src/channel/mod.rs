//! Per-TTI channel states: AWGN, static frequency-selective and Rayleigh fading
//! tapped-delay lines, compressed to one effective SINR per TTI.

mod cqi;
mod esm;
mod fading;

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cqi::{draw_ack, generate_cqi, CqiReport};
pub(crate) use cqi::ack_from_uniform;
pub use esm::effective_sinr;
pub use fading::FadingTap;

use crate::error::{Error, FieldError, Result};

pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

const PROFILES_TOML: &str = include_str!("../../presets/profiles.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Flat and time-invariant.
    Awgn,
    /// One tapped-delay-line draw held for the whole run.
    FreqSelectiveStatic,
    /// Tapped delay line with Rayleigh taps evolving at the Doppler rate.
    Fading,
}

/// A named power-delay profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayProfile {
    pub tap_delays_s: Vec<f64>,
    pub tap_powers_db: Vec<f64>,
}

impl DelayProfile {
    /// Built-in profiles: `itu_pedestrian_a`, `itu_vehicular_b`.
    pub fn builtin() -> BTreeMap<String, DelayProfile> {
        toml::from_str(PROFILES_TOML).expect("bundled profiles parse")
    }

    pub fn named(name: &str) -> Option<DelayProfile> {
        Self::builtin().remove(name)
    }
}

fn default_subcarriers() -> usize {
    72
}
fn default_fft_size() -> usize {
    128
}
fn default_spacing() -> f64 {
    15e3
}
fn default_tti() -> f64 {
    1e-3
}
fn default_carrier() -> f64 {
    2e9
}
fn default_beta() -> f64 {
    1.0
}
fn default_oscillators() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Time-frequency average SINR.
    pub mean_snr_db: f64,
    #[serde(default = "default_subcarriers")]
    pub num_subcarriers: usize,
    #[serde(default = "default_fft_size")]
    pub fft_size: usize,
    #[serde(default = "default_spacing")]
    pub subcarrier_spacing_hz: f64,
    #[serde(default = "default_tti")]
    pub tti_duration_s: f64,
    #[serde(default = "default_carrier")]
    pub carrier_freq_hz: f64,
    #[serde(default)]
    pub relative_speed_mps: f64,
    /// Name of a built-in delay profile; fills empty tap lists on resolve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default)]
    pub tap_delays_s: Vec<f64>,
    #[serde(default)]
    pub tap_powers_db: Vec<f64>,
    /// Exponential effective-SINR mapping parameter.
    #[serde(default = "default_beta")]
    pub esm_beta: f64,
    #[serde(default = "default_oscillators")]
    pub oscillators_per_tap: usize,
}

impl ScenarioConfig {
    pub fn awgn(mean_snr_db: f64) -> Self {
        Self {
            kind: ScenarioKind::Awgn,
            mean_snr_db,
            num_subcarriers: default_subcarriers(),
            fft_size: default_fft_size(),
            subcarrier_spacing_hz: default_spacing(),
            tti_duration_s: default_tti(),
            carrier_freq_hz: default_carrier(),
            relative_speed_mps: 0.0,
            profile: None,
            tap_delays_s: Vec::new(),
            tap_powers_db: Vec::new(),
            esm_beta: default_beta(),
            oscillators_per_tap: default_oscillators(),
        }
    }

    pub fn with_profile(kind: ScenarioKind, mean_snr_db: f64, profile: &str, speed_mps: f64) -> Result<Self> {
        let mut cfg = Self {
            kind,
            relative_speed_mps: speed_mps,
            profile: Some(profile.to_string()),
            ..Self::awgn(mean_snr_db)
        };
        cfg.resolve_profile()?;
        Ok(cfg)
    }

    /// Copies the named profile's taps in when no taps are given explicitly.
    pub fn resolve_profile(&mut self) -> Result<()> {
        if let Some(name) = &self.profile {
            if self.tap_delays_s.is_empty() && self.tap_powers_db.is_empty() {
                let p = DelayProfile::named(name).ok_or_else(|| {
                    let known: Vec<String> = DelayProfile::builtin().into_keys().collect();
                    Error::invalid(
                        "scenario.profile",
                        format!("unknown profile {name:?}; known: {}", known.join(", ")),
                    )
                })?;
                self.tap_delays_s = p.tap_delays_s;
                self.tap_powers_db = p.tap_powers_db;
            }
        }
        Ok(())
    }

    pub(crate) fn check(&self, prefix: &str, errors: &mut Vec<FieldError>) {
        let mut fail = |field: &str, reason: &str| {
            errors.push(FieldError {
                field: format!("{prefix}.{field}"),
                reason: reason.to_string(),
            })
        };
        if !self.mean_snr_db.is_finite() {
            fail("mean_snr_db", "must be finite");
        }
        if self.num_subcarriers == 0 {
            fail("num_subcarriers", "must be positive");
        }
        if self.num_subcarriers > self.fft_size {
            fail("num_subcarriers", "must not exceed fft_size");
        }
        if !(self.subcarrier_spacing_hz > 0.0) {
            fail("subcarrier_spacing_hz", "must be positive");
        }
        if !(self.tti_duration_s > 0.0) {
            fail("tti_duration_s", "must be positive");
        }
        if !(self.carrier_freq_hz > 0.0) {
            fail("carrier_freq_hz", "must be positive");
        }
        if !(self.relative_speed_mps >= 0.0) || !self.relative_speed_mps.is_finite() {
            fail("relative_speed_mps", "must be finite and non-negative");
        }
        if !(self.esm_beta > 0.0) {
            fail("esm_beta", "must be positive");
        }
        if self.kind != ScenarioKind::Awgn {
            if self.tap_delays_s.is_empty() {
                fail("tap_delays_s", "tapped-delay-line scenarios need at least one tap");
            }
            if self.tap_delays_s.len() != self.tap_powers_db.len() {
                fail("tap_powers_db", "must have one power per tap delay");
            }
            if self.tap_delays_s.iter().any(|d| !(*d >= 0.0)) {
                fail("tap_delays_s", "delays must be non-negative");
            }
            if self.tap_powers_db.iter().any(|p| !p.is_finite()) {
                fail("tap_powers_db", "powers must be finite");
            }
            if self.oscillators_per_tap < 16 {
                fail("oscillators_per_tap", "need at least 16 oscillators per tap");
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        self.check("scenario", &mut errors);
        match errors.len() {
            0 => Ok(()),
            _ => Err(Error::Validation(errors)),
        }
    }

    /// Linear tap powers normalized to unit sum.
    pub fn normalized_tap_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self
            .tap_powers_db
            .iter()
            .map(|p| 10f64.powf(p / 10.0))
            .collect();
        let total: f64 = lin.iter().sum();
        lin.iter().map(|p| p / total).collect()
    }

    /// Maximum Doppler shift `f_c * v / c`.
    pub fn max_doppler_hz(&self) -> f64 {
        self.carrier_freq_hz * self.relative_speed_mps / SPEED_OF_LIGHT_MPS
    }

    /// Normalized Doppler `f_c * v / c * T_s` with `T_s` the TTI duration.
    pub fn normalized_doppler(&self) -> f64 {
        self.max_doppler_hz() * self.tti_duration_s
    }

    /// Baseband frequency offsets of the occupied subcarriers: the
    /// `num_subcarriers` bins centered in the `fft_size`-point grid.
    pub fn subcarrier_offsets_hz(&self) -> Vec<f64> {
        let half = (self.num_subcarriers / 2) as f64;
        (0..self.num_subcarriers)
            .map(|s| (s as f64 - half) * self.subcarrier_spacing_hz)
            .collect()
    }
}

/// Normalized Doppler of a scenario; see [`ScenarioConfig::normalized_doppler`].
pub fn normalized_doppler(cfg: &ScenarioConfig) -> f64 {
    cfg.normalized_doppler()
}

/// Effective SINR trajectory plus per-subcarrier linear SINRs for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    num_subcarriers: usize,
    subcarrier_sinr: Vec<f64>,
    theta_eff_db: Vec<f64>,
}

impl ChannelRealization {
    pub fn num_ttis(&self) -> usize {
        self.theta_eff_db.len()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    /// Linear per-subcarrier SINRs at 0-based TTI `t`.
    pub fn subcarrier_sinrs(&self, t: usize) -> &[f64] {
        &self.subcarrier_sinr[t * self.num_subcarriers..(t + 1) * self.num_subcarriers]
    }

    /// Effective SINR (dB) at 0-based TTI `t`.
    pub fn theta_eff_db(&self, t: usize) -> f64 {
        self.theta_eff_db[t]
    }

    pub fn theta_eff_series(&self) -> &[f64] {
        &self.theta_eff_db
    }

    /// CSV `tti,theta_eff_db` with 1-based TTIs.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["tti", "theta_eff_db"])?;
        for (t, theta) in self.theta_eff_db.iter().enumerate() {
            w.write_record([(t + 1).to_string(), theta.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Generates `num_ttis` block-fading channel states.
///
/// Each tap is a sum-of-sinusoids Rayleigh process at the scenario's maximum
/// Doppler, sampled once per TTI. The frequency response is evaluated at the
/// occupied subcarriers. For fading scenarios the tap powers sum to one, so
/// the ensemble-average subcarrier SINR is `mean_snr_db`; the static scenario
/// freezes the first draw and rescales it so its frequency-average SINR is
/// exactly `mean_snr_db`.
pub fn realize<R: Rng + ?Sized>(
    cfg: &ScenarioConfig,
    num_ttis: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    cfg.validate()?;
    let s = cfg.num_subcarriers;
    let snr_lin = 10f64.powf(cfg.mean_snr_db / 10.0);

    if cfg.kind == ScenarioKind::Awgn {
        return Ok(ChannelRealization {
            num_subcarriers: s,
            subcarrier_sinr: vec![snr_lin; s * num_ttis],
            theta_eff_db: vec![cfg.mean_snr_db; num_ttis],
        });
    }

    let powers = cfg.normalized_tap_powers();
    let doppler = match cfg.kind {
        ScenarioKind::Fading => cfg.max_doppler_hz(),
        _ => 0.0,
    };
    let mut taps: Vec<FadingTap> = powers
        .iter()
        .map(|&p| FadingTap::new(p, doppler, cfg.oscillators_per_tap, rng))
        .collect();

    // steering[s][l] = exp(-j 2 pi f_s tau_l)
    let offsets = cfg.subcarrier_offsets_hz();
    let steering: Vec<Vec<Complex64>> = offsets
        .iter()
        .map(|f| {
            cfg.tap_delays_s
                .iter()
                .map(|tau| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * tau))
                .collect()
        })
        .collect();

    let response = |taps: &mut [FadingTap], time_s: f64, out: &mut Vec<f64>| {
        let gains: Vec<Complex64> = taps.iter_mut().map(|tap| tap.gain_at(time_s)).collect();
        out.clear();
        out.extend(steering.iter().map(|row| {
            row.iter()
                .zip(&gains)
                .map(|(w, g)| w * g)
                .sum::<Complex64>()
                .norm_sqr()
        }));
    };

    let mut subcarrier_sinr = Vec::with_capacity(s * num_ttis);
    let mut theta_eff_db = Vec::with_capacity(num_ttis);
    let mut power = Vec::with_capacity(s);

    if doppler == 0.0 {
        response(&mut taps, 0.0, &mut power);
        let scale = match cfg.kind {
            ScenarioKind::FreqSelectiveStatic => {
                let mean = power.iter().sum::<f64>() / s as f64;
                snr_lin / mean
            }
            _ => snr_lin,
        };
        let frozen: Vec<f64> = power.iter().map(|p| p * scale).collect();
        let theta = effective_sinr(&frozen, cfg.esm_beta);
        for _ in 0..num_ttis {
            subcarrier_sinr.extend_from_slice(&frozen);
            theta_eff_db.push(theta);
        }
    } else {
        for t in 0..num_ttis {
            response(&mut taps, t as f64 * cfg.tti_duration_s, &mut power);
            let start = subcarrier_sinr.len();
            subcarrier_sinr.extend(power.iter().map(|p| p * snr_lin));
            theta_eff_db.push(effective_sinr(&subcarrier_sinr[start..], cfg.esm_beta));
        }
    }

    Ok(ChannelRealization {
        num_subcarriers: s,
        subcarrier_sinr,
        theta_eff_db,
    })
}
