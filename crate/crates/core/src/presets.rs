//! Built-in experiments, one per evaluation scenario.

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

const PRESETS: &[(&str, &str)] = &[
    ("awgn_10db", include_str!("../presets/awgn_10db.toml")),
    ("freq_selective_static", include_str!("../presets/freq_selective_static.toml")),
    ("pedestrian_3kmph", include_str!("../presets/pedestrian_3kmph.toml")),
    ("vehicular_30kmph", include_str!("../presets/vehicular_30kmph.toml")),
    ("pedestrian_cqi", include_str!("../presets/pedestrian_cqi.toml")),
];

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(name, _)| *name).collect()
}

/// Raw TOML of a preset.
pub fn source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    let text = source(name).ok_or_else(|| {
        Error::invalid(
            "preset",
            format!("unknown preset {name:?}; available: {}", names().join(", ")),
        )
    })?;
    ExperimentConfig::from_toml_str(text)
}
