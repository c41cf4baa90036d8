//! Link-adaptation simulation framework.
//!
//! Three link-adaptation agents share one propose/observe interface:
//!
//! - [`agents::Ltsla`]: latent-SINR Thompson sampling over a discretized SINR
//!   belief, updated by Bayes' rule from HARQ ACK/NACK and relaxed each TTI by a
//!   Gaussian kernel whose variance follows the channel Doppler.
//! - [`agents::Olla`]: the classical outer-loop SINR offset controller.
//! - [`agents::Uts`]: sliding-window unimodal Thompson sampling over the MCS arms.
//!
//! The [`channel`] module produces per-TTI effective SINR trajectories (AWGN,
//! static frequency-selective and Rayleigh fading tapped-delay lines) and CQI
//! reports. ACK outcomes are Bernoulli draws from a ground-truth offline link
//! model ([`olm::Olm`]). The [`harness`] runs many independent links in parallel
//! with counter-based seeding, so results never depend on scheduling.

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod mcs;
pub mod olm;
pub mod pmf;
pub mod presets;
pub mod seed;

pub use error::{Error, Result};
pub use mcs::{McsEntry, McsTable};
pub use olm::{GridSpec, Olm};
pub use pmf::SinrPmf;
