//! Discretized SINR belief.
//!
//! A probability mass function over uniformly spaced SINR bin centers. The
//! latent-SINR agent keeps one per link and cycles it through sampling, a
//! Bayesian update from each HARQ outcome, and a Gaussian relaxation that
//! models SINR drift between TTIs.

use rand::Rng;

use crate::error::{Error, Result};

/// Result of multiplying the belief by a likelihood.
#[must_use]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    Updated,
    /// The evidence had zero probability under the belief. The belief has
    /// been reset to uniform.
    Collapsed,
}

/// Kernel half-width in standard deviations.
const KERNEL_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SinrPmf {
    centers: Vec<f64>,
    spacing: f64,
    probs: Vec<f64>,
}

impl SinrPmf {
    /// Uniform belief over `centers`, which must be uniformly spaced and
    /// strictly increasing.
    pub fn uniform(centers: Vec<f64>) -> Result<Self> {
        let spacing = check_grid(&centers)?;
        let k = centers.len();
        Ok(Self {
            centers,
            spacing,
            probs: vec![1.0 / k as f64; k],
        })
    }

    /// Normal density at the bin centers, renormalized. As `std_db` shrinks,
    /// the mass concentrates on the bin nearest `mean_db`.
    pub fn gaussian(centers: Vec<f64>, mean_db: f64, std_db: f64) -> Result<Self> {
        if !(std_db > 0.0) {
            return Err(Error::invalid("cqi_std", "standard deviation must be positive"));
        }
        let mut pmf = Self::uniform(centers)?;
        let log_w: Vec<f64> = pmf
            .centers
            .iter()
            .map(|c| gaussian_log_weight(*c, mean_db, std_db))
            .collect();
        let top = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        pmf.probs = log_w.iter().map(|w| (w - top).exp()).collect();
        pmf.normalize();
        Ok(pmf)
    }

    /// Arbitrary (non-negative, not necessarily normalized) weights.
    pub fn from_weights(centers: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let spacing = check_grid(&centers)?;
        if weights.len() != centers.len() {
            return Err(Error::invalid("pmf.probs", "one weight per bin required"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid("pmf.probs", "weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("pmf.probs", "weights must not all be zero"));
        }
        let mut pmf = Self {
            centers,
            spacing,
            probs: weights,
        };
        pmf.normalize();
        Ok(pmf)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn spacing_db(&self) -> f64 {
        self.spacing
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().zip(&self.centers).map(|(p, c)| p * c).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.probs
            .iter()
            .zip(&self.centers)
            .map(|(p, c)| p * (c - mean) * (c - mean))
            .sum()
    }

    pub fn reset_uniform(&mut self) {
        let k = self.probs.len() as f64;
        self.probs.iter_mut().for_each(|p| *p = 1.0 / k);
    }

    /// Inverse-transform sample: the center of the first bin whose cumulative
    /// probability exceeds `u`. Zero-mass bins are never returned.
    pub fn its_sample(&self, u: f64) -> f64 {
        self.centers[self.its_index(u)]
    }

    pub fn its_index(&self, u: f64) -> usize {
        let mut cdf = 0.0;
        for (k, p) in self.probs.iter().enumerate() {
            cdf += p;
            if cdf > u && *p > 0.0 {
                return k;
            }
        }
        // rounding left the final cdf at or below u
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    /// `min(its_sample(u), mean)` with a fresh uniform draw.
    pub fn pessimistic_estimate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.its_sample(u).min(self.mean())
    }

    /// Bayes' rule with per-bin likelihoods, self-normalized.
    pub fn bayes_update(&mut self, likelihood: &[f64]) -> UpdateOutcome {
        debug_assert_eq!(likelihood.len(), self.probs.len());
        self.probs
            .iter_mut()
            .zip(likelihood)
            .for_each(|(p, l)| *p *= l);
        self.finish_update()
    }

    /// Multiplies by a Normal likelihood centered at `mean_db`. An infinite
    /// `std_db` is uninformative and leaves the belief untouched.
    pub fn absorb_gaussian(&mut self, mean_db: f64, std_db: f64) -> UpdateOutcome {
        if std_db.is_infinite() {
            return UpdateOutcome::Updated;
        }
        let log_w: Vec<f64> = self
            .centers
            .iter()
            .map(|c| gaussian_log_weight(*c, mean_db, std_db))
            .collect();
        // shift by the best supported bin so the product cannot underflow to 0
        let top = log_w
            .iter()
            .zip(&self.probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(w, _)| *w)
            .fold(f64::NEG_INFINITY, f64::max);
        if top.is_finite() {
            self.probs
                .iter_mut()
                .zip(&log_w)
                .for_each(|(p, w)| *p *= (w - top).exp());
        }
        self.finish_update()
    }

    /// Convolution with a zero-mean Normal of variance `sigma2` (dB^2).
    ///
    /// The kernel is sampled at bin offsets, truncated at six standard
    /// deviations and normalized. Mass pushed past either edge is reflected
    /// back (half-sample symmetric), so no mass is lost.
    pub fn relax(&mut self, sigma2: f64) {
        if !(sigma2 > 0.0) {
            return;
        }
        let kernel = gaussian_kernel(sigma2, self.spacing);
        let half = (kernel.len() / 2) as isize;
        let k = self.probs.len();
        let mut out = vec![0.0; k];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let base = i as isize - half;
            for (j, w) in kernel.iter().enumerate() {
                out[reflect(base + j as isize, k)] += p * w;
            }
        }
        self.probs = out;
        self.normalize();
    }

    fn finish_update(&mut self) -> UpdateOutcome {
        let total: f64 = self.probs.iter().sum();
        if total > 0.0 && total.is_finite() {
            self.probs.iter_mut().for_each(|p| *p /= total);
            UpdateOutcome::Updated
        } else {
            self.reset_uniform();
            UpdateOutcome::Collapsed
        }
    }

    fn normalize(&mut self) {
        let total: f64 = self.probs.iter().sum();
        self.probs.iter_mut().for_each(|p| *p /= total);
    }
}

fn gaussian_log_weight(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -0.5 * z * z
}

/// Normalized Normal kernel sampled at multiples of `spacing`, centered.
pub(crate) fn gaussian_kernel(sigma2: f64, spacing: f64) -> Vec<f64> {
    let sigma = sigma2.sqrt();
    let half = (KERNEL_SIGMAS * sigma / spacing).ceil() as isize;
    let mut kernel: Vec<f64> = (-half..=half)
        .map(|j| {
            let x = j as f64 * spacing;
            (-x * x / (2.0 * sigma2)).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);
    kernel
}

/// Folds an out-of-range bin index back into `0..k` by mirror reflection about
/// the outer bin edges. Handles kernels wider than the grid.
fn reflect(index: isize, k: usize) -> usize {
    let period = 2 * k as isize;
    let m = index.rem_euclid(period);
    if m < k as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

fn check_grid(centers: &[f64]) -> Result<f64> {
    if centers.len() < 2 {
        return Err(Error::invalid("pmf.grid", "need at least two bins"));
    }
    let spacing = centers[1] - centers[0];
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid("pmf.grid", "bin centers must be strictly increasing"));
    }
    let uniform = centers
        .windows(2)
        .all(|w| ((w[1] - w[0]) - spacing).abs() <= 1e-6 * spacing);
    if !uniform {
        return Err(Error::invalid("pmf.grid", "bin centers must be uniformly spaced"));
    }
    Ok(spacing)
}
