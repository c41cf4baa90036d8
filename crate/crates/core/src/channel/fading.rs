use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

/// One Rayleigh tap as a sum of complex sinusoids.
///
/// Arrival angles are equispaced around the circle with a random common
/// rotation, and every oscillator has an independent uniform phase:
///
/// ```text
/// h(t) = sqrt(p / N) * sum_n exp(j (2 pi f_d cos(a_n) t + phi_n))
/// a_n  = (2 pi n - pi + rot) / N
/// ```
///
/// `E|h|^2 = p` and the autocorrelation tends to `p * J0(2 pi f_d tau)`.
#[derive(Debug, Clone)]
pub struct FadingTap {
    amplitude: f64,
    freqs_hz: Vec<f64>,
    phases: Vec<f64>,
}

impl FadingTap {
    pub fn new<R: Rng + ?Sized>(power: f64, max_doppler_hz: f64, oscillators: usize, rng: &mut R) -> Self {
        let n = oscillators.max(1);
        let rotation = rng.random_range(-PI..PI);
        let freqs_hz = (0..n)
            .map(|i| {
                let angle = (2.0 * PI * (i + 1) as f64 - PI + rotation) / n as f64;
                max_doppler_hz * angle.cos()
            })
            .collect();
        let phases = (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self {
            amplitude: (power / n as f64).sqrt(),
            freqs_hz,
            phases,
        }
    }

    pub fn gain_at(&self, time_s: f64) -> Complex64 {
        let sum: Complex64 = self
            .freqs_hz
            .iter()
            .zip(&self.phases)
            .map(|(f, phi)| Complex64::from_polar(1.0, 2.0 * PI * f * time_s + phi))
            .sum();
        sum * self.amplitude
    }
}
