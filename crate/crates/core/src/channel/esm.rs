/// Exponential effective SINR mapping.
///
/// `10 log10(-beta * ln(mean_s exp(-sinr_s / beta)))` for linear per-subcarrier
/// SINRs, evaluated with a log-sum-exp shift so strong subcarriers cannot
/// underflow the sum. A constant vector maps to its own value.
pub fn effective_sinr(per_subcarrier: &[f64], beta: f64) -> f64 {
    debug_assert!(!per_subcarrier.is_empty() && beta > 0.0);
    let shift = per_subcarrier
        .iter()
        .map(|x| -x / beta)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = per_subcarrier
        .iter()
        .map(|x| (-x / beta - shift).exp())
        .sum();
    let log_mean = shift + (sum / per_subcarrier.len() as f64).ln();
    let linear = (-beta * log_mean).max(f64::MIN_POSITIVE);
    10.0 * linear.log10()
}
