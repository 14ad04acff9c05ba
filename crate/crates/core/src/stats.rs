//! Standard normal tail probabilities for Wald tests.

use core::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum WaldError {
    #[error("standard error must be positive and finite, got {0}")]
    StandardError(f64),
}

/// Φ(z), the standard normal distribution function.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Two-sided Wald p-value `2·(1 − Φ(|β / se|))`.
///
/// Evaluated as `erfc(|z| / √2)`, which is the same quantity without the
/// cancellation in `1 − Φ` for large `|z|`.
pub fn wald_p_value(coefficient: f64, standard_error: f64) -> Result<f64, WaldError> {
    if !(standard_error > 0.0) || !standard_error.is_finite() {
        return Err(WaldError::StandardError(standard_error));
    }
    Ok(two_sided_p(coefficient / standard_error))
}

/// Two-sided normal tail probability of a z statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    libm::erfc(libm::fabs(z) / SQRT_2).min(1.0)
}
