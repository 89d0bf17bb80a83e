//! Small numerical helpers shared across modules.

use std::f64::consts::PI;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `log(sum(exp(values)))`, stable for large magnitudes. Empty input gives `-inf`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max == f64::INFINITY {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log(mean(exp(values)))`.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "log_mean_exp of an empty set");
    log_sum_exp(values.iter().copied()) - (values.len() as f64).ln()
}

pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Differential entropy of a `dim`-dimensional isotropic Gaussian.
pub fn gaussian_entropy(dim: usize, var: f64) -> f64 {
    0.5 * dim as f64 * (2.0 * PI * std::f64::consts::E * var).ln()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (divides by `n`).
pub fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// Sample mean and its standard error (sample variance over `n`).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp([1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_mean_exp(&[0.0, 0.0, 0.0]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn standard_normal_at_mode() {
        assert!((normal_log_pdf(0.0, 0.0, 1.0) + 0.918_938_533_204_672_7).abs() < 1e-15);
        assert!((LN_2PI - (2.0 * PI).ln()).abs() < 1e-15);
    }
}
