//! Sample moments of a plain slice.

/// Calendar days per year used for every annualization.
pub const DAYS_PER_YEAR: f64 = 365.0;

/// `(mean × 365) / (std × √365)`.
pub fn annualized_sharpe(mean: f64, std: f64) -> f64 {
    mean * DAYS_PER_YEAR / (std * DAYS_PER_YEAR.sqrt())
}

/// True when the dispersion is rounding noise around the mean.
pub fn negligible_spread(mean: f64, std: f64) -> bool {
    !(std > 1e-12 * mean.abs())
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Standard deviation with denominator `n - 1`.
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    Some((ss / (xs.len() - 1) as f64).sqrt())
}

/// Adjusted Fisher-Pearson skewness `G1`. `None` for n < 3 or zero variance.
pub fn skewness(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 3 {
        return None;
    }
    let m = mean(xs)?;
    let s = sample_std(xs)?;
    if negligible_spread(m, s) {
        return None;
    }
    let sum3: f64 = xs.iter().map(|x| ((x - m) / s).powi(3)).sum();
    let n = n as f64;
    Some(n / ((n - 1.0) * (n - 2.0)) * sum3)
}

/// Bias-adjusted excess kurtosis `G2`. `None` for n < 4 or zero variance.
pub fn excess_kurtosis(xs: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 4 {
        return None;
    }
    let m = mean(xs)?;
    let s = sample_std(xs)?;
    if negligible_spread(m, s) {
        return None;
    }
    let sum4: f64 = xs.iter().map(|x| ((x - m) / s).powi(4)).sum();
    let n = n as f64;
    Some(n * (n + 1.0) / ((n - 1.0) * (n - 2.0) * (n - 3.0)) * sum4 - 3.0 * (n - 1.0).powi(2) / ((n - 2.0) * (n - 3.0)))
}

/// `sqrt(mean(min(r, 0)^2))`.
pub fn downside_deviation(xs: &[f64]) -> Option<f64> {
    mean(&xs.iter().map(|x| x.min(0.0).powi(2)).collect::<Vec<_>>()).map(f64::sqrt)
}

/// `sqrt(mean(max(r, 0)^2))`.
pub fn upside_deviation(xs: &[f64]) -> Option<f64> {
    mean(&xs.iter().map(|x| x.max(0.0).powi(2)).collect::<Vec<_>>()).map(f64::sqrt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_samples() {
        assert_eq!(mean(&[]), None);
        assert_eq!(sample_std(&[1.0]), None);
        assert!((sample_std(&[1.0, 3.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn skew_and_kurtosis_reference_values() {
        // scipy.stats.skew(x, bias=False) and kurtosis(x, bias=False) for x = [1, 2, 3, 4, 10]
        let x = [1.0, 2.0, 3.0, 4.0, 10.0];
        assert!((skewness(&x).unwrap() - 1.697_056_274_8).abs() < 1e-9);
        assert!((excess_kurtosis(&x).unwrap() - 3.152).abs() < 1e-9);
        assert_eq!(skewness(&[2.0, 2.0, 2.0]), None);
    }

    #[test]
    fn alternating_series_is_symmetric() {
        let x: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { 0.3 } else { -0.3 }).collect();
        assert!(mean(&x).unwrap().abs() < 1e-15);
        assert!(skewness(&x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn semi_deviation_identity() {
        let x = [0.01, -0.02, 0.03, -0.005, 0.0];
        let d = downside_deviation(&x).unwrap();
        let u = upside_deviation(&x).unwrap();
        let m2 = mean(&x.iter().map(|v| v * v).collect::<Vec<_>>()).unwrap();
        assert!((d * d + u * u - m2).abs() < 1e-15);
    }
}
