use serde::{Deserialize, Serialize};

use crate::econometrics::ols::ols;
use crate::error::{Error, Result};
use crate::moments;

pub const DEFAULT_HAC_LAGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KurtosisConvention {
    /// `G2 + 3`, equal to 3 for a normal sample.
    #[default]
    Raw,
    /// `G2`, equal to 0 for a normal sample.
    Excess,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub sharpe: f64,
    pub t_ols: f64,
    pub t_nw: f64,
    pub hac_lags: usize,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    pub kurtosis_convention: KurtosisConvention,
    pub n: usize,
}

pub fn summary_stats(xs: &[f64], lags: usize, kurtosis: KurtosisConvention) -> Result<SummaryStats> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} observations")));
    }
    let mean = moments::mean(xs).expect("non-empty");
    let std = moments::sample_std(xs).expect("n >= 2");
    if moments::negligible_spread(mean, std) {
        return Err(Error::ZeroVariance(
            "Sharpe ratio and t-statistics are undefined".into(),
        ));
    }
    let reg = ols(xs, &[], &[], true)?.with_hac(lags)?;
    let excess = moments::excess_kurtosis(xs);
    Ok(SummaryStats {
        mean,
        std,
        sharpe: moments::annualized_sharpe(mean, std),
        t_ols: mean / (std / (n as f64).sqrt()),
        t_nw: reg.hac_t.expect("hac attached")[0],
        hac_lags: lags,
        skewness: moments::skewness(xs),
        kurtosis: match kurtosis {
            KurtosisConvention::Raw => excess.map(|k| k + 3.0),
            KurtosisConvention::Excess => excess,
        },
        kurtosis_convention: kurtosis,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_rejected() {
        assert!(matches!(
            summary_stats(&[0.01; 20], 5, KurtosisConvention::Raw),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn alternating_series() {
        let x: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 0.02 } else { -0.02 }).collect();
        let s = summary_stats(&x, 5, KurtosisConvention::Raw).unwrap();
        assert!(s.mean.abs() < 1e-15);
        assert!(s.skewness.unwrap().abs() < 1e-12);
        assert_eq!(s.n, 40);
    }

    #[test]
    fn ols_t_matches_regression_and_sharpe_identity() {
        let x = [0.01, 0.03, -0.02, 0.05, 0.00, 0.02, -0.01, 0.04];
        let s = summary_stats(&x, 0, KurtosisConvention::Excess).unwrap();
        let r = ols(&x, &[], &[], true).unwrap();
        assert!((s.t_ols - r.ols_t[0]).abs() < 1e-12);
        assert!((s.sharpe - s.mean * 365.0 / (s.std * 365f64.sqrt())).abs() < 1e-12);
        let raw = summary_stats(&x, 0, KurtosisConvention::Raw).unwrap();
        assert!((raw.kurtosis.unwrap() - s.kurtosis.unwrap() - 3.0).abs() < 1e-12);
    }
}
