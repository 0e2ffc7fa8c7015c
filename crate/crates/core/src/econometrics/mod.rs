//! Regression kernels and the asset-pricing tests built on them.
//!
//! Every function that takes several series first intersects their
//! non-missing dates.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::factors::FactorSeries;

pub mod fama_macbeth;
pub mod grs;
pub mod ols;
pub mod risk;
pub mod spanning;
pub mod summary;

pub use fama_macbeth::{
    fama_macbeth, first_pass, second_pass, FamaMacBeth, FirstPass, SecondPass, DEFAULT_MIN_FIRST_PASS_OBS,
};
pub use grs::{grs_test, grs_test_series, GrsResult};
pub use ols::{newey_west_cov, newey_west_se, ols, p_normal, p_student, RegressionResult};
pub use risk::{risk_decomposition, RiskDecomposition};
pub use spanning::{spanning_alphas, SpanningRow};
pub use summary::{summary_stats, KurtosisConvention, SummaryStats, DEFAULT_HAC_LAGS};

/// Dates on which every series is present, with the values in series order.
pub fn align(series: &[&FactorSeries]) -> (Vec<NaiveDate>, Vec<Vec<f64>>) {
    let maps: Vec<BTreeMap<NaiveDate, f64>> = series
        .iter()
        .map(|s| {
            s.dates
                .iter()
                .zip(&s.returns)
                .filter_map(|(d, r)| Some((*d, (*r)?)))
                .collect()
        })
        .collect();
    let Some(first) = maps.first() else {
        return (Vec::new(), Vec::new());
    };
    let dates: Vec<NaiveDate> = first
        .keys()
        .filter(|d| maps.iter().all(|m| m.contains_key(d)))
        .copied()
        .collect();
    let cols = maps.iter().map(|m| dates.iter().map(|d| m[d]).collect()).collect();
    (dates, cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intersection() {
        let d: Vec<NaiveDate> = (1..=4).map(|k| NaiveDate::from_ymd_opt(2025, 6, k).unwrap()).collect();
        let a = FactorSeries::from_returns("a", d.clone(), vec![Some(1.0), None, Some(3.0), Some(4.0)]);
        let b = FactorSeries::from_returns("b", d[1..].to_vec(), vec![Some(20.0), Some(30.0), None]);
        let (dates, cols) = align(&[&a, &b]);
        assert_eq!(dates, vec![d[2]]);
        assert_eq!(cols, vec![vec![3.0], vec![30.0]]);
    }
}
