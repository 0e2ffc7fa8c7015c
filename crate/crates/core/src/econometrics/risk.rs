use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::{self, DAYS_PER_YEAR};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskDecomposition {
    pub mean: f64,
    pub std: f64,
    pub downside_dev: f64,
    pub upside_dev: f64,
    pub down_up_ratio: f64,
    pub sortino: f64,
    pub pct_negative: f64,
    pub n: usize,
}

pub fn risk_decomposition(xs: &[f64]) -> Result<RiskDecomposition> {
    let n = xs.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} observations")));
    }
    let mean = moments::mean(xs).expect("n >= 2");
    let std = moments::sample_std(xs).expect("n >= 2");
    let down = moments::downside_deviation(xs).expect("n >= 2");
    let up = moments::upside_deviation(xs).expect("n >= 2");
    if !(down > 0.0) {
        return Err(Error::ZeroVariance(
            "no downside deviation; Sortino ratio undefined".into(),
        ));
    }
    Ok(RiskDecomposition {
        mean,
        std,
        downside_dev: down,
        upside_dev: up,
        down_up_ratio: down / up,
        sortino: mean * DAYS_PER_YEAR / (down * DAYS_PER_YEAR.sqrt()),
        pct_negative: 100.0 * xs.iter().filter(|x| **x < 0.0).count() as f64 / n as f64,
        n,
    })
}
