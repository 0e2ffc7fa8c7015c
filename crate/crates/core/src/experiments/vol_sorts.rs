use serde::Serialize;

use crate::characteristics::{rolling_risk, Characteristic};
use crate::error::{Error, Result};
use crate::factors::{tercile_portfolios, FactorOptions, Leg};
use crate::moments;
use crate::panel::ReturnPanel;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolSortRow {
    pub sort: Characteristic,
    pub low: f64,
    pub mid: f64,
    pub high: f64,
    /// Mean of the daily high-minus-low spread.
    pub high_minus_low: f64,
    pub t: f64,
    pub n: usize,
}

/// Tercile means on rolling risk sorts, over the days where the spread exists.
pub fn vol_sorts(
    panel: &ReturnPanel,
    market: &[Option<f64>],
    sorts: &[Characteristic],
    opts: &FactorOptions,
) -> Result<Vec<VolSortRow>> {
    sorts
        .iter()
        .map(|&sort| {
            let chr = rolling_risk(sort, panel, market)?;
            let p = tercile_portfolios(&chr, panel, opts)?;
            let hl = p.long_short(&format!("{sort}_HL"), Leg::Top, Leg::Bottom);
            let days: Vec<usize> = (0..hl.returns.len()).filter(|t| hl.returns[*t].is_some()).collect();
            let leg_mean = |leg: Leg| {
                let xs: Vec<f64> = days.iter().filter_map(|t| p.leg(leg)[*t]).collect();
                moments::mean(&xs)
            };
            let spread = hl.present();
            let (Some(mean), Some(std)) = (moments::mean(&spread), moments::sample_std(&spread)) else {
                return Err(Error::NoEligibleObservations(format!(
                    "{sort}: fewer than two sorted days"
                )));
            };
            Ok(VolSortRow {
                sort,
                low: leg_mean(Leg::Bottom).expect("days non-empty"),
                mid: leg_mean(Leg::Middle).expect("days non-empty"),
                high: leg_mean(Leg::Top).expect("days non-empty"),
                high_minus_low: mean,
                t: mean / (std / (spread.len() as f64).sqrt()),
                n: spread.len(),
            })
        })
        .collect()
}
