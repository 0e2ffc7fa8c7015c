//! Round-trip trading cost of the size factor as a function of fund size.
//!
//! Buying `d` base tokens of a pool with base reserve `tau` costs `d / tau`
//! one way, so every cost below is linear in AUM. A report is fully described
//! by the per-tercile slippage per dollar of AUM.

use serde::{Deserialize, Serialize};

use crate::characteristics::{characteristic, Characteristic};
use crate::error::{Error, Result};
use crate::factors::{tercile_sort, Leg, TercileConvention};
use crate::ingest::FxSeries;
use crate::moments::{self, DAYS_PER_YEAR};
use crate::panel::{ReturnPanel, SubnetHistory};

pub const DEFAULT_AUM_GRID: [f64; 4] = [1e4, 1e5, 1e6, 1e7];
pub const DEFAULT_TURNOVER: f64 = 1.0;

/// Net Sharpe is withheld when even a gross day this many standard
/// deviations above the mean would not cover the round-trip cost.
pub const CERTAIN_LOSS_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrossReturn {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlippageRow {
    pub aum_usd: f64,
    /// One-way slippage of the bottom, middle and top terciles (fractions).
    pub slippage: [f64; 3],
    pub rt_cost: f64,
    /// Unavailable once the daily cost reaches 100%.
    pub net: Option<f64>,
    pub net_sharpe: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlippageReport {
    pub label: String,
    pub per_usd: [f64; 3],
    pub gross: GrossReturn,
    pub turnover: f64,
    pub rows: Vec<SlippageRow>,
}

fn report(
    label: &str,
    per_usd: [f64; 3],
    aum_grid: &[f64],
    gross: GrossReturn,
    turnover: f64,
) -> Result<SlippageReport> {
    if let Some(a) = aum_grid.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::Domain(format!("AUM must be non-negative, got {a}")));
    }
    if !(turnover.is_finite() && turnover >= 0.0) {
        return Err(Error::Domain(format!("turnover must be non-negative, got {turnover}")));
    }
    let rows = aum_grid
        .iter()
        .map(|&aum| {
            let slippage = per_usd.map(|c| c * aum);
            let rt_cost = (slippage[Leg::Bottom as usize] + slippage[Leg::Top as usize]) * turnover;
            let net = (rt_cost < 1.0).then_some(gross.mean - rt_cost);
            let certain_loss = gross.mean + CERTAIN_LOSS_SIGMAS * gross.std < rt_cost;
            let net_sharpe = net
                .filter(|_| !certain_loss && gross.std > 0.0)
                .map(|n| n * DAYS_PER_YEAR / (gross.std * DAYS_PER_YEAR.sqrt()));
            SlippageRow {
                aum_usd: aum,
                slippage,
                rt_cost,
                net,
                net_sharpe,
            }
        })
        .collect();
    Ok(SlippageReport {
        label: label.to_string(),
        per_usd,
        gross,
        turnover,
        rows,
    })
}

/// AUM split equally over every eligible subnet (all terciles), converted to
/// base tokens at `tao_usd`; tercile slippage is the member average of `d / tau`.
pub fn slippage_capacity(
    reserves_by_tercile: &[Vec<(u32, f64)>; 3],
    tao_usd: f64,
    aum_grid: &[f64],
    gross: GrossReturn,
    turnover: f64,
) -> Result<SlippageReport> {
    if !(tao_usd.is_finite() && tao_usd > 0.0) {
        return Err(Error::Domain(format!(
            "base-token price must be positive, got {tao_usd}"
        )));
    }
    let n_eligible: usize = reserves_by_tercile.iter().map(Vec::len).sum();
    let mut per_usd = [0.0; 3];
    for (leg, members) in reserves_by_tercile.iter().enumerate() {
        if members.is_empty() {
            return Err(Error::Domain("empty tercile in slippage input".into()));
        }
        if let Some((netuid, tau)) = members.iter().find(|(_, tau)| !(tau.is_finite() && *tau > 0.0)) {
            return Err(Error::Domain(format!("subnet {netuid} has reserve {tau}")));
        }
        let inv: Vec<f64> = members
            .iter()
            .map(|(_, tau)| 1.0 / (n_eligible as f64 * tao_usd * tau))
            .collect();
        per_usd[leg] = moments::mean(&inv).expect("non-empty");
    }
    report("snapshot", per_usd, aum_grid, gross, turnover)
}

/// Scale a known slippage row at `reference_aum` linearly to other fund sizes.
pub fn scaled_slippage(
    reference_aum: f64,
    reference_slippage: [f64; 3],
    aum_grid: &[f64],
    gross: GrossReturn,
    turnover: f64,
) -> Result<SlippageReport> {
    if !(reference_aum > 0.0) {
        return Err(Error::Domain("reference AUM must be positive".into()));
    }
    report(
        "scaled",
        reference_slippage.map(|s| s / reference_aum),
        aum_grid,
        gross,
        turnover,
    )
}

/// Typical reserves over the sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReserveSummary {
    pub median_reserve: [f64; 3],
    pub mean_eligible: f64,
    pub median_tao_usd: f64,
    pub days: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelCapacity {
    /// Each day's reserves and eligible count, averaged over days.
    pub daily: SlippageReport,
    /// Median tercile reserves with the average eligible count.
    pub median: SlippageReport,
    pub reserves: ReserveSummary,
}

/// Capacity from the size sort on the panel: tercile membership on lagged
/// market cap, reserves from the previous day.
#[allow(clippy::too_many_arguments)]
pub fn panel_capacity(
    history: &SubnetHistory,
    panel: &ReturnPanel,
    fx: Option<&FxSeries>,
    fallback_tao_usd: f64,
    convention: TercileConvention,
    aum_grid: &[f64],
    gross: GrossReturn,
    turnover: f64,
) -> Result<PanelCapacity> {
    let mcap = characteristic(Characteristic::Mcap, history, panel)?;
    let liq = characteristic(Characteristic::Liq, history, panel)?;
    let (nd, ns) = (panel.axis.n_dates(), panel.axis.n_subnets());
    let mut daily: [Vec<f64>; 3] = Default::default();
    let mut pooled: [Vec<f64>; 3] = Default::default();
    let mut counts = Vec::new();
    let mut fx_seen = Vec::new();
    for t in 1..nd {
        let pairs: Vec<(u32, f64)> = (0..ns)
            .filter(|&i| panel.eligible(t, i))
            .filter_map(|i| Some((panel.axis.netuids[i], mcap.value(t, i)?)))
            .collect();
        let Some(terciles) = tercile_sort(&pairs, convention) else {
            continue;
        };
        let price = fx
            .and_then(|f| f.price(panel.axis.dates[t - 1]))
            .unwrap_or(fallback_tao_usd);
        let n = pairs.len() as f64;
        let mut day = [Vec::new(), Vec::new(), Vec::new()];
        for leg in Leg::ALL {
            for netuid in terciles.leg(leg) {
                let i = panel.axis.subnet_index(*netuid).expect("member of axis");
                let Some(tau) = liq.value(t, i) else { continue };
                if !(tau > 0.0) {
                    return Err(Error::Domain(format!(
                        "subnet {netuid} has reserve {tau} on {}",
                        panel.axis.dates[t - 1]
                    )));
                }
                day[leg as usize].push(1.0 / (n * price * tau));
                pooled[leg as usize].push(tau);
            }
        }
        if day.iter().any(Vec::is_empty) {
            continue;
        }
        for leg in 0..3 {
            daily[leg].push(moments::mean(&day[leg]).expect("non-empty"));
        }
        counts.push(n);
        fx_seen.push(price);
    }
    if counts.is_empty() {
        return Err(Error::NoEligibleObservations(
            "no day has a size sort with reserves".into(),
        ));
    }
    let per_usd = [0, 1, 2].map(|l| moments::mean(&daily[l]).expect("non-empty"));
    let median_reserve = [0, 1, 2].map(|l| median(&pooled[l]));
    let mean_eligible = moments::mean(&counts).expect("non-empty");
    let median_tao_usd = median(&fx_seen);
    let median_per_usd = median_reserve.map(|tau| 1.0 / (mean_eligible * median_tao_usd * tau));
    Ok(PanelCapacity {
        daily: report("daily", per_usd, aum_grid, gross, turnover)?,
        median: report("median", median_per_usd, aum_grid, gross, turnover)?,
        reserves: ReserveSummary {
            median_reserve,
            mean_eligible,
            median_tao_usd,
            days: counts.len(),
        },
    })
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gross() -> GrossReturn {
        GrossReturn {
            mean: 0.0101,
            std: 0.0501,
        }
    }

    #[test]
    fn zero_aum_costs_nothing() {
        let r = scaled_slippage(1e4, [0.0064, 0.0002, 0.0001], &[0.0], gross(), 1.0).unwrap();
        assert_eq!(r.rows[0].rt_cost, 0.0);
        assert_eq!(r.rows[0].net, Some(0.0101));
    }

    #[test]
    fn scaled_rows_follow_inputs() {
        let r = scaled_slippage(1e4, [0.0064, 0.0002, 0.0001], &DEFAULT_AUM_GRID, gross(), 1.0).unwrap();
        assert!((r.rows[0].rt_cost - 0.0065).abs() < 1e-15);
        assert!((r.rows[0].net.unwrap() - 0.0036).abs() < 1e-15);
        assert!((r.rows[1].net.unwrap() + 0.0549).abs() < 1e-12);
        assert!(r.rows[1].net_sharpe.is_some());
        assert!(r.rows[2].net.is_some() && r.rows[2].net_sharpe.is_none());
        assert!(r.rows[3].net.is_none());
    }

    #[test]
    fn equal_split_over_all_subnets() {
        let reserves = [vec![(1, 100.0), (2, 300.0)], vec![(3, 1000.0)], vec![(4, 5000.0)]];
        let r = slippage_capacity(&reserves, 400.0, &[4000.0], gross(), 1.0).unwrap();
        // 4000 USD / 4 subnets / 400 = 2.5 TAO each
        let small = (2.5 / 100.0 + 2.5 / 300.0) / 2.0;
        assert!((r.rows[0].slippage[0] - small).abs() < 1e-15);
        assert!((r.rows[0].slippage[2] - 2.5 / 5000.0).abs() < 1e-15);
    }

    #[test]
    fn zero_reserve_names_subnet() {
        let reserves = [vec![(7, 0.0)], vec![(3, 1.0)], vec![(4, 1.0)]];
        let e = slippage_capacity(&reserves, 1.0, &[1.0], gross(), 1.0).unwrap_err();
        assert!(e.to_string().contains("subnet 7"));
    }
}
