#![allow(dead_code)]

use chrono::{Days, NaiveDate};
use subnet_factors::grid::{DateMatrix, PanelAxis};
use subnet_factors::ingest::RawSnapshotRow;
use subnet_factors::panel::ReturnPanel;

pub fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 2, 14).unwrap()
}

/// Panel with every cell eligible and in one lifecycle.
pub fn dense_panel(returns: Vec<Vec<f64>>) -> ReturnPanel {
    let nd = returns.len();
    let ns = returns[0].len();
    let axis = PanelAxis::new(day0(), day0() + Days::new(nd as u64 - 1), (1..=ns as u32).collect());
    let mut r = DateMatrix::filled(nd, ns, None);
    for (t, row) in returns.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            r.set(t, i, Some(*v));
        }
    }
    ReturnPanel {
        axis,
        r_usd: r.clone(),
        r_tao: r,
        eligibility: DateMatrix::filled(nd, ns, true),
        lifecycle: DateMatrix::filled(nd, ns, Some(0)),
        fx_returns: vec![None; nd],
        quarantined: Vec::new(),
    }
}

pub fn active_row(day: u64, netuid: u32, price: f64) -> RawSnapshotRow {
    RawSnapshotRow {
        date: day0() + Days::new(day),
        netuid,
        price_tao: Some(price),
        mcap_tao: Some(price * 1.0e6),
        tau_reserve: Some(100.0 + netuid as f64),
        alpha_reserve: Some((100.0 + netuid as f64) / price),
        alpha_staked: Some(1.0e6),
        emission_rao_per_day: 1_000_000_000 * netuid as u64,
        startup_mode: false,
    }
}

pub fn startup_row(day: u64, netuid: u32) -> RawSnapshotRow {
    RawSnapshotRow {
        date: day0() + Days::new(day),
        netuid,
        price_tao: None,
        mcap_tao: None,
        tau_reserve: None,
        alpha_reserve: None,
        alpha_staked: None,
        emission_rao_per_day: 0,
        startup_mode: true,
    }
}
