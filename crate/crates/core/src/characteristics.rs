//! Lagged sorting characteristics and rolling risk measures.
//!
//! The value stored at date index `t` is the one available for forming
//! portfolios on day `t`; it never uses anything observed on day `t` or later.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fmt_opt, wide_csv, DateMatrix, PanelAxis};
use crate::ingest::RAO_PER_TAO;
use crate::moments;
use crate::panel::{ReturnPanel, SubnetHistory};

/// Lookback of the rolling risk measures, in daily returns.
pub const ROLLING_WINDOW: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Characteristic {
    Mcap,
    Ey,
    Mom7,
    Mom30,
    Rev,
    Liq,
    Stake,
    Vol30,
    DownVol30,
    UpVol30,
    Ivol30,
    Beta30,
    Skew30,
}

impl Characteristic {
    pub const STATE: [Characteristic; 7] = [
        Characteristic::Mcap,
        Characteristic::Ey,
        Characteristic::Mom7,
        Characteristic::Mom30,
        Characteristic::Rev,
        Characteristic::Liq,
        Characteristic::Stake,
    ];

    pub const ROLLING: [Characteristic; 6] = [
        Characteristic::Vol30,
        Characteristic::DownVol30,
        Characteristic::UpVol30,
        Characteristic::Ivol30,
        Characteristic::Beta30,
        Characteristic::Skew30,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Characteristic::Mcap => "MCAP",
            Characteristic::Ey => "EY",
            Characteristic::Mom7 => "MOM7",
            Characteristic::Mom30 => "MOM30",
            Characteristic::Rev => "REV",
            Characteristic::Liq => "LIQ",
            Characteristic::Stake => "STAKE",
            Characteristic::Vol30 => "VOL30",
            Characteristic::DownVol30 => "DOWNVOL30",
            Characteristic::UpVol30 => "UPVOL30",
            Characteristic::Ivol30 => "IVOL30",
            Characteristic::Beta30 => "BETA30",
            Characteristic::Skew30 => "SKEW30",
        }
    }

    pub fn is_rolling(self) -> bool {
        Self::ROLLING.contains(&self)
    }

    /// Price-ratio lookback `k` for `p(t-1)/p(t-1-k) - 1`.
    fn price_lookback(self) -> Option<usize> {
        match self {
            Characteristic::Mom7 => Some(7),
            Characteristic::Mom30 => Some(30),
            Characteristic::Rev => Some(1),
            _ => None,
        }
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Characteristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Self::STATE
            .iter()
            .chain(Self::ROLLING.iter())
            .copied()
            .find(|c| c.as_str() == upper)
            .ok_or_else(|| Error::UnknownCharacteristic(s.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct CharacteristicMatrix {
    pub name: Characteristic,
    pub values: DateMatrix<Option<f64>>,
    /// Values nullified because their window spans an internal gap.
    pub masked: usize,
}

impl CharacteristicMatrix {
    pub fn value(&self, t: usize, i: usize) -> Option<f64> {
        self.values.value(t, i)
    }

    pub fn to_csv(&self, axis: &PanelAxis) -> Result<Vec<u8>> {
        wide_csv(axis, &self.values, fmt_opt)
    }
}

/// Lagged state or price characteristic. Rolling names go through [`rolling_risk`].
pub fn characteristic(
    name: Characteristic,
    history: &SubnetHistory,
    panel: &ReturnPanel,
) -> Result<CharacteristicMatrix> {
    if name.is_rolling() {
        return Err(Error::Domain(format!("{name} needs a market series; use rolling_risk")));
    }
    if history.axis != panel.axis {
        return Err(Error::Domain("history and panel axes differ".into()));
    }
    let (nd, ns) = (panel.axis.n_dates(), panel.axis.n_subnets());
    let mut values = DateMatrix::filled(nd, ns, None);
    let mut masked = 0;
    for t in 1..nd {
        for i in 0..ns {
            let v = match name.price_lookback() {
                Some(k) => {
                    if t < k + 1 {
                        continue;
                    }
                    let (Some(p1), Some(p0)) = (history.price(t - 1, i), history.price(t - 1 - k, i)) else {
                        continue;
                    };
                    if !history.continuous(i, t - 1 - k, t - 1) {
                        masked += 1;
                        continue;
                    }
                    Some(p1 / p0 - 1.0)
                }
                None => {
                    if history.lifecycle(t - 1, i).is_none() {
                        continue;
                    }
                    let row = history.row(t - 1, i).expect("active day has a row");
                    match name {
                        Characteristic::Mcap => row.mcap_tao,
                        Characteristic::Ey => row
                            .mcap_tao
                            .filter(|m| *m > 0.0)
                            .map(|m| row.emission_rao_per_day as f64 / (m * RAO_PER_TAO)),
                        Characteristic::Liq => row.tau_reserve,
                        Characteristic::Stake => row.alpha_staked,
                        _ => unreachable!("price and rolling names handled above"),
                    }
                }
            };
            values.set(t, i, v);
        }
    }
    Ok(CharacteristicMatrix { name, values, masked })
}

/// Risk measure over the `ROLLING_WINDOW` returns ending the day before `t`.
///
/// `market[t]` is the market return on date index `t`. Windows with any
/// missing subnet return are missing; market-model measures also need the
/// market present on every window day.
pub fn rolling_risk(name: Characteristic, panel: &ReturnPanel, market: &[Option<f64>]) -> Result<CharacteristicMatrix> {
    if !name.is_rolling() {
        return Err(Error::Domain(format!("{name} is not a rolling measure")));
    }
    let (nd, ns) = (panel.axis.n_dates(), panel.axis.n_subnets());
    if market.len() != nd {
        return Err(Error::Domain(format!(
            "market series has {} days, panel has {nd}",
            market.len()
        )));
    }
    let w = ROLLING_WINDOW;
    let mut values = DateMatrix::filled(nd, ns, None);
    let mut r = Vec::with_capacity(w);
    let mut m = Vec::with_capacity(w);
    for t in w..nd {
        for i in 0..ns {
            r.clear();
            m.clear();
            for s in t - w..t {
                if let Some(x) = panel.r_tao.value(s, i) {
                    r.push(x);
                }
                if let Some(x) = market[s] {
                    m.push(x);
                }
            }
            if r.len() < w {
                continue;
            }
            let v = match name {
                Characteristic::Vol30 => moments::sample_std(&r),
                Characteristic::DownVol30 => moments::downside_deviation(&r),
                Characteristic::UpVol30 => moments::upside_deviation(&r),
                Characteristic::Skew30 => moments::skewness(&r),
                Characteristic::Beta30 | Characteristic::Ivol30 if m.len() == w => {
                    market_model(&r, &m).map(|(beta, ivol)| if name == Characteristic::Beta30 { beta } else { ivol })
                }
                _ => None,
            };
            values.set(t, i, v);
        }
    }
    Ok(CharacteristicMatrix {
        name,
        values,
        masked: 0,
    })
}

/// Slope and residual std (`n - 2` denominator) of `y` on `x` with intercept.
fn market_model(y: &[f64], x: &[f64]) -> Option<(f64, f64)> {
    let n = y.len() as f64;
    let mx = moments::mean(x)?;
    let my = moments::mean(y)?;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - alpha - beta * a).powi(2)).sum();
    Some((beta, (ssr / (n - 2.0)).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RawSnapshotRow;
    use crate::panel::{build_panel, PanelOptions};
    use chrono::{Days, NaiveDate};

    fn row(day: u64, netuid: u32, price: f64) -> RawSnapshotRow {
        RawSnapshotRow {
            date: NaiveDate::from_ymd_opt(2025, 4, 1).unwrap() + Days::new(day),
            netuid,
            price_tao: Some(price),
            mcap_tao: Some(720_000.0),
            tau_reserve: Some(50.0 + day as f64),
            alpha_reserve: Some(500.0),
            alpha_staked: Some(10.0 * day as f64),
            emission_rao_per_day: 7_200_000_000_000,
            startup_mode: false,
        }
    }

    fn setup(rows: &[RawSnapshotRow]) -> (SubnetHistory, ReturnPanel) {
        let h = SubnetHistory::from_rows(rows).unwrap();
        let p = build_panel(&h, None, PanelOptions::default());
        (h, p)
    }

    #[test]
    fn names_round_trip() {
        for c in Characteristic::STATE.iter().chain(&Characteristic::ROLLING) {
            assert_eq!(c.as_str().parse::<Characteristic>().unwrap(), *c);
        }
        assert!(matches!(
            "BOOK".parse::<Characteristic>(),
            Err(Error::UnknownCharacteristic(_))
        ));
    }

    #[test]
    fn constant_price_zero_momentum() {
        let rows: Vec<_> = (0..40).map(|d| row(d, 1, 0.02)).collect();
        let (h, p) = setup(&rows);
        for c in [Characteristic::Mom7, Characteristic::Mom30, Characteristic::Rev] {
            let m = characteristic(c, &h, &p).unwrap();
            assert_eq!(m.value(39, 0), Some(0.0));
            assert_eq!(m.masked, 0);
        }
        let m = characteristic(Characteristic::Mom30, &h, &p).unwrap();
        assert_eq!(m.value(30, 0), None);
        assert_eq!(m.value(31, 0), Some(0.0));
    }

    #[test]
    fn emission_yield_units() {
        let rows: Vec<_> = (0..3).map(|d| row(d, 1, 1.0)).collect();
        let (h, p) = setup(&rows);
        let ey = characteristic(Characteristic::Ey, &h, &p).unwrap();
        assert!((ey.value(1, 0).unwrap() - 0.01).abs() < 1e-15);
        assert_eq!(ey.value(0, 0), None);
    }

    #[test]
    fn state_values_lagged_one_day() {
        let rows: Vec<_> = (0..5).map(|d| row(d, 1, 1.0)).collect();
        let (h, p) = setup(&rows);
        let liq = characteristic(Characteristic::Liq, &h, &p).unwrap();
        assert_eq!(liq.value(3, 0), Some(52.0));
        let st = characteristic(Characteristic::Stake, &h, &p).unwrap();
        assert_eq!(st.value(4, 0), Some(30.0));
    }

    #[test]
    fn momentum_masked_across_lifecycle_gap() {
        let mut rows = Vec::new();
        for d in 0..20 {
            rows.push(row(d, 1, 1.0));
        }
        for d in 20..25 {
            let mut r = row(d, 1, 1.0);
            r.startup_mode = true;
            r.price_tao = None;
            rows.push(r);
        }
        for d in 25..70 {
            rows.push(row(d, 1, 3.0));
        }
        let (h, p) = setup(&rows);
        let m = characteristic(Characteristic::Mom30, &h, &p).unwrap();
        // p(t-31) in the first lifecycle (t-31 <= 19) and p(t-1) in the second (t-1 >= 25)
        assert_eq!(m.masked, (31..=50).count());
        assert!((26..56).all(|t| m.value(t, 0).is_none()));
        assert_eq!(m.value(56, 0), Some(0.0));
        let m7 = characteristic(Characteristic::Mom7, &h, &p).unwrap();
        // t-8 <= 19 and t-1 >= 25
        assert_eq!(m7.masked, (26..=27).count());
    }

    #[test]
    fn rolling_name_rejected_by_state_path() {
        let rows: Vec<_> = (0..3).map(|d| row(d, 1, 1.0)).collect();
        let (h, p) = setup(&rows);
        assert!(characteristic(Characteristic::Vol30, &h, &p).is_err());
        assert!(rolling_risk(Characteristic::Mcap, &p, &[None; 3]).is_err());
    }

    fn path_from_returns(rets: &[f64]) -> Vec<RawSnapshotRow> {
        let mut price = 1.0;
        let mut rows = vec![row(0, 1, price)];
        for (k, r) in rets.iter().enumerate() {
            price *= 1.0 + r;
            rows.push(row(k as u64 + 1, 1, price));
        }
        rows
    }

    #[test]
    fn beta_two_and_zero_idiosyncratic_vol() {
        let mkt: Vec<f64> = (0..40).map(|k| 0.01 * ((k as f64) * 1.3).sin()).collect();
        let rets: Vec<f64> = mkt.iter().map(|m| 2.0 * m).collect();
        let (_, p) = setup(&path_from_returns(&rets));
        let mut market = vec![None];
        market.extend(mkt.iter().map(|m| Some(*m)));
        let beta = rolling_risk(Characteristic::Beta30, &p, &market).unwrap();
        let ivol = rolling_risk(Characteristic::Ivol30, &p, &market).unwrap();
        assert_eq!(beta.value(30, 0), None, "window needs 30 returns before t");
        assert!((beta.value(31, 0).unwrap() - 2.0).abs() < 1e-10);
        assert!(ivol.value(40, 0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn constant_returns_and_semideviation() {
        let (_, p) = setup(&path_from_returns(&[0.01; 35]));
        let market = vec![None; p.axis.n_dates()];
        let vol = rolling_risk(Characteristic::Vol30, &p, &market).unwrap();
        assert!(vol.value(35, 0).unwrap().abs() < 1e-12);
        let skew = rolling_risk(Characteristic::Skew30, &p, &market).unwrap();
        assert_eq!(skew.value(35, 0), None);
        let down = rolling_risk(Characteristic::DownVol30, &p, &market).unwrap();
        assert_eq!(down.value(35, 0), Some(0.0));
        let beta = rolling_risk(Characteristic::Beta30, &p, &market).unwrap();
        assert_eq!(beta.value(35, 0), None);
    }

    #[test]
    fn semideviation_decomposition() {
        let rets: Vec<f64> = (0..45).map(|k| 0.03 * ((k * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let (_, p) = setup(&path_from_returns(&rets));
        let market = vec![None; p.axis.n_dates()];
        let down = rolling_risk(Characteristic::DownVol30, &p, &market).unwrap();
        let up = rolling_risk(Characteristic::UpVol30, &p, &market).unwrap();
        for t in 31..p.axis.n_dates() {
            let window: Vec<f64> = (t - 30..t).map(|s| p.r_tao.value(s, 0).unwrap()).collect();
            let m2 = moments::mean(&window.iter().map(|x| x * x).collect::<Vec<_>>()).unwrap();
            let (d, u) = (down.value(t, 0).unwrap(), up.value(t, 0).unwrap());
            assert!((d * d + u * u - m2).abs() < 1e-12);
        }
    }
}
