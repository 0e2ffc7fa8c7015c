//! Daily tercile sorts and long-short factor portfolios.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::characteristics::{characteristic, Characteristic, CharacteristicMatrix};
use crate::error::{Error, Result};
use crate::moments::{self, DAYS_PER_YEAR};
use crate::panel::{Denomination, ReturnPanel, SubnetHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Leg {
    Bottom,
    Middle,
    Top,
}

impl Leg {
    pub const ALL: [Leg; 3] = [Leg::Bottom, Leg::Middle, Leg::Top];

    fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> Leg {
        match self {
            Leg::Bottom => Leg::Top,
            Leg::Middle => Leg::Middle,
            Leg::Top => Leg::Bottom,
        }
    }
}

/// Where the tercile boundaries fall for `N` sorted values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TercileConvention {
    /// Bottom is the first `⌈N/3⌉`, middle runs to `⌈2N/3⌉`.
    #[default]
    Ceil,
    /// Bottom is the first `⌊N/3⌋`, middle runs to `⌊2N/3⌋`.
    Floor,
}

impl FromStr for TercileConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ceil" => Ok(Self::Ceil),
            "floor" => Ok(Self::Floor),
            other => Err(Error::Config(format!("unknown tercile convention `{other}`"))),
        }
    }
}

impl TercileConvention {
    fn cuts(self, n: usize) -> (usize, usize) {
        match self {
            Self::Ceil => (n.div_ceil(3), (2 * n).div_ceil(3)),
            Self::Floor => (n / 3, 2 * n / 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Terciles<T> {
    pub bottom: Vec<T>,
    pub middle: Vec<T>,
    pub top: Vec<T>,
}

impl<T> Terciles<T> {
    pub fn leg(&self, leg: Leg) -> &[T] {
        match leg {
            Leg::Bottom => &self.bottom,
            Leg::Middle => &self.middle,
            Leg::Top => &self.top,
        }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.bottom.len(), self.middle.len(), self.top.len()]
    }
}

/// Partition `(netuid, value)` pairs into terciles by ascending value, ties
/// broken by ascending netuid. Non-finite values are ignored; fewer than three
/// usable values gives `None`.
pub fn tercile_sort(values: &[(u32, f64)], convention: TercileConvention) -> Option<Terciles<u32>> {
    let mut v: Vec<(u32, f64)> = values.iter().copied().filter(|(_, x)| x.is_finite()).collect();
    if v.len() < 3 {
        return None;
    }
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let (c1, c2) = convention.cuts(v.len());
    let ids: Vec<u32> = v.into_iter().map(|(n, _)| n).collect();
    Some(Terciles {
        bottom: ids[..c1].to_vec(),
        middle: ids[c1..c2].to_vec(),
        top: ids[c2..].to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FactorKind {
    Mkt,
    Smb,
    HmlEmis,
    Wml7,
    Wml30,
    Rev,
    Liq,
    Stake,
}

impl FactorKind {
    pub const ALL: [FactorKind; 8] = [
        FactorKind::Mkt,
        FactorKind::Smb,
        FactorKind::HmlEmis,
        FactorKind::Wml7,
        FactorKind::Wml30,
        FactorKind::Rev,
        FactorKind::Liq,
        FactorKind::Stake,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FactorKind::Mkt => "MKT",
            FactorKind::Smb => "SMB",
            FactorKind::HmlEmis => "HML_EMIS",
            FactorKind::Wml7 => "WML7",
            FactorKind::Wml30 => "WML30",
            FactorKind::Rev => "REV",
            FactorKind::Liq => "LIQ",
            FactorKind::Stake => "STAKE",
        }
    }

    /// Sort characteristic and long leg; `None` for the market factor.
    pub fn sort(self) -> Option<(Characteristic, Leg)> {
        match self {
            FactorKind::Mkt => None,
            FactorKind::Smb => Some((Characteristic::Mcap, Leg::Bottom)),
            FactorKind::HmlEmis => Some((Characteristic::Ey, Leg::Top)),
            FactorKind::Wml7 => Some((Characteristic::Mom7, Leg::Top)),
            FactorKind::Wml30 => Some((Characteristic::Mom30, Leg::Top)),
            FactorKind::Rev => Some((Characteristic::Rev, Leg::Bottom)),
            FactorKind::Liq => Some((Characteristic::Liq, Leg::Bottom)),
            FactorKind::Stake => Some((Characteristic::Stake, Leg::Top)),
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FactorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == upper)
            .ok_or_else(|| Error::Config(format!("unknown factor `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FactorOptions {
    pub denomination: Denomination,
    pub convention: TercileConvention,
}

/// Equal-weighted tercile portfolio returns for one sort characteristic.
#[derive(Debug, Clone)]
pub struct TercilePortfolios {
    pub sort: Characteristic,
    pub dates: Vec<NaiveDate>,
    /// Indexed by [`Leg`]: bottom, middle, top.
    pub legs: [Vec<Option<f64>>; 3],
    /// Members with a present return, per day and leg.
    pub counts: Vec<[usize; 3]>,
}

impl TercilePortfolios {
    pub fn leg(&self, leg: Leg) -> &[Option<f64>] {
        &self.legs[leg.index()]
    }

    /// `long − short`, present only when both legs are.
    pub fn long_short(&self, name: &str, long: Leg, short: Leg) -> FactorSeries {
        let returns = self
            .leg(long)
            .iter()
            .zip(self.leg(short))
            .map(|(l, s)| Some((*l)? - (*s)?))
            .collect();
        FactorSeries {
            name: name.to_string(),
            dates: self.dates.clone(),
            returns,
            sort: Some(self.sort),
            long: Some(long),
            short: Some(short),
            long_counts: self.counts.iter().map(|c| c[long.index()]).collect(),
            short_counts: self.counts.iter().map(|c| c[short.index()]).collect(),
        }
    }
}

/// Sort eligible subnets each day on the lagged characteristic and average
/// member returns within each tercile.
pub fn tercile_portfolios(
    chr: &CharacteristicMatrix,
    panel: &ReturnPanel,
    opts: &FactorOptions,
) -> Result<TercilePortfolios> {
    let (nd, ns) = (panel.axis.n_dates(), panel.axis.n_subnets());
    if chr.values.n_dates() != nd || chr.values.n_subnets() != ns {
        return Err(Error::Domain(format!("{} is not aligned with the panel", chr.name)));
    }
    let returns = panel.returns(opts.denomination);
    let mut legs: [Vec<Option<f64>>; 3] = [vec![None; nd], vec![None; nd], vec![None; nd]];
    let mut counts = vec![[0usize; 3]; nd];
    let mut pairs = Vec::with_capacity(ns);
    for t in 0..nd {
        pairs.clear();
        for i in 0..ns {
            if !panel.eligible(t, i) {
                continue;
            }
            if let Some(v) = chr.value(t, i) {
                pairs.push((panel.axis.netuids[i], v));
            }
        }
        let Some(terciles) = tercile_sort(&pairs, opts.convention) else {
            continue;
        };
        for leg in Leg::ALL {
            let mut members: Vec<u32> = terciles.leg(leg).to_vec();
            members.sort_unstable();
            let rets: Vec<f64> = members
                .iter()
                .filter_map(|n| returns.value(t, panel.axis.subnet_index(*n).expect("member of axis")))
                .collect();
            counts[t][leg.index()] = rets.len();
            legs[leg.index()][t] = moments::mean(&rets);
        }
    }
    Ok(TercilePortfolios {
        sort: chr.name,
        dates: panel.axis.dates.clone(),
        legs,
        counts,
    })
}

/// Named daily return series with its construction metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorSeries {
    pub name: String,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<Option<f64>>,
    pub sort: Option<Characteristic>,
    pub long: Option<Leg>,
    pub short: Option<Leg>,
    pub long_counts: Vec<usize>,
    pub short_counts: Vec<usize>,
}

impl FactorSeries {
    /// Plain series without leg metadata.
    pub fn from_returns(name: &str, dates: Vec<NaiveDate>, returns: Vec<Option<f64>>) -> Self {
        let n = returns.len();
        Self {
            name: name.to_string(),
            dates,
            returns,
            sort: None,
            long: None,
            short: None,
            long_counts: vec![0; n],
            short_counts: vec![0; n],
        }
    }

    pub fn present(&self) -> Vec<f64> {
        self.returns.iter().flatten().copied().collect()
    }

    pub fn n_present(&self) -> usize {
        self.returns.iter().filter(|r| r.is_some()).count()
    }

    pub fn value_on(&self, date: NaiveDate) -> Option<f64> {
        let first = *self.dates.first()?;
        let k = usize::try_from((date - first).num_days()).ok()?;
        self.returns.get(k).copied().flatten()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        factors_csv(std::slice::from_ref(self))
    }
}

/// `date,<name>,...` with one column per series; the series must share dates.
pub fn factors_csv(series: &[FactorSeries]) -> Result<Vec<u8>> {
    let Some(first) = series.first() else {
        return Ok(b"date\n".to_vec());
    };
    if series.iter().any(|s| s.dates != first.dates) {
        return Err(Error::Domain("factor series are not on a common calendar".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["date".to_string()];
    header.extend(series.iter().map(|s| s.name.clone()));
    w.write_record(&header)?;
    for (t, d) in first.dates.iter().enumerate() {
        let mut rec = vec![d.to_string()];
        rec.extend(
            series
                .iter()
                .map(|s| s.returns[t].map(|x| x.to_string()).unwrap_or_default()),
        );
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::io("<factor csv>", e.into_error()))
}

/// Inverse of [`factors_csv`]: blank cells are missing returns.
pub fn parse_factors_csv(bytes: &[u8]) -> Result<Vec<FactorSeries>> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers()?.clone();
    if header.get(0) != Some("date") {
        return Err(Error::Schema {
            line: 1,
            message: "first column must be `date`".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut dates = Vec::new();
    let mut cols: Vec<Vec<Option<f64>>> = vec![Vec::new(); names.len()];
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = k as u64 + 2;
        let bad = |m: String| Error::Schema { line, message: m };
        let d = rec.get(0).unwrap_or_default();
        dates.push(d.parse::<NaiveDate>().map_err(|e| bad(format!("date `{d}`: {e}")))?);
        for (j, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(j + 1).unwrap_or_default().trim();
            col.push(if cell.is_empty() {
                None
            } else {
                Some(
                    cell.parse::<f64>()
                        .map_err(|e| bad(format!("{}: `{cell}`: {e}", names[j])))?,
                )
            });
        }
    }
    Ok(names
        .iter()
        .zip(cols)
        .map(|(n, c)| FactorSeries::from_returns(n, dates.clone(), c))
        .collect())
}

/// Long-short factor from a lagged characteristic using the factor's sign convention.
pub fn build_factor(
    kind: FactorKind,
    chr: &CharacteristicMatrix,
    panel: &ReturnPanel,
    opts: &FactorOptions,
) -> Result<FactorSeries> {
    let Some((sort, long)) = kind.sort() else {
        return Ok(market_factor(panel, opts.denomination));
    };
    if chr.name != sort {
        return Err(Error::Domain(format!("{kind} sorts on {sort}, not {}", chr.name)));
    }
    let p = tercile_portfolios(chr, panel, opts)?;
    Ok(p.long_short(kind.as_str(), long, long.opposite()))
}

/// Equal-weighted mean of eligible subnets' returns in the chosen denomination.
pub fn market_factor(panel: &ReturnPanel, denomination: Denomination) -> FactorSeries {
    let returns = panel.returns(denomination);
    let (nd, ns) = (panel.axis.n_dates(), panel.axis.n_subnets());
    let mut out = Vec::with_capacity(nd);
    let mut counts = Vec::with_capacity(nd);
    for t in 0..nd {
        let rets: Vec<f64> = (0..ns)
            .filter(|&i| panel.eligible(t, i))
            .filter_map(|i| returns.value(t, i))
            .collect();
        counts.push(rets.len());
        out.push(moments::mean(&rets));
    }
    let name = match denomination {
        Denomination::Tao => "MKT",
        Denomination::Usd => "MKT_USD",
    };
    let mut s = FactorSeries::from_returns(name, panel.axis.dates.clone(), out);
    s.long_counts = counts;
    s
}

/// All eight factors in canonical order.
pub fn build_all_factors(
    history: &SubnetHistory,
    panel: &ReturnPanel,
    opts: &FactorOptions,
) -> Result<Vec<FactorSeries>> {
    FactorKind::ALL
        .iter()
        .map(|kind| match kind.sort() {
            None => Ok(market_factor(panel, opts.denomination)),
            Some((c, _)) => {
                let chr = characteristic(c, history, panel)?;
                build_factor(*kind, &chr, panel, opts)
            }
        })
        .collect()
}

/// Daily mean with arithmetic annualization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnualizedRow {
    pub label: String,
    pub mean: f64,
    pub ann_return: f64,
    pub ann_std: f64,
    pub sharpe: f64,
    pub n: usize,
}

impl AnnualizedRow {
    pub fn from_series(label: &str, xs: &[f64]) -> Result<Self> {
        let mean = moments::mean(xs).ok_or_else(|| Error::NoEligibleObservations(format!("{label}: empty series")))?;
        let std = moments::sample_std(xs)
            .ok_or_else(|| Error::InsufficientData(format!("{label}: fewer than two observations")))?;
        let sharpe = if std > 0.0 {
            moments::annualized_sharpe(mean, std)
        } else if mean == 0.0 {
            0.0
        } else {
            return Err(Error::ZeroVariance(label.to_string()));
        };
        Ok(Self {
            label: label.to_string(),
            mean,
            ann_return: mean * DAYS_PER_YEAR,
            ann_std: std * DAYS_PER_YEAR.sqrt(),
            sharpe,
            n: xs.len(),
        })
    }
}

/// Bottom, middle, top and long-short rows for one factor's sort.
pub fn tercile_table(
    kind: FactorKind,
    chr: &CharacteristicMatrix,
    panel: &ReturnPanel,
    opts: &FactorOptions,
) -> Result<Vec<AnnualizedRow>> {
    let Some((sort, long)) = kind.sort() else {
        return Err(Error::Domain("the market factor has no tercile sort".into()));
    };
    if chr.name != sort {
        return Err(Error::Domain(format!("{kind} sorts on {sort}, not {}", chr.name)));
    }
    let p = tercile_portfolios(chr, panel, opts)?;
    let ls = p.long_short(kind.as_str(), long, long.opposite());
    // legs and spread share the days on which the spread exists
    let days: Vec<usize> = (0..ls.returns.len()).filter(|t| ls.returns[*t].is_some()).collect();
    let mut rows = Vec::with_capacity(4);
    for (leg, label) in [(Leg::Bottom, "bottom"), (Leg::Middle, "middle"), (Leg::Top, "top")] {
        let xs: Vec<f64> = days.iter().filter_map(|t| p.leg(leg)[*t]).collect();
        rows.push(AnnualizedRow::from_series(label, &xs)?);
    }
    rows.push(AnnualizedRow::from_series(kind.as_str(), &ls.present())?);
    Ok(rows)
}

/// Pearson correlations over the dates where both series are present.
pub fn correlation_matrix(series: &[FactorSeries]) -> Vec<Vec<Option<f64>>> {
    let n = series.len();
    let mut out = vec![vec![None; n]; n];
    for a in 0..n {
        for b in 0..n {
            let (x, y): (Vec<f64>, Vec<f64>) = series[a]
                .returns
                .iter()
                .zip(&series[b].returns)
                .filter_map(|(u, v)| Some(((*u)?, (*v)?)))
                .unzip();
            out[a][b] = pearson(&x, &y);
        }
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let mx = moments::mean(x)?;
    let my = moments::mean(y)?;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DateMatrix, PanelAxis};

    fn pairs(vals: &[f64]) -> Vec<(u32, f64)> {
        vals.iter().enumerate().map(|(i, v)| (i as u32 + 1, *v)).collect()
    }

    #[test]
    fn nine_values() {
        let t = tercile_sort(&pairs(&[1., 2., 3., 4., 5., 6., 7., 8., 9.]), TercileConvention::Ceil).unwrap();
        assert_eq!(t.bottom, vec![1, 2, 3]);
        assert_eq!(t.middle, vec![4, 5, 6]);
        assert_eq!(t.top, vec![7, 8, 9]);
    }

    #[test]
    fn seven_values_sizes() {
        let v = pairs(&[7., 6., 5., 4., 3., 2., 1.]);
        assert_eq!(tercile_sort(&v, TercileConvention::Ceil).unwrap().sizes(), [3, 2, 2]);
        assert_eq!(tercile_sort(&v, TercileConvention::Floor).unwrap().sizes(), [2, 2, 3]);
    }

    #[test]
    fn ties_by_netuid() {
        let v: Vec<(u32, f64)> = [9, 3, 7, 1, 5, 2, 8, 4, 6].iter().map(|n| (*n, 0.5)).collect();
        let t = tercile_sort(&v, TercileConvention::Ceil).unwrap();
        assert_eq!(t.bottom, vec![1, 2, 3]);
        assert_eq!(t.top, vec![7, 8, 9]);
    }

    #[test]
    fn too_few_values() {
        assert!(tercile_sort(&pairs(&[1., 2.]), TercileConvention::Ceil).is_none());
        assert!(tercile_sort(&pairs(&[1., f64::NAN, 2.]), TercileConvention::Ceil).is_none());
    }

    #[test]
    fn factor_csv_round_trip() {
        let d0 = NaiveDate::from_ymd_opt(2025, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..3).map(|k| d0 + chrono::Days::new(k)).collect();
        let a = FactorSeries::from_returns("A", dates.clone(), vec![Some(0.1), None, Some(-1.0 / 3.0)]);
        let b = FactorSeries::from_returns("B", dates, vec![None, Some(2e-17), Some(0.0)]);
        let bytes = factors_csv(&[a.clone(), b.clone()]).unwrap();
        let back = parse_factors_csv(&bytes).unwrap();
        assert_eq!(back, vec![a, b]);
        assert_eq!(factors_csv(&back).unwrap(), bytes);
    }

    #[test]
    fn factor_names_parse() {
        for k in FactorKind::ALL {
            assert_eq!(k.as_str().parse::<FactorKind>().unwrap(), k);
        }
    }

    fn toy_panel(returns: &[[Option<f64>; 6]]) -> ReturnPanel {
        let axis = PanelAxis::new(
            "2025-05-01".parse().unwrap(),
            NaiveDate::from_ymd_opt(2025, 5, returns.len() as u32).unwrap(),
            (1..=6).collect(),
        );
        let nd = returns.len();
        let mut r = DateMatrix::filled(nd, 6, None);
        for (t, row) in returns.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                r.set(t, i, *v);
            }
        }
        ReturnPanel {
            axis,
            r_usd: r.clone(),
            r_tao: r,
            eligibility: DateMatrix::filled(nd, 6, true),
            lifecycle: DateMatrix::filled(nd, 6, Some(0)),
            fx_returns: vec![None; nd],
            quarantined: Vec::new(),
        }
    }

    fn chr(name: Characteristic, vals: &[f64; 6], nd: usize) -> CharacteristicMatrix {
        let mut m = DateMatrix::filled(nd, 6, None);
        for t in 0..nd {
            for (i, v) in vals.iter().enumerate() {
                m.set(t, i, Some(*v));
            }
        }
        CharacteristicMatrix {
            name,
            values: m,
            masked: 0,
        }
    }

    #[test]
    fn identical_returns_give_zero_factor() {
        let p = toy_panel(&[[Some(0.03); 6]]);
        let c = chr(Characteristic::Mcap, &[5., 1., 4., 2., 6., 3.], 1);
        let f = build_factor(FactorKind::Smb, &c, &p, &FactorOptions::default()).unwrap();
        assert_eq!(f.returns, vec![Some(0.0)]);
        assert_eq!(f.long_counts, vec![2]);
    }

    #[test]
    fn smb_sign_and_legs() {
        let p = toy_panel(&[[Some(0.1), Some(0.2), Some(0.3), Some(0.4), Some(0.5), Some(0.6)]]);
        // netuids 1,2 smallest; 5,6 largest
        let c = chr(Characteristic::Mcap, &[1., 2., 3., 4., 5., 6.], 1);
        let f = build_factor(FactorKind::Smb, &c, &p, &FactorOptions::default()).unwrap();
        assert!((f.returns[0].unwrap() - (0.15 - 0.55)).abs() < 1e-15);
        let c = chr(Characteristic::Mom7, &[1., 2., 3., 4., 5., 6.], 1);
        let f = build_factor(FactorKind::Wml7, &c, &p, &FactorOptions::default()).unwrap();
        assert!((f.returns[0].unwrap() - 0.4).abs() < 1e-15);
        assert!(build_factor(
            FactorKind::Wml7,
            &chr(Characteristic::Ey, &[0.; 6], 1),
            &p,
            &FactorOptions::default()
        )
        .is_err());
    }

    #[test]
    fn empty_leg_means_missing() {
        let p = toy_panel(&[[None, None, Some(0.3), Some(0.4), Some(0.5), Some(0.6)]]);
        let c = chr(Characteristic::Mcap, &[1., 2., 3., 4., 5., 6.], 1);
        let f = build_factor(FactorKind::Smb, &c, &p, &FactorOptions::default()).unwrap();
        assert_eq!(f.returns, vec![None]);
    }

    #[test]
    fn market_single_subnet() {
        let mut p = toy_panel(&[[Some(0.07), Some(0.01), None, None, None, None]]);
        p.eligibility.set(0, 1, false);
        let m = market_factor(&p, Denomination::Tao);
        assert_eq!(m.returns, vec![Some(0.07)]);
    }

    #[test]
    fn annualization_identity() {
        // a printed row: mean 0.87, std 111.7/√365 reproduces Sharpe ≈ 2.84
        let std = 1.117 / DAYS_PER_YEAR.sqrt();
        let s = moments::annualized_sharpe(0.0087, std);
        assert!((s - 2.84).abs() < 0.01);
        let row = AnnualizedRow::from_series("z", &[0.01, -0.01, 0.02, -0.02]).unwrap();
        assert_eq!(row.ann_return, 0.0);
        assert_eq!(row.sharpe, 0.0);
    }

    #[test]
    fn correlation_of_negation() {
        let d: Vec<NaiveDate> = (1..=4).map(|k| NaiveDate::from_ymd_opt(2025, 1, k).unwrap()).collect();
        let a = FactorSeries::from_returns("A", d.clone(), vec![Some(0.1), Some(-0.2), None, Some(0.3)]);
        let b = FactorSeries::from_returns("B", d, vec![Some(-0.1), Some(0.2), Some(1.0), Some(-0.3)]);
        let c = correlation_matrix(&[a, b]);
        assert!((c[0][1].unwrap() + 1.0).abs() < 1e-12);
        assert!((c[1][1].unwrap() - 1.0).abs() < 1e-12);
    }
}
