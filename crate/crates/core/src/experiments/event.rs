//! Level-shift regressions around an event date and the placebo scan.
//!
//! A window of `w` days covers `[event - w, event - 1]` before and
//! `[event, event + w - 1]` after; the event day itself is on the post side.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::econometrics::ols::ols;
use crate::error::{Error, Result};
use crate::factors::FactorSeries;
use crate::moments;

pub const DEFAULT_WINDOWS: [usize; 4] = [30, 45, 60, 90];
pub const DEFAULT_PLACEBO_OFFSETS: [i64; 6] = [-90, -60, -30, 30, 60, 90];
pub const DEFAULT_PLACEBO_WINDOW: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventStudyOptions {
    pub hac_lags: usize,
    /// Include the market factor as a control.
    pub market_control: bool,
}

impl Default for EventStudyOptions {
    fn default() -> Self {
        Self {
            hac_lags: 5,
            market_control: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventFit {
    pub pre_mean: f64,
    pub post_mean: f64,
    pub ratio: Option<f64>,
    pub intercept: f64,
    /// Coefficient on the post-event dummy.
    pub beta: f64,
    pub beta_nw_se: f64,
    pub beta_nw_t: f64,
    pub p_value: f64,
    /// Market-factor loading, when controlled for.
    pub gamma: Option<f64>,
    pub n_pre: usize,
    pub n_post: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStudyResult {
    /// `None` for the full-sample row.
    pub window: Option<usize>,
    pub event_date: NaiveDate,
    pub fit: Option<EventFit>,
    /// Why the row is unavailable.
    pub note: Option<String>,
}

fn by_date(s: &FactorSeries) -> BTreeMap<NaiveDate, f64> {
    s.dates
        .iter()
        .zip(&s.returns)
        .filter_map(|(d, r)| Some((*d, (*r)?)))
        .collect()
}

fn fit_range(
    smb: &BTreeMap<NaiveDate, f64>,
    mkt: &BTreeMap<NaiveDate, f64>,
    event: NaiveDate,
    from: NaiveDate,
    to: NaiveDate,
    opts: &EventStudyOptions,
) -> Result<EventFit> {
    let mut y = Vec::new();
    let mut post = Vec::new();
    let mut m = Vec::new();
    for (d, r) in smb.range(from..=to) {
        let mk = mkt.get(d).copied();
        if opts.market_control && mk.is_none() {
            continue;
        }
        y.push(*r);
        post.push(if *d >= event { 1.0 } else { 0.0 });
        m.push(mk.unwrap_or(0.0));
    }
    let pre: Vec<f64> = y
        .iter()
        .zip(&post)
        .filter(|(_, p)| **p == 0.0)
        .map(|(v, _)| *v)
        .collect();
    let aft: Vec<f64> = y
        .iter()
        .zip(&post)
        .filter(|(_, p)| **p == 1.0)
        .map(|(v, _)| *v)
        .collect();
    let (Some(pre_mean), Some(post_mean)) = (moments::mean(&pre), moments::mean(&aft)) else {
        return Err(Error::InsufficientData(
            "one side of the event has no observations".into(),
        ));
    };
    let reg = if opts.market_control {
        ols(&y, &[post, m], &["post", "mkt"], true)?
    } else {
        ols(&y, &[post], &["post"], true)?
    };
    let reg = reg.with_hac(opts.hac_lags)?;
    let j = reg.index("post").expect("post regressor");
    let se = reg.hac_se.as_ref().expect("hac attached")[j];
    // without a control the dummy regression is the two side means; use them
    // directly so equal sides give exactly zero
    let (intercept, beta) = if opts.market_control {
        (reg.coefficients[0], reg.coefficients[j])
    } else {
        (pre_mean, post_mean - pre_mean)
    };
    let t = beta / se;
    Ok(EventFit {
        pre_mean,
        post_mean,
        ratio: (pre_mean != 0.0).then(|| post_mean / pre_mean),
        intercept,
        beta,
        beta_nw_se: se,
        beta_nw_t: t,
        p_value: crate::econometrics::p_normal(t),
        gamma: reg.coef("mkt"),
        n_pre: pre.len(),
        n_post: aft.len(),
    })
}

fn window_row(
    smb: &BTreeMap<NaiveDate, f64>,
    mkt: &BTreeMap<NaiveDate, f64>,
    span: (NaiveDate, NaiveDate),
    event: NaiveDate,
    window: usize,
    opts: &EventStudyOptions,
) -> EventStudyResult {
    let unavailable = |note: String| EventStudyResult {
        window: Some(window),
        event_date: event,
        fit: None,
        note: Some(note),
    };
    if window == 0 {
        return unavailable("window must be at least one day".into());
    }
    let from = event - Days::new(window as u64);
    let to = event + Days::new(window as u64 - 1);
    if from < span.0 || to > span.1 {
        return unavailable(format!("window {from}..{to} exceeds the sample {}..{}", span.0, span.1));
    }
    match fit_range(smb, mkt, event, from, to, opts) {
        Ok(fit) => EventStudyResult {
            window: Some(window),
            event_date: event,
            fit: Some(fit),
            note: None,
        },
        Err(e) => unavailable(e.to_string()),
    }
}

fn span(s: &FactorSeries) -> Result<(NaiveDate, NaiveDate)> {
    match (s.dates.first(), s.dates.last()) {
        (Some(a), Some(b)) => Ok((*a, *b)),
        _ => Err(Error::InsufficientData(format!("{} is empty", s.name))),
    }
}

/// One row per window plus a final full-sample row.
pub fn halving_event_study(
    smb: &FactorSeries,
    mkt: &FactorSeries,
    event_date: NaiveDate,
    windows: &[usize],
    opts: &EventStudyOptions,
) -> Result<Vec<EventStudyResult>> {
    let sample = span(smb)?;
    if event_date <= sample.0 || event_date > sample.1 {
        return Err(Error::Domain(format!(
            "event date {event_date} is not inside the sample"
        )));
    }
    let (s, m) = (by_date(smb), by_date(mkt));
    let mut rows: Vec<EventStudyResult> = windows
        .iter()
        .map(|w| window_row(&s, &m, sample, event_date, *w, opts))
        .collect();
    let full = fit_range(&s, &m, event_date, sample.0, sample.1, opts)?;
    rows.push(EventStudyResult {
        window: None,
        event_date,
        fit: Some(full),
        note: None,
    });
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaceboRow {
    pub offset_days: i64,
    pub result: EventStudyResult,
    /// Placebo dummy larger in magnitude than the actual event's.
    pub exceeds_actual: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaceboScan {
    pub actual: EventStudyResult,
    pub placebos: Vec<PlaceboRow>,
}

/// The same regression at shifted event dates.
pub fn placebo_scan(
    smb: &FactorSeries,
    mkt: &FactorSeries,
    event_date: NaiveDate,
    offsets: &[i64],
    window: usize,
    opts: &EventStudyOptions,
) -> Result<PlaceboScan> {
    let sample = span(smb)?;
    let (s, m) = (by_date(smb), by_date(mkt));
    let actual = window_row(&s, &m, sample, event_date, window, opts);
    let actual_beta = actual.fit.as_ref().map(|f| f.beta.abs());
    let placebos = offsets
        .iter()
        .map(|off| {
            let date = if *off >= 0 {
                event_date + Days::new(*off as u64)
            } else {
                event_date - Days::new(off.unsigned_abs())
            };
            let result = window_row(&s, &m, sample, date, window, opts);
            let exceeds_actual = match (&result.fit, actual_beta) {
                (Some(f), Some(a)) => f.beta.abs() > a,
                _ => false,
            };
            PlaceboRow {
                offset_days: *off,
                result,
                exceeds_actual,
            }
        })
        .collect();
    Ok(PlaceboScan { actual, placebos })
}

/// Compounded cumulative return and trailing mean over `window` present days.
pub fn cumulative_and_rolling(s: &FactorSeries, window: usize) -> Vec<(NaiveDate, f64, Option<f64>)> {
    let mut growth = 1.0;
    let mut recent: Vec<f64> = Vec::new();
    let mut out = Vec::new();
    for (d, r) in s.dates.iter().zip(&s.returns) {
        if let Some(r) = r {
            growth *= 1.0 + r;
            recent.push(*r);
        }
        let rolling =
            (recent.len() >= window).then(|| moments::mean(&recent[recent.len() - window..]).expect("window > 0"));
        out.push((*d, growth - 1.0, rolling));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(name: &str, xs: Vec<f64>) -> FactorSeries {
        let d0 = NaiveDate::from_ymd_opt(2025, 1, 1).unwrap();
        let dates = (0..xs.len() as u64).map(|k| d0 + Days::new(k)).collect();
        FactorSeries::from_returns(name, dates, xs.into_iter().map(Some).collect())
    }

    fn event() -> NaiveDate {
        NaiveDate::from_ymd_opt(2025, 1, 1).unwrap() + Days::new(100)
    }

    #[test]
    fn constant_smb_zero_market() {
        let smb = series("SMB", vec![0.01; 200]);
        let mkt = series("MKT", vec![0.0; 200]);
        let opts = EventStudyOptions {
            market_control: false,
            ..Default::default()
        };
        let rows = halving_event_study(&smb, &mkt, event(), &[30], &opts).unwrap();
        let f = rows[0].fit.as_ref().unwrap();
        assert_eq!(f.beta, 0.0);
        assert_eq!((f.n_pre, f.n_post), (30, 30));
    }

    #[test]
    fn dummy_equals_mean_difference_without_control() {
        let xs: Vec<f64> = (0..200)
            .map(|k| 0.01 * ((k * 13 % 7) as f64 - 3.0) + if k >= 100 { -0.004 } else { 0.0 })
            .collect();
        let smb = series("SMB", xs);
        let mkt = series("MKT", (0..200).map(|k| 0.002 * (k as f64).cos()).collect());
        let opts = EventStudyOptions {
            market_control: false,
            ..Default::default()
        };
        let rows = halving_event_study(&smb, &mkt, event(), &[45, 60], &opts).unwrap();
        for r in &rows {
            let f = r.fit.as_ref().unwrap();
            assert!((f.beta - (f.post_mean - f.pre_mean)).abs() < 1e-14);
        }
        assert_eq!(rows.last().unwrap().window, None);
        let full = rows.last().unwrap().fit.as_ref().unwrap();
        assert_eq!((full.n_pre, full.n_post), (100, 100));
    }

    #[test]
    fn window_beyond_sample_unavailable() {
        let smb = series("SMB", (0..150).map(|k| (k as f64).sin() * 0.01).collect());
        let mkt = series("MKT", (0..150).map(|k| (k as f64).cos() * 0.01).collect());
        let rows = halving_event_study(&smb, &mkt, event(), &[30, 60], &EventStudyOptions::default()).unwrap();
        assert!(rows[0].fit.is_some());
        assert!(rows[1].fit.is_none() && rows[1].note.is_some());
    }

    #[test]
    fn placebo_offset_zero_reproduces_actual() {
        let smb = series("SMB", (0..300).map(|k| ((k * 7 % 13) as f64 - 6.0) * 0.002).collect());
        let mkt = series("MKT", (0..300).map(|k| (k as f64 * 0.7).sin() * 0.01).collect());
        let e = NaiveDate::from_ymd_opt(2025, 1, 1).unwrap() + Days::new(150);
        let scan = placebo_scan(&smb, &mkt, e, &[0, -90, 90], 60, &EventStudyOptions::default()).unwrap();
        assert_eq!(scan.placebos[0].result, scan.actual);
        assert!(!scan.placebos[0].exceeds_actual);
        assert!(scan.placebos.iter().all(|p| p.result.fit.is_some()));
    }

    #[test]
    fn cumulative_compounds() {
        let s = series("SMB", vec![0.1, 0.1, -0.5]);
        let c = cumulative_and_rolling(&s, 2);
        assert!((c[1].1 - 0.21).abs() < 1e-12);
        assert_eq!(c[0].2, None);
        assert!((c[2].2.unwrap() + 0.2).abs() < 1e-12);
    }
}
