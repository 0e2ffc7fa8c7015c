use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Longest run of missing days that is forward-filled.
pub const MAX_FX_FILL_DAYS: i64 = 3;

/// Daily base-token/USD prices on a contiguous calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FxSeries {
    prices: BTreeMap<NaiveDate, f64>,
    filled: Vec<NaiveDate>,
}

#[derive(Debug, Deserialize, Serialize)]
struct FxRecord {
    date: NaiveDate,
    tao_usd: f64,
}

impl FxSeries {
    /// Validate observations and forward-fill short gaps.
    pub fn from_observations(obs: impl IntoIterator<Item = (NaiveDate, f64)>) -> Result<Self> {
        let mut raw = BTreeMap::new();
        for (date, price) in obs {
            if !(price.is_finite() && price > 0.0) {
                return Err(Error::Fx(format!("non-positive price {price} on {date}")));
            }
            if raw.insert(date, price).is_some() {
                return Err(Error::Fx(format!("more than one observation on {date}")));
            }
        }
        let mut prices = BTreeMap::new();
        let mut filled = Vec::new();
        let mut prev: Option<(NaiveDate, f64)> = None;
        for (&date, &price) in &raw {
            if let Some((pd, pp)) = prev {
                let gap = (date - pd).num_days() - 1;
                if gap > MAX_FX_FILL_DAYS {
                    return Err(Error::Fx(format!(
                        "{gap}-day gap between {pd} and {date} exceeds the {MAX_FX_FILL_DAYS}-day fill limit"
                    )));
                }
                for k in 1..=gap {
                    let d = pd + Days::new(k as u64);
                    log::warn!("fx: forward-filling {d} from {pd}");
                    prices.insert(d, pp);
                    filled.push(d);
                }
            }
            prices.insert(date, price);
            prev = Some((date, price));
        }
        Ok(Self { prices, filled })
    }

    /// Constant price over an inclusive date range.
    pub fn flat(start: NaiveDate, end: NaiveDate, price: f64) -> Result<Self> {
        let mut obs = Vec::new();
        let mut d = start;
        while d <= end {
            obs.push((d, price));
            d = d + Days::new(1);
        }
        Self::from_observations(obs)
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn price(&self, date: NaiveDate) -> Option<f64> {
        self.prices.get(&date).copied()
    }

    /// Simple return from the previous calendar day.
    pub fn return_on(&self, date: NaiveDate) -> Option<f64> {
        let prev = date.pred_opt()?;
        Some(self.price(date)? / self.price(prev)? - 1.0)
    }

    pub fn filled_dates(&self) -> &[NaiveDate] {
        &self.filled
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64)> + '_ {
        self.prices.iter().map(|(d, p)| (*d, *p))
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(["date", "tao_usd"])?;
        for (date, tao_usd) in self.iter() {
            w.serialize(FxRecord { date, tao_usd })?;
        }
        w.into_inner().map_err(|e| Error::io("<fx writer>", e.into_error()))
    }
}

pub fn parse_fx_csv(bytes: &[u8]) -> Result<FxSeries> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != ["date", "tao_usd"] {
        return Err(Error::Schema {
            line: 1,
            message: format!("expected header `date,tao_usd`, found `{}`", header.join(",")),
        });
    }
    let mut obs = Vec::new();
    for rec in reader.deserialize::<FxRecord>() {
        let rec = rec.map_err(|e| Error::Schema {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        obs.push((rec.date, rec.tao_usd));
    }
    FxSeries::from_observations(obs)
}

pub fn load_fx(path: &Path) -> Result<FxSeries> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_fx_csv(&bytes)
}
