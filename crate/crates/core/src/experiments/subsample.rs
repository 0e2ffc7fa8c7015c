use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factors::FactorSeries;
use crate::moments;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfStats {
    pub mean: Option<f64>,
    /// `mean / (std / √n)`; missing when the half has no dispersion.
    pub t: Option<f64>,
    pub n: usize,
}

impl HalfStats {
    fn of(xs: &[f64]) -> Self {
        let mean = moments::mean(xs);
        let t = match (mean, moments::sample_std(xs)) {
            (Some(m), Some(s)) if !moments::negligible_spread(m, s) => Some(m / (s / (xs.len() as f64).sqrt())),
            _ => None,
        };
        Self { mean, t, n: xs.len() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsampleRow {
    pub factor: String,
    pub full: HalfStats,
    pub first: HalfStats,
    pub second: HalfStats,
}

/// Per-factor statistics before `split_date` and from `split_date` on.
pub fn subsample_split(factors: &[FactorSeries], split_date: NaiveDate) -> Result<Vec<SubsampleRow>> {
    factors
        .iter()
        .map(|f| {
            let (first_day, last_day) = match (f.dates.first(), f.dates.last()) {
                (Some(a), Some(b)) => (*a, *b),
                _ => return Err(Error::Domain(format!("{} has no dates", f.name))),
            };
            if split_date <= first_day || split_date > last_day {
                return Err(Error::Domain(format!(
                    "split date {split_date} is outside {first_day}..{last_day}"
                )));
            }
            let mut before = Vec::new();
            let mut after = Vec::new();
            for (d, r) in f.dates.iter().zip(&f.returns) {
                if let Some(r) = r {
                    if *d < split_date {
                        before.push(*r);
                    } else {
                        after.push(*r);
                    }
                }
            }
            Ok(SubsampleRow {
                factor: f.name.clone(),
                full: HalfStats::of(&f.present()),
                first: HalfStats::of(&before),
                second: HalfStats::of(&after),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(xs: Vec<Option<f64>>) -> FactorSeries {
        let d0 = NaiveDate::from_ymd_opt(2025, 3, 1).unwrap();
        let dates = (0..xs.len() as u64).map(|k| d0 + chrono::Days::new(k)).collect();
        FactorSeries::from_returns("F", dates, xs)
    }

    #[test]
    fn zero_series() {
        let f = series(vec![Some(0.0); 10]);
        let rows = subsample_split(&[f], NaiveDate::from_ymd_opt(2025, 3, 6).unwrap()).unwrap();
        assert_eq!(rows[0].first.mean, Some(0.0));
        assert_eq!(rows[0].second.mean, Some(0.0));
        assert_eq!((rows[0].first.n, rows[0].second.n), (5, 5));
        assert_eq!(rows[0].first.t, None);
    }

    #[test]
    fn split_outside_sample() {
        let f = series(vec![Some(0.1); 4]);
        assert!(subsample_split(std::slice::from_ref(&f), NaiveDate::from_ymd_opt(2025, 3, 1).unwrap()).is_err());
        assert!(subsample_split(&[f], NaiveDate::from_ymd_opt(2025, 4, 1).unwrap()).is_err());
    }
}
