//! Dense date × subnet matrices shared by the panel, characteristics and factors.

use std::collections::HashMap;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contiguous daily calendar and the ordered list of subnets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelAxis {
    pub dates: Vec<NaiveDate>,
    pub netuids: Vec<u32>,
    #[serde(skip)]
    netuid_index: HashMap<u32, usize>,
}

impl PanelAxis {
    /// Daily calendar from `first` to `last` inclusive; `netuids` are sorted and deduplicated.
    pub fn new(first: NaiveDate, last: NaiveDate, mut netuids: Vec<u32>) -> Self {
        let mut dates = Vec::new();
        let mut d = first;
        while d <= last {
            dates.push(d);
            d = d + Days::new(1);
        }
        netuids.sort_unstable();
        netuids.dedup();
        let netuid_index = netuids.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        Self {
            dates,
            netuids,
            netuid_index,
        }
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_subnets(&self) -> usize {
        self.netuids.len()
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        let first = *self.dates.first()?;
        let k = (date - first).num_days();
        (k >= 0 && (k as usize) < self.dates.len()).then_some(k as usize)
    }

    pub fn subnet_index(&self, netuid: u32) -> Option<usize> {
        self.netuid_index.get(&netuid).copied()
    }
}

/// Row-major (date-major) matrix over a [`PanelAxis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DateMatrix<T> {
    n_dates: usize,
    n_subnets: usize,
    data: Vec<T>,
}

impl<T: Clone> DateMatrix<T> {
    pub fn filled(n_dates: usize, n_subnets: usize, value: T) -> Self {
        Self {
            n_dates,
            n_subnets,
            data: vec![value; n_dates * n_subnets],
        }
    }
}

impl<T> DateMatrix<T> {
    pub fn n_dates(&self) -> usize {
        self.n_dates
    }

    pub fn n_subnets(&self) -> usize {
        self.n_subnets
    }

    pub fn get(&self, t: usize, i: usize) -> &T {
        &self.data[t * self.n_subnets + i]
    }

    pub fn set(&mut self, t: usize, i: usize, value: T) {
        self.data[t * self.n_subnets + i] = value;
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.n_subnets..(t + 1) * self.n_subnets]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> DateMatrix<U> {
        DateMatrix {
            n_dates: self.n_dates,
            n_subnets: self.n_subnets,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }
}

impl DateMatrix<Option<f64>> {
    pub fn value(&self, t: usize, i: usize) -> Option<f64> {
        *self.get(t, i)
    }

    pub fn count_present(&self) -> usize {
        self.data.iter().filter(|v| v.is_some()).count()
    }
}

/// Wide CSV: `date,<netuid>,...` with empty cells for missing values.
pub fn wide_csv<T>(axis: &PanelAxis, m: &DateMatrix<T>, fmt: impl Fn(&T) -> String) -> Result<Vec<u8>> {
    if m.n_dates() != axis.n_dates() || m.n_subnets() != axis.n_subnets() {
        return Err(Error::Domain("matrix does not match its axis".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["date".to_string()];
    header.extend(axis.netuids.iter().map(u32::to_string));
    w.write_record(&header)?;
    for (t, date) in axis.dates.iter().enumerate() {
        let mut rec = vec![date.to_string()];
        rec.extend(m.row(t).iter().map(&fmt));
        w.write_record(&rec)?;
    }
    w.into_inner().map_err(|e| Error::io("<wide csv>", e.into_error()))
}

pub fn fmt_opt(v: &Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_indexing() {
        let a = PanelAxis::new(
            "2025-01-30".parse().unwrap(),
            "2025-02-02".parse().unwrap(),
            vec![5, 1, 5, 3],
        );
        assert_eq!(a.n_dates(), 4);
        assert_eq!(a.netuids, vec![1, 3, 5]);
        assert_eq!(a.date_index("2025-02-01".parse().unwrap()), Some(2));
        assert_eq!(a.date_index("2025-02-03".parse().unwrap()), None);
        assert_eq!(a.subnet_index(5), Some(2));
    }

    #[test]
    fn wide_export() {
        let a = PanelAxis::new("2025-01-01".parse().unwrap(), "2025-01-02".parse().unwrap(), vec![7, 9]);
        let mut m = DateMatrix::filled(2, 2, None);
        m.set(1, 0, Some(0.5));
        let s = String::from_utf8(wide_csv(&a, &m, fmt_opt).unwrap()).unwrap();
        assert_eq!(s, "date,7,9\n2025-01-01,,\n2025-01-02,0.5,\n");
    }
}
