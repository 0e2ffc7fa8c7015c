use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rao per base token.
pub const RAO_PER_TAO: f64 = 1e9;

pub const SNAPSHOT_HEADER: [&str; 9] = [
    "date",
    "netuid",
    "price_tao",
    "mcap_tao",
    "tau_reserve",
    "alpha_reserve",
    "alpha_staked",
    "emission_rao_per_day",
    "startup_mode",
];

/// One subnet-day observation in the normalized snapshot schema.
///
/// Startup-mode rows may leave the price and reserve fields empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSnapshotRow {
    pub date: NaiveDate,
    pub netuid: u32,
    pub price_tao: Option<f64>,
    pub mcap_tao: Option<f64>,
    pub tau_reserve: Option<f64>,
    pub alpha_reserve: Option<f64>,
    pub alpha_staked: Option<f64>,
    pub emission_rao_per_day: u64,
    pub startup_mode: bool,
}

impl RawSnapshotRow {
    pub fn emission_tao_per_day(&self) -> f64 {
        self.emission_rao_per_day as f64 / RAO_PER_TAO
    }

    /// Price usable for return construction: present, positive, not in startup.
    pub fn active_price(&self) -> Option<f64> {
        if self.startup_mode {
            return None;
        }
        self.price_tao.filter(|p| p.is_finite() && *p > 0.0)
    }

    /// Problems that make a non-startup row unusable for pricing.
    pub fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.startup_mode {
            return out;
        }
        match self.price_tao {
            None => out.push("missing price on a non-startup day".to_string()),
            Some(p) if !(p > 0.0) || !p.is_finite() => out.push(format!("non-positive price {p} on a non-startup day")),
            _ => {}
        }
        match self.tau_reserve {
            None => out.push("missing tau reserve on a non-startup day".to_string()),
            Some(t) if !(t > 0.0) || !t.is_finite() => {
                out.push(format!("non-positive tau reserve {t} on a non-startup day"))
            }
            _ => {}
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFormat {
    Csv,
    Json,
}

impl SnapshotFormat {
    pub fn from_path(path: &Path) -> SnapshotFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => SnapshotFormat::Json,
            _ => SnapshotFormat::Csv,
        }
    }
}

impl std::str::FromStr for SnapshotFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(SnapshotFormat::Csv),
            "json" => Ok(SnapshotFormat::Json),
            other => Err(Error::Config(format!("unknown snapshot format `{other}`"))),
        }
    }
}

pub fn load_snapshot(path: &Path, format: SnapshotFormat) -> Result<Vec<RawSnapshotRow>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    match format {
        SnapshotFormat::Csv => parse_snapshot_csv(&buf),
        SnapshotFormat::Json => parse_snapshot_json(&buf),
    }
}

pub fn parse_snapshot_csv(bytes: &[u8]) -> Result<Vec<RawSnapshotRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header = reader.headers()?.clone();
    let found: Vec<&str> = header.iter().collect();
    if found != SNAPSHOT_HEADER {
        return Err(Error::Schema {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                SNAPSHOT_HEADER.join(","),
                found.join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for record in reader.deserialize::<RawSnapshotRow>() {
        let row = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Schema {
                line,
                message: e.to_string(),
            }
        })?;
        rows.push(row);
    }
    check_unique(&rows)?;
    Ok(rows)
}

pub fn parse_snapshot_json(bytes: &[u8]) -> Result<Vec<RawSnapshotRow>> {
    let rows: Vec<RawSnapshotRow> = serde_json::from_slice(bytes).map_err(|e| Error::Schema {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    check_unique(&rows)?;
    Ok(rows)
}

fn check_unique(rows: &[RawSnapshotRow]) -> Result<()> {
    let mut seen = HashSet::with_capacity(rows.len());
    for r in rows {
        if !seen.insert((r.date, r.netuid)) {
            return Err(Error::DuplicateKey {
                date: r.date,
                netuid: r.netuid,
            });
        }
    }
    Ok(())
}

pub fn write_snapshot_csv<W: Write>(writer: W, rows: &[RawSnapshotRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(SNAPSHOT_HEADER)?;
    }
    w.flush().map_err(|e| Error::io("<snapshot writer>", e))?;
    Ok(())
}

pub fn snapshot_csv_bytes(rows: &[RawSnapshotRow]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_snapshot_csv(&mut buf, rows)?;
    Ok(buf)
}

pub fn write_snapshot(path: &Path, rows: &[RawSnapshotRow], format: SnapshotFormat) -> Result<()> {
    let bytes = match format {
        SnapshotFormat::Csv => snapshot_csv_bytes(rows)?,
        SnapshotFormat::Json => serde_json::to_vec_pretty(rows)?,
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
date,netuid,price_tao,mcap_tao,tau_reserve,alpha_reserve,alpha_staked,emission_rao_per_day,startup_mode
2025-02-14,1,0.1,2000,100,1000,1000,7200000000000,false
2025-02-14,2,,,,,,0,true
2025-02-15,1,0.11,2100,105,954.5,1040,7200000000000,false
";

    #[test]
    fn parses_three_rows() {
        let rows = parse_snapshot_csv(SAMPLE.as_bytes()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].price_tao, None);
        assert!(rows[1].startup_mode);
        assert_eq!(rows[0].emission_tao_per_day(), 7200.0);
        assert_eq!(rows[0].active_price(), Some(0.1));
        assert_eq!(rows[1].active_price(), None);
    }

    #[test]
    fn duplicate_key_is_named() {
        let dup = format!("{SAMPLE}2025-02-15,1,0.12,1,1,1,1,0,false\n");
        let err = parse_snapshot_csv(dup.as_bytes()).unwrap_err();
        match err {
            Error::DuplicateKey { date, netuid } => {
                assert_eq!(date.to_string(), "2025-02-15");
                assert_eq!(netuid, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string(dup.as_bytes()).contains("netuid=1"));
    }

    fn err_string(bytes: &[u8]) -> String {
        parse_snapshot_csv(bytes).unwrap_err().to_string()
    }

    #[test]
    fn schema_errors_carry_line_numbers() {
        let bad_header = SAMPLE.replace("startup_mode", "startup");
        assert!(matches!(
            parse_snapshot_csv(bad_header.as_bytes()),
            Err(Error::Schema { line: 1, .. })
        ));
        let bad_value = SAMPLE.replace("2025-02-15,1,0.11", "2025-02-15,1,abc");
        match parse_snapshot_csv(bad_value.as_bytes()) {
            Err(Error::Schema { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let bad_date = SAMPLE.replace("2025-02-14,2", "2025-02-30,2");
        assert!(matches!(
            parse_snapshot_csv(bad_date.as_bytes()),
            Err(Error::Schema { line: 3, .. })
        ));
    }

    #[test]
    fn json_matches_csv() {
        let rows = parse_snapshot_csv(SAMPLE.as_bytes()).unwrap();
        let json = serde_json::to_vec(&rows).unwrap();
        assert_eq!(parse_snapshot_json(&json).unwrap(), rows);
    }

    #[test]
    fn issues_flag_bad_active_rows() {
        let mut rows = parse_snapshot_csv(SAMPLE.as_bytes()).unwrap();
        assert!(rows[0].issues().is_empty());
        assert!(rows[1].issues().is_empty());
        rows[0].price_tao = Some(0.0);
        assert_eq!(rows[0].issues().len(), 1);
    }
}
