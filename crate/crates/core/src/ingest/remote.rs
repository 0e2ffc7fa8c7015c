//! HTTP client for the daily pool-history API with an on-disk cache.
//!
//! Each calendar day is fetched page by page and folded into one canonical
//! JSON document (`{"endpoint", "date", "records"}`). That document is what the
//! cache stores, keyed by a SHA-256 of the request parameters, so a cache hit
//! returns exactly the bytes the original fetch produced.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::snapshot::RawSnapshotRow;
use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "TAOSTATS_API_KEY";
pub const DEFAULT_BASE_URL: &str = "https://api.taostats.io";
pub const DEFAULT_ENDPOINT: &str = "/api/dtao/pool/history/v1";

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub base_url: String,
    pub endpoint: String,
    pub api_key: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff: Duration,
    pub page_limit: usize,
    pub timeout: Duration,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_BASE_URL.to_string(),
            endpoint: DEFAULT_ENDPOINT.to_string(),
            api_key: std::env::var(API_KEY_ENV).ok(),
            cache_dir: None,
            max_attempts: 5,
            backoff: Duration::from_millis(500),
            page_limit: 200,
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectedRecord {
    pub date: NaiveDate,
    /// Position in the day's record list, or `None` when the whole day failed.
    pub index: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Default, Serialize)]
pub struct FetchReport {
    pub rows: Vec<RawSnapshotRow>,
    pub rejected: Vec<RejectedRecord>,
    pub records_seen: usize,
    pub network_requests: u64,
    pub cache_hits: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DayPayload {
    endpoint: String,
    date: NaiveDate,
    records: Vec<Value>,
}

pub struct RemoteClient {
    cfg: RemoteConfig,
    http: reqwest::blocking::Client,
    requests: AtomicU64,
    cache_hits: AtomicU64,
}

impl RemoteClient {
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        if cfg.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            cfg,
            http,
            requests: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        })
    }

    pub fn network_requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    pub fn cache_path(&self, date: NaiveDate) -> Option<PathBuf> {
        let dir = self.cfg.cache_dir.as_ref()?;
        let key = format!("{}|{}|{}", self.cfg.base_url, self.cfg.endpoint, date);
        let digest = hex::encode(Sha256::digest(key.as_bytes()));
        Some(dir.join(format!("{digest}.json")))
    }

    /// Canonical payload bytes for one day, from cache when available.
    pub fn day_payload(&self, date: NaiveDate) -> Result<Vec<u8>> {
        if let Some(path) = self.cache_path(date) {
            if let Ok(bytes) = std::fs::read(&path) {
                self.cache_hits.fetch_add(1, Ordering::Relaxed);
                return Ok(bytes);
            }
        }
        let api_key = self
            .cfg
            .api_key
            .as_deref()
            .ok_or_else(|| Error::Config(format!("API credentials missing; set {API_KEY_ENV}")))?;

        let mut records = Vec::new();
        let mut page = 1usize;
        loop {
            let url = format!(
                "{}{}?date={}&page={}&limit={}",
                self.cfg.base_url.trim_end_matches('/'),
                self.cfg.endpoint,
                date,
                page,
                self.cfg.page_limit
            );
            let body = self.get_with_retry(&url, api_key)?;
            let doc: Value = serde_json::from_slice(&body).map_err(|e| Error::Schema {
                line: e.line() as u64,
                message: format!("{url}: {e}"),
            })?;
            let data = doc.get("data").and_then(Value::as_array).ok_or_else(|| Error::Schema {
                line: 0,
                message: format!("{url}: payload has no `data` array"),
            })?;
            records.extend(data.iter().cloned());
            let total_pages = doc
                .pointer("/pagination/total_pages")
                .and_then(Value::as_u64)
                .unwrap_or(1) as usize;
            if page >= total_pages || data.is_empty() {
                break;
            }
            page += 1;
        }
        let payload = DayPayload {
            endpoint: self.cfg.endpoint.clone(),
            date,
            records,
        };
        let bytes = serde_json::to_vec(&payload)?;
        if let Some(path) = self.cache_path(date) {
            write_atomic(&path, &bytes)?;
        }
        Ok(bytes)
    }

    fn get_with_retry(&self, url: &str, api_key: &str) -> Result<Vec<u8>> {
        let mut delay = self.cfg.backoff;
        let mut last = String::new();
        for attempt in 1..=self.cfg.max_attempts {
            self.requests.fetch_add(1, Ordering::Relaxed);
            let sent = self
                .http
                .get(url)
                .header("Authorization", api_key)
                .header("Accept", "application/json")
                .send();
            match sent {
                Ok(resp) => {
                    let status = resp.status();
                    if status.is_success() {
                        return resp.bytes().map(|b| b.to_vec()).map_err(|e| Error::Network {
                            attempts: attempt,
                            message: e.to_string(),
                        });
                    }
                    if status.as_u16() == 401 || status.as_u16() == 403 {
                        return Err(Error::Auth(format!("{url}: HTTP {status}")));
                    }
                    if status.as_u16() == 429 || status.is_server_error() {
                        last = format!("HTTP {status}");
                    } else {
                        return Err(Error::Config(format!("{url}: unexpected HTTP {status}")));
                    }
                }
                Err(e) => last = e.to_string(),
            }
            if attempt < self.cfg.max_attempts {
                log::warn!("fetch {url} failed ({last}); retrying in {delay:?}");
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
        }
        Err(Error::Network {
            attempts: self.cfg.max_attempts,
            message: last,
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Fetch every subnet-day in `[start, end]`.
///
/// Authentication and exhausted-retry failures abort the run; records that do
/// not convert into snapshot rows are reported and skipped.
pub fn fetch_remote(cfg: &RemoteConfig, start: NaiveDate, end: NaiveDate) -> Result<FetchReport> {
    let mut report = FetchReport::default();
    if start > end {
        return Ok(report);
    }
    let client = RemoteClient::new(cfg.clone())?;
    let mut date = start;
    while date <= end {
        match client.day_payload(date) {
            Ok(bytes) => collect_day(date, &bytes, &mut report),
            Err(Error::Schema { message, .. }) => report.rejected.push(RejectedRecord {
                date,
                index: None,
                reason: format!("malformed payload: {message}"),
            }),
            Err(e) => return Err(e),
        }
        date = date + Days::new(1);
    }
    report.network_requests = client.network_requests();
    report.cache_hits = client.cache_hits();
    Ok(report)
}

fn collect_day(date: NaiveDate, bytes: &[u8], report: &mut FetchReport) {
    let payload: DayPayload = match serde_json::from_slice(bytes) {
        Ok(p) => p,
        Err(e) => {
            report.rejected.push(RejectedRecord {
                date,
                index: None,
                reason: format!("unreadable cached payload: {e}"),
            });
            return;
        }
    };
    for (i, rec) in payload.records.iter().enumerate() {
        report.records_seen += 1;
        match record_to_row(date, rec) {
            Ok(row) => report.rows.push(row),
            Err(reason) => report.rejected.push(RejectedRecord {
                date,
                index: Some(i),
                reason,
            }),
        }
    }
}

fn field<'a>(rec: &'a Value, names: &[&str]) -> Option<&'a Value> {
    names.iter().filter_map(|n| rec.get(*n)).find(|v| !v.is_null())
}

fn number(rec: &Value, names: &[&str]) -> std::result::Result<Option<f64>, String> {
    match field(rec, names) {
        None => Ok(None),
        Some(Value::Number(n)) => Ok(n.as_f64()),
        Some(Value::String(s)) if s.trim().is_empty() => Ok(None),
        Some(Value::String(s)) => s
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| format!("field `{}` is not numeric: {s:?}", names[0])),
        Some(other) => Err(format!("field `{}` has unexpected type: {other}", names[0])),
    }
}

/// Convert one API record into the snapshot schema.
///
/// Field names follow the pool-history payload: `netuid`, `price`, `market_cap`,
/// `total_tao`, `total_alpha`, `alpha_staked`, `emission` (rao/day) and
/// `startup_mode`, with a few common aliases.
pub fn record_to_row(date: NaiveDate, rec: &Value) -> std::result::Result<RawSnapshotRow, String> {
    let netuid = match number(rec, &["netuid", "subnet_id"])? {
        Some(n) if n >= 0.0 && n.fract() == 0.0 && n <= u32::MAX as f64 => n as u32,
        Some(n) => return Err(format!("invalid netuid {n}")),
        None => return Err("missing netuid".into()),
    };
    let startup_mode = match field(rec, &["startup_mode", "is_startup"]) {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(Value::String(s)) if s == "true" || s == "false" => s == "true",
        Some(other) => return Err(format!("startup_mode is not a boolean: {other}")),
    };
    let emission = match number(rec, &["emission", "emission_rao_per_day"])? {
        None => 0,
        Some(e) if e >= 0.0 && e.is_finite() => e.round() as u64,
        Some(e) => return Err(format!("negative emission {e}")),
    };
    let row = RawSnapshotRow {
        date,
        netuid,
        price_tao: number(rec, &["price", "price_tao"])?,
        mcap_tao: number(rec, &["market_cap", "mcap_tao"])?,
        tau_reserve: number(rec, &["total_tao", "tao_in", "tau_reserve"])?,
        alpha_reserve: number(rec, &["total_alpha", "alpha_in", "alpha_reserve"])?,
        alpha_staked: number(rec, &["alpha_staked"])?,
        emission_rao_per_day: emission,
        startup_mode,
    };
    let issues = row.issues();
    if !issues.is_empty() {
        return Err(issues.join("; "));
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn d() -> NaiveDate {
        "2025-06-01".parse().unwrap()
    }

    #[test]
    fn startup_record_without_price_passes_through() {
        let rec = json!({"netuid": 77, "startup_mode": true, "emission": "0"});
        let row = record_to_row(d(), &rec).unwrap();
        assert!(row.startup_mode);
        assert_eq!(row.price_tao, None);
        assert_eq!(row.netuid, 77);
    }

    #[test]
    fn active_record_without_price_rejected() {
        let rec = json!({"netuid": 3, "total_tao": 10.0});
        assert!(record_to_row(d(), &rec).unwrap_err().contains("missing price"));
    }

    #[test]
    fn string_numbers_accepted() {
        let rec = json!({
            "netuid": "4", "price": "0.05", "market_cap": 1000, "total_tao": "500",
            "total_alpha": 10000, "alpha_staked": 9000, "emission": "7200000000000",
            "startup_mode": false
        });
        let row = record_to_row(d(), &rec).unwrap();
        assert_eq!(row.price_tao, Some(0.05));
        assert_eq!(row.emission_tao_per_day(), 7200.0);
    }

    #[test]
    fn empty_range_makes_no_requests() {
        let cfg = RemoteConfig {
            api_key: None,
            ..RemoteConfig::default()
        };
        let r = fetch_remote(&cfg, "2025-02-02".parse().unwrap(), "2025-02-01".parse().unwrap()).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.network_requests, 0);
    }
}
