use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use chrono::NaiveDate;
use subnet_factors::ingest::{fetch_remote, RemoteClient, RemoteConfig};
use subnet_factors::Error;

/// Serves the scripted `(status, body)` responses in order, one per
/// connection, and records each request line.
fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in script {
            let Ok((mut stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            log.lock().unwrap().push(line.trim().to_string());
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
                    break;
                }
            }
            let reason = match status {
                200 => "OK",
                401 => "Unauthorized",
                429 => "Too Many Requests",
                _ => "Error",
            };
            let resp = format!(
                "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    (addr, seen)
}

fn cfg(base: &str, cache: Option<&std::path::Path>) -> RemoteConfig {
    RemoteConfig {
        base_url: base.to_string(),
        api_key: Some("test-key".into()),
        cache_dir: cache.map(|p| p.to_path_buf()),
        max_attempts: 3,
        backoff: Duration::from_millis(5),
        timeout: Duration::from_secs(5),
        ..RemoteConfig::default()
    }
}

fn day() -> NaiveDate {
    NaiveDate::from_ymd_opt(2025, 3, 1).unwrap()
}

fn page(records: &str, total_pages: u32) -> String {
    format!(r#"{{"pagination":{{"total_pages":{total_pages}}},"data":[{records}]}}"#)
}

const REC: &str = r#"{"netuid":3,"price":"0.02","market_cap":1000,"total_tao":500,"total_alpha":25000,"alpha_staked":9000,"emission":1000000000,"startup_mode":false}"#;

#[test]
fn rate_limit_is_retried() {
    let (base, seen) = serve(vec![(429, String::new()), (200, page(REC, 1))]);
    let report = fetch_remote(&cfg(&base, None), day(), day()).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rows[0].netuid, 3);
    assert_eq!(report.rows[0].price_tao, Some(0.02));
    assert_eq!(report.network_requests, 2);
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn retries_are_bounded() {
    let (base, _) = serve(vec![(503, String::new()); 3]);
    let err = fetch_remote(&cfg(&base, None), day(), day()).unwrap_err();
    assert!(matches!(err, Error::Network { attempts: 3, .. }), "{err}");
}

#[test]
fn auth_failure_is_fatal() {
    let (base, seen) = serve(vec![(401, String::new()), (200, page(REC, 1))]);
    let err = fetch_remote(&cfg(&base, None), day(), day()).unwrap_err();
    assert!(matches!(err, Error::Auth(_)), "{err}");
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn pages_are_followed_and_cache_hits_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let rec2 = REC.replace("\"netuid\":3", "\"netuid\":4");
    let (base, seen) = serve(vec![(200, page(REC, 2)), (200, page(&rec2, 2))]);
    let first = RemoteClient::new(cfg(&base, Some(dir.path()))).unwrap();
    let a = first.day_payload(day()).unwrap();
    assert_eq!(first.network_requests(), 2);
    assert!(seen.lock().unwrap()[1].contains("page=2"));

    // the server is gone; the second client must not touch the network
    let second = RemoteClient::new(cfg(&base, Some(dir.path()))).unwrap();
    let b = second.day_payload(day()).unwrap();
    assert_eq!(a, b);
    assert_eq!(second.network_requests(), 0);
    assert_eq!(second.cache_hits(), 1);
}

#[test]
fn malformed_records_are_reported_not_fatal() {
    let bad = r#"{"netuid":"x"}"#;
    let (base, _) = serve(vec![(200, page(&format!("{REC},{bad}"), 1))]);
    let report = fetch_remote(&cfg(&base, None), day(), day()).unwrap();
    assert_eq!(report.rows.len(), 1);
    assert_eq!(report.rejected.len(), 1);
    assert_eq!(report.rejected[0].index, Some(1));
}

#[test]
fn missing_key_is_a_config_error() {
    let mut c = cfg("http://127.0.0.1:9", None);
    c.api_key = None;
    let err = fetch_remote(&c, day(), day()).unwrap_err();
    assert!(err.to_string().contains("TAOSTATS_API_KEY"));
}
