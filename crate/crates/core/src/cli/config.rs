//! Run configuration: TOML file merged with command-line overrides.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::econometrics::{DEFAULT_HAC_LAGS, DEFAULT_MIN_FIRST_PASS_OBS};
use crate::error::{Error, Result};
use crate::experiments::event::{DEFAULT_PLACEBO_OFFSETS, DEFAULT_PLACEBO_WINDOW, DEFAULT_WINDOWS};
use crate::experiments::slippage::{DEFAULT_AUM_GRID, DEFAULT_TURNOVER};
use crate::factors::{FactorOptions, TercileConvention};
use crate::ingest::remote::{DEFAULT_BASE_URL, DEFAULT_ENDPOINT};
use crate::panel::{Denomination, PanelOptions, DEFAULT_MIN_HISTORY, DEFAULT_WINSOR_BOUND};

/// Date of the first emission halving.
pub const DEFAULT_EVENT_DATE: (i32, u32, u32) = (2025, 12, 14);
pub const DEFAULT_TAO_USD: f64 = 345.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: PathBuf,
    pub source: SourceConfig,
    pub denomination: Denomination,
    pub hac_lags: usize,
    pub winsor_bound: f64,
    pub min_history: usize,
    pub tercile_convention: TercileConvention,
    pub seed: Option<u64>,
    pub experiments: ExperimentConfig,
}

/// Where raw rows come from. At most one of `snapshot`, `remote`, `synth`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub snapshot: Option<PathBuf>,
    pub remote: Option<RemoteSource>,
    pub synth: Option<PathBuf>,
    /// Base-token/USD prices (`date,tao_usd`).
    pub fx: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteSource {
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub base_url: String,
    pub endpoint: String,
    pub cache_dir: Option<PathBuf>,
}

impl Default for RemoteSource {
    fn default() -> Self {
        Self {
            start: None,
            end: None,
            base_url: DEFAULT_BASE_URL.to_string(),
            endpoint: DEFAULT_ENDPOINT.to_string(),
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub event_date: Option<NaiveDate>,
    pub windows: Vec<usize>,
    pub placebo_offsets: Vec<i64>,
    pub placebo_window: usize,
    pub market_control: bool,
    pub split_date: Option<NaiveDate>,
    pub aum_grid: Vec<f64>,
    pub turnover: f64,
    /// Used when no FX series covers a date.
    pub tao_usd: f64,
    /// Published per-tercile slippage at `reference_aum`, to scale instead of deriving.
    pub reference_slippage: Option<[f64; 3]>,
    pub reference_aum: f64,
    pub min_first_pass_obs: usize,
    /// Report spanning t-statistics with Newey-West errors instead of OLS.
    pub spanning_hac: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            event_date: None,
            windows: DEFAULT_WINDOWS.to_vec(),
            placebo_offsets: DEFAULT_PLACEBO_OFFSETS.to_vec(),
            placebo_window: DEFAULT_PLACEBO_WINDOW,
            market_control: true,
            split_date: None,
            aum_grid: DEFAULT_AUM_GRID.to_vec(),
            turnover: DEFAULT_TURNOVER,
            tao_usd: DEFAULT_TAO_USD,
            reference_slippage: None,
            reference_aum: 1e4,
            min_first_pass_obs: DEFAULT_MIN_FIRST_PASS_OBS,
            spanning_hac: false,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("out"),
            source: SourceConfig::default(),
            denomination: Denomination::Tao,
            hac_lags: DEFAULT_HAC_LAGS,
            winsor_bound: DEFAULT_WINSOR_BOUND,
            min_history: DEFAULT_MIN_HISTORY,
            tercile_convention: TercileConvention::Ceil,
            seed: None,
            experiments: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.source;
        let n = [s.snapshot.is_some(), s.remote.is_some(), s.synth.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if n > 1 {
            return Err(Error::Config(
                "choose exactly one data source: snapshot, remote or synth".into(),
            ));
        }
        if !(self.winsor_bound > 0.0) {
            return Err(Error::Config(format!(
                "winsor_bound must be positive, got {}",
                self.winsor_bound
            )));
        }
        if self.experiments.windows.contains(&0) || self.experiments.placebo_window == 0 {
            return Err(Error::Config("event windows must be positive".into()));
        }
        if !(self.experiments.tao_usd > 0.0) {
            return Err(Error::Config("tao_usd must be positive".into()));
        }
        Ok(())
    }

    pub fn panel_options(&self) -> PanelOptions {
        PanelOptions {
            winsor_bound: self.winsor_bound,
            min_history: self.min_history,
        }
    }

    pub fn factor_options(&self) -> FactorOptions {
        FactorOptions {
            denomination: self.denomination,
            convention: self.tercile_convention,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_hash() {
        let text = r#"
            out = "run"
            hac_lags = 3
            tercile_convention = "floor"
            [source]
            snapshot = "data/snap.csv"
            [experiments]
            windows = [30, 60]
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.hac_lags, 3);
        assert_eq!(cfg.tercile_convention, TercileConvention::Floor);
        assert_eq!(cfg.experiments.windows, vec![30, 60]);
        assert_eq!(cfg.experiments.placebo_window, DEFAULT_PLACEBO_WINDOW);
        cfg.validate().unwrap();
        assert_eq!(cfg.hash(), cfg.clone().hash());
        assert_ne!(cfg.hash(), RunConfig::default().hash());
    }

    #[test]
    fn two_sources_rejected() {
        let mut cfg = RunConfig::default();
        cfg.source.snapshot = Some("a.csv".into());
        cfg.source.synth = Some("s.toml".into());
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }
}
