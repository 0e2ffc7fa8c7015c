//! Command-line front end. Each subcommand reads upstream artifacts from the
//! run directory, writes its own subdirectory and records it in the manifest.

mod commands;
pub mod config;
pub mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::factors::TercileConvention;
use crate::panel::Denomination;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "subnet-factors",
    version,
    about = "Factor research on subnet token cross-sections"
)]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory holding every command's outputs.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Return units for factors and cross-sectional tests.
    #[arg(long, global = true)]
    pub denomination: Option<Denomination>,
    #[arg(long, global = true)]
    pub hac_lags: Option<usize>,
    #[arg(long, global = true)]
    pub winsor_bound: Option<f64>,
    /// Prior returns a lifecycle needs before it is eligible.
    #[arg(long, global = true)]
    pub min_history: Option<usize>,
    /// Tercile cut rounding: `ceil` or `floor`.
    #[arg(long, global = true)]
    pub tercile_convention: Option<TercileConvention>,
    /// Overrides the synthetic-market seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load raw subnet-day rows into the run directory.
    Ingest(IngestArgs),
    /// Simulate a market and run the mechanism checks on it.
    Synth {
        /// Synthetic market TOML; defaults apply when omitted.
        #[arg(value_name = "SYNTH_TOML")]
        market: Option<PathBuf>,
    },
    /// Build the return panel, eligibility and lifecycle matrices.
    BuildPanel,
    /// Tercile portfolios, long-short factors, correlations and figures.
    Factors,
    /// Summary statistics for every factor.
    Stats,
    /// Two-pass cross-sectional premia.
    Fm {
        /// Observations a lifecycle needs in the first pass.
        #[arg(long)]
        min_obs: Option<usize>,
    },
    /// Joint test that portfolio alphas are zero.
    Grs,
    /// Regress each factor on the others.
    Spanning {
        /// Newey-West t-statistics instead of OLS.
        #[arg(long)]
        hac: bool,
    },
    /// Size-premium shift around the emission halving.
    Halving(EventArgs),
    /// The halving regression at shifted dates.
    Placebo(EventArgs),
    /// Trading costs and capacity of the size factor.
    Slippage(SlippageArgs),
    /// Portfolios sorted on rolling risk measures.
    VolSorts,
    /// Downside and upside risk of every factor.
    RiskDecomp,
    /// Factor means before and after a split date.
    Subsample {
        #[arg(long)]
        split_date: Option<NaiveDate>,
    },
    /// Every analysis, with an index of tables and figures.
    Report,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Snapshot file (`.csv` or `.json`).
    #[arg(long, conflicts_with_all = ["remote", "synth"])]
    pub snapshot: Option<PathBuf>,
    /// Fetch from the pool-history API (key in TAOSTATS_API_KEY).
    #[arg(long, conflicts_with = "synth")]
    pub remote: bool,
    #[arg(long, requires = "remote")]
    pub start: Option<NaiveDate>,
    #[arg(long, requires = "remote")]
    pub end: Option<NaiveDate>,
    #[arg(long, requires = "remote")]
    pub base_url: Option<String>,
    /// Raw API responses are cached here and reused.
    #[arg(long, requires = "remote")]
    pub cache_dir: Option<PathBuf>,
    /// Synthetic market TOML.
    #[arg(long)]
    pub synth: Option<PathBuf>,
    /// Base-token/USD prices (`date,tao_usd`).
    #[arg(long)]
    pub fx: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EventArgs {
    #[arg(long)]
    pub event_date: Option<NaiveDate>,
    /// Days on each side of the event; repeat for several windows.
    #[arg(long = "window")]
    pub windows: Vec<usize>,
    #[arg(long)]
    pub no_market_control: bool,
}

#[derive(Debug, Args)]
pub struct SlippageArgs {
    /// Assets under management in USD; repeat for a grid.
    #[arg(long = "aum")]
    pub aum: Vec<f64>,
    /// Fraction of the book traded each day.
    #[arg(long)]
    pub turnover: Option<f64>,
    /// Base-token price when no FX series covers a date.
    #[arg(long)]
    pub tao_usd: Option<f64>,
    /// Bottom, middle and top one-way slippage at the reference AUM.
    #[arg(long, value_delimiter = ',', value_name = "BOTTOM,MIDDLE,TOP")]
    pub reference_slippage: Option<Vec<f64>>,
}

impl Cli {
    /// Config file values overridden by flags, validated.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.denomination {
            cfg.denomination = v;
        }
        if let Some(v) = self.hac_lags {
            cfg.hac_lags = v;
        }
        if let Some(v) = self.winsor_bound {
            cfg.winsor_bound = v;
        }
        if let Some(v) = self.min_history {
            cfg.min_history = v;
        }
        if let Some(v) = self.tercile_convention {
            cfg.tercile_convention = v;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        let ex = &mut cfg.experiments;
        match &self.command {
            Command::Ingest(a) => {
                if a.snapshot.is_some() || a.remote || a.synth.is_some() {
                    cfg.source.snapshot = a.snapshot.clone();
                    cfg.source.synth = a.synth.clone();
                    cfg.source.remote = a.remote.then(|| {
                        let mut r = cfg.source.remote.clone().unwrap_or_default();
                        r.start = a.start.or(r.start);
                        r.end = a.end.or(r.end);
                        if let Some(u) = &a.base_url {
                            r.base_url = u.clone();
                        }
                        if a.cache_dir.is_some() {
                            r.cache_dir = a.cache_dir.clone();
                        }
                        r
                    });
                }
                if a.fx.is_some() {
                    cfg.source.fx = a.fx.clone();
                }
            }
            Command::Fm { min_obs: Some(v) } => ex.min_first_pass_obs = *v,
            Command::Spanning { hac: true } => ex.spanning_hac = true,
            Command::Halving(a) | Command::Placebo(a) => {
                if a.event_date.is_some() {
                    ex.event_date = a.event_date;
                }
                if !a.windows.is_empty() {
                    if matches!(self.command, Command::Halving(_)) {
                        ex.windows = a.windows.clone();
                    } else {
                        ex.placebo_window = a.windows[0];
                    }
                }
                if a.no_market_control {
                    ex.market_control = false;
                }
            }
            Command::Slippage(a) => {
                if !a.aum.is_empty() {
                    ex.aum_grid = a.aum.clone();
                }
                if let Some(v) = a.turnover {
                    ex.turnover = v;
                }
                if let Some(v) = a.tao_usd {
                    ex.tao_usd = v;
                }
                if let Some(v) = &a.reference_slippage {
                    let [b, m, t] = v[..] else {
                        return Err(Error::Config(format!(
                            "--reference-slippage takes three values, got {}",
                            v.len()
                        )));
                    };
                    ex.reference_slippage = Some([b, m, t]);
                }
            }
            Command::Subsample { split_date: Some(d) } => ex.split_date = Some(*d),
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Exit status: 0 success, 1 data or runtime error, 2 usage or configuration error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Auth(_) | Error::UnknownCharacteristic(_) => 2,
        _ => 1,
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.resolve().and_then(|cfg| commands::run(&cli.command, cfg)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
