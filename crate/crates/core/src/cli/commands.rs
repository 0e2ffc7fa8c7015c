use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;
use serde_json::json;

use super::config::{RunConfig, DEFAULT_EVENT_DATE};
use super::workspace::{RunDir, Stage};
use super::Command;
use crate::characteristics::{characteristic, rolling_risk, Characteristic};
use crate::econometrics::{
    fama_macbeth, grs_test_series, risk_decomposition, spanning_alphas, summary_stats, KurtosisConvention,
};
use crate::error::{Error, Result};
use crate::experiments::{
    cumulative_and_rolling, halving_event_study, panel_capacity, placebo_scan, scaled_slippage, subsample_split,
    vol_sorts, EventStudyOptions, EventStudyResult, GrossReturn, SlippageReport,
};
use crate::factors::{
    build_all_factors, correlation_matrix, factors_csv, market_factor, parse_factors_csv, tercile_portfolios,
    tercile_table, FactorKind, FactorSeries, Leg, TercilePortfolios,
};
use crate::grid::{fmt_opt, wide_csv};
use crate::ingest::{
    fetch_remote, load_fx, load_snapshot, parse_fx_csv, parse_snapshot_csv, snapshot_csv_bytes, FxSeries,
    RawSnapshotRow, RemoteConfig, SnapshotFormat,
};
use crate::moments;
use crate::panel::{build_panel, Denomination, ReturnPanel, SubnetHistory};
use crate::plot::{Chart, Line};
use crate::synth::{generate, halving_experiment, prop1_from_panel, SynthConfig};

const SNAPSHOT: &str = "snapshot.csv";
const FX: &str = "fx.csv";
const SYNTH_CONFIG: &str = "synth_config.toml";
/// Commands that can provide raw rows, in order of preference.
const SOURCES: [&str; 2] = ["ingest", "synth"];
const ROLLING_MEAN_DAYS: usize = 30;

struct Ctx {
    cfg: RunConfig,
    run: RunDir,
    hash: String,
}

impl Ctx {
    fn stage(&self, command: &str) -> Result<Stage<'_>> {
        log::info!("{command}: writing {}", self.run.root().join(command).display());
        self.run.stage(command)
    }

    fn commit(&mut self, build: impl FnOnce(&Self) -> Result<Stage<'_>>) -> Result<()> {
        let record = build(self)?.finish(&self.hash);
        self.run.commit(record)
    }
}

pub fn run(command: &Command, cfg: RunConfig) -> Result<()> {
    let run = RunDir::open(&cfg.out)?;
    let hash = cfg.hash();
    let mut ctx = Ctx { cfg, run, hash };
    match command {
        Command::Ingest(_) => ingest(&mut ctx),
        Command::Synth { market } => synth(&mut ctx, market.as_deref()),
        Command::BuildPanel => build_panel_cmd(&mut ctx),
        Command::Factors => factors(&mut ctx),
        Command::Stats => stats(&mut ctx),
        Command::Fm { .. } => fm(&mut ctx),
        Command::Grs => grs(&mut ctx),
        Command::Spanning { .. } => spanning(&mut ctx),
        Command::Halving(_) => halving(&mut ctx),
        Command::Placebo(_) => placebo(&mut ctx),
        Command::Slippage(_) => slippage(&mut ctx),
        Command::VolSorts => vol_sorts_cmd(&mut ctx),
        Command::RiskDecomp => risk(&mut ctx),
        Command::Subsample { .. } => subsample(&mut ctx),
        Command::Report => report(&mut ctx),
    }
}

// ---- table helpers

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::io("<table>", e.into_error()))
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    fmt_opt(&x)
}

fn date_ticks(dates: &[NaiveDate]) -> Vec<(f64, String)> {
    let step = (dates.len() / 6).max(1);
    (0..dates.len())
        .step_by(step)
        .map(|k| (k as f64, dates[k].to_string()))
        .collect()
}

/// Growth of one unit invested in each series, on a log axis.
fn growth_chart(title: &str, series: &[&FactorSeries], markers: Vec<(f64, String)>) -> String {
    let dates = series.first().map(|s| s.dates.clone()).unwrap_or_default();
    let lines = series
        .iter()
        .map(|s| Line {
            label: s.name.clone(),
            points: cumulative_and_rolling(s, ROLLING_MEAN_DAYS)
                .iter()
                .enumerate()
                .map(|(k, (_, cum, _))| (k as f64, Some(1.0 + cum)))
                .collect(),
        })
        .collect();
    Chart {
        title: title.into(),
        x_label: "date".into(),
        y_label: "growth of 1".into(),
        log_y: true,
        lines,
        markers,
        x_ticks: date_ticks(&dates),
    }
    .to_svg()
}

/// `date` then one cumulative-return column per series.
fn cumulative_csv(series: &[&FactorSeries]) -> Result<Vec<u8>> {
    let Some(first) = series.first() else {
        return table(&["date"], []);
    };
    let cums: Vec<_> = series
        .iter()
        .map(|s| cumulative_and_rolling(s, ROLLING_MEAN_DAYS))
        .collect();
    let mut header = vec!["date"];
    header.extend(series.iter().map(|s| s.name.as_str()));
    table(
        &header,
        first.dates.iter().enumerate().map(|(k, d)| {
            let mut row = vec![d.to_string()];
            row.extend(cums.iter().map(|c| num(c[k].1)));
            row
        }),
    )
}

fn pick<'a>(series: &'a [FactorSeries], name: &str) -> Result<&'a FactorSeries> {
    series
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Domain(format!("series {name} is missing from the factor outputs")))
}

fn main_factors(all: &[FactorSeries]) -> Vec<FactorSeries> {
    FactorKind::ALL
        .iter()
        .filter_map(|k| pick(all, k.as_str()).ok().cloned())
        .collect()
}

// ---- upstream data

struct Source {
    dir: &'static str,
    rows: Vec<RawSnapshotRow>,
    fx: Option<FxSeries>,
    snapshot_path: PathBuf,
}

fn source_dir(run: &RunDir) -> Result<&'static str> {
    SOURCES
        .into_iter()
        .find(|c| run.exists(c, SNAPSHOT))
        .ok_or_else(|| Error::MissingArtifact {
            path: run.root().join("ingest").join(SNAPSHOT),
            command: "ingest".into(),
        })
}

fn synth_config_of(run: &RunDir, dir: &str) -> Result<Option<SynthConfig>> {
    let path = run.root().join(dir).join(SYNTH_CONFIG);
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    SynthConfig::from_toml(&text).map(Some)
}

fn load_source(run: &RunDir) -> Result<Source> {
    let dir = source_dir(run)?;
    let snapshot_path = run.root().join(dir).join(SNAPSHOT);
    let bytes = fs::read(&snapshot_path).map_err(|e| Error::io(&snapshot_path, e))?;
    let rows = parse_snapshot_csv(&bytes)?;
    let fx_path = run.root().join(dir).join(FX);
    let fx = if fx_path.is_file() {
        Some(parse_fx_csv(&fs::read(&fx_path).map_err(|e| Error::io(&fx_path, e))?)?)
    } else {
        None
    };
    Ok(Source {
        dir,
        rows,
        fx,
        snapshot_path,
    })
}

struct PanelData {
    source: Source,
    history: SubnetHistory,
    panel: ReturnPanel,
}

fn make_panel(source: Source, cfg: &RunConfig) -> Result<PanelData> {
    let history = SubnetHistory::from_rows(&source.rows)?;
    let panel = build_panel(&history, source.fx.as_ref(), cfg.panel_options());
    if cfg.denomination == Denomination::Usd && source.fx.is_none() {
        return Err(Error::Config(
            "USD denomination needs an FX series; pass --fx to ingest".into(),
        ));
    }
    Ok(PanelData { source, history, panel })
}

fn load_panel(ctx: &Ctx) -> Result<PanelData> {
    ctx.run.require("build-panel", "r_tao.csv")?;
    make_panel(load_source(&ctx.run)?, &ctx.cfg)
}

fn load_factors(ctx: &Ctx) -> Result<Vec<FactorSeries>> {
    let path = ctx.run.require("factors", "factors.csv")?;
    parse_factors_csv(&fs::read(&path).map_err(|e| Error::io(&path, e))?)
}

fn load_portfolios(ctx: &Ctx) -> Result<Vec<FactorSeries>> {
    let path = ctx.run.require("factors", "portfolios.csv")?;
    parse_factors_csv(&fs::read(&path).map_err(|e| Error::io(&path, e))?)
}

/// Configured date, else the simulated halving (or midpoint) for synthetic
/// data, else the first on-chain halving.
fn event_date(ctx: &Ctx) -> Result<NaiveDate> {
    if let Some(d) = ctx.cfg.experiments.event_date {
        return Ok(d);
    }
    let dir = source_dir(&ctx.run)?;
    if let Some(s) = synth_config_of(&ctx.run, dir)? {
        return Ok(s.date(s.halving_day.unwrap_or(s.n_days / 2)));
    }
    let (y, m, d) = DEFAULT_EVENT_DATE;
    Ok(NaiveDate::from_ymd_opt(y, m, d).expect("valid default date"))
}

fn event_options(cfg: &RunConfig) -> EventStudyOptions {
    EventStudyOptions {
        hac_lags: cfg.hac_lags,
        market_control: cfg.experiments.market_control,
    }
}

fn synth_config(path: Option<&Path>, seed: Option<u64>) -> Result<SynthConfig> {
    let mut cfg = match path {
        Some(p) => SynthConfig::from_toml(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synth_toml(cfg: &SynthConfig) -> Result<Vec<u8>> {
    toml::to_string(cfg)
        .map(String::into_bytes)
        .map_err(|e| Error::Config(format!("synthetic config does not serialize: {e}")))
}

// ---- commands

fn ingest(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let src = &ctx.cfg.source;
        let mut st = ctx.stage("ingest")?;
        let mut rejected = Vec::new();
        let mut synth = None;
        let (mut rows, mut fx, origin) = if let Some(p) = &src.snapshot {
            st.input(p)?;
            (
                load_snapshot(p, SnapshotFormat::from_path(p))?,
                None,
                json!({"snapshot": p}),
            )
        } else if let Some(r) = &src.remote {
            let (Some(start), Some(end)) = (r.start, r.end) else {
                return Err(Error::Config("remote ingest needs --start and --end".into()));
            };
            let rc = RemoteConfig {
                base_url: r.base_url.clone(),
                endpoint: r.endpoint.clone(),
                cache_dir: r.cache_dir.clone(),
                ..RemoteConfig::default()
            };
            let report = fetch_remote(&rc, start, end)?;
            rejected = report.rejected;
            let origin = json!({
                "remote": {"base_url": r.base_url, "endpoint": r.endpoint, "start": start, "end": end},
                "records_seen": report.records_seen,
                "network_requests": report.network_requests,
                "cache_hits": report.cache_hits,
            });
            (report.rows, None, origin)
        } else if let Some(p) = &src.synth {
            st.input(p)?;
            let cfg = synth_config(Some(p), ctx.cfg.seed)?;
            let out = generate(&cfg)?;
            synth = Some(cfg);
            (out.rows, Some(out.fx), json!({"synth": p}))
        } else {
            return Err(Error::Config(
                "no data source; pass --snapshot, --remote or --synth, or set [source] in the config file".into(),
            ));
        };
        if let Some(p) = &src.fx {
            st.input(p)?;
            fx = Some(load_fx(p)?);
        }
        rows.sort_by_key(|r| (r.date, r.netuid));
        if rows.is_empty() {
            return Err(Error::NoEligibleObservations("the source has no rows".into()));
        }
        for r in &rejected {
            log::warn!("rejected record on {} (index {:?}): {}", r.date, r.index, r.reason);
        }
        st.write(SNAPSHOT, &snapshot_csv_bytes(&rows)?)?;
        if let Some(fx) = &fx {
            st.write(FX, &fx.to_csv_bytes()?)?;
        }
        if let Some(cfg) = &synth {
            st.write(SYNTH_CONFIG, &synth_toml(cfg)?)?;
        }
        st.write_json("rejected.json", &rejected)?;
        let subnets: std::collections::BTreeSet<u32> = rows.iter().map(|r| r.netuid).collect();
        st.write_json(
            "summary.json",
            &json!({
                "origin": origin,
                "rows": rows.len(),
                "rejected": rejected.len(),
                "subnets": subnets.len(),
                "first_date": rows.first().map(|r| r.date),
                "last_date": rows.last().map(|r| r.date),
                "fx": fx.is_some(),
            }),
        )?;
        Ok(st)
    })
}

fn synth(ctx: &mut Ctx, path: Option<&Path>) -> Result<()> {
    let path = path.map(Path::to_path_buf).or_else(|| ctx.cfg.source.synth.clone());
    let cfg = synth_config(path.as_deref(), ctx.cfg.seed)?;
    synth_with(ctx, cfg, path)
}

/// Long enough for every analysis, with noise and a mid-sample halving.
fn demo_market(seed: Option<u64>) -> SynthConfig {
    SynthConfig {
        n_days: 240,
        noise_std: 0.03,
        halving_day: Some(120),
        seed: seed.unwrap_or(1),
        ..SynthConfig::default()
    }
}

fn synth_with(ctx: &mut Ctx, cfg: SynthConfig, path: Option<PathBuf>) -> Result<()> {
    ctx.commit(|ctx| {
        let mut st = ctx.stage("synth")?;
        if let Some(p) = &path {
            st.input(p)?;
        }
        let out = generate(&cfg)?;
        st.write(SNAPSHOT, &snapshot_csv_bytes(&out.rows)?)?;
        st.write(FX, &out.fx.to_csv_bytes()?)?;
        st.write(SYNTH_CONFIG, &synth_toml(&cfg)?)?;
        let history = SubnetHistory::from_rows(&out.rows)?;
        let panel = build_panel(&history, Some(&out.fx), ctx.cfg.panel_options());
        let prop1 = prop1_from_panel(&history, &panel, cfg.restake_fraction)?;
        st.write_json("prop1.json", &prop1)?;
        let halving = halving_experiment(&cfg)?;
        st.write_json("halving.json", &halving)?;
        log::info!(
            "size premium {:.6} vs predicted {:.6}; halving ratio {:?}",
            prop1.measured,
            prop1.predicted,
            halving.fit.as_ref().and_then(|f| f.ratio)
        );
        Ok(st)
    })
}

fn build_panel_cmd(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let pd = make_panel(load_source(&ctx.run)?, &ctx.cfg)?;
        let mut st = ctx.stage("build-panel")?;
        st.input(&pd.source.snapshot_path)?;
        let p = &pd.panel;
        st.write("r_tao.csv", &p.r_tao_csv()?)?;
        if pd.source.fx.is_some() {
            st.write("r_usd.csv", &p.r_usd_csv()?)?;
        }
        st.write("eligibility.csv", &p.eligibility_csv()?)?;
        st.write(
            "lifecycle.csv",
            &wide_csv(&p.axis, &p.lifecycle, |v| v.map(|x| x.to_string()).unwrap_or_default())?,
        )?;
        let counts = p.eligible_counts();
        let active: Vec<usize> = (0..p.axis.n_dates())
            .map(|t| p.lifecycle.row(t).iter().filter(|l| l.is_some()).count())
            .collect();
        st.write(
            "active_subnets.csv",
            &table(
                &["date", "active", "eligible"],
                p.axis
                    .dates
                    .iter()
                    .enumerate()
                    .map(|(t, d)| vec![d.to_string(), active[t].to_string(), counts[t].to_string()]),
            )?,
        )?;
        let svg = Chart {
            title: "Active and eligible subnets".into(),
            x_label: "date".into(),
            y_label: "subnets".into(),
            lines: vec![
                Line {
                    label: "active".into(),
                    points: active
                        .iter()
                        .enumerate()
                        .map(|(t, n)| (t as f64, Some(*n as f64)))
                        .collect(),
                },
                Line {
                    label: "eligible".into(),
                    points: counts
                        .iter()
                        .enumerate()
                        .map(|(t, n)| (t as f64, Some(*n as f64)))
                        .collect(),
                },
            ],
            x_ticks: date_ticks(&p.axis.dates),
            ..Default::default()
        }
        .to_svg();
        st.write("active_subnets.svg", svg.as_bytes())?;
        st.write_json("quarantined.json", &p.quarantined)?;
        let eligible: usize = counts.iter().sum();
        if eligible == 0 {
            log::warn!("the panel has no eligible subnet-days");
        }
        st.write_json(
            "summary.json",
            &json!({
                "source": pd.source.dir,
                "dates": p.axis.n_dates(),
                "subnets": p.axis.n_subnets(),
                "eligible_cells": eligible,
                "mean_eligible": eligible as f64 / p.axis.n_dates().max(1) as f64,
                "max_eligible": counts.iter().max(),
                "quarantined": p.quarantined.len(),
                "winsor_bound": ctx.cfg.winsor_bound,
                "min_history": ctx.cfg.min_history,
                "usd": pd.source.fx.is_some(),
            }),
        )?;
        Ok(st)
    })
}

fn leg_series(p: &TercilePortfolios) -> Vec<FactorSeries> {
    Leg::ALL
        .iter()
        .map(|leg| {
            let name = format!("{}_{}", p.sort, format!("{leg:?}").to_lowercase());
            FactorSeries::from_returns(&name, p.dates.clone(), p.leg(*leg).to_vec())
        })
        .collect()
}

fn factors(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let pd = load_panel(ctx)?;
        let opts = ctx.cfg.factor_options();
        let mut all = build_all_factors(&pd.history, &pd.panel, &opts)?;
        if pd.source.fx.is_some() {
            let mut usd = market_factor(&pd.panel, Denomination::Usd);
            usd.name = "MKT_USD".into();
            all.push(usd);
        }
        let mut st = ctx.stage("factors")?;
        st.write("factors.csv", &factors_csv(&all)?)?;

        let mut legs = Vec::new();
        let mut tercile_rows = Vec::new();
        let mut leg_counts = BTreeMap::new();
        for kind in FactorKind::ALL {
            let Some((sort, _)) = kind.sort() else { continue };
            let chr = characteristic(sort, &pd.history, &pd.panel)?;
            st.write(&format!("characteristics/{sort}.csv"), &chr.to_csv(&pd.panel.axis)?)?;
            let p = tercile_portfolios(&chr, &pd.panel, &opts)?;
            let min = |k: usize| p.counts.iter().map(|c| c[k]).filter(|n| *n > 0).min().unwrap_or(0);
            leg_counts.insert(
                kind.as_str(),
                json!({"masked": chr.masked, "min_leg_size": [min(0), min(1), min(2)]}),
            );
            legs.extend(leg_series(&p));
            match tercile_table(kind, &chr, &pd.panel, &opts) {
                Ok(rows) => tercile_rows.extend(rows.into_iter().map(|r| {
                    vec![
                        kind.as_str().into(),
                        r.label,
                        num(r.mean),
                        num(r.ann_return),
                        num(r.ann_std),
                        num(r.sharpe),
                        r.n.to_string(),
                    ]
                })),
                Err(e) => log::warn!("{kind} tercile table: {e}"),
            }
        }
        st.write("portfolios.csv", &factors_csv(&legs)?)?;
        st.write(
            "terciles.csv",
            &table(
                &["factor", "portfolio", "mean", "ann_return", "ann_std", "sharpe", "n"],
                tercile_rows,
            )?,
        )?;
        st.write_json("legs.json", &leg_counts)?;

        let main = main_factors(&all);
        let corr = correlation_matrix(&main);
        let mut header = vec![""];
        header.extend(main.iter().map(|s| s.name.as_str()));
        st.write(
            "correlation.csv",
            &table(
                &header,
                main.iter().zip(&corr).map(|(s, row)| {
                    let mut r = vec![s.name.clone()];
                    r.extend(row.iter().map(|v| opt(*v)));
                    r
                }),
            )?,
        )?;

        let refs: Vec<&FactorSeries> = main.iter().collect();
        st.write("cumulative.csv", &cumulative_csv(&refs)?)?;
        st.write(
            "cumulative.svg",
            growth_chart("Cumulative factor returns", &refs, vec![]).as_bytes(),
        )?;
        let leg_refs: Vec<&FactorSeries> = legs.iter().collect();
        st.write("leg_cumulative.csv", &cumulative_csv(&leg_refs)?)?;
        for (file, title, sorts) in [
            ("size_terciles.svg", "Size terciles", &["MCAP"][..]),
            ("emission_yield_terciles.svg", "Emission-yield terciles", &["EY"][..]),
            ("momentum_terciles.svg", "Momentum terciles", &["MOM7", "MOM30"][..]),
        ] {
            let chosen: Vec<&FactorSeries> = legs
                .iter()
                .filter(|s| sorts.iter().any(|p| s.name.starts_with(&format!("{p}_"))))
                .collect();
            st.write(file, growth_chart(title, &chosen, vec![]).as_bytes())?;
        }
        Ok(st)
    })
}

#[derive(Serialize)]
struct StatsEntry {
    factor: String,
    stats: Option<crate::econometrics::SummaryStats>,
    error: Option<String>,
}

fn stats(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let all = load_factors(ctx)?;
        if all.iter().all(|s| s.n_present() == 0) {
            return Err(Error::NoEligibleObservations(
                "no factor has a single return; the panel has no eligible subnet-days".into(),
            ));
        }
        let mut st = ctx.stage("stats")?;
        let entries: Vec<StatsEntry> = all
            .iter()
            .map(
                |s| match summary_stats(&s.present(), ctx.cfg.hac_lags, KurtosisConvention::Raw) {
                    Ok(v) => StatsEntry {
                        factor: s.name.clone(),
                        stats: Some(v),
                        error: None,
                    },
                    Err(e) => {
                        log::warn!("{}: {e}", s.name);
                        StatsEntry {
                            factor: s.name.clone(),
                            stats: None,
                            error: Some(e.to_string()),
                        }
                    }
                },
            )
            .collect();
        let rows = entries.iter().map(|e| {
            let mut r = vec![e.factor.clone()];
            match &e.stats {
                Some(s) => r.extend([
                    num(s.mean),
                    num(s.std),
                    num(s.sharpe),
                    num(s.t_ols),
                    num(s.t_nw),
                    opt(s.skewness),
                    opt(s.kurtosis),
                    s.n.to_string(),
                ]),
                None => r.extend(std::iter::repeat_n(String::new(), 8)),
            }
            r
        });
        st.write(
            "summary.csv",
            &table(
                &[
                    "factor", "mean", "std", "sharpe", "t_ols", "t_nw", "skewness", "kurtosis", "n",
                ],
                rows,
            )?,
        )?;
        st.write_json("summary.json", &entries)?;
        st.write(
            "sharpe_t.csv",
            &table(
                &["factor", "sharpe", "t_nw"],
                entries.iter().filter_map(|e| {
                    let s = e.stats.as_ref()?;
                    Some(vec![e.factor.clone(), num(s.sharpe), num(s.t_nw)])
                }),
            )?,
        )?;
        Ok(st)
    })
}

fn fm(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let pd = load_panel(ctx)?;
        let all = load_factors(ctx)?;
        let chosen: Vec<FactorSeries> = ["MKT", "SMB", "HML_EMIS", "WML7"]
            .iter()
            .map(|n| pick(&all, n).cloned())
            .collect::<Result<_>>()?;
        let res = fama_macbeth(
            &pd.panel,
            &chosen,
            ctx.cfg.denomination,
            ctx.cfg.experiments.min_first_pass_obs,
        )?;
        let mut st = ctx.stage("fm")?;
        let s = &res.second;
        st.write(
            "premia.csv",
            &table(
                &["variable", "premium", "se", "t", "p"],
                (0..s.names.len()).map(|j| {
                    vec![
                        s.names[j].clone(),
                        num(s.premia[j]),
                        num(s.se[j]),
                        num(s.t[j]),
                        num(s.p[j]),
                    ]
                }),
            )?,
        )?;
        let mut header = vec!["netuid", "lifecycle", "n_obs"];
        header.extend(res.first.factor_names.iter().map(String::as_str));
        st.write(
            "betas.csv",
            &table(
                &header,
                res.first.subnets.iter().map(|b| {
                    let mut r = vec![b.netuid.to_string(), b.lifecycle.to_string(), b.n_obs.to_string()];
                    r.extend(b.betas.iter().map(|v| num(*v)));
                    r
                }),
            )?,
        )?;
        let mut header = vec!["date"];
        header.extend(s.names.iter().map(String::as_str));
        st.write(
            "slopes.csv",
            &table(
                &header,
                s.dates.iter().zip(&s.slopes).map(|(d, row)| {
                    let mut r = vec![d.to_string()];
                    r.extend(row.iter().map(|v| num(*v)));
                    r
                }),
            )?,
        )?;
        st.write_json(
            "fm.json",
            &json!({
                "factors": res.first.factor_names,
                "min_obs": res.first.min_obs,
                "lifecycles": res.first.subnets.len(),
                "excluded_lifecycles": res.first.excluded.len(),
                "n_days": s.n_days,
                "skipped_days": s.skipped_days,
                "avg_cross_section": s.avg_cross_section,
                "premia": s.names.iter().zip(&s.premia).map(|(n, p)| (n.clone(), *p)).collect::<BTreeMap<_, _>>(),
            }),
        )?;
        Ok(st)
    })
}

const GRS_SORTS: [&str; 4] = ["MCAP", "EY", "MOM7", "MOM30"];
const GRS_FACTORS: [&str; 3] = ["MKT", "SMB", "WML30"];

fn grs(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let all = load_factors(ctx)?;
        let legs = load_portfolios(ctx)?;
        let ports: Vec<FactorSeries> = GRS_SORTS
            .iter()
            .flat_map(|s| ["bottom", "middle", "top"].map(|l| format!("{s}_{l}")))
            .map(|n| pick(&legs, &n).cloned())
            .collect::<Result<_>>()?;
        let facs: Vec<FactorSeries> = GRS_FACTORS.iter().map(|n| pick(&all, n).cloned()).collect::<Result<_>>()?;
        let res = grs_test_series(&ports, &facs)?;
        let mut st = ctx.stage("grs")?;
        st.write(
            "grs.csv",
            &table(
                &["f_stat", "p_value", "mean_abs_alpha", "t", "n", "n_effective", "k"],
                [vec![
                    num(res.f_stat),
                    num(res.p_value),
                    num(res.mean_abs_alpha),
                    res.t.to_string(),
                    res.n.to_string(),
                    res.n_effective.to_string(),
                    res.k.to_string(),
                ]],
            )?,
        )?;
        st.write(
            "alphas.csv",
            &table(&["portfolio", "alpha"], ports.iter().zip(&res.alphas).map(|(p, a)| vec![p.name.clone(), num(*a)]))?,
        )?;
        st.write_json("grs.json", &json!({"portfolios": ports.iter().map(|p| &p.name).collect::<Vec<_>>(), "factors": GRS_FACTORS, "result": res}))?;
        Ok(st)
    })
}

fn spanning(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let main = main_factors(&load_factors(ctx)?);
        let hac = ctx.cfg.experiments.spanning_hac.then_some(ctx.cfg.hac_lags);
        let rows = spanning_alphas(&main, hac)?;
        let mut st = ctx.stage("spanning")?;
        st.write(
            "spanning.csv",
            &table(
                &["factor", "alpha", "t", "r_squared", "n"],
                rows.iter().map(|r| {
                    vec![
                        r.factor.clone(),
                        num(r.alpha),
                        num(r.t),
                        num(r.r_squared),
                        r.n.to_string(),
                    ]
                }),
            )?,
        )?;
        st.write_json(
            "spanning.json",
            &json!({"t_statistic": if hac.is_some() { "newey_west" } else { "ols" }, "hac_lags": hac, "rows": rows}),
        )?;
        Ok(st)
    })
}

fn event_row(label: String, r: &EventStudyResult) -> Vec<String> {
    let mut row = vec![label, r.event_date.to_string()];
    match &r.fit {
        Some(f) => row.extend([
            num(f.pre_mean),
            num(f.post_mean),
            opt(f.ratio),
            num(f.beta),
            num(f.beta_nw_se),
            num(f.beta_nw_t),
            num(f.p_value),
            opt(f.gamma),
            f.n_pre.to_string(),
            f.n_post.to_string(),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), 10)),
    }
    row.push(r.note.clone().unwrap_or_default());
    row
}

const EVENT_HEADER: [&str; 13] = [
    "window",
    "event_date",
    "pre_mean",
    "post_mean",
    "ratio",
    "beta",
    "beta_nw_se",
    "beta_nw_t",
    "p_value",
    "gamma",
    "n_pre",
    "n_post",
    "note",
];

fn halving(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        ctx.run.require("build-panel", "r_tao.csv")?;
        let all = load_factors(ctx)?;
        let (smb, mkt) = (pick(&all, "SMB")?, pick(&all, "MKT")?);
        let event = event_date(ctx)?;
        let ex = &ctx.cfg.experiments;
        let rows = halving_event_study(smb, mkt, event, &ex.windows, &event_options(&ctx.cfg))?;
        let mut st = ctx.stage("halving")?;
        st.write(
            "halving.csv",
            &table(
                &EVENT_HEADER,
                rows.iter()
                    .map(|r| event_row(r.window.map_or("full".into(), |w| w.to_string()), r)),
            )?,
        )?;
        st.write_json(
            "halving.json",
            &json!({"event_date": event, "market_control": ex.market_control, "rows": rows}),
        )?;
        let cum = cumulative_and_rolling(smb, ROLLING_MEAN_DAYS);
        st.write(
            "cumulative_smb.csv",
            &table(
                &["date", "cumulative", "rolling_mean"],
                cum.iter().map(|(d, c, m)| vec![d.to_string(), num(*c), opt(*m)]),
            )?,
        )?;
        let marker = smb
            .dates
            .iter()
            .position(|d| *d == event)
            .map(|k| (k as f64, "halving".to_string()));
        st.write(
            "cumulative_smb.svg",
            growth_chart(
                "Cumulative size factor around the halving",
                &[smb],
                marker.into_iter().collect(),
            )
            .as_bytes(),
        )?;
        Ok(st)
    })
}

fn placebo(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let all = load_factors(ctx)?;
        let (smb, mkt) = (pick(&all, "SMB")?, pick(&all, "MKT")?);
        let event = event_date(ctx)?;
        let ex = &ctx.cfg.experiments;
        let scan = placebo_scan(
            smb,
            mkt,
            event,
            &ex.placebo_offsets,
            ex.placebo_window,
            &event_options(&ctx.cfg),
        )?;
        let mut st = ctx.stage("placebo")?;
        let mut header = vec!["offset_days"];
        header.extend(EVENT_HEADER.iter().skip(1));
        header.push("exceeds_actual");
        let mut rows = vec![{
            let mut r = event_row("0".into(), &scan.actual);
            r.push(String::new());
            r
        }];
        rows.extend(scan.placebos.iter().map(|p| {
            let mut r = event_row(p.offset_days.to_string(), &p.result);
            r.push(p.exceeds_actual.to_string());
            r
        }));
        st.write("placebo.csv", &table(&header, rows)?)?;
        st.write_json("placebo.json", &json!({"window": ex.placebo_window, "scan": scan}))?;
        Ok(st)
    })
}

fn slippage_rows(r: &SlippageReport) -> impl Iterator<Item = Vec<String>> + '_ {
    r.rows.iter().map(|row| {
        vec![
            r.label.clone(),
            num(row.aum_usd),
            num(row.slippage[0]),
            num(row.slippage[1]),
            num(row.slippage[2]),
            num(row.rt_cost),
            opt(row.net),
            opt(row.net_sharpe),
        ]
    })
}

fn slippage(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let pd = load_panel(ctx)?;
        let all = load_factors(ctx)?;
        let xs = pick(&all, "SMB")?.present();
        let (Some(mean), Some(std)) = (moments::mean(&xs), moments::sample_std(&xs)) else {
            return Err(Error::NoEligibleObservations("SMB has fewer than two returns".into()));
        };
        let gross = GrossReturn { mean, std };
        let ex = &ctx.cfg.experiments;
        let capacity = panel_capacity(
            &pd.history,
            &pd.panel,
            pd.source.fx.as_ref(),
            ex.tao_usd,
            ctx.cfg.tercile_convention,
            &ex.aum_grid,
            gross,
            ex.turnover,
        )?;
        let scaled = ex
            .reference_slippage
            .map(|refs| scaled_slippage(ex.reference_aum, refs, &ex.aum_grid, gross, ex.turnover))
            .transpose()?;
        let reports: Vec<&SlippageReport> = [&capacity.daily, &capacity.median]
            .into_iter()
            .chain(scaled.as_ref())
            .collect();
        let mut st = ctx.stage("slippage")?;
        st.write(
            "slippage.csv",
            &table(
                &[
                    "method",
                    "aum_usd",
                    "slippage_bottom",
                    "slippage_middle",
                    "slippage_top",
                    "rt_cost",
                    "net",
                    "net_sharpe",
                ],
                reports.iter().flat_map(|r| slippage_rows(r)),
            )?,
        )?;
        st.write_json(
            "slippage.json",
            &json!({"gross": gross, "turnover": ex.turnover, "capacity": capacity, "scaled": scaled}),
        )?;
        let svg = Chart {
            title: "Round-trip cost of the size factor by fund size".into(),
            x_label: "log10 AUM (USD)".into(),
            y_label: "daily cost".into(),
            log_y: true,
            lines: reports
                .iter()
                .map(|r| Line {
                    label: r.label.clone(),
                    points: r.rows.iter().map(|x| (x.aum_usd.log10(), Some(x.rt_cost))).collect(),
                })
                .collect(),
            ..Default::default()
        }
        .to_svg();
        st.write("slippage.svg", svg.as_bytes())?;
        Ok(st)
    })
}

fn vol_sorts_cmd(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let pd = load_panel(ctx)?;
        let opts = ctx.cfg.factor_options();
        let market = market_factor(&pd.panel, ctx.cfg.denomination).returns;
        let rows = vol_sorts(&pd.panel, &market, &Characteristic::ROLLING, &opts)?;
        let mut st = ctx.stage("vol-sorts")?;
        st.write(
            "vol_sorts.csv",
            &table(
                &["sort", "low", "mid", "high", "high_minus_low", "t", "n"],
                rows.iter().map(|r| {
                    vec![
                        r.sort.to_string(),
                        num(r.low),
                        num(r.mid),
                        num(r.high),
                        num(r.high_minus_low),
                        num(r.t),
                        r.n.to_string(),
                    ]
                }),
            )?,
        )?;
        st.write_json("vol_sorts.json", &rows)?;
        let vol = rolling_risk(Characteristic::Vol30, &pd.panel, &market)?;
        let legs = leg_series(&tercile_portfolios(&vol, &pd.panel, &opts)?);
        let refs: Vec<&FactorSeries> = legs.iter().collect();
        st.write("vol_terciles.csv", &cumulative_csv(&refs)?)?;
        st.write(
            "vol_terciles.svg",
            growth_chart("Volatility terciles", &refs, vec![]).as_bytes(),
        )?;
        Ok(st)
    })
}

fn risk(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let main = main_factors(&load_factors(ctx)?);
        let mut st = ctx.stage("risk-decomp")?;
        let mut entries = Vec::new();
        let rows: Vec<Vec<String>> = main
            .iter()
            .map(|s| {
                let mut r = vec![s.name.clone()];
                match risk_decomposition(&s.present()) {
                    Ok(d) => {
                        r.extend([
                            num(d.mean),
                            num(d.std),
                            num(d.downside_dev),
                            num(d.upside_dev),
                            num(d.down_up_ratio),
                            num(d.sortino),
                            num(d.pct_negative),
                            d.n.to_string(),
                            String::new(),
                        ]);
                        entries.push(json!({"factor": s.name, "risk": d}));
                    }
                    Err(e) => {
                        r.extend(std::iter::repeat_n(String::new(), 8));
                        r.push(e.to_string());
                        entries.push(json!({"factor": s.name, "error": e.to_string()}));
                    }
                }
                r
            })
            .collect();
        st.write(
            "risk.csv",
            &table(
                &[
                    "factor",
                    "mean",
                    "std",
                    "downside_dev",
                    "upside_dev",
                    "down_up_ratio",
                    "sortino",
                    "pct_negative",
                    "n",
                    "note",
                ],
                rows,
            )?,
        )?;
        st.write_json("risk.json", &entries)?;
        Ok(st)
    })
}

fn subsample(ctx: &mut Ctx) -> Result<()> {
    ctx.commit(|ctx| {
        let main = main_factors(&load_factors(ctx)?);
        let dates = main.first().map(|s| s.dates.clone()).unwrap_or_default();
        let split = match ctx.cfg.experiments.split_date {
            Some(d) => d,
            None => *dates
                .get(dates.len() / 2)
                .ok_or_else(|| Error::InsufficientData("the factor file has no dates".into()))?,
        };
        let rows = subsample_split(&main, split)?;
        let mut st = ctx.stage("subsample")?;
        st.write(
            "subsample.csv",
            &table(
                &[
                    "factor",
                    "full_mean",
                    "full_t",
                    "first_mean",
                    "first_t",
                    "second_mean",
                    "second_t",
                    "n_first",
                    "n_second",
                ],
                rows.iter().map(|r| {
                    vec![
                        r.factor.clone(),
                        opt(r.full.mean),
                        opt(r.full.t),
                        opt(r.first.mean),
                        opt(r.first.t),
                        opt(r.second.mean),
                        opt(r.second.t),
                        r.first.n.to_string(),
                        r.second.n.to_string(),
                    ]
                }),
            )?,
        )?;
        st.write_json("subsample.json", &json!({"split_date": split, "rows": rows}))?;
        Ok(st)
    })
}

fn report(ctx: &mut Ctx) -> Result<()> {
    if source_dir(&ctx.run).is_err() {
        let s = &ctx.cfg.source;
        if s.snapshot.is_none() && s.remote.is_none() && s.synth.is_none() {
            log::warn!("no data source configured; reporting on a simulated market");
            let cfg = demo_market(ctx.cfg.seed);
            synth_with(ctx, cfg, None)?;
        } else {
            ingest(ctx)?;
        }
    }
    type Step = fn(&mut Ctx) -> Result<()>;
    let steps: [(&str, Step); 12] = [
        ("build-panel", build_panel_cmd),
        ("factors", factors),
        ("stats", stats),
        ("fm", fm),
        ("grs", grs),
        ("spanning", spanning),
        ("halving", halving),
        ("placebo", placebo),
        ("slippage", slippage),
        ("vol-sorts", vol_sorts_cmd),
        ("risk-decomp", risk),
        ("subsample", subsample),
    ];
    // the panel and factors feed everything else; later steps may fail on
    // data that cannot support them without sinking the rest of the report
    let mut failed = BTreeMap::new();
    for (k, (name, step)) in steps.into_iter().enumerate() {
        log::info!("report: {name}");
        match step(ctx) {
            Ok(()) => {}
            Err(e) if k >= 2 => {
                log::warn!("report: {name} failed: {e}");
                failed.insert(name, e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    ctx.commit(|ctx| {
        let mut st = ctx.stage("report")?;
        let tables = [
            ("factor_summary", "stats/summary.csv"),
            ("tercile_portfolios", "factors/terciles.csv"),
            ("factor_correlations", "factors/correlation.csv"),
            ("fama_macbeth", "fm/premia.csv"),
            ("grs", "grs/grs.csv"),
            ("spanning", "spanning/spanning.csv"),
            ("subsample", "subsample/subsample.csv"),
            ("halving", "halving/halving.csv"),
            ("placebo", "placebo/placebo.csv"),
            ("slippage", "slippage/slippage.csv"),
            ("vol_sorts", "vol-sorts/vol_sorts.csv"),
            ("risk_decomposition", "risk-decomp/risk.csv"),
        ];
        let figures = [
            ("factor_cumulative", "factors/cumulative.csv", "factors/cumulative.svg"),
            ("size_terciles", "factors/leg_cumulative.csv", "factors/size_terciles.svg"),
            ("momentum_terciles", "factors/leg_cumulative.csv", "factors/momentum_terciles.svg"),
            ("emission_yield_terciles", "factors/leg_cumulative.csv", "factors/emission_yield_terciles.svg"),
            ("factor_correlations", "factors/correlation.csv", ""),
            ("sharpe_and_t", "stats/sharpe_t.csv", ""),
            ("active_subnets", "build-panel/active_subnets.csv", "build-panel/active_subnets.svg"),
            ("halving_cumulative_smb", "halving/cumulative_smb.csv", "halving/cumulative_smb.svg"),
            ("slippage", "slippage/slippage.csv", "slippage/slippage.svg"),
            ("vol_terciles", "vol-sorts/vol_terciles.csv", "vol-sorts/vol_terciles.svg"),
            ("risk_decomposition", "risk-decomp/risk.csv", ""),
        ];
        let root = ctx.run.root();
        let present = |p: &str| !p.is_empty() && root.join(p).is_file();
        let mut index = json!({
            "tables": tables.iter().filter(|(_, p)| present(p)).map(|(k, p)| (k.to_string(), json!(p))).collect::<serde_json::Map<_, _>>(),
            "figures": figures
                .iter()
                .filter(|(_, d, _)| present(d))
                .map(|(k, d, s)| (k.to_string(), json!({"data": d, "svg": present(s).then_some(s)})))
                .collect::<serde_json::Map<_, _>>(),
        });
        index["failed"] = json!(failed);
        if root.join("synth/prop1.json").is_file() {
            index["synthetic"] = json!({"prop1": "synth/prop1.json", "halving": "synth/halving.json"});
        }
        st.write_json("index.json", &index)?;
        Ok(st)
    })
}
