//! Simulated network of constant-product pools.
//!
//! Each day emissions are allocated from the previous day's state, a fraction
//! is staked back into the receiving pool, and an optional mean-preserving
//! price shock is applied by moving the base reserve along the curve. Output
//! rows use the snapshot schema, so everything downstream runs unchanged.

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::amm::{allocate_emissions_flow, allocate_emissions_price, EmissionPolicy, FlowEmaState, PoolState};
use crate::characteristics::{characteristic, Characteristic};
use crate::error::{Error, Result};
use crate::experiments::event::{halving_event_study, EventStudyOptions, EventStudyResult};
use crate::factors::{build_factor, market_factor, FactorKind, FactorOptions};
use crate::grid::DateMatrix;
use crate::ingest::{FxSeries, RawSnapshotRow, RAO_PER_TAO};
use crate::moments;
use crate::panel::{build_panel, Denomination, PanelOptions, ReturnPanel, SubnetHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecycleEvent {
    pub netuid: u32,
    pub day: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subnets: usize,
    /// Base reserves are drawn log-uniformly from `[reserve_min, reserve_max]`.
    pub reserve_min: f64,
    pub reserve_max: f64,
    /// Total base-token emission per day.
    pub daily_emission: f64,
    pub policy: EmissionPolicy,
    /// Share of each subnet's emission staked back into its own pool.
    pub restake_fraction: f64,
    /// Daily standard deviation of the multiplicative price shock.
    pub noise_std: f64,
    /// Emission is halved from this day index on.
    pub halving_day: Option<usize>,
    pub n_days: usize,
    pub seed: u64,
    pub initial_price: f64,
    /// Staked alpha at start as a multiple of the pool's alpha reserve.
    pub staked_ratio: f64,
    pub start_date: NaiveDate,
    /// Flat base-token price for the USD series.
    pub tao_usd: f64,
    /// Slots that are deregistered and re-registered on the given day.
    pub recycle: Vec<RecycleEvent>,
    pub startup_days: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subnets: 60,
            reserve_min: 100.0,
            reserve_max: 10_000.0,
            daily_emission: 50.0,
            policy: EmissionPolicy::PriceProportional,
            restake_fraction: 1.0,
            noise_std: 0.0,
            halving_day: None,
            n_days: 90,
            seed: 1,
            initial_price: 0.01,
            staked_ratio: 1.0,
            start_date: NaiveDate::from_ymd_opt(2025, 2, 14).expect("valid date"),
            tao_usd: 345.0,
            recycle: Vec::new(),
            startup_days: 7,
        }
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_subnets == 0 {
            return bad("n_subnets must be positive".into());
        }
        if !(self.reserve_min > 0.0 && self.reserve_max >= self.reserve_min && self.reserve_max.is_finite()) {
            return bad(format!(
                "invalid reserve bounds [{}, {}]",
                self.reserve_min, self.reserve_max
            ));
        }
        if !(self.daily_emission.is_finite() && self.daily_emission >= 0.0) {
            return bad(format!(
                "daily_emission must be non-negative, got {}",
                self.daily_emission
            ));
        }
        if !(0.0..=1.0).contains(&self.restake_fraction) {
            return bad(format!(
                "restake_fraction must be in [0, 1], got {}",
                self.restake_fraction
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std must be non-negative, got {}", self.noise_std));
        }
        if self.n_days < 2 {
            return bad("n_days must be at least 2".into());
        }
        if let Some(h) = self.halving_day {
            if h == 0 || h >= self.n_days {
                return bad(format!("halving_day {h} must be inside 1..{}", self.n_days));
            }
        }
        if !(self.initial_price > 0.0 && self.initial_price.is_finite()) {
            return bad("initial_price must be positive".into());
        }
        if !(self.staked_ratio >= 0.0 && self.staked_ratio.is_finite()) {
            return bad("staked_ratio must be non-negative".into());
        }
        if !(self.tao_usd > 0.0 && self.tao_usd.is_finite()) {
            return bad("tao_usd must be positive".into());
        }
        for ev in &self.recycle {
            if ev.netuid == 0 || ev.netuid as usize > self.n_subnets || ev.day == 0 || ev.day >= self.n_days {
                return bad(format!("recycle event {ev:?} is outside the simulation"));
            }
        }
        self.policy.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn date(&self, day: usize) -> NaiveDate {
        self.start_date + Days::new(day as u64)
    }

    fn emission_on(&self, day: usize) -> f64 {
        match self.halving_day {
            Some(h) if day >= h => 0.5 * self.daily_emission,
            _ => self.daily_emission,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub rows: Vec<RawSnapshotRow>,
    pub fx: FxSeries,
}

struct Slot {
    pool: PoolState,
    staked: f64,
    /// Remaining startup days; zero when active.
    startup_left: usize,
    prev_tau: Option<f64>,
}

fn draw_pool(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<(PoolState, f64)> {
    let (lo, hi) = (cfg.reserve_min.ln(), cfg.reserve_max.ln());
    let tau = if hi > lo {
        rng.gen_range(lo..hi).exp()
    } else {
        cfg.reserve_min
    };
    let pool = PoolState::with_price(tau, cfg.initial_price)?;
    Ok((pool, cfg.staked_ratio * pool.alpha_reserve()))
}

fn allocate(cfg: &SynthConfig, slots: &[Slot], ema: &mut FlowEmaState, total: f64) -> Result<Vec<f64>> {
    let active: Vec<bool> = slots.iter().map(|s| s.startup_left == 0).collect();
    let prices: Vec<f64> = slots
        .iter()
        .zip(&active)
        .map(|(s, a)| if *a { s.pool.spot_price() } else { 0.0 })
        .collect();
    match cfg.policy {
        EmissionPolicy::PriceProportional => allocate_emissions_price(&prices, total),
        EmissionPolicy::FlowEma { .. } => {
            let flows: Vec<f64> = slots
                .iter()
                .zip(&active)
                .map(|(s, a)| match (a, s.prev_tau) {
                    (true, Some(p)) => s.pool.tau_reserve() - p,
                    _ => 0.0,
                })
                .collect();
            let (next, mut em) = match allocate_emissions_flow(ema, &flows, total, cfg.policy) {
                Ok(v) => v,
                // no positive inflow yet: fall back to prices
                Err(Error::UndefinedAllocation(_)) => (
                    ema.update(&flows, half_life(cfg.policy))?,
                    allocate_emissions_price(&prices, total)?,
                ),
                Err(e) => return Err(e),
            };
            *ema = next;
            for (e, a) in em.iter_mut().zip(&active) {
                if !a {
                    *e = 0.0;
                }
            }
            let sum: f64 = em.iter().sum();
            if sum > 0.0 {
                em.iter_mut().for_each(|e| *e *= total / sum);
            }
            Ok(em)
        }
    }
}

fn half_life(policy: EmissionPolicy) -> f64 {
    match policy {
        EmissionPolicy::FlowEma { half_life_days } => half_life_days,
        EmissionPolicy::PriceProportional => f64::INFINITY,
    }
}

fn row_for(cfg: &SynthConfig, day: usize, netuid: u32, slot: &Slot, emission: f64) -> RawSnapshotRow {
    let active = slot.startup_left == 0;
    let p = slot.pool.spot_price();
    RawSnapshotRow {
        date: cfg.date(day),
        netuid,
        price_tao: active.then_some(p),
        mcap_tao: active.then(|| p * (slot.pool.alpha_reserve() + slot.staked)),
        tau_reserve: active.then(|| slot.pool.tau_reserve()),
        alpha_reserve: active.then(|| slot.pool.alpha_reserve()),
        alpha_staked: active.then_some(slot.staked),
        emission_rao_per_day: (emission * RAO_PER_TAO).round() as u64,
        startup_mode: !active,
    }
}

/// Simulate `n_days` days. Identical configs give identical rows.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut slots = Vec::with_capacity(cfg.n_subnets);
    for _ in 0..cfg.n_subnets {
        let (pool, staked) = draw_pool(cfg, &mut rng)?;
        slots.push(Slot {
            pool,
            staked,
            startup_left: 0,
            prev_tau: None,
        });
    }
    let mut ema = FlowEmaState::fresh(cfg.n_subnets);
    let mut rows = Vec::with_capacity(cfg.n_days * cfg.n_subnets);
    let day0 = allocate_emissions_price(
        &slots.iter().map(|s| s.pool.spot_price()).collect::<Vec<_>>(),
        cfg.emission_on(0),
    )?;
    for (i, s) in slots.iter().enumerate() {
        rows.push(row_for(cfg, 0, i as u32 + 1, s, day0[i]));
    }
    for day in 1..cfg.n_days {
        let emissions = if slots.iter().any(|s| s.startup_left == 0) {
            allocate(cfg, &slots, &mut ema, cfg.emission_on(day))?
        } else {
            vec![0.0; slots.len()]
        };
        let shocks: Vec<f64> = (0..slots.len()).map(|_| rng.sample(StandardNormal)).collect();
        for (i, slot) in slots.iter_mut().enumerate() {
            let netuid = i as u32 + 1;
            if slot.startup_left > 0 {
                slot.startup_left -= 1;
                if slot.startup_left == 0 {
                    let (pool, staked) = draw_pool(cfg, &mut rng)?;
                    slot.pool = pool;
                    slot.staked = staked;
                    slot.prev_tau = None;
                }
            } else if cfg.recycle.iter().any(|ev| ev.netuid == netuid && ev.day == day) {
                slot.startup_left = cfg.startup_days.max(1);
                slot.prev_tau = None;
            } else {
                slot.prev_tau = Some(slot.pool.tau_reserve());
                let out = slot.pool.stake(cfg.restake_fraction * emissions[i])?;
                slot.pool = out.pool;
                slot.staked += out.alpha_out;
                if cfg.noise_std > 0.0 {
                    let s = cfg.noise_std;
                    let m = ((s * shocks[i] - 0.5 * s * s) / 2.0).exp();
                    slot.pool = slot.pool.rebalance(m)?;
                }
            }
            let e = if slot.startup_left == 0 { emissions[i] } else { 0.0 };
            rows.push(row_for(cfg, day, netuid, slot, e));
        }
    }
    let fx = FxSeries::flat(cfg.start_date, cfg.date(cfg.n_days - 1), cfg.tao_usd)?;
    Ok(SynthOutput { rows, fx })
}

/// First-order impact `2 * restake * e(t) / tau(t-1)` wherever a return is observed.
pub fn predicted_impact_panel(history: &SubnetHistory, panel: &ReturnPanel, restake_fraction: f64) -> ReturnPanel {
    let (nd, ns) = (panel.axis.n_dates(), panel.axis.n_subnets());
    let mut pred = DateMatrix::filled(nd, ns, None);
    for t in 1..nd {
        for i in 0..ns {
            if panel.r_tao.value(t, i).is_none() {
                continue;
            }
            let (Some(now), Some(prev)) = (history.row(t, i), history.row(t - 1, i)) else {
                continue;
            };
            if let Some(tau) = prev.tau_reserve.filter(|t| *t > 0.0) {
                pred.set(t, i, Some(2.0 * restake_fraction * now.emission_tao_per_day() / tau));
            }
        }
    }
    ReturnPanel {
        r_usd: pred.clone(),
        r_tao: pred,
        ..panel.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop1Result {
    pub measured: f64,
    pub predicted: f64,
    /// `|measured - predicted| / |predicted|`; absent when nothing is predicted.
    pub relative_gap: Option<f64>,
    pub n_days: usize,
}

/// Size premium on simulated data against its first-order price-impact prediction.
pub fn prop1_experiment(cfg: &SynthConfig) -> Result<Prop1Result> {
    let out = generate(cfg)?;
    let history = SubnetHistory::from_rows(&out.rows)?;
    let panel = build_panel(&history, Some(&out.fx), PanelOptions::default());
    prop1_from_panel(&history, &panel, cfg.restake_fraction)
}

pub fn prop1_from_panel(history: &SubnetHistory, panel: &ReturnPanel, restake_fraction: f64) -> Result<Prop1Result> {
    let opts = FactorOptions::default();
    let mcap = characteristic(Characteristic::Mcap, history, panel)?;
    let measured = build_factor(FactorKind::Smb, &mcap, panel, &opts)?;
    let predicted_panel = predicted_impact_panel(history, panel, restake_fraction);
    let predicted = build_factor(FactorKind::Smb, &mcap, &predicted_panel, &opts)?;
    let (m, p): (Vec<f64>, Vec<f64>) = measured
        .returns
        .iter()
        .zip(&predicted.returns)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip();
    let (Some(mm), Some(pm)) = (moments::mean(&m), moments::mean(&p)) else {
        return Err(Error::NoEligibleObservations("no day has both size terciles".into()));
    };
    Ok(Prop1Result {
        measured: mm,
        predicted: pm,
        relative_gap: (pm != 0.0).then(|| (mm - pm).abs() / pm.abs()),
        n_days: m.len(),
    })
}

/// Full-sample event study at the configured halving day, or at the midpoint
/// when no halving is configured.
pub fn halving_experiment(cfg: &SynthConfig) -> Result<EventStudyResult> {
    let out = generate(cfg)?;
    let history = SubnetHistory::from_rows(&out.rows)?;
    let panel = build_panel(&history, Some(&out.fx), PanelOptions::default());
    let mcap = characteristic(Characteristic::Mcap, &history, &panel)?;
    let smb = build_factor(FactorKind::Smb, &mcap, &panel, &FactorOptions::default())?;
    let mkt = market_factor(&panel, Denomination::Tao);
    let event = cfg.date(cfg.halving_day.unwrap_or(cfg.n_days / 2));
    let rows = halving_event_study(&smb, &mkt, event, &[], &EventStudyOptions::default())?;
    Ok(rows.into_iter().last().expect("full-sample row"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::snapshot_csv_bytes;

    #[test]
    fn zero_emission_zero_noise_is_flat() {
        let cfg = SynthConfig {
            daily_emission: 0.0,
            n_subnets: 5,
            n_days: 10,
            ..Default::default()
        };
        let out = generate(&cfg).unwrap();
        for r in &out.rows {
            assert_eq!(r.price_tao, out.rows[r.netuid as usize - 1].price_tao);
            assert!((r.price_tao.unwrap() - 0.01).abs() < 1e-15);
        }
    }

    #[test]
    fn two_pool_day_one_returns() {
        let mut cfg = SynthConfig {
            n_subnets: 2,
            n_days: 2,
            daily_emission: 2.0,
            ..Default::default()
        };
        cfg.reserve_min = 100.0;
        cfg.reserve_max = 100.0;
        let out = generate(&cfg).unwrap();
        let r = out.rows[2].price_tao.unwrap() / out.rows[0].price_tao.unwrap() - 1.0;
        assert!((r - 0.0201).abs() < 1e-12);

        // a 100/1000 pair: run each alone with its share of emission
        let one = |tau: f64| {
            let c = SynthConfig {
                n_subnets: 1,
                n_days: 2,
                daily_emission: 1.0,
                reserve_min: tau,
                reserve_max: tau,
                ..Default::default()
            };
            let o = generate(&c).unwrap();
            o.rows[1].price_tao.unwrap() / o.rows[0].price_tao.unwrap() - 1.0
        };
        assert!((one(100.0) - 0.0201).abs() < 1e-12);
        assert!((one(1000.0) - 0.002001).abs() < 1e-12);
    }

    #[test]
    fn deterministic_bytes() {
        let cfg = SynthConfig {
            noise_std: 0.01,
            n_days: 20,
            ..Default::default()
        };
        let a = snapshot_csv_bytes(&generate(&cfg).unwrap().rows).unwrap();
        let b = snapshot_csv_bytes(&generate(&cfg).unwrap().rows).unwrap();
        assert_eq!(a, b);
        let other = SynthConfig { seed: 2, ..cfg };
        assert_ne!(a, snapshot_csv_bytes(&generate(&other).unwrap().rows).unwrap());
    }

    #[test]
    fn emission_conserved() {
        let cfg = SynthConfig {
            noise_std: 0.02,
            n_days: 15,
            ..Default::default()
        };
        let out = generate(&cfg).unwrap();
        for day in 1..cfg.n_days {
            let d = cfg.date(day);
            let total: f64 = out
                .rows
                .iter()
                .filter(|r| r.date == d)
                .map(|r| r.emission_tao_per_day())
                .sum();
            assert!((total - 50.0).abs() / 50.0 < 1e-9);
        }
    }

    #[test]
    fn recycling_injects_startup_gap() {
        let cfg = SynthConfig {
            n_subnets: 4,
            n_days: 30,
            recycle: vec![RecycleEvent { netuid: 2, day: 10 }],
            ..Default::default()
        };
        let out = generate(&cfg).unwrap();
        let startup: Vec<usize> = out
            .rows
            .iter()
            .filter(|r| r.netuid == 2 && r.startup_mode)
            .map(|r| (r.date - cfg.start_date).num_days() as usize)
            .collect();
        assert_eq!(startup, (10..17).collect::<Vec<_>>());
        let h = SubnetHistory::from_rows(&out.rows).unwrap();
        assert_eq!(h.lifecycle(17, 1), Some(1));
    }

    #[test]
    fn flow_policy_runs() {
        let cfg = SynthConfig {
            policy: EmissionPolicy::flow_ema_default(),
            noise_std: 0.01,
            n_days: 20,
            ..Default::default()
        };
        let out = generate(&cfg).unwrap();
        let d = cfg.date(19);
        let total: f64 = out
            .rows
            .iter()
            .filter(|r| r.date == d)
            .map(|r| r.emission_tao_per_day())
            .sum();
        assert!((total - 50.0).abs() < 1e-6);
    }

    #[test]
    fn bad_config_rejected() {
        assert!(SynthConfig {
            restake_fraction: 1.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SynthConfig::from_toml("n_subnets = 3\nbogus = 1\n").is_err());
        let c = SynthConfig::from_toml(
            "n_subnets = 3\nhalving_day = 5\n[policy]\nvariant = \"flow-ema\"\nhalf_life_days = 10.0\n",
        )
        .unwrap();
        assert_eq!(c.halving_day, Some(5));
    }
}
