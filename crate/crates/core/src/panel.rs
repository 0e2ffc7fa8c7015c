//! Survivorship-safe return panel.
//!
//! A subnet slot can be deregistered and re-registered by an unrelated project.
//! Re-registration shows up as a run of startup-mode days, so every time a slot
//! goes active → startup → active its lifecycle ordinal increases. Returns,
//! history counts and rolling windows never cross a lifecycle boundary.

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fmt_opt, wide_csv, DateMatrix, PanelAxis};
use crate::ingest::{FxSeries, RawSnapshotRow};

pub const ROOT_NETUID: u32 = 0;
pub const DEFAULT_MIN_HISTORY: usize = 7;
pub const DEFAULT_WINSOR_BOUND: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuarantinedRow {
    pub date: NaiveDate,
    pub netuid: u32,
    pub reason: String,
}

/// Snapshot rows laid out on the panel grid, with lifecycle ordinals.
#[derive(Debug, Clone)]
pub struct SubnetHistory {
    pub axis: PanelAxis,
    cells: DateMatrix<Option<RawSnapshotRow>>,
    /// Lifecycle ordinal on active days (non-startup with a usable price).
    lifecycle: DateMatrix<Option<u32>>,
    pub quarantined: Vec<QuarantinedRow>,
}

impl SubnetHistory {
    pub fn from_rows(rows: &[RawSnapshotRow]) -> Result<Self> {
        let first = rows.iter().map(|r| r.date).min();
        let last = rows.iter().map(|r| r.date).max();
        let (first, last) = match (first, last) {
            (Some(f), Some(l)) if l > f => (f, l),
            _ => return Err(Error::InsufficientData("snapshot must span at least two dates".into())),
        };
        let axis = PanelAxis::new(first, last, rows.iter().map(|r| r.netuid).collect());
        let mut cells = DateMatrix::filled(axis.n_dates(), axis.n_subnets(), None);
        for r in rows {
            let t = axis.date_index(r.date).expect("date within axis");
            let i = axis.subnet_index(r.netuid).expect("netuid within axis");
            if cells.get(t, i).is_some() {
                return Err(Error::DuplicateKey {
                    date: r.date,
                    netuid: r.netuid,
                });
            }
            cells.set(t, i, Some(r.clone()));
        }

        let mut lifecycle = DateMatrix::filled(axis.n_dates(), axis.n_subnets(), None);
        let mut quarantined = Vec::new();
        for i in 0..axis.n_subnets() {
            let mut ordinal = 0u32;
            let mut seen_active = false;
            let mut restarted = false;
            for t in 0..axis.n_dates() {
                let Some(row) = cells.get(t, i) else { continue };
                if row.startup_mode {
                    if seen_active {
                        restarted = true;
                    }
                    continue;
                }
                if row.active_price().is_none() {
                    quarantined.push(QuarantinedRow {
                        date: row.date,
                        netuid: row.netuid,
                        reason: row.issues().join("; "),
                    });
                    continue;
                }
                if restarted {
                    ordinal += 1;
                    restarted = false;
                }
                seen_active = true;
                lifecycle.set(t, i, Some(ordinal));
            }
        }
        Ok(Self {
            axis,
            cells,
            lifecycle,
            quarantined,
        })
    }

    pub fn row(&self, t: usize, i: usize) -> Option<&RawSnapshotRow> {
        self.cells.get(t, i).as_ref()
    }

    pub fn lifecycle(&self, t: usize, i: usize) -> Option<u32> {
        *self.lifecycle.get(t, i)
    }

    pub fn lifecycles(&self) -> &DateMatrix<Option<u32>> {
        &self.lifecycle
    }

    /// Price on an active day.
    pub fn price(&self, t: usize, i: usize) -> Option<f64> {
        self.lifecycle(t, i)?;
        self.row(t, i)?.active_price()
    }

    /// True when days `from..=to` are all active and in one lifecycle.
    pub fn continuous(&self, i: usize, from: usize, to: usize) -> bool {
        let Some(first) = self.lifecycle(from, i) else {
            return false;
        };
        (from..=to).all(|t| self.lifecycle(t, i) == Some(first))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PanelOptions {
    pub winsor_bound: f64,
    pub min_history: usize,
}

impl Default for PanelOptions {
    fn default() -> Self {
        Self {
            winsor_bound: DEFAULT_WINSOR_BOUND,
            min_history: DEFAULT_MIN_HISTORY,
        }
    }
}

/// Aligned date × subnet returns in base-token and USD terms.
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub axis: PanelAxis,
    pub r_tao: DateMatrix<Option<f64>>,
    pub r_usd: DateMatrix<Option<f64>>,
    pub eligibility: DateMatrix<bool>,
    pub lifecycle: DateMatrix<Option<u32>>,
    pub fx_returns: Vec<Option<f64>>,
    pub quarantined: Vec<QuarantinedRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Denomination {
    #[default]
    Tao,
    Usd,
}

impl std::str::FromStr for Denomination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tao" => Ok(Denomination::Tao),
            "usd" => Ok(Denomination::Usd),
            other => Err(Error::Config(format!("unknown denomination `{other}`"))),
        }
    }
}

impl ReturnPanel {
    pub fn returns(&self, denomination: Denomination) -> &DateMatrix<Option<f64>> {
        match denomination {
            Denomination::Tao => &self.r_tao,
            Denomination::Usd => &self.r_usd,
        }
    }

    pub fn eligible(&self, t: usize, i: usize) -> bool {
        *self.eligibility.get(t, i)
    }

    pub fn eligible_count(&self, t: usize) -> usize {
        self.eligibility.row(t).iter().filter(|e| **e).count()
    }

    pub fn eligible_counts(&self) -> Vec<usize> {
        (0..self.axis.n_dates()).map(|t| self.eligible_count(t)).collect()
    }

    pub fn r_tao_csv(&self) -> Result<Vec<u8>> {
        wide_csv(&self.axis, &self.r_tao, fmt_opt)
    }

    pub fn r_usd_csv(&self) -> Result<Vec<u8>> {
        wide_csv(&self.axis, &self.r_usd, fmt_opt)
    }

    pub fn eligibility_csv(&self) -> Result<Vec<u8>> {
        wide_csv(&self.axis, &self.eligibility, |e| {
            if *e { "1" } else { "0" }.to_string()
        })
    }
}

/// Simple daily returns within each lifecycle; eligibility is left all false.
pub fn compute_returns(history: &SubnetHistory, fx: Option<&FxSeries>) -> ReturnPanel {
    let axis = history.axis.clone();
    let (nd, ns) = (axis.n_dates(), axis.n_subnets());
    let fx_returns: Vec<Option<f64>> = axis.dates.iter().map(|d| fx.and_then(|f| f.return_on(*d))).collect();
    let mut r_tao = DateMatrix::filled(nd, ns, None);
    let mut r_usd = DateMatrix::filled(nd, ns, None);
    for t in 1..nd {
        for i in 0..ns {
            let (Some(lc), Some(prev_lc)) = (history.lifecycle(t, i), history.lifecycle(t - 1, i)) else {
                continue;
            };
            if lc != prev_lc {
                continue;
            }
            let (Some(p), Some(p_prev)) = (history.price(t, i), history.price(t - 1, i)) else {
                continue;
            };
            let r = p / p_prev - 1.0;
            r_tao.set(t, i, Some(r));
            if let Some(rf) = fx_returns[t] {
                r_usd.set(t, i, Some((1.0 + r) * (1.0 + rf) - 1.0));
            }
        }
    }
    ReturnPanel {
        eligibility: DateMatrix::filled(nd, ns, false),
        lifecycle: history.lifecycles().clone(),
        quarantined: history.quarantined.clone(),
        axis,
        r_tao,
        r_usd,
        fx_returns,
    }
}

/// Clamp every present return into `[-bound, bound]`.
pub fn winsorize(panel: &ReturnPanel, bound: f64) -> ReturnPanel {
    let clamp = |v: &Option<f64>| v.map(|x| x.clamp(-bound, bound));
    ReturnPanel {
        r_tao: panel.r_tao.map(clamp),
        r_usd: panel.r_usd.map(clamp),
        ..panel.clone()
    }
}

/// Eligible on day `t` iff active, not the root network, and with at least
/// `min_history` observed returns earlier in the same lifecycle.
pub fn apply_eligibility(panel: &ReturnPanel, min_history: usize) -> ReturnPanel {
    let (nd, ns) = (panel.axis.n_dates(), panel.axis.n_subnets());
    let mut eligibility = DateMatrix::filled(nd, ns, false);
    for i in 0..ns {
        if panel.axis.netuids[i] == ROOT_NETUID {
            continue;
        }
        let mut current: Option<u32> = None;
        let mut prior_returns = 0usize;
        for t in 0..nd {
            let lc = *panel.lifecycle.get(t, i);
            if lc.is_some() && lc != current {
                current = lc;
                prior_returns = 0;
            }
            if lc.is_some() && prior_returns >= min_history {
                eligibility.set(t, i, true);
            }
            if lc.is_some() && panel.r_tao.value(t, i).is_some() {
                prior_returns += 1;
            }
        }
    }
    ReturnPanel {
        eligibility,
        ..panel.clone()
    }
}

/// compute_returns → winsorize → apply_eligibility.
pub fn build_panel(history: &SubnetHistory, fx: Option<&FxSeries>, opts: PanelOptions) -> ReturnPanel {
    let raw = compute_returns(history, fx);
    let w = winsorize(&raw, opts.winsor_bound);
    apply_eligibility(&w, opts.min_history)
}
