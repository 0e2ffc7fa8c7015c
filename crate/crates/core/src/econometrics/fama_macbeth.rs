//! Two-pass cross-sectional premia.
//!
//! Betas come from one full-sample time-series regression per subnet
//! lifecycle, so a recycled slot gets fresh betas. Slopes are then estimated
//! day by day and averaged.

use std::collections::HashMap;

use chrono::NaiveDate;
use serde::Serialize;

use crate::econometrics::ols::{ols, p_student, INTERCEPT};
use crate::error::{Error, Result};
use crate::factors::FactorSeries;
use crate::moments;
use crate::panel::{Denomination, ReturnPanel};

/// Fewest time-series observations for a lifecycle to get betas.
pub const DEFAULT_MIN_FIRST_PASS_OBS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubnetBetas {
    pub netuid: u32,
    pub lifecycle: u32,
    pub n_obs: usize,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstPass {
    pub factor_names: Vec<String>,
    pub min_obs: usize,
    pub subnets: Vec<SubnetBetas>,
    /// Lifecycles with too little history: `(netuid, lifecycle, observations)`.
    pub excluded: Vec<(u32, u32, usize)>,
}

impl FirstPass {
    fn lookup(&self) -> HashMap<(u32, u32), &[f64]> {
        self.subnets
            .iter()
            .map(|s| ((s.netuid, s.lifecycle), s.betas.as_slice()))
            .collect()
    }
}

pub fn first_pass(
    panel: &ReturnPanel,
    factors: &[FactorSeries],
    denomination: Denomination,
    min_obs: usize,
) -> Result<FirstPass> {
    let k = factors.len();
    if k == 0 {
        return Err(Error::Domain("first pass needs at least one factor".into()));
    }
    let names: Vec<String> = factors.iter().map(|f| f.name.clone()).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let factor_at: Vec<Vec<Option<f64>>> = factors
        .iter()
        .map(|f| panel.axis.dates.iter().map(|d| f.value_on(*d)).collect())
        .collect();
    let returns = panel.returns(denomination);
    let (nd, ns) = (panel.axis.n_dates(), panel.axis.n_subnets());

    let mut subnets = Vec::new();
    let mut excluded = Vec::new();
    for i in 0..ns {
        // group observation days by lifecycle, in order of appearance
        let mut groups: Vec<(u32, Vec<usize>)> = Vec::new();
        for t in 0..nd {
            let (Some(lc), Some(_)) = (*panel.lifecycle.get(t, i), returns.value(t, i)) else {
                continue;
            };
            if factor_at.iter().any(|f| f[t].is_none()) {
                continue;
            }
            match groups.last_mut() {
                Some((g, days)) if *g == lc => days.push(t),
                _ => groups.push((lc, vec![t])),
            }
        }
        let netuid = panel.axis.netuids[i];
        for (lc, days) in groups {
            if days.len() < min_obs.max(k + 2) {
                excluded.push((netuid, lc, days.len()));
                continue;
            }
            let y: Vec<f64> = days.iter().map(|t| returns.value(*t, i).expect("filtered")).collect();
            let cols: Vec<Vec<f64>> = factor_at
                .iter()
                .map(|f| days.iter().map(|t| f[*t].expect("filtered")).collect())
                .collect();
            match ols(&y, &cols, &name_refs, true) {
                Ok(r) => subnets.push(SubnetBetas {
                    netuid,
                    lifecycle: lc,
                    n_obs: days.len(),
                    betas: r.coefficients[1..].to_vec(),
                }),
                Err(Error::SingularDesign { .. }) => excluded.push((netuid, lc, days.len())),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(FirstPass {
        factor_names: names,
        min_obs,
        subnets,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondPass {
    /// Intercept followed by one premium per factor.
    pub names: Vec<String>,
    pub premia: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub n_days: usize,
    /// Days with some observations but too few (or collinear) for a cross-section.
    pub skipped_days: usize,
    pub avg_cross_section: f64,
    pub dates: Vec<NaiveDate>,
    pub slopes: Vec<Vec<f64>>,
}

/// Daily cross-sectional regressions of eligible returns on first-pass betas.
pub fn second_pass(panel: &ReturnPanel, first: &FirstPass, denomination: Denomination) -> Result<SecondPass> {
    let k = first.factor_names.len();
    let lookup = first.lookup();
    let returns = panel.returns(denomination);
    let name_refs: Vec<&str> = first.factor_names.iter().map(String::as_str).collect();
    let (nd, ns) = (panel.axis.n_dates(), panel.axis.n_subnets());

    let mut dates = Vec::new();
    let mut slopes = Vec::new();
    let mut sizes = Vec::new();
    let mut skipped = 0;
    for t in 0..nd {
        let mut y = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); k];
        for i in 0..ns {
            if !panel.eligible(t, i) {
                continue;
            }
            let (Some(r), Some(lc)) = (returns.value(t, i), *panel.lifecycle.get(t, i)) else {
                continue;
            };
            let Some(b) = lookup.get(&(panel.axis.netuids[i], lc)) else {
                continue;
            };
            y.push(r);
            for (c, v) in cols.iter_mut().zip(b.iter()) {
                c.push(*v);
            }
        }
        if y.is_empty() {
            continue;
        }
        if y.len() < k + 2 {
            skipped += 1;
            continue;
        }
        match ols(&y, &cols, &name_refs, true) {
            Ok(r) => {
                dates.push(panel.axis.dates[t]);
                sizes.push(y.len() as f64);
                slopes.push(r.coefficients);
            }
            Err(Error::SingularDesign { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let n_days = slopes.len();
    if n_days < 2 {
        return Err(Error::InsufficientData(format!("{n_days} usable cross-sections")));
    }
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(first.factor_names.iter().cloned());
    let mut premia = Vec::with_capacity(k + 1);
    let mut se = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let col: Vec<f64> = slopes.iter().map(|s| s[j]).collect();
        premia.push(moments::mean(&col).expect("n_days >= 2"));
        se.push(moments::sample_std(&col).expect("n_days >= 2") / (n_days as f64).sqrt());
    }
    let t: Vec<f64> = premia.iter().zip(&se).map(|(m, s)| m / s).collect();
    let p = t.iter().map(|v| p_student(*v, (n_days - 1) as f64)).collect();
    Ok(SecondPass {
        names,
        premia,
        se,
        t,
        p,
        n_days,
        skipped_days: skipped,
        avg_cross_section: moments::mean(&sizes).expect("n_days >= 2"),
        dates,
        slopes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamaMacBeth {
    pub first: FirstPass,
    pub second: SecondPass,
}

pub fn fama_macbeth(
    panel: &ReturnPanel,
    factors: &[FactorSeries],
    denomination: Denomination,
    min_obs: usize,
) -> Result<FamaMacBeth> {
    let first = first_pass(panel, factors, denomination, min_obs)?;
    if first.subnets.len() < factors.len() + 2 {
        return Err(Error::InsufficientData(format!(
            "{} subnets have first-pass betas",
            first.subnets.len()
        )));
    }
    let second = second_pass(panel, &first, denomination)?;
    Ok(FamaMacBeth { first, second })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{DateMatrix, PanelAxis};

    fn panel(returns: DateMatrix<Option<f64>>, netuids: Vec<u32>) -> ReturnPanel {
        let nd = returns.n_dates();
        let ns = returns.n_subnets();
        let first: NaiveDate = "2025-01-01".parse().unwrap();
        let axis = PanelAxis::new(first, first + chrono::Days::new(nd as u64 - 1), netuids);
        ReturnPanel {
            axis,
            r_usd: returns.clone(),
            r_tao: returns,
            eligibility: DateMatrix::filled(nd, ns, true),
            lifecycle: DateMatrix::filled(nd, ns, Some(0)),
            fx_returns: vec![None; nd],
            quarantined: Vec::new(),
        }
    }

    #[test]
    fn noiseless_structure_has_zero_se() {
        let betas = [0.5, 0.8, 1.0, 1.3, 1.7, 2.2];
        let (g0, lambda) = (0.001, 0.004);
        let nd = 10;
        let mut r = DateMatrix::filled(nd, betas.len(), None);
        for t in 0..nd {
            for (i, b) in betas.iter().enumerate() {
                r.set(t, i, Some(g0 + b * lambda));
            }
        }
        let p = panel(r, (1..=6).collect());
        let first = FirstPass {
            factor_names: vec!["F".into()],
            min_obs: 0,
            subnets: betas
                .iter()
                .enumerate()
                .map(|(i, b)| SubnetBetas {
                    netuid: i as u32 + 1,
                    lifecycle: 0,
                    n_obs: nd,
                    betas: vec![*b],
                })
                .collect(),
            excluded: Vec::new(),
        };
        let s = second_pass(&p, &first, Denomination::Tao).unwrap();
        assert!((s.premia[1] - lambda).abs() < 1e-14);
        assert!((s.premia[0] - g0).abs() < 1e-14);
        assert!(s.se[1] < 1e-14);
        assert_eq!(s.n_days, nd);
    }

    #[test]
    fn thin_days_skipped() {
        let mut r = DateMatrix::filled(3, 3, Some(0.01));
        r.set(1, 0, None);
        r.set(1, 1, None);
        let p = panel(r, vec![1, 2, 3]);
        let first = FirstPass {
            factor_names: vec!["F".into()],
            min_obs: 0,
            subnets: (1..=3)
                .map(|n| SubnetBetas {
                    netuid: n,
                    lifecycle: 0,
                    n_obs: 3,
                    betas: vec![n as f64],
                })
                .collect(),
            excluded: Vec::new(),
        };
        let s = second_pass(&p, &first, Denomination::Tao).unwrap();
        assert_eq!(s.n_days, 2);
        assert_eq!(s.skipped_days, 1);
    }
}
