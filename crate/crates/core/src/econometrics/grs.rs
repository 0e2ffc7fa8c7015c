use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::econometrics::{align, ols::ols};
use crate::error::{Error, Result};
use crate::factors::FactorSeries;

/// Alphas this small (in return units) are treated as exactly zero.
const ZERO_ALPHA: f64 = 1e-12;
/// Residual-covariance eigenvalues below this share of the largest span its null space.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrsResult {
    pub f_stat: f64,
    pub p_value: f64,
    pub alphas: Vec<f64>,
    pub mean_abs_alpha: f64,
    pub t: usize,
    pub n: usize,
    /// Rank of the residual covariance; below `n` when a portfolio
    /// combination is spanned exactly, e.g. two legs whose spread is a factor.
    pub n_effective: usize,
    pub k: usize,
}

/// Joint test that all portfolio intercepts are zero.
///
/// Inputs are column-major and already aligned: `portfolios[i][t]`, `factors[j][t]`.
/// Covariances use the maximum-likelihood (divide by `T`) form.
pub fn grs_test(portfolios: &[Vec<f64>], factors: &[Vec<f64>]) -> Result<GrsResult> {
    let n = portfolios.len();
    let k = factors.len();
    let t = portfolios.first().map_or(0, Vec::len);
    if n == 0 || k == 0 {
        return Err(Error::Domain("GRS needs portfolios and factors".into()));
    }
    if portfolios.iter().chain(factors).any(|c| c.len() != t) {
        return Err(Error::Domain("GRS inputs are not aligned".into()));
    }
    if t <= n + k {
        return Err(Error::InsufficientData(format!(
            "T = {t} must exceed N + K = {}",
            n + k
        )));
    }
    let names: Vec<String> = (0..k).map(|j| format!("f{j}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut alphas = Vec::with_capacity(n);
    let mut resid = DMatrix::zeros(t, n);
    for (i, y) in portfolios.iter().enumerate() {
        let r = ols(y, factors, &refs, true)?;
        alphas.push(r.coefficients[0]);
        resid.set_column(i, &DVector::from_vec(r.residuals));
    }
    let mean_abs_alpha = alphas.iter().map(|a| a.abs()).sum::<f64>() / n as f64;
    let done = |f_stat: f64, p_value: f64| GrsResult {
        f_stat,
        p_value,
        alphas: alphas.clone(),
        mean_abs_alpha,
        t,
        n,
        n_effective: n,
        k,
    };
    if alphas.iter().all(|a| a.abs() <= ZERO_ALPHA) {
        return Ok(done(0.0, 1.0));
    }

    let tf = t as f64;
    let sigma = resid.transpose() * &resid / tf;
    let fm = DMatrix::from_fn(t, k, |r, c| factors[c][r]);
    let mu = DVector::from_fn(k, |j, _| factors[j].iter().sum::<f64>() / tf);
    let centered = DMatrix::from_fn(t, k, |r, c| fm[(r, c)] - mu[c]);
    let omega = centered.transpose() * &centered / tf;

    let a = DVector::from_vec(alphas.clone());
    let (quad_alpha, rank) = pseudo_quadratic(sigma, &a)?;
    let omega_chol = omega
        .cholesky()
        .ok_or_else(|| Error::Domain("factor covariance is singular".into()))?;
    let quad_mu = mu.dot(&omega_chol.solve(&mu));
    if t <= rank + k {
        return Err(Error::InsufficientData(format!(
            "T = {t} must exceed N + K = {}",
            rank + k
        )));
    }
    let df2 = (t - rank - k) as f64;
    let f_stat = df2 / rank as f64 * quad_alpha / (1.0 + quad_mu);
    let dist = FisherSnedecor::new(rank as f64, df2).expect("positive degrees of freedom");
    let mut out = done(f_stat, (1.0 - dist.cdf(f_stat)).clamp(0.0, 1.0));
    out.n_effective = rank;
    Ok(out)
}

/// `a' S⁺ a` over the range of `S` and its rank. Fails when `a` has weight
/// in the null space, where the quadratic form is unbounded.
fn pseudo_quadratic(s: DMatrix<f64>, a: &DVector<f64>) -> Result<(f64, usize)> {
    let eig = s.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    if !(top > 0.0) {
        return Err(Error::Domain("residual covariance is zero".into()));
    }
    let (mut quad, mut rank, mut null_weight) = (0.0, 0, 0.0);
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let proj = eig.eigenvectors.column(j).dot(a);
        if *lambda > RANK_TOLERANCE * top {
            quad += proj * proj / lambda;
            rank += 1;
        } else {
            null_weight += proj * proj;
        }
    }
    if null_weight.sqrt() > 1e-8 * a.norm().max(ZERO_ALPHA) {
        return Err(Error::Domain(
            "residual covariance is singular in a direction with nonzero alpha".into(),
        ));
    }
    Ok((quad, rank))
}

/// [`grs_test`] on series, restricted to dates where every input is present.
pub fn grs_test_series(portfolios: &[FactorSeries], factors: &[FactorSeries]) -> Result<GrsResult> {
    let all: Vec<&FactorSeries> = portfolios.iter().chain(factors).collect();
    let (_, mut cols) = align(&all);
    let fac = cols.split_off(portfolios.len());
    grs_test(&cols, &fac)
}
