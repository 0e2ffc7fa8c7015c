use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// A column is treated as collinear when its QR pivot is below this fraction
/// of the column norm.
pub const RANK_TOLERANCE: f64 = 1e-10;

pub const INTERCEPT: &str = "const";

#[derive(Debug, Clone, Serialize)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ols_se: Vec<f64>,
    pub ols_t: Vec<f64>,
    pub ols_p: Vec<f64>,
    pub hac_lags: Option<usize>,
    pub hac_se: Option<Vec<f64>>,
    pub hac_t: Option<Vec<f64>>,
    pub hac_p: Option<Vec<f64>>,
    pub r_squared: f64,
    pub n: usize,
    pub df_resid: usize,
    #[serde(skip)]
    design: DMatrix<f64>,
    #[serde(skip)]
    xtx_inv: DMatrix<f64>,
}

/// Least squares of `y` on the given columns, optionally with a leading intercept.
pub fn ols(y: &[f64], columns: &[Vec<f64>], names: &[&str], intercept: bool) -> Result<RegressionResult> {
    if columns.len() != names.len() {
        return Err(Error::Domain("one name per regressor column".into()));
    }
    let n = y.len();
    if let Some(c) = columns.iter().position(|c| c.len() != n) {
        return Err(Error::Domain(format!(
            "column `{}` has {} rows, y has {n}",
            names[c],
            columns[c].len()
        )));
    }
    let mut all_names: Vec<String> = Vec::with_capacity(columns.len() + 1);
    if intercept {
        all_names.push(INTERCEPT.to_string());
    }
    all_names.extend(names.iter().map(|s| s.to_string()));
    let k = all_names.len();
    if k == 0 {
        return Err(Error::Domain("regression without regressors".into()));
    }
    if n <= k {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {k} coefficients"
        )));
    }
    let offset = usize::from(intercept);
    let x = DMatrix::from_fn(n, k, |r, c| if c < offset { 1.0 } else { columns[c - offset][r] });
    fit(DVector::from_column_slice(y), x, all_names)
}

fn fit(y: DVector<f64>, x: DMatrix<f64>, names: Vec<String>) -> Result<RegressionResult> {
    let (n, k) = x.shape();
    let qr = x.clone().qr();
    let r = qr.r();
    let singular: Vec<String> = (0..k)
        .filter(|&j| {
            let norm = x.column(j).norm();
            norm == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * norm
        })
        .map(|j| names[j].clone())
        .collect();
    if !singular.is_empty() {
        return Err(Error::SingularDesign { columns: singular });
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign { columns: names.clone() })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::SingularDesign { columns: names.clone() })?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let resid = &y - &x * &beta;
    let ssr = resid.norm_squared();
    let df = n - k;
    let sigma2 = ssr / df as f64;
    let ols_se: Vec<f64> = (0..k).map(|j| (sigma2 * xtx_inv[(j, j)]).sqrt()).collect();
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let ols_t = t_stats(&coefficients, &ols_se);
    let ols_p = ols_t.iter().map(|t| p_student(*t, df as f64)).collect();

    let has_intercept = names.first().is_some_and(|s| s == INTERCEPT);
    let sst = if has_intercept {
        let m = y.mean();
        y.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    } else {
        y.norm_squared()
    };
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };

    Ok(RegressionResult {
        names,
        coefficients,
        residuals: resid.iter().copied().collect(),
        ols_se,
        ols_t,
        ols_p,
        hac_lags: None,
        hac_se: None,
        hac_t: None,
        hac_p: None,
        r_squared,
        n,
        df_resid: df,
        design: x,
        xtx_inv,
    })
}

impl RegressionResult {
    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index(name).map(|j| self.coefficients[j])
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|s| s == name)
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// `(X'X)⁻¹`.
    pub fn xtx_inv(&self) -> &DMatrix<f64> {
        &self.xtx_inv
    }

    /// Attach Newey-West errors with `lags` Bartlett lags.
    pub fn with_hac(mut self, lags: usize) -> Result<Self> {
        let se = newey_west_se(&self, lags)?;
        let t = t_stats(&self.coefficients, &se);
        self.hac_p = Some(t.iter().map(|v| p_normal(*v)).collect());
        self.hac_t = Some(t);
        self.hac_se = Some(se);
        self.hac_lags = Some(lags);
        Ok(self)
    }
}

/// Bartlett-kernel HAC covariance `(X'X)⁻¹ S (X'X)⁻¹`, no small-sample scaling.
pub fn newey_west_cov(result: &RegressionResult, lags: usize) -> Result<DMatrix<f64>> {
    let x = &result.design;
    let (n, k) = x.shape();
    if lags >= n {
        return Err(Error::Domain(format!("{lags} HAC lags with only {n} observations")));
    }
    let e = &result.residuals;
    // rows of X scaled by the residual
    let u = DMatrix::from_fn(n, k, |t, j| x[(t, j)] * e[t]);
    let mut s = u.transpose() * &u;
    for l in 1..=lags {
        let w = 1.0 - l as f64 / (lags as f64 + 1.0);
        let lead = u.rows(l, n - l);
        let lag = u.rows(0, n - l);
        let gamma = lead.transpose() * lag;
        s += (&gamma + gamma.transpose()) * w;
    }
    Ok(&result.xtx_inv * s * &result.xtx_inv)
}

pub fn newey_west_se(result: &RegressionResult, lags: usize) -> Result<Vec<f64>> {
    let cov = newey_west_cov(result, lags)?;
    Ok((0..cov.nrows()).map(|j| cov[(j, j)].max(0.0).sqrt()).collect())
}

fn t_stats(coef: &[f64], se: &[f64]) -> Vec<f64> {
    coef.iter().zip(se).map(|(b, s)| b / s).collect()
}

/// Two-sided p-value under Student-t with `df` degrees of freedom.
pub fn p_student(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

/// Two-sided p-value under the standard normal.
pub fn p_normal(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let dist = Normal::new(0.0, 1.0).expect("standard normal");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let r = ols(&y, &[x], &["x"], true).unwrap();
        assert!((r.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((r.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(r.coef("x"), Some(r.coefficients[1]));
    }

    #[test]
    fn orthogonal_regressor() {
        let x = vec![1.0, -1.0, 1.0, -1.0];
        let y = vec![1.0, 1.0, 2.0, 2.0];
        let r = ols(&y, &[x], &["x"], true).unwrap();
        assert!(r.coefficients[1].abs() < 1e-14);
    }

    #[test]
    fn normal_equations_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|t| 0.5 + cols[0][t] - 2.0 * cols[2][t] + rng.gen_range(-0.1..0.1))
            .collect();
        let r = ols(&y, &cols, &["a", "b", "c"], true).unwrap();
        let x = DMatrix::from_fn(n, 4, |t, j| if j == 0 { 1.0 } else { cols[j - 1][t] });
        let xtx = x.transpose() * &x;
        let b = xtx.try_inverse().unwrap() * x.transpose() * DVector::from_vec(y);
        for j in 0..4 {
            assert!((r.coefficients[j] - b[j]).abs() < 1e-10);
        }
        // residuals orthogonal to regressors
        let xe = x.transpose() * DVector::from_vec(r.residuals.clone());
        assert!(xe.amax() < 1e-8);
    }

    #[test]
    fn collinear_columns_named() {
        let a: Vec<f64> = (0..20).map(|v| (v as f64).sin()).collect();
        let y: Vec<f64> = (0..20).map(|v| v as f64).collect();
        let err = ols(
            &y,
            &[a.clone(), a.iter().map(|v| 2.0 * v).collect()],
            &["a", "a2"],
            true,
        )
        .unwrap_err();
        match err {
            Error::SingularDesign { columns } => assert_eq!(columns, vec!["a2".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(ols(&[1.0], &[], &[], true), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn lags_bound() {
        let r = ols(&[1.0, 2.0, 4.0], &[], &[], true).unwrap();
        assert!(newey_west_se(&r, 2).is_ok());
        assert!(matches!(newey_west_se(&r, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn p_values() {
        assert!((p_normal(1.959_963_984_540_054) - 0.05).abs() < 1e-9);
        assert_eq!(p_normal(0.0), 1.0);
        assert!(p_student(2.0, 10.0) > p_normal(2.0));
    }
}
