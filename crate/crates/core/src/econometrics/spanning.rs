use serde::Serialize;

use crate::econometrics::{align, ols::ols};
use crate::error::Result;
use crate::factors::FactorSeries;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanningRow {
    pub factor: String,
    pub alpha: f64,
    pub t: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Regress each factor on all the others with an intercept.
///
/// `hac_lags = None` reports OLS t-statistics; `Some(L)` reports Newey-West.
pub fn spanning_alphas(factors: &[FactorSeries], hac_lags: Option<usize>) -> Result<Vec<SpanningRow>> {
    let refs: Vec<&FactorSeries> = factors.iter().collect();
    let (dates, cols) = align(&refs);
    let mut rows = Vec::with_capacity(factors.len());
    for (j, f) in factors.iter().enumerate() {
        let others: Vec<Vec<f64>> = cols
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, c)| c.clone())
            .collect();
        let names: Vec<&str> = factors
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, s)| s.name.as_str())
            .collect();
        let mut r = ols(&cols[j], &others, &names, true)?;
        let t = match hac_lags {
            None => r.ols_t[0],
            Some(l) => {
                r = r.with_hac(l)?;
                r.hac_t.as_ref().expect("hac attached")[0]
            }
        };
        rows.push(SpanningRow {
            factor: f.name.clone(),
            alpha: r.coefficients[0],
            t,
            r_squared: r.r_squared,
            n: dates.len(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn series(name: &str, xs: Vec<f64>) -> FactorSeries {
        let d0 = NaiveDate::from_ymd_opt(2025, 1, 1).unwrap();
        let dates = (0..xs.len() as u64).map(|k| d0 + chrono::Days::new(k)).collect();
        FactorSeries::from_returns(name, dates, xs.into_iter().map(Some).collect())
    }

    fn noise(seed: u64, n: usize, mean: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Normal::new(mean, 0.02).unwrap();
        (0..n).map(|_| z.sample(&mut rng)).collect()
    }

    #[test]
    fn exact_combination_fully_spanned() {
        let a = noise(1, 300, 0.001);
        let b = noise(2, 300, 0.002);
        let c: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.3 * x - 1.2 * y).collect();
        let rows = spanning_alphas(&[series("A", a), series("B", b), series("C", c)], None).unwrap();
        assert!(rows[2].alpha.abs() < 1e-12);
        assert!((rows[2].r_squared - 1.0).abs() < 1e-10);
    }

    #[test]
    fn independent_factors_keep_their_mean() {
        let a = noise(3, 2000, 0.004);
        let b = noise(4, 2000, -0.002);
        let rows = spanning_alphas(&[series("A", a.clone()), series("B", b)], Some(5)).unwrap();
        assert!(rows[0].r_squared < 0.01);
        let m = a.iter().sum::<f64>() / a.len() as f64;
        assert!((rows[0].alpha - m).abs() < 0.001);
    }

    #[test]
    fn copy_is_rank_deficient() {
        let a = noise(5, 100, 0.0);
        let b = noise(6, 100, 0.0);
        let r = spanning_alphas(&[series("A", a.clone()), series("B", b), series("A2", a)], None);
        assert!(matches!(r, Err(Error::SingularDesign { .. })));
    }
}
