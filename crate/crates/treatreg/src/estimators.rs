//! Frequentist baselines (OLS, oracle OLS) and interval summaries that
//! put Bayesian chains and least-squares fits on a common footing.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::linalg;

/// Least-squares fit of the response on `[z X]`, treatment first.
#[derive(Debug, Clone)]
pub struct OlsFit {
    /// Coefficients; index 0 is the treatment coefficient.
    pub coef: DVector<f64>,
    pub residuals: DVector<f64>,
    pub std_errors: DVector<f64>,
    pub df: usize,
}

impl OlsFit {
    pub fn alpha(&self) -> f64 {
        self.coef[0]
    }

    pub fn alpha_se(&self) -> f64 {
        self.std_errors[0]
    }
}

/// Point estimate and interval for the treatment coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub method: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl FitSummary {
    pub fn interval_length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.lower <= truth && truth <= self.upper
    }
}

/// OLS of `y` on the treatment and all controls.
pub fn fit_ols(y: &DVector<f64>, z: &DVector<f64>, x: &DMatrix<f64>) -> Result<OlsFit> {
    let n = y.len();
    let p = x.ncols();
    if z.len() != n || x.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "y len {n}, z len {}, X rows {}",
            z.len(),
            x.nrows()
        )));
    }
    if n <= p + 1 {
        return Err(Error::Precondition(format!("need n > p + 1, got n={n}, p={p}")));
    }
    let mut d = DMatrix::zeros(n, p + 1);
    d.column_mut(0).copy_from(z);
    d.columns_mut(1, p).copy_from(x);
    let fit = linalg::lstsq(&d, y)?;
    let residuals = y - &d * &fit.solution;
    let df = n - (p + 1);
    let sigma2 = residuals.dot(&residuals) / df as f64;
    let std_errors = DVector::from_iterator(
        p + 1,
        fit.rinv
            .row_iter()
            .map(|row| (sigma2 * row.iter().map(|v| v * v).sum::<f64>()).sqrt()),
    );
    Ok(OlsFit { coef: fit.solution, residuals, std_errors, df })
}

/// OLS using only the control columns listed in `support` (the
/// infeasible oracle benchmark).
pub fn fit_oracle_ols(
    y: &DVector<f64>,
    z: &DVector<f64>,
    x: &DMatrix<f64>,
    support: &[usize],
) -> Result<OlsFit> {
    for &j in support {
        if j >= x.ncols() {
            return Err(Error::InvalidParameter(format!(
                "support index {j} out of range for p={}",
                x.ncols()
            )));
        }
    }
    let xs = linalg::select_columns(x, support);
    fit_ols(y, z, &xs)
}

fn t_quantile(level: f64, df: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("valid t distribution");
    dist.inverse_cdf(0.5 + level / 2.0)
}

/// t-based symmetric interval for the treatment coefficient.
pub fn summarize_ols(fit: &OlsFit, level: f64, method: &str) -> Result<FitSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must be in (0,1), got {level}")));
    }
    let half = t_quantile(level, fit.df) * fit.alpha_se();
    Ok(FitSummary {
        method: method.to_string(),
        estimate: fit.alpha(),
        lower: fit.alpha() - half,
        upper: fit.alpha() + half,
        level,
    })
}

/// Linearly interpolated sample quantile of `sorted` (ascending).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let w = h - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Posterior mean plus equal-tailed quantile interval from a chain.
pub fn summarize_draws(chain: &[f64], level: f64, method: &str) -> Result<FitSummary> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must be in (0,1), got {level}")));
    }
    let mean = chain.iter().sum::<f64>() / chain.len() as f64;
    let mut sorted = chain.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite chain values"));
    let tail = (1.0 - level) / 2.0;
    Ok(FitSummary {
        method: method.to_string(),
        estimate: mean,
        lower: quantile_sorted(&sorted, tail),
        upper: quantile_sorted(&sorted, 1.0 - tail),
        level,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    #[test]
    fn perfect_fit_no_controls() {
        let z = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        let y = &z * 2.0;
        let x = DMatrix::zeros(4, 0);
        let fit = fit_ols(&y, &z, &x).unwrap();
        assert!((fit.alpha() - 2.0).abs() < 1e-12);
        assert!(fit.alpha_se() < 1e-12);
    }

    #[test]
    fn hand_computed_four_point_fit() {
        let y = DVector::from_vec(vec![1.0, 2.0, 0.0, 1.0]);
        let z = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]);
        let x = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 1.0, 0.0]);
        let fit = fit_ols(&y, &z, &x).unwrap();
        // normal equations for D = [z x]: D'D = [[2,1],[1,2]], D'y = [3,2]
        // solution (4/3, 1/3)
        assert!((fit.coef[0] - 4.0 / 3.0).abs() < 1e-10);
        assert!((fit.coef[1] - 1.0 / 3.0).abs() < 1e-10);
        assert_eq!(fit.df, 2);
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let mut rng = StdRng::seed_from_u64(11);
        let n = 40;
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = DMatrix::from_fn(n, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let fit = fit_ols(&y, &z, &x).unwrap();
        let rnorm = fit.residuals.norm();
        assert!((fit.residuals.dot(&z) / (rnorm * z.norm())).abs() < 1e-10);
        for c in x.column_iter() {
            assert!((fit.residuals.dot(&c) / (rnorm * c.norm())).abs() < 1e-10);
        }
    }

    #[test]
    fn oracle_full_support_matches_ols() {
        let mut rng = StdRng::seed_from_u64(12);
        let n = 30;
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = DMatrix::from_fn(n, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let full = fit_ols(&y, &z, &x).unwrap();
        let oracle = fit_oracle_ols(&y, &z, &x, &[0, 1, 2, 3]).unwrap();
        for (a, b) in full.coef.iter().zip(oracle.coef.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn oracle_empty_support_is_simple_regression() {
        let z = DVector::from_vec(vec![1.0, -1.0, 2.0, 0.5, -0.5]);
        let y = DVector::from_vec(vec![0.9, -1.2, 2.2, 0.4, -0.6]);
        let x = DMatrix::from_fn(5, 2, |i, j| (i * 2 + j) as f64 - 3.0);
        let oracle = fit_oracle_ols(&y, &z, &x, &[]).unwrap();
        let want = y.dot(&z) / z.dot(&z);
        assert!((oracle.alpha() - want).abs() < 1e-12);
    }

    #[test]
    fn ols_summary_uses_t_quantile() {
        let fit = OlsFit {
            coef: DVector::from_vec(vec![0.5]),
            residuals: DVector::zeros(3),
            std_errors: DVector::from_vec(vec![0.1]),
            df: 100,
        };
        let s = summarize_ols(&fit, 0.95, "ols").unwrap();
        assert!((s.lower - (0.5 - 1.984 * 0.1)).abs() < 1e-3);
        assert!((s.upper - (0.5 + 1.984 * 0.1)).abs() < 1e-3);
    }

    #[test]
    fn constant_chain_gives_degenerate_interval() {
        let chain = vec![0.3; 50];
        let s = summarize_draws(&chain, 0.95, "m").unwrap();
        assert!((s.estimate - 0.3).abs() < 1e-12);
        assert!(s.interval_length().abs() < 1e-12);
    }

    #[test]
    fn normal_chain_interval_near_theory() {
        let mut rng = StdRng::seed_from_u64(13);
        let chain: Vec<f64> = (0..10000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let s = summarize_draws(&chain, 0.95, "m").unwrap();
        assert!((s.lower + 1.96).abs() < 0.05, "lower = {}", s.lower);
        assert!((s.upper - 1.96).abs() < 0.05, "upper = {}", s.upper);
    }

    #[test]
    fn interval_length_monotone_in_level() {
        let mut rng = StdRng::seed_from_u64(14);
        let chain: Vec<f64> = (0..5000).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let a = summarize_draws(&chain, 0.5, "m").unwrap().interval_length();
        let b = summarize_draws(&chain, 0.9, "m").unwrap().interval_length();
        let c = summarize_draws(&chain, 0.99, "m").unwrap().interval_length();
        assert!(a <= b && b <= c);
    }

    #[test]
    fn empty_chain_rejected() {
        assert!(matches!(summarize_draws(&[], 0.95, "m"), Err(Error::EmptyChain)));
    }
}
