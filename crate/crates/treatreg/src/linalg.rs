//! Small shared linear-algebra helpers built on thin QR decompositions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares solution of `D theta = y` together with a triangular
/// factor `L` satisfying `L L^T = (D^T D)^{-1}`.
pub struct LstsqFactor {
    pub solution: DVector<f64>,
    /// Upper-triangular `R^{-1}` from the thin QR of `D`.
    pub rinv: DMatrix<f64>,
}

/// Solves the least-squares problem via QR, rejecting rank-deficient
/// designs (relative diagonal tolerance 1e-10).
pub fn lstsq(d: &DMatrix<f64>, y: &DVector<f64>) -> Result<LstsqFactor> {
    let (n, p) = d.shape();
    if p == 0 {
        return Ok(LstsqFactor { solution: DVector::zeros(0), rinv: DMatrix::zeros(0, 0) });
    }
    if n < p {
        return Err(Error::RankDeficient);
    }
    let qr = d.clone().qr();
    let r = qr.r();
    let max_diag = (0..p).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    if max_diag == 0.0 || (0..p).any(|i| r[(i, i)].abs() < 1e-10 * max_diag) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * y;
    let solution = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient)?;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::RankDeficient)?;
    Ok(LstsqFactor { solution, rinv })
}

/// Fitted values and residual sum of squares of regressing `y` on `d`.
pub fn residual_ss(d: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    if d.ncols() == 0 {
        return Ok((y.clone(), y.dot(y)));
    }
    let fit = lstsq(d, y)?;
    let res = y - d * &fit.solution;
    let ssr = res.dot(&res);
    Ok((res, ssr))
}

/// Columns of `x` selected by `idx`, in the given order.
pub fn select_columns(x: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, idx.len(), |i, j| x[(i, idx[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_matches_normal_equations() {
        let d = DMatrix::from_column_slice(4, 2, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let y = DVector::from_vec(vec![1.0, 2.0, 0.0, 1.0]);
        let fit = lstsq(&d, &y).unwrap();
        let gram = d.transpose() * &d;
        let rhs = d.transpose() * &y;
        let exact = gram.clone().lu().solve(&rhs).unwrap();
        for (a, b) in fit.solution.iter().zip(exact.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        let cov = &fit.rinv * fit.rinv.transpose();
        let inv = gram.try_inverse().unwrap();
        for (a, b) in cov.iter().zip(inv.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn lstsq_rejects_duplicate_columns() {
        let d = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        assert!(matches!(lstsq(&d, &y), Err(Error::RankDeficient)));
    }

    #[test]
    fn empty_design_residuals_are_y() {
        let d = DMatrix::zeros(3, 0);
        let y = DVector::from_vec(vec![1.0, 2.0, 2.0]);
        let (res, ssr) = residual_ss(&d, &y).unwrap();
        assert_eq!(res, y);
        assert!((ssr - 9.0).abs() < 1e-12);
    }
}
