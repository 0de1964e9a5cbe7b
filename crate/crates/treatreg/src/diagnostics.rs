//! Closed-form bias diagnostics for shrinkage estimators of the
//! treatment coefficient, plus exogeneity and moment-identity checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Expected bias of the treatment coefficient when the response
/// equation is fit with a flat prior on the treatment and a standard
/// normal (ridge) prior on the control coefficients:
///
/// `((z'z)^{-1} z'X) (I_p + X'(X - Xhat_Z))^{-1} beta`
///
/// where `Xhat_Z` stacks fitted values of the univariate regressions of
/// each control column on `z`. Equals the exact expectation of the
/// closed-form estimator minus the truth; it does not depend on the
/// true treatment coefficient.
pub fn ridge_alpha_bias(z: &DVector<f64>, x: &DMatrix<f64>, beta: &DVector<f64>) -> Result<f64> {
    let n = z.len();
    let p = x.ncols();
    if x.nrows() != n || beta.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "z len {n}, X {}x{}, beta len {}",
            x.nrows(),
            p,
            beta.len()
        )));
    }
    let ztz = z.dot(z);
    if ztz <= 0.0 {
        return Err(Error::Precondition("treatment vector has zero norm".into()));
    }
    let ztx = z.transpose() * x;
    // Xhat_Z column j is ((z'x_j)/(z'z)) z, so X - Xhat_Z = X - z (z'X)/(z'z)
    let x_resid = x - z * (&ztx / ztz);
    let inner = DMatrix::identity(p, p) + x.transpose() * x_resid;
    let w = inner
        .lu()
        .solve(beta)
        .ok_or_else(|| Error::InvalidParameter("singular inner matrix in bias formula".into()))?;
    Ok((ztx * w)[(0, 0)] / ztz)
}

/// Bias formula for the reparametrized model: the treatment is replaced
/// by the selection-equation residual `r = z - X beta_c` and the
/// relevant coefficients are the direct effects `beta_d`.
pub fn reparam_alpha_bias(
    z: &DVector<f64>,
    x: &DMatrix<f64>,
    beta_c: &DVector<f64>,
    beta_d: &DVector<f64>,
) -> Result<f64> {
    if beta_c.len() != x.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "beta_c len {} for p={}",
            beta_c.len(),
            x.ncols()
        )));
    }
    let r = z - x * beta_c;
    if r.dot(&r) <= 1e-14 {
        return Err(Error::Precondition("selection residual is degenerate".into()));
    }
    ridge_alpha_bias(&r, x, beta_d)
}

/// Sample covariance between residuals and the treatment (n-1
/// denominator). Near zero for OLS residuals by construction; a large
/// value flags a violated exogeneity condition.
pub fn residual_treatment_cov(residuals: &DVector<f64>, z: &DVector<f64>) -> Result<f64> {
    let n = residuals.len();
    if z.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "residuals len {n}, z len {}",
            z.len()
        )));
    }
    if n < 2 {
        return Err(Error::Precondition("need at least 2 observations".into()));
    }
    let rm = residuals.mean();
    let zm = z.mean();
    let cov = residuals
        .iter()
        .zip(z.iter())
        .map(|(r, zi)| (r - rm) * (zi - zm))
        .sum::<f64>()
        / (n as f64 - 1.0);
    Ok(cov)
}

/// Empirical gap in the one-confounder moment identity
/// `alpha = E(YZ) - E(X^2) beta_c beta_d`: returns
/// `[mean(y z) - mean(x^2) beta_c beta_d] - alpha`.
pub fn moment_identity_gap(
    y: &DVector<f64>,
    z: &DVector<f64>,
    x: &DVector<f64>,
    alpha: f64,
    beta_c: f64,
    beta_d: f64,
) -> Result<f64> {
    let n = y.len();
    if z.len() != n || x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "y len {n}, z len {}, x len {}",
            z.len(),
            x.len()
        )));
    }
    let yz = y.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    let xx = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    Ok(yz - xx * beta_c * beta_d - alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn random_design(rng: &mut StdRng, n: usize, p: usize) -> (DVector<f64>, DMatrix<f64>) {
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = DMatrix::from_fn(n, p, |i, j| {
            let noise: f64 = rng.sample(StandardNormal);
            if j == 0 {
                0.7 * z[i] + noise
            } else {
                noise
            }
        });
        (z, x)
    }

    #[test]
    fn zero_beta_gives_zero_bias() {
        let mut rng = StdRng::seed_from_u64(21);
        let (z, x) = random_design(&mut rng, 20, 3);
        let b = DVector::zeros(3);
        assert_eq!(ridge_alpha_bias(&z, &x, &b).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_treatment_gives_zero_bias() {
        let z = DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]);
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 1.0, -1.0, -1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let bias = ridge_alpha_bias(&z, &x, &b).unwrap();
        assert!(bias.abs() < 1e-14);
    }

    #[test]
    fn bias_is_linear_in_beta() {
        let mut rng = StdRng::seed_from_u64(22);
        let (z, x) = random_design(&mut rng, 25, 4);
        let b1 = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b2 = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        let combined = &b1 * 1.7 + &b2 * -0.4;
        let lhs = ridge_alpha_bias(&z, &x, &combined).unwrap();
        let rhs = 1.7 * ridge_alpha_bias(&z, &x, &b1).unwrap()
            - 0.4 * ridge_alpha_bias(&z, &x, &b2).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    /// The formula must equal the exact expectation minus truth of the
    /// estimator that is closed-form under a flat treatment prior and a
    /// standard normal control prior: the estimator is linear in y, so
    /// its expectation follows by matrix algebra.
    #[test]
    fn matches_closed_form_estimator_expectation() {
        let mut rng = StdRng::seed_from_u64(23);
        for _ in 0..20 {
            let n = 20;
            let p = 3;
            let (z, x) = random_design(&mut rng, n, p);
            let beta = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let alpha = 0.3;

            // posterior-mean estimator: joint mode of the flat-alpha,
            // N(0,1)-beta objective solves
            // [[z'z, z'X], [X'z, X'X + I]] [a; b] = [z'y; X'y]
            let mut big = DMatrix::zeros(p + 1, p + 1);
            big[(0, 0)] = z.dot(&z);
            let ztx = z.transpose() * &x;
            for j in 0..p {
                big[(0, j + 1)] = ztx[(0, j)];
                big[(j + 1, 0)] = ztx[(0, j)];
            }
            let xtx = x.transpose() * &x;
            for a in 0..p {
                for b in 0..p {
                    big[(a + 1, b + 1)] = xtx[(a, b)] + if a == b { 1.0 } else { 0.0 };
                }
            }
            let biginv = big.try_inverse().unwrap();
            // E y = alpha z + X beta; estimator alpha-hat = e_0' B^{-1} D' y
            let mut d = DMatrix::zeros(n, p + 1);
            d.column_mut(0).copy_from(&z);
            d.columns_mut(1, p).copy_from(&x);
            let ey = &z * alpha + &x * &beta;
            let expect = (&biginv * (d.transpose() * ey))[(0, 0)];
            let exact_bias = expect - alpha;

            let formula = ridge_alpha_bias(&z, &x, &beta).unwrap();
            assert!(
                (formula - exact_bias).abs() < 1e-8,
                "formula {formula} vs exact {exact_bias}"
            );
        }
    }

    #[test]
    fn reparam_with_zero_beta_c_matches_ridge() {
        let mut rng = StdRng::seed_from_u64(24);
        let (z, x) = random_design(&mut rng, 30, 3);
        let bc = DVector::zeros(3);
        let bd = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = reparam_alpha_bias(&z, &x, &bc, &bd).unwrap();
        let b = ridge_alpha_bias(&z, &x, &bd).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn reparam_bias_smaller_on_average_under_confounding() {
        let mut rng = StdRng::seed_from_u64(25);
        let alpha = 0.2;
        let mut wins = 0;
        let trials = 100;
        for _ in 0..trials {
            let n = 60;
            let p = 5;
            let bc = DVector::from_fn(p, |j, _| if j < 2 { 0.59 } else { 0.0 });
            let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let eps = DVector::from_fn(n, |_, _| {
                rng.sample::<f64, _>(StandardNormal) * (1.0f64 - 0.7).sqrt()
            });
            let z = &x * &bc + eps;
            let bd = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5);
            let naive_beta = &bd - &bc * alpha;
            let rb = reparam_alpha_bias(&z, &x, &bc, &bd).unwrap();
            let nb = ridge_alpha_bias(&z, &x, &naive_beta).unwrap();
            if rb.abs() < nb.abs() {
                wins += 1;
            }
        }
        assert!(wins > trials / 2, "reparam smaller in only {wins}/{trials} draws");
    }

    #[test]
    fn ols_residuals_have_zero_treatment_cov() {
        let mut rng = StdRng::seed_from_u64(26);
        let (z, x) = random_design(&mut rng, 50, 3);
        // center the treatment so the sample covariance reduces to the
        // exact orthogonality of the normal equations
        let zm = z.mean();
        let z = z.map(|v| v - zm);
        let y = DVector::from_fn(50, |_, _| rng.sample::<f64, _>(StandardNormal));
        let fit = crate::estimators::fit_ols(&y, &z, &x).unwrap();
        let c = residual_treatment_cov(&fit.residuals, &z).unwrap();
        assert!(c.abs() < 1e-10);
    }

    #[test]
    fn residual_cov_of_z_with_itself_is_variance() {
        let z = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        let c = residual_treatment_cov(&z, &z).unwrap();
        let zm = z.mean();
        let var = z.iter().map(|v| (v - zm) * (v - zm)).sum::<f64>() / 2.0;
        assert!((c - var).abs() < 1e-12);
    }

    #[test]
    fn moment_gap_annihilated_second_term() {
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let z = DVector::from_vec(vec![0.5, -0.5, 1.0]);
        let x = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let yz = y.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>() / 3.0;
        let g = moment_identity_gap(&y, &z, &x, 0.2, 0.0, 5.0).unwrap();
        assert!((g - (yz - 0.2)).abs() < 1e-14);
        let g2 = moment_identity_gap(&y, &z, &x, yz, 3.0, 0.0).unwrap();
        assert!(g2.abs() < 1e-14);
    }
}
