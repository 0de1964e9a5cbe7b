//! Elliptical slice sampling step for coefficient vectors expressed as
//! offsets from a least-squares center.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Hard cap on bracket-shrinking iterations before declaring collapse.
const MAX_SHRINK: usize = 1000;
/// Bracket width below which the slice is considered collapsed.
const MIN_BRACKET: f64 = 1e-12;

/// One elliptical slice update of the offset `delta` from `center`.
///
/// The Gaussian factor of the likelihood is exact around the
/// least-squares center, so the ellipse draw `zeta` has covariance
/// `sigma^2 (D'D)^{-1}`; `scale_factor` must satisfy
/// `scale_factor scale_factor' = (D'D)^{-1}` and `sigma` multiplies it.
/// The slice condition tests only the prior at `center + delta'`.
///
/// Returns the accepted offset and the number of rejected proposals
/// (zero whenever the prior is flat).
pub fn ess_update<R: Rng>(
    delta: &DVector<f64>,
    center: &DVector<f64>,
    scale_factor: &DMatrix<f64>,
    sigma: f64,
    log_prior: impl Fn(&DVector<f64>) -> f64,
    rng: &mut R,
) -> Result<(DVector<f64>, u64)> {
    let d = delta.len();
    if center.len() != d || scale_factor.nrows() != d {
        return Err(Error::DimensionMismatch(format!(
            "delta len {d}, center len {}, factor rows {}",
            center.len(),
            scale_factor.nrows()
        )));
    }
    let current_lp = log_prior(&(center + delta));
    if !current_lp.is_finite() {
        return Err(Error::Precondition("log prior not finite at current state".into()));
    }
    let normals = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let zeta = scale_factor * normals * sigma;
    let threshold = current_lp + rng.gen::<f64>().ln();
    let mut phi = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
    let mut lo = phi - 2.0 * std::f64::consts::PI;
    let mut hi = phi;
    let mut rejections = 0u64;
    for _ in 0..MAX_SHRINK {
        let proposal = delta * phi.cos() + &zeta * phi.sin();
        if log_prior(&(center + &proposal)) >= threshold {
            return Ok((proposal, rejections));
        }
        rejections += 1;
        if phi < 0.0 {
            lo = phi;
        } else {
            hi = phi;
        }
        if hi - lo < MIN_BRACKET {
            return Err(Error::SliceCollapse);
        }
        phi = lo + rng.gen::<f64>() * (hi - lo);
    }
    Err(Error::SliceCollapse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn toy_problem(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut rng = StdRng::seed_from_u64(seed);
        let d = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        (d, y)
    }

    #[test]
    fn flat_prior_accepts_first_proposal() {
        let (d, y) = toy_problem(31, 30, 4);
        let fit = linalg::lstsq(&d, &y).unwrap();
        let mut rng = StdRng::seed_from_u64(32);
        let mut delta = DVector::zeros(4);
        for _ in 0..500 {
            let (nd, rej) =
                ess_update(&delta, &fit.solution, &fit.rinv, 1.0, |_| 0.0, &mut rng).unwrap();
            assert_eq!(rej, 0);
            delta = nd;
        }
    }

    #[test]
    fn degenerate_zeta_stays_on_sphere() {
        // a zero factor forces zeta = 0; proposals are delta*cos(phi),
        // which under a flat prior accepts immediately and shrinks the
        // offset along its own direction
        let center = DVector::from_vec(vec![1.0, 2.0]);
        let delta = DVector::from_vec(vec![0.6, -0.8]);
        let zero = DMatrix::zeros(2, 2);
        let mut rng = StdRng::seed_from_u64(33);
        let (nd, rej) = ess_update(&delta, &center, &zero, 1.0, |_| 0.0, &mut rng).unwrap();
        assert_eq!(rej, 0);
        let ratio0 = nd[0] / delta[0];
        let ratio1 = nd[1] / delta[1];
        assert!((ratio0 - ratio1).abs() < 1e-12);
        assert!(ratio0.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn nonfinite_start_rejected() {
        let center = DVector::zeros(2);
        let delta = DVector::zeros(2);
        let factor = DMatrix::identity(2, 2);
        let mut rng = StdRng::seed_from_u64(34);
        let r = ess_update(&delta, &center, &factor, 1.0, |_| f64::NEG_INFINITY, &mut rng);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    /// With a Gaussian prior the posterior is conjugate; long-run chain
    /// moments must match the closed-form ridge posterior.
    #[test]
    fn gaussian_prior_matches_conjugate_posterior() {
        let n = 50;
        let p = 5;
        let tau2 = 0.5;
        let sigma = 1.0;
        let (d, y) = toy_problem(35, n, p);
        let fit = linalg::lstsq(&d, &y).unwrap();
        let gram = d.transpose() * &d;

        // closed form: precision G/sigma^2 + I/tau^2, mean prec^{-1} D'y/sigma^2
        let prec = &gram / (sigma * sigma) + DMatrix::identity(p, p) / tau2;
        let cov = prec.try_inverse().unwrap();
        let mean = &cov * (d.transpose() * &y) / (sigma * sigma);

        let lp = |theta: &DVector<f64>| -> f64 { -theta.dot(theta) / (2.0 * tau2) };
        let mut rng = StdRng::seed_from_u64(36);
        let mut delta = DVector::zeros(p);
        let keep = 50000;
        let mut sum = DVector::zeros(p);
        let mut sum_sq = DVector::zeros(p);
        for it in 0..(keep + 2000) {
            let (nd, _) = ess_update(&delta, &fit.solution, &fit.rinv, sigma, lp, &mut rng).unwrap();
            delta = nd;
            if it >= 2000 {
                let theta = &fit.solution + &delta;
                sum += &theta;
                sum_sq += theta.component_mul(&theta);
            }
        }
        let est_mean = sum / keep as f64;
        let est_var = sum_sq / keep as f64 - est_mean.component_mul(&est_mean);
        for j in 0..p {
            // MC standard error with a generous inefficiency allowance
            let mcse = (cov[(j, j)] / keep as f64).sqrt() * 10.0;
            assert!(
                (est_mean[j] - mean[j]).abs() < 3.0 * mcse.max(1e-3),
                "mean[{j}] {} vs {}",
                est_mean[j],
                mean[j]
            );
            assert!(
                (est_var[j] - cov[(j, j)]).abs() < 0.15 * cov[(j, j)],
                "var[{j}] {} vs {}",
                est_var[j],
                cov[(j, j)]
            );
        }
    }
}
