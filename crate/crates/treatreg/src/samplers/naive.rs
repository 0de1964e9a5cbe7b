//! Single-equation sampler: shrinkage prior on the control
//! coefficients of the response regression, flat prior on the
//! treatment coefficient.

use nalgebra::{DMatrix, DVector};

use crate::data_model::RegressionData;
use crate::error::{Error, Result};
use crate::priors::log_shrinkage_density;

use super::{ess_update, sample_sigma_sq, update_global_scale, MCMCConfig, PosteriorDraws};

/// Fits the response equation `y = alpha z + X beta + nu` with the
/// horseshoe-proxy prior on `beta` only. The treatment and control
/// coefficients are updated jointly by elliptical slice sampling around
/// the full least-squares solution; `sigma_nu` and the global scale `v`
/// get conjugate and random-walk updates respectively.
pub fn fit_naive(data: &RegressionData, cfg: &MCMCConfig) -> Result<PosteriorDraws> {
    cfg.validate()?;
    let n = data.n();
    let p = data.p();
    if n <= p + 1 {
        return Err(Error::Precondition(format!(
            "single-equation sampler needs n > p + 1, got n={n}, p={p}"
        )));
    }
    let mut d = DMatrix::zeros(n, p + 1);
    d.column_mut(0).copy_from(&data.z);
    d.columns_mut(1, p).copy_from(&data.x);
    let fit = crate::linalg::lstsq(&d, &data.y)?;
    let center = fit.solution;
    let factor = fit.rinv;

    let mut rng = cfg.rng();
    let mut delta = DVector::zeros(p + 1);
    let residuals = &data.y - &d * &center;
    let mut sigma_nu2 = residuals.dot(&residuals) / (n - p - 1) as f64;
    if sigma_nu2 <= 0.0 {
        return Err(Error::DegenerateResiduals);
    }
    let mut v = 1.0;

    let mut out = PosteriorDraws {
        config: Some(cfg.clone()),
        beta: Some(Vec::with_capacity(cfg.draws)),
        v: Some(Vec::with_capacity(cfg.draws)),
        ..PosteriorDraws::default()
    };
    for it in 0..cfg.total_iterations() {
        let lp = |theta: &DVector<f64>| -> f64 {
            let beta = theta.rows(1, p).into_owned();
            log_shrinkage_density(&beta, v).unwrap_or(f64::NEG_INFINITY)
        };
        let (nd, rej) = ess_update(&delta, &center, &factor, sigma_nu2.sqrt(), lp, &mut rng)?;
        delta = nd;
        out.ess_rejections += rej;
        let theta = &center + &delta;
        let res = &data.y - &d * &theta;
        sigma_nu2 = sample_sigma_sq(&res, &mut rng)?;
        let beta = theta.rows(1, p).into_owned();
        let (nv, accepted) = update_global_scale(v, &beta, cfg.v_step, &mut rng)?;
        v = nv;
        out.v_attempted += 1;
        if accepted {
            out.v_accepted += 1;
        }
        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
            out.alpha.push(theta[0]);
            out.beta.as_mut().unwrap().push(beta.iter().copied().collect());
            out.sigma_nu.push(sigma_nu2.sqrt());
            out.v.as_mut().unwrap().push(v);
        }
    }
    out.validate()?;
    Ok(out)
}
