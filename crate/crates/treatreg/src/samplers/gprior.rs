//! Model-selection samplers for the p > n setting: g-priors with
//! point-masses at zero, explored by add/delete/swap moves over
//! inclusion sets.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data_model::RegressionData;
use crate::error::{Error, Result};
use crate::linalg;
use crate::priors::{local_eb_g_flat, log_marginal_gprior_flat, ModelIndicator};

use super::{MCMCConfig, PosteriorDraws};

/// Proposed model move with its log Hastings correction.
struct Move {
    model: Vec<usize>,
    log_hastings: f64,
}

/// Uniform add/delete/swap proposal over models of size at most
/// `p_max`. Returns `None` when the chosen move type is unavailable
/// from the current state (treated as a rejected proposal).
fn propose_move(current: &[usize], p: usize, p_max: usize, rng: &mut impl Rng) -> Option<Move> {
    let included: std::collections::HashSet<usize> = current.iter().copied().collect();
    let excluded: Vec<usize> = (0..p).filter(|j| !included.contains(j)).collect();
    match rng.gen_range(0..3u8) {
        0 => {
            // add: forward prob 1/|excluded|, reverse delete prob 1/|M'|
            if current.len() >= p_max || excluded.is_empty() {
                return None;
            }
            let j = excluded[rng.gen_range(0..excluded.len())];
            let mut model = current.to_vec();
            model.push(j);
            model.sort_unstable();
            let log_hastings =
                -(model.len() as f64).ln() + (excluded.len() as f64).ln();
            Some(Move { model, log_hastings })
        }
        1 => {
            // delete: forward prob 1/|M|, reverse add prob 1/|excluded'|
            if current.is_empty() {
                return None;
            }
            let j = current[rng.gen_range(0..current.len())];
            let model: Vec<usize> = current.iter().copied().filter(|&k| k != j).collect();
            let log_hastings =
                -((p - model.len()) as f64).ln() + (current.len() as f64).ln();
            Some(Move { model, log_hastings })
        }
        _ => {
            // swap: symmetric
            if current.is_empty() || excluded.is_empty() {
                return None;
            }
            let out = current[rng.gen_range(0..current.len())];
            let inn = excluded[rng.gen_range(0..excluded.len())];
            let mut model: Vec<usize> =
                current.iter().copied().filter(|&k| k != out).collect();
            model.push(inn);
            model.sort_unstable();
            Some(Move { model, log_hastings: 0.0 })
        }
    }
}

/// Draws g-prior coefficients and the residual variance for the model
/// columns `x_m` given `y` (already residualized on flat directions):
/// `sigma^2` from its marginal inverse-gamma and `beta` from the
/// conditional normal with shrinkage `g/(1+g)`.
fn draw_gprior_coef(
    y: &DVector<f64>,
    x_m: &DMatrix<f64>,
    g: f64,
    n_eff: usize,
    rng: &mut impl Rng,
) -> Result<(DVector<f64>, f64)> {
    use rand_distr::{Distribution, Gamma};
    let pm = x_m.ncols();
    let yy = y.dot(y);
    if yy <= 0.0 {
        return Err(Error::DegenerateResiduals);
    }
    if pm == 0 {
        let gamma = Gamma::new(n_eff as f64 / 2.0, 2.0 / yy)
            .map_err(|e| Error::InvalidParameter(format!("gamma draw: {e}")))?;
        return Ok((DVector::zeros(0), 1.0 / gamma.sample(rng)));
    }
    let fit = linalg::lstsq(x_m, y)?;
    let shrink = g / (1.0 + g);
    let fitted_ss = fit.solution.dot(&(x_m.transpose() * y));
    let ssr = (yy - shrink * fitted_ss).max(yy * 1e-12);
    let gamma = Gamma::new(n_eff as f64 / 2.0, 2.0 / ssr)
        .map_err(|e| Error::InvalidParameter(format!("gamma draw: {e}")))?;
    let sigma2 = 1.0 / gamma.sample(rng);
    let normals = DVector::from_fn(pm, |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta = &fit.solution * shrink + fit.rinv * normals * (sigma2 * shrink).sqrt();
    Ok((beta, sigma2))
}

/// Residualizes every column of `x_m` on the unit vector `u`.
fn residualize_on(x_m: &DMatrix<f64>, u: &DVector<f64>) -> DMatrix<f64> {
    let proj = u.transpose() * x_m;
    x_m - u * proj
}

struct GpriorCommon<'a> {
    x: &'a DMatrix<f64>,
    p: usize,
    p_max: usize,
}

/// Log of the size-balanced model prior `p(M) proportional to
/// 1 / C(p, |M|)`: uniform over model sizes, then uniform within a
/// size. Heavily penalizes each added variable when p is large.
fn log_model_prior(p: usize, size: usize) -> f64 {
    // -ln C(p, size) via ln Gamma
    use statrs::function::gamma::ln_gamma;
    ln_gamma(size as f64 + 1.0) + ln_gamma((p - size) as f64 + 1.0)
        - ln_gamma(p as f64 + 1.0)
}

impl GpriorCommon<'_> {
    /// One Metropolis step over the inclusion set using the supplied
    /// marginal-likelihood scorer, targeting the marginal likelihood
    /// times the size-balanced model prior.
    fn mh_step(
        &self,
        current: Vec<usize>,
        score: &mut impl FnMut(&[usize]) -> Result<f64>,
        rng: &mut impl Rng,
    ) -> Result<Vec<usize>> {
        let Some(mv) = propose_move(&current, self.p, self.p_max, rng) else {
            return Ok(current);
        };
        let s_cur = score(&current)? + log_model_prior(self.p, current.len());
        let s_new = score(&mv.model)? + log_model_prior(self.p, mv.model.len());
        if rng.gen::<f64>().ln() < s_new - s_cur + mv.log_hastings {
            Ok(mv.model)
        } else {
            Ok(current)
        }
    }
}

fn validate_gprior_inputs(data: &RegressionData, cfg: &MCMCConfig, p_max: usize) -> Result<()> {
    cfg.validate()?;
    let n = data.n();
    if p_max + 2 >= n {
        return Err(Error::Precondition(format!(
            "model size cap {p_max} must stay below n - 2 = {}",
            n.saturating_sub(2)
        )));
    }
    Ok(())
}

/// Two-equation model-selection sampler for p possibly exceeding n.
///
/// Each sweep: Metropolis update of the selection-equation inclusion
/// set scored by its empirical-Bayes g-prior marginal; a draw of the
/// selection coefficients; then a Metropolis update of the
/// response-equation inclusion set scored on the response residualized
/// against the current selection residual `z - X_M beta_c`; finally
/// draws of the response coefficients, the noise scale, and the
/// treatment coefficient from its conditional.
pub fn fit_selection_gprior(
    data: &RegressionData,
    cfg: &MCMCConfig,
    p_max: usize,
) -> Result<PosteriorDraws> {
    validate_gprior_inputs(data, cfg, p_max)?;
    let n = data.n();
    let p = data.p();
    let common = GpriorCommon { x: &data.x, p, p_max };
    let mut rng = cfg.rng();
    let mut model_c = ModelIndicator::empty(p, p_max).indices();
    let mut model_d: Vec<usize> = Vec::new();

    let mut out = PosteriorDraws {
        config: Some(cfg.clone()),
        sigma_eps: Some(Vec::with_capacity(cfg.draws)),
        model_c: Some(Vec::with_capacity(cfg.draws)),
        model_d: Some(Vec::with_capacity(cfg.draws)),
        ..PosteriorDraws::default()
    };

    for it in 0..cfg.total_iterations() {
        // selection equation: score models on z with one flat dim
        let mut score_c = |m: &[usize]| -> Result<f64> {
            let xm = linalg::select_columns(common.x, m);
            let g = local_eb_g_flat(&data.z, &xm, 1)?;
            log_marginal_gprior_flat(&data.z, &xm, g, 1)
        };
        model_c = common.mh_step(model_c, &mut score_c, &mut rng)?;
        let xc = linalg::select_columns(&data.x, &model_c);
        let g_c = local_eb_g_flat(&data.z, &xc, 1)?;
        let (beta_c, sigma_eps2) = draw_gprior_coef(&data.z, &xc, g_c, n - 1, &mut rng)?;
        let zt = &data.z - &xc * &beta_c;
        let ztn = zt.dot(&zt).sqrt();
        if ztn < 1e-12 {
            return Err(Error::Precondition("selection residual collapsed".into()));
        }
        let u = &zt / ztn;
        let y_res = &data.y - &u * u.dot(&data.y);

        // response equation: score on y residualized against the
        // selection residual, two flat dims (centering + treatment)
        let mut score_d = |m: &[usize]| -> Result<f64> {
            let xm = residualize_on(&linalg::select_columns(common.x, m), &u);
            let g = local_eb_g_flat(&y_res, &xm, 2)?;
            log_marginal_gprior_flat(&y_res, &xm, g, 2)
        };
        model_d = common.mh_step(model_d, &mut score_d, &mut rng)?;
        let xd = residualize_on(&linalg::select_columns(&data.x, &model_d), &u);
        let g_d = local_eb_g_flat(&y_res, &xd, 2)?;
        let (beta_d, sigma_nu2) = draw_gprior_coef(&y_res, &xd, g_d, n - 2, &mut rng)?;

        let xd_raw = linalg::select_columns(&data.x, &model_d);
        let yt = &data.y - &xd_raw * &beta_d;
        let mean = zt.dot(&yt) / (ztn * ztn);
        let eps: f64 = rng.sample(StandardNormal);
        let alpha = mean + (sigma_nu2 / (ztn * ztn)).sqrt() * eps;

        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
            out.alpha.push(alpha);
            out.sigma_nu.push(sigma_nu2.sqrt());
            out.sigma_eps.as_mut().unwrap().push(sigma_eps2.sqrt());
            out.model_c.as_mut().unwrap().push(model_c.clone());
            out.model_d.as_mut().unwrap().push(model_d.clone());
        }
    }
    out.validate()?;
    Ok(out)
}

/// Single-equation counterpart: the raw treatment plays the role of the
/// selection residual, so selection-side shrinkage never enters and the
/// treatment coefficient inherits any confounding the excluded controls
/// carry.
pub fn fit_naive_gprior(
    data: &RegressionData,
    cfg: &MCMCConfig,
    p_max: usize,
) -> Result<PosteriorDraws> {
    validate_gprior_inputs(data, cfg, p_max)?;
    let n = data.n();
    let p = data.p();
    let common = GpriorCommon { x: &data.x, p, p_max };
    let mut rng = cfg.rng();
    let mut model: Vec<usize> = Vec::new();

    let ztn = data.z.dot(&data.z).sqrt();
    if ztn < 1e-12 {
        return Err(Error::Precondition("treatment vector has negligible norm".into()));
    }
    let u = &data.z / ztn;
    let y_res = &data.y - &u * u.dot(&data.y);

    let mut out = PosteriorDraws {
        config: Some(cfg.clone()),
        model_d: Some(Vec::with_capacity(cfg.draws)),
        ..PosteriorDraws::default()
    };

    for it in 0..cfg.total_iterations() {
        let mut score = |m: &[usize]| -> Result<f64> {
            let xm = residualize_on(&linalg::select_columns(common.x, m), &u);
            let g = local_eb_g_flat(&y_res, &xm, 2)?;
            log_marginal_gprior_flat(&y_res, &xm, g, 2)
        };
        model = common.mh_step(model, &mut score, &mut rng)?;
        let xm = residualize_on(&linalg::select_columns(&data.x, &model), &u);
        let g = local_eb_g_flat(&y_res, &xm, 2)?;
        let (beta, sigma_nu2) = draw_gprior_coef(&y_res, &xm, g, n - 2, &mut rng)?;

        let xm_raw = linalg::select_columns(&data.x, &model);
        let yt = &data.y - &xm_raw * &beta;
        let mean = data.z.dot(&yt) / (ztn * ztn);
        let eps: f64 = rng.sample(StandardNormal);
        let alpha = mean + (sigma_nu2 / (ztn * ztn)).sqrt() * eps;

        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thin == 0 {
            out.alpha.push(alpha);
            out.sigma_nu.push(sigma_nu2.sqrt());
            out.model_d.as_mut().unwrap().push(model.clone());
        }
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn pgtn_like(seed: u64, n: usize, p: usize) -> RegressionData {
        let mut rng = StdRng::seed_from_u64(seed);
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = DMatrix::from_fn(n, p, |i, j| {
            let noise: f64 = rng.sample(StandardNormal);
            if j == 0 {
                0.7 * z[i] + (1.0f64 - 0.49).sqrt() * noise
            } else {
                noise
            }
        });
        let nu = DVector::from_fn(n, |_, _| 0.2 * rng.sample::<f64, _>(StandardNormal));
        let y = &z * 0.1 + x.column(0) * 0.1 + nu;
        let zm = z.mean();
        let ym = y.mean();
        let mut xc = x.clone();
        for mut c in xc.column_iter_mut() {
            let m = c.iter().sum::<f64>() / n as f64;
            c.iter_mut().for_each(|v| *v -= m);
        }
        RegressionData::new(
            y.map(|v| v - ym),
            z.map(|v| v - zm),
            xc,
            (0..p).map(|j| format!("x{j}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn handles_p_greater_than_n() {
        let data = pgtn_like(61, 30, 35);
        let cfg = MCMCConfig { burn_in: 100, draws: 200, seed: 3, ..Default::default() };
        let out = fit_selection_gprior(&data, &cfg, 3).unwrap();
        assert_eq!(out.len(), 200);
        for m in out.model_c.as_ref().unwrap() {
            assert!(m.len() <= 3);
        }
    }

    #[test]
    fn rejects_pmax_too_large() {
        let data = pgtn_like(62, 30, 35);
        let cfg = MCMCConfig { burn_in: 10, draws: 10, ..Default::default() };
        assert!(matches!(fit_selection_gprior(&data, &cfg, 28), Err(Error::Precondition(_))));
    }

    #[test]
    fn pmax_zero_is_simple_regression() {
        let data = pgtn_like(63, 30, 35);
        let cfg = MCMCConfig { burn_in: 200, draws: 3000, seed: 4, ..Default::default() };
        let out = fit_selection_gprior(&data, &cfg, 0).unwrap();
        let mean = out.alpha.iter().sum::<f64>() / out.alpha.len() as f64;
        let slope = data.z.dot(&data.y) / data.z.dot(&data.z);
        let res = &data.y - &data.z * slope;
        let se = (res.dot(&res) / (data.n() as f64 - 2.0) / data.z.dot(&data.z)).sqrt();
        assert!((mean - slope).abs() < 0.2 * se.max(0.05), "mean {mean} slope {slope}");
        for m in out.model_c.as_ref().unwrap() {
            assert!(m.is_empty());
        }
    }

    #[test]
    fn empty_truth_keeps_inclusion_low() {
        let mut rng = StdRng::seed_from_u64(64);
        let n = 40;
        let p = 20;
        let mut freq_sum = 0.0;
        let reps = 20;
        for r in 0..reps {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let data =
                RegressionData::new(y, z, x, (0..p).map(|j| format!("x{j}")).collect()).unwrap();
            let cfg = MCMCConfig {
                burn_in: 200,
                draws: 500,
                seed: 100 + r,
                ..Default::default()
            };
            let out = fit_selection_gprior(&data, &cfg, 3).unwrap();
            let chains = out.model_d.as_ref().unwrap();
            let mut any = 0usize;
            for m in chains {
                any += m.len();
            }
            // average inclusion probability per variable
            freq_sum += any as f64 / (chains.len() as f64 * p as f64);
        }
        assert!(freq_sum / (reps as f64) < 0.5);
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let data = pgtn_like(65, 30, 35);
        let cfg = MCMCConfig { burn_in: 50, draws: 100, seed: 11, ..Default::default() };
        let a = fit_naive_gprior(&data, &cfg, 3).unwrap();
        let b = fit_naive_gprior(&data, &cfg, 3).unwrap();
        assert_eq!(a.alpha, b.alpha);
    }
}
