//! MCMC machinery: elliptical slice updates, conjugate scale updates,
//! and the full posterior samplers built from them.

mod ess;
mod gprior;
mod naive;
mod reparam;

pub use ess::ess_update;
pub use gprior::{fit_naive_gprior, fit_selection_gprior};
pub use naive::fit_naive;
pub use reparam::{fit_reparam, flat_coords_loglik, two_equation_loglik};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{log_half_cauchy, log_shrinkage_density};

/// Chain-length and tuning knobs shared by every sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MCMCConfig {
    pub burn_in: usize,
    pub draws: usize,
    pub thin: usize,
    pub seed: u64,
    /// Random-walk step on log v for the global-scale update.
    pub v_step: f64,
}

impl Default for MCMCConfig {
    fn default() -> Self {
        MCMCConfig { burn_in: 2000, draws: 10000, thin: 1, seed: 0, v_step: 0.5 }
    }
}

impl MCMCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.draws < 1 || self.thin < 1 {
            return Err(Error::InvalidParameter(
                "draw count and thinning stride must be at least 1".into(),
            ));
        }
        if !(self.v_step >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "v step must be nonnegative, got {}",
                self.v_step
            )));
        }
        Ok(())
    }

    pub(crate) fn total_iterations(&self) -> usize {
        self.burn_in + self.draws * self.thin
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        use rand::SeedableRng;
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Retained chains from one sampler run. Fields not produced by a
/// given sampler stay `None` (e.g. the naive model has no selection
/// equation, the model-selection sampler has no global scale).
#[derive(Debug, Clone, Default)]
pub struct PosteriorDraws {
    pub alpha: Vec<f64>,
    /// Naive-model control coefficients, one row per retained draw.
    pub beta: Option<Vec<Vec<f64>>>,
    pub beta_c: Option<Vec<Vec<f64>>>,
    pub beta_d: Option<Vec<Vec<f64>>>,
    pub sigma_nu: Vec<f64>,
    pub sigma_eps: Option<Vec<f64>>,
    pub v: Option<Vec<f64>>,
    pub v_c: Option<Vec<f64>>,
    pub v_d: Option<Vec<f64>>,
    /// Included column indices per retained draw (model-selection
    /// samplers only).
    pub model_c: Option<Vec<Vec<usize>>>,
    pub model_d: Option<Vec<Vec<usize>>>,
    pub config: Option<MCMCConfig>,
    /// Accepted / attempted counts for the global-scale updates.
    pub v_accepted: u64,
    pub v_attempted: u64,
    /// Total slice-shrink rejections across all ESS calls.
    pub ess_rejections: u64,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn v_acceptance_rate(&self) -> Option<f64> {
        if self.v_attempted == 0 {
            None
        } else {
            Some(self.v_accepted as f64 / self.v_attempted as f64)
        }
    }

    /// Checks chain-length agreement, finiteness, and positivity of
    /// scale draws.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let finite = |name: &str, v: &[f64]| -> Result<()> {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(Error::NonFinite(name.to_string()))
            }
        };
        finite("alpha", &self.alpha)?;
        if !self.sigma_nu.is_empty() && self.sigma_nu.len() != n {
            return Err(Error::DimensionMismatch("sigma_nu chain length".into()));
        }
        finite("sigma_nu", &self.sigma_nu)?;
        for (name, chain) in [
            ("sigma_eps", &self.sigma_eps),
            ("v", &self.v),
            ("v_c", &self.v_c),
            ("v_d", &self.v_d),
        ] {
            if let Some(c) = chain {
                if c.len() != n {
                    return Err(Error::DimensionMismatch(format!("{name} chain length")));
                }
                finite(name, c)?;
                if c.iter().any(|&x| x <= 0.0) {
                    return Err(Error::InvalidParameter(format!("{name} chain has nonpositive draw")));
                }
            }
        }
        if self.sigma_nu.iter().any(|&x| x <= 0.0) {
            return Err(Error::InvalidParameter("sigma_nu chain has nonpositive draw".into()));
        }
        for (name, chain) in [("beta", &self.beta), ("beta_c", &self.beta_c), ("beta_d", &self.beta_d)] {
            if let Some(c) = chain {
                if c.len() != n {
                    return Err(Error::DimensionMismatch(format!("{name} chain length")));
                }
                for row in c {
                    finite(name, row)?;
                }
            }
        }
        Ok(())
    }
}

/// Draws sigma^2 from its conjugate conditional, inverse-gamma with
/// shape n/2 and rate SSR/2 (Jeffreys prior 1/sigma).
pub fn sample_sigma_sq(residuals: &DVector<f64>, rng: &mut impl Rng) -> Result<f64> {
    let n = residuals.len();
    if n < 2 {
        return Err(Error::Precondition("need at least 2 residuals".into()));
    }
    let ssr = residuals.dot(residuals);
    if ssr <= 0.0 {
        return Err(Error::DegenerateResiduals);
    }
    let gamma = Gamma::new(n as f64 / 2.0, 2.0 / ssr)
        .map_err(|e| Error::InvalidParameter(format!("gamma draw: {e}")))?;
    Ok(1.0 / gamma.sample(rng))
}

/// Random-walk Metropolis step on log v targeting the shrinkage prior
/// times the half-Cauchy hyperprior (log-Jacobian included). Returns
/// the new value and whether the proposal was accepted.
pub fn update_global_scale(
    v: f64,
    beta: &DVector<f64>,
    step: f64,
    rng: &mut impl Rng,
) -> Result<(f64, bool)> {
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("v must be positive, got {v}")));
    }
    if step == 0.0 {
        return Ok((v, true));
    }
    let eps: f64 = rng.sample(StandardNormal);
    let v_new = (v.ln() + step * eps).exp();
    let log_target = |s: f64| -> Result<f64> {
        Ok(log_shrinkage_density(beta, s)? + log_half_cauchy(s)? + s.ln())
    };
    let log_ratio = log_target(v_new)? - log_target(v)?;
    if rng.gen::<f64>().ln() < log_ratio {
        Ok((v_new, true))
    } else {
        Ok((v, false))
    }
}

/// Conditional refresh of the treatment coefficient: a normal draw
/// centered at the least-squares coefficient of `y - X beta_d` on the
/// selection residual `z - X beta_c`.
pub fn sample_alpha_conditional(
    y: &DVector<f64>,
    z: &DVector<f64>,
    x: &DMatrix<f64>,
    beta_c: &DVector<f64>,
    beta_d: &DVector<f64>,
    sigma_nu: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    let zt = z - x * beta_c;
    let yt = y - x * beta_d;
    let ztz = zt.dot(&zt);
    if ztz < 1e-14 {
        return Err(Error::Precondition("selection residual has negligible norm".into()));
    }
    let mean = zt.dot(&yt) / ztz;
    let eps: f64 = rng.sample(StandardNormal);
    Ok(mean + sigma_nu / ztz.sqrt() * eps)
}
