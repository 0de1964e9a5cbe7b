//! Log-density evaluators: the horseshoe-proxy shrinkage prior, its
//! half-Cauchy global scale, and Zellner g-prior marginal likelihoods
//! for the model-selection sampler.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Smallest coefficient magnitude admitted by the shrinkage density.
/// The density has an integrable log-singularity at zero, so exact
/// zeros are clamped rather than rejected.
const BETA_FLOOR: f64 = 1e-300;

/// Upper cap on the empirical-Bayes g to guard perfect-fit draws.
const G_CAP: f64 = 1e8;

/// Unnormalized log density of the horseshoe-proxy shrinkage prior:
/// sum over j of `ln ln(1 + 4 v^2 / beta_j^2) - ln v`.
pub fn log_shrinkage_density(beta: &DVector<f64>, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("global scale v must be positive, got {v}")));
    }
    let lv = v.ln();
    let mut total = 0.0;
    for &b in beta.iter() {
        let b = b.abs().max(BETA_FLOOR);
        let r = 2.0 * v / b;
        // ln(1 + r^2) overflows for clamped near-zero coefficients;
        // switch to its asymptote 2 ln r there
        let inner = if r > 1e150 { 2.0 * r.ln() } else { (r * r).ln_1p() };
        total += inner.ln() - lv;
    }
    Ok(total)
}

/// Log density of the standard half-Cauchy distribution at `v`.
pub fn log_half_cauchy(v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::InvalidParameter(format!("half-Cauchy support is v > 0, got {v}")));
    }
    Ok((2.0 / (std::f64::consts::PI * (1.0 + v * v))).ln())
}

/// Inclusion set over `p` candidate columns, capped at `p_max` members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelIndicator {
    included: Vec<bool>,
    count: usize,
    p_max: usize,
}

impl ModelIndicator {
    pub fn empty(p: usize, p_max: usize) -> Self {
        ModelIndicator { included: vec![false; p], count: 0, p_max }
    }

    pub fn from_indices(p: usize, p_max: usize, idx: &[usize]) -> Result<Self> {
        let mut m = Self::empty(p, p_max);
        for &j in idx {
            if j >= p {
                return Err(Error::InvalidParameter(format!("index {j} out of range for p={p}")));
            }
            m.insert(j)?;
        }
        Ok(m)
    }

    pub fn p(&self) -> usize {
        self.included.len()
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, j: usize) -> bool {
        self.included[j]
    }

    pub fn insert(&mut self, j: usize) -> Result<()> {
        if self.included[j] {
            return Ok(());
        }
        if self.count >= self.p_max {
            return Err(Error::InvalidParameter(format!("model size cap {} reached", self.p_max)));
        }
        self.included[j] = true;
        self.count += 1;
        Ok(())
    }

    pub fn remove(&mut self, j: usize) {
        if self.included[j] {
            self.included[j] = false;
            self.count -= 1;
        }
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| self.included[j]).collect()
    }

    pub fn excluded(&self) -> Vec<usize> {
        (0..self.p()).filter(|&j| !self.included[j]).collect()
    }
}

/// In-model R^2 of regressing `y` on `x_m`, with the total sum of
/// squares of `y`. `y` is assumed already residualized on any flat
/// (unpenalized) directions.
fn r_squared(y: &DVector<f64>, x_m: &DMatrix<f64>) -> Result<f64> {
    let yy = y.dot(y);
    if yy <= 0.0 {
        return Err(Error::DegenerateResiduals);
    }
    if x_m.ncols() == 0 {
        return Ok(0.0);
    }
    let (_, ssr) = linalg::residual_ss(x_m, y)?;
    Ok((1.0 - ssr / yy).clamp(0.0, 1.0))
}

/// Log marginal likelihood of the centered-response model under a
/// Zellner g-prior with flat intercept and `sigma` priors, up to a
/// model-independent constant. `q_flat` counts the flat directions
/// already projected out of `y` (1 for plain centering).
pub fn log_marginal_gprior_flat(
    y: &DVector<f64>,
    x_m: &DMatrix<f64>,
    g: f64,
    q_flat: usize,
) -> Result<f64> {
    if !(g >= 0.0) {
        return Err(Error::InvalidParameter(format!("g must be nonnegative, got {g}")));
    }
    let n = y.len();
    let pm = x_m.ncols();
    if pm + q_flat >= n {
        return Err(Error::Precondition(format!(
            "model size {pm} plus {q_flat} flat dims must stay below n={n}"
        )));
    }
    let neff = (n - q_flat) as f64;
    let r2 = r_squared(y, x_m)?;
    Ok(0.5 * (neff - pm as f64) * g.ln_1p() - 0.5 * neff * (g * (1.0 - r2)).ln_1p())
}

/// Log marginal likelihood with a single flat dimension (the centered
/// intercept), the common case.
pub fn log_marginal_gprior(y: &DVector<f64>, x_m: &DMatrix<f64>, g: f64) -> Result<f64> {
    log_marginal_gprior_flat(y, x_m, g, 1)
}

/// Local empirical-Bayes g maximizing the within-model marginal
/// likelihood: `max(F_M - 1, 0)` with the model-vs-null F statistic,
/// capped at 1e8.
pub fn local_eb_g_flat(y: &DVector<f64>, x_m: &DMatrix<f64>, q_flat: usize) -> Result<f64> {
    let n = y.len();
    let pm = x_m.ncols();
    if pm + q_flat >= n {
        return Err(Error::Precondition(format!(
            "model size {pm} plus {q_flat} flat dims must stay below n={n}"
        )));
    }
    if pm == 0 {
        return Ok(0.0);
    }
    let neff = (n - q_flat) as f64;
    let r2 = r_squared(y, x_m)?;
    if r2 <= 0.0 {
        return Ok(0.0);
    }
    if r2 >= 1.0 {
        return Ok(G_CAP);
    }
    let f_stat = (r2 / pm as f64) / ((1.0 - r2) / (neff - pm as f64));
    Ok((f_stat - 1.0).clamp(0.0, G_CAP))
}

/// [`local_eb_g_flat`] with a single flat (centering) dimension.
pub fn local_eb_g(y: &DVector<f64>, x_m: &DMatrix<f64>) -> Result<f64> {
    local_eb_g_flat(y, x_m, 1)
}
