//! Simulation scenarios and the Monte Carlo replication harness that
//! aggregates bias, coverage, interval length, and MSE per method.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::data_model::RegressionData;
use crate::error::{Error, Result};
use crate::estimators::{fit_ols, fit_oracle_ols, summarize_draws, summarize_ols, FitSummary};
use crate::samplers::{
    fit_naive, fit_naive_gprior, fit_reparam, fit_selection_gprior, MCMCConfig,
};

/// A generated dataset together with the ground truth behind it.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub data: RegressionData,
    pub alpha: f64,
    pub beta_c: DVector<f64>,
    pub beta_d: DVector<f64>,
    /// Indices of controls with nonzero coefficients in the combined
    /// response equation (the oracle's information).
    pub support: Vec<usize>,
}

/// Variance-decomposition scenario: var(Y) = 1 splits into the
/// quasi-experimental share `kappa2`, the direct-effect share `phi2`,
/// and noise; `rho2` is the confounded share of var(Z).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VardecScenario {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub kappa2: f64,
    pub phi2: f64,
    pub rho2: f64,
}

impl VardecScenario {
    pub fn sigma_nu_sq(&self) -> f64 {
        1.0 - self.kappa2 - self.phi2
    }

    pub fn sigma_eps_sq(&self) -> f64 {
        1.0 - self.rho2
    }

    pub fn alpha(&self) -> f64 {
        (self.kappa2 / (1.0 - self.rho2)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho2 >= 0.0 && self.rho2 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rho2 must lie in [0, 1), got {}",
                self.rho2
            )));
        }
        if !(self.kappa2 >= 0.0 && self.phi2 >= 0.0 && self.sigma_nu_sq() > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa2 + phi2 must stay below 1 with both nonnegative, got {} + {}",
                self.kappa2, self.phi2
            )));
        }
        // the sparse construction needs 3k slots; k >= p switches to
        // the fully dense variant instead
        if self.k < self.p && 3 * self.k > self.p {
            return Err(Error::InvalidParameter(format!(
                "sparse construction needs 3k <= p, got k={}, p={}",
                self.k, self.p
            )));
        }
        if self.n < 3 || self.p == 0 {
            return Err(Error::InvalidParameter("need n >= 3 and p >= 1".into()));
        }
        Ok(())
    }
}

fn standard_normal_vec(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn standard_normal_mat(n: usize, p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn center(v: &mut DVector<f64>) {
    let m = v.mean();
    v.iter_mut().for_each(|x| *x -= m);
}

fn center_columns(x: &mut DMatrix<f64>) {
    for mut c in x.column_iter_mut() {
        let m = c.iter().sum::<f64>() / c.len() as f64;
        c.iter_mut().for_each(|v| *v -= m);
    }
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

/// Shared structure of the Wang-style designs: one confounder
/// correlated with the treatment at `rho`, one independent signal
/// control, and a block of pure noise controls.
fn gen_wang_like(
    n: usize,
    p_noise: usize,
    noise_sd: f64,
    rng: &mut impl Rng,
) -> Result<GeneratedDataset> {
    let rho = 0.7;
    let alpha = 0.1;
    let p = 2 + p_noise;
    let z = standard_normal_vec(n, rng);
    let x1 = &z * rho + standard_normal_vec(n, rng) * (1.0 - rho * rho).sqrt();
    let x2 = standard_normal_vec(n, rng);
    let mut x = DMatrix::zeros(n, p);
    x.column_mut(0).copy_from(&x1);
    x.column_mut(1).copy_from(&x2);
    x.columns_mut(2, p_noise)
        .copy_from(&standard_normal_mat(n, p_noise, rng));
    let mut y = &z * alpha + &x1 * 0.1 + &x2 * 0.1 + standard_normal_vec(n, rng) * noise_sd;

    let mut z = z;
    center(&mut y);
    center(&mut z);
    center_columns(&mut x);

    // population selection coefficients: only the first control loads
    let mut beta_c = DVector::zeros(p);
    beta_c[0] = rho;
    let mut beta = DVector::zeros(p);
    beta[0] = 0.1;
    beta[1] = 0.1;
    let beta_d = &beta + &beta_c * alpha;
    let data = RegressionData::new(y, z, x, names(p))?;
    Ok(GeneratedDataset { data, alpha, beta_c, beta_d, support: vec![0, 1] })
}

/// First Wang design: n = 1000, p = 51 (one confounder, one signal,
/// 49 noise controls), unit response noise.
pub fn gen_wang1(rng: &mut impl Rng) -> Result<GeneratedDataset> {
    gen_wang_like(1000, 49, 1.0, rng)
}

/// Second Wang design: the treatment and the first seven controls are
/// jointly normal with covariance `rho^(k+l-2)` off the unit diagonal
/// (indices 1..8, treatment first); seven more independent signal
/// controls and 43 noise controls give p = 57. All fourteen signal
/// controls and the treatment carry coefficient 0.1.
pub fn gen_wang2(rng: &mut impl Rng) -> Result<GeneratedDataset> {
    let n = 1000;
    let rho: f64 = 0.7;
    let alpha = 0.1;
    let block = 8;
    let p = 57;
    let mut sigma = DMatrix::zeros(block, block);
    for k in 0..block {
        for l in 0..block {
            sigma[(k, l)] = if k == l { 1.0 } else { rho.powi((k + l) as i32) };
        }
    }
    let chol = sigma.clone().cholesky().ok_or_else(|| {
        Error::InvalidParameter(
            "joint covariance of the treatment block is not positive definite".into(),
        )
    })?;
    let l = chol.l();

    let mut z = DVector::zeros(n);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let u = standard_normal_vec(block, rng);
        let row = &l * u;
        z[i] = row[0];
        for j in 0..7 {
            x[(i, j)] = row[j + 1];
        }
    }
    x.columns_mut(7, 7).copy_from(&standard_normal_mat(n, 7, rng));
    x.columns_mut(14, 43).copy_from(&standard_normal_mat(n, 43, rng));

    let mut beta = DVector::zeros(p);
    for j in 0..14 {
        beta[j] = 0.1;
    }
    let mut y = &z * alpha + &x * &beta + standard_normal_vec(n, rng);
    center(&mut y);
    center(&mut z);
    center_columns(&mut x);

    // population regression of the treatment on the correlated block
    let sigma_xx = sigma.view((1, 1), (7, 7)).into_owned();
    let sigma_xz = sigma.view((1, 0), (7, 1)).into_owned();
    let coefs = sigma_xx
        .lu()
        .solve(&sigma_xz)
        .ok_or_else(|| Error::InvalidParameter("singular treatment-block covariance".into()))?;
    let mut beta_c = DVector::zeros(p);
    for j in 0..7 {
        beta_c[j] = coefs[(j, 0)];
    }
    let beta_d = &beta + &beta_c * alpha;
    let data = RegressionData::new(y, z, x, names(p))?;
    Ok(GeneratedDataset { data, alpha, beta_c, beta_d, support: (0..14).collect() })
}

/// Variance-decomposition design: standardized controls, confounding
/// strength and effect sizes set by the scenario's variance shares.
pub fn gen_vardec(s: &VardecScenario, rng: &mut impl Rng) -> Result<GeneratedDataset> {
    s.validate()?;
    let (n, p, k) = (s.n, s.p, s.k);
    let alpha = s.alpha();

    let rescale = |mut v: DVector<f64>, target_sq: f64| -> DVector<f64> {
        let norm_sq = v.dot(&v);
        if norm_sq > 0.0 && target_sq > 0.0 {
            v *= (target_sq / norm_sq).sqrt();
        } else {
            v.fill(0.0);
        }
        v
    };

    let (beta_c, beta_d) = if k >= p {
        // dense variant: every control both confounds and affects the
        // response directly
        let bc = rescale(DVector::from_element(p, 1.0), s.rho2);
        let bd = rescale(standard_normal_vec(p, rng), s.phi2);
        (bc, bd)
    } else {
        let mut bc = DVector::zeros(p);
        for j in 0..(2 * k) {
            bc[j] = 1.0;
        }
        let bc = rescale(bc, s.rho2);
        let mut bd = DVector::zeros(p);
        for j in k..(3 * k) {
            bd[j] = rng.sample(StandardNormal);
        }
        let bd = rescale(bd, s.phi2);
        (bc, bd)
    };

    let mut x = standard_normal_mat(n, p, rng);
    center_columns(&mut x);
    for mut c in x.column_iter_mut() {
        let var = c.iter().map(|v| v * v).sum::<f64>() / (n as f64 - 1.0);
        if var <= 0.0 {
            return Err(Error::ZeroVariance("generated control".into()));
        }
        let sd = var.sqrt();
        c.iter_mut().for_each(|v| *v /= sd);
    }

    let eps = standard_normal_vec(n, rng) * s.sigma_eps_sq().sqrt();
    let mut z = &x * &beta_c + eps;
    let nu = standard_normal_vec(n, rng) * s.sigma_nu_sq().sqrt();
    let mut y = (&z - &x * &beta_c) * alpha + &x * &beta_d + nu;
    center(&mut y);
    center(&mut z);

    let combined = &beta_d - &beta_c * alpha;
    let support: Vec<usize> = (0..p).filter(|&j| combined[j].abs() > 1e-12).collect();
    let data = RegressionData::new(y, z, x, names(p))?;
    Ok(GeneratedDataset { data, alpha, beta_c, beta_d, support })
}

/// p > n design: the Wang-1 structure at n = 30 with 33 noise controls
/// (p = 35) and response noise variance 0.04.
pub fn gen_pgtn(rng: &mut impl Rng) -> Result<GeneratedDataset> {
    gen_wang_like(30, 33, 0.2, rng)
}

/// A simulation design with fixed dimensions and truth distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Scenario {
    Wang1,
    Wang2,
    Vardec(VardecScenario),
    Pgtn,
}

impl Scenario {
    pub fn generate(&self, rng: &mut impl Rng) -> Result<GeneratedDataset> {
        match self {
            Scenario::Wang1 => gen_wang1(rng),
            Scenario::Wang2 => gen_wang2(rng),
            Scenario::Vardec(s) => gen_vardec(s, rng),
            Scenario::Pgtn => gen_pgtn(rng),
        }
    }

    /// (n, p) of every dataset the scenario generates.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Scenario::Wang1 => (1000, 51),
            Scenario::Wang2 => (1000, 57),
            Scenario::Vardec(s) => (s.n, s.p),
            Scenario::Pgtn => (30, 35),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Scenario::Wang1 => "wang1".into(),
            Scenario::Wang2 => "wang2".into(),
            Scenario::Vardec(s) => format!(
                "vardec(n={}, p={}, k={}, kappa2={}, phi2={}, rho2={})",
                s.n, s.p, s.k, s.kappa2, s.phi2, s.rho2
            ),
            Scenario::Pgtn => "pgtn".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::Vardec(s) => s.validate(),
            _ => Ok(()),
        }
    }
}

/// An estimation method entering a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ols,
    OracleOls,
    Naive,
    Reparam,
    GpriorSelection { p_max: usize },
    GpriorNaive { p_max: usize },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Ols => "ols".into(),
            Method::OracleOls => "oracle-ols".into(),
            Method::Naive => "naive".into(),
            Method::Reparam => "reparam".into(),
            Method::GpriorSelection { .. } => "gprior-selection".into(),
            Method::GpriorNaive { .. } => "gprior-naive".into(),
        }
    }

    /// Whether the method's preconditions hold for the scenario's
    /// dimensions.
    pub fn applicable(&self, n: usize, p: usize) -> bool {
        match self {
            Method::Ols | Method::Naive | Method::Reparam => n > p + 1,
            Method::OracleOls => true,
            Method::GpriorSelection { p_max } | Method::GpriorNaive { p_max } => p_max + 2 < n,
        }
    }

    fn fit(&self, ds: &GeneratedDataset, cfg: &MCMCConfig) -> Result<FitSummary> {
        let level = 0.95;
        let d = &ds.data;
        match self {
            Method::Ols => summarize_ols(&fit_ols(&d.y, &d.z, &d.x)?, level, &self.label()),
            Method::OracleOls => summarize_ols(
                &fit_oracle_ols(&d.y, &d.z, &d.x, &ds.support)?,
                level,
                &self.label(),
            ),
            Method::Naive => {
                summarize_draws(&fit_naive(d, cfg)?.alpha, level, &self.label())
            }
            Method::Reparam => {
                summarize_draws(&fit_reparam(d, cfg)?.alpha, level, &self.label())
            }
            Method::GpriorSelection { p_max } => summarize_draws(
                &fit_selection_gprior(d, cfg, *p_max)?.alpha,
                level,
                &self.label(),
            ),
            Method::GpriorNaive { p_max } => summarize_draws(
                &fit_naive_gprior(d, cfg, *p_max)?.alpha,
                level,
                &self.label(),
            ),
        }
    }
}

/// Aggregated metrics for one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub bias: f64,
    pub coverage: f64,
    pub interval_length: f64,
    pub mse: f64,
}

/// Study output: one row per method plus run metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyResult {
    pub scenario: String,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<MethodRow>,
    /// Methods skipped because their preconditions fail on this
    /// scenario's dimensions.
    pub skipped: Vec<String>,
}

impl StudyResult {
    /// One CSV row per method, with a header.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("method,bias,coverage,interval_length,mse\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.method, r.bias, r.coverage, r.interval_length, r.mse
            ));
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidParameter(format!("serialization: {e}")))
    }

    /// Plain-text table mirroring the usual report layout.
    pub fn to_table_string(&self) -> String {
        let mut out = format!(
            "scenario: {}  (R = {}, seed = {})\n",
            self.scenario, self.replications, self.seed
        );
        out.push_str(&format!(
            "{:<18} {:>10} {:>10} {:>10} {:>10}\n",
            "method", "bias", "coverage", "I.L.", "MSE"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<18} {:>10.4} {:>10.3} {:>10.4} {:>10.5}\n",
                r.method, r.bias, r.coverage, r.interval_length, r.mse
            ));
        }
        for s in &self.skipped {
            out.push_str(&format!("skipped: {s} (preconditions not met)\n"));
        }
        out
    }
}

/// Per-replication per-method outcome.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    error: f64,
    covered: bool,
    interval_length: f64,
}

fn run_replication(
    scenario: &Scenario,
    methods: &[Method],
    seed: u64,
    rep: usize,
    cfg: &MCMCConfig,
) -> Result<Vec<Outcome>> {
    // one independent generator stream per replication, so results do
    // not depend on scheduling
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64 + 1);
    let ds = scenario.generate(&mut rng)?;
    let mut outcomes = Vec::with_capacity(methods.len());
    for (mi, method) in methods.iter().enumerate() {
        let mut mcfg = cfg.clone();
        mcfg.seed = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add((rep as u64) << 8)
            .wrapping_add(mi as u64);
        let summary = method.fit(&ds, &mcfg)?;
        outcomes.push(Outcome {
            error: summary.estimate - ds.alpha,
            covered: summary.covers(ds.alpha),
            interval_length: summary.interval_length(),
        });
    }
    Ok(outcomes)
}

/// Runs `r` independent replications of the scenario, fitting every
/// applicable method on each, and aggregates bias, coverage, interval
/// length, and MSE. Deterministic given `seed`, regardless of
/// `threads`.
pub fn run_study(
    scenario: &Scenario,
    methods: &[Method],
    r: usize,
    seed: u64,
    cfg: &MCMCConfig,
    threads: usize,
) -> Result<StudyResult> {
    scenario.validate()?;
    if r < 1 {
        return Err(Error::InvalidParameter("replication count must be at least 1".into()));
    }
    let (n, p) = scenario.dims();
    let mut active = Vec::new();
    let mut skipped = Vec::new();
    for m in methods {
        if m.applicable(n, p) {
            active.push(*m);
        } else {
            skipped.push(m.label());
        }
    }
    if active.is_empty() {
        return Err(Error::NoApplicableMethod(scenario.label()));
    }

    let per_rep: Vec<Result<Vec<Outcome>>> = run_parallel(r, threads, |rep| {
        run_replication(scenario, &active, seed, rep, cfg)
    });
    let mut collected = Vec::with_capacity(r);
    for res in per_rep {
        collected.push(res?);
    }

    let rows = active
        .iter()
        .enumerate()
        .map(|(mi, m)| {
            let rf = r as f64;
            let bias = collected.iter().map(|o| o[mi].error).sum::<f64>() / rf;
            let coverage =
                collected.iter().filter(|o| o[mi].covered).count() as f64 / rf;
            let interval_length =
                collected.iter().map(|o| o[mi].interval_length).sum::<f64>() / rf;
            let mse = collected.iter().map(|o| o[mi].error * o[mi].error).sum::<f64>() / rf;
            MethodRow { method: m.label(), bias, coverage, interval_length, mse }
        })
        .collect();

    Ok(StudyResult {
        scenario: scenario.label(),
        replications: r,
        seed,
        rows,
        skipped,
    })
}

#[cfg(feature = "parallel")]
fn run_parallel<T: Send>(
    r: usize,
    threads: usize,
    job: impl Fn(usize) -> T + Sync + Send,
) -> Vec<T> {
    if threads == 1 {
        return (0..r).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool construction");
    pool.install(|| (0..r).into_par_iter().map(job).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<T: Send>(
    r: usize,
    _threads: usize,
    job: impl Fn(usize) -> T + Sync,
) -> Vec<T> {
    (0..r).map(job).collect()
}
