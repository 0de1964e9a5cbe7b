//! Regularized Bayesian linear regression for treatment effect estimation.
//!
//! The library centers on a two-equation model for a scalar treatment
//! effect: a selection equation relating the treatment to observed
//! controls, and a response equation relating the outcome to the
//! treatment and controls. Shrinkage priors applied naively to the
//! response equation alone bias the treatment coefficient; the
//! reparametrized sampler here regularizes both equations jointly and
//! avoids that bias.
//!
//! Modules:
//! - [`data_model`]: CSV ingestion, design expansion, standardization.
//! - [`priors`]: shrinkage and g-prior log densities.
//! - [`estimators`]: OLS baselines and interval summaries.
//! - [`samplers`]: elliptical slice samplers and model-space MCMC.
//! - [`diagnostics`]: closed-form bias formulas and exogeneity checks.
//! - [`simbench`]: simulation scenarios and the replication harness.

pub mod data_model;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod priors;
pub mod samplers;
pub mod simbench;

pub use data_model::{
    build_design, load_table, standardize, DataTable, DesignSpec, InteractionRule,
    RegressionData, StandardizationInfo, Trend,
};
pub use error::{Error, Result};
pub use estimators::{fit_ols, fit_oracle_ols, summarize_draws, summarize_ols, FitSummary, OlsFit};
pub use samplers::{
    fit_naive, fit_naive_gprior, fit_reparam, fit_selection_gprior, MCMCConfig, PosteriorDraws,
};
pub use simbench::{
    gen_pgtn, gen_vardec, gen_wang1, gen_wang2, run_study, GeneratedDataset, Method, MethodRow,
    Scenario, StudyResult, VardecScenario,
};
