//! Batch command-line front end: simulation studies, model fits on CSV
//! data, and analytic bias diagnostics.
//!
//! Exit codes: 0 success, 2 input error, 3 precondition failure,
//! 4 internal numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use serde::Deserialize;

use treatreg::diagnostics::{reparam_alpha_bias, residual_treatment_cov, ridge_alpha_bias};
use treatreg::estimators::{fit_ols, summarize_draws, summarize_ols, FitSummary};
use treatreg::samplers::{
    fit_naive, fit_naive_gprior, fit_reparam, fit_selection_gprior, MCMCConfig, PosteriorDraws,
};
use treatreg::simbench::{run_study, Method, Scenario, VardecScenario};
use treatreg::{build_design, load_table, DesignSpec, Error, RegressionData};

#[derive(Parser)]
#[command(name = "treatreg", version, about = "Treatment-effect regression toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo replication study on a built-in scenario.
    Simulate(SimulateArgs),
    /// Fit one model to a CSV dataset via a design-spec file.
    Fit(FitArgs),
    /// Print analytic bias values and the exogeneity check.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct McmcArgs {
    #[arg(long, default_value_t = 2000)]
    burn_in: usize,
    #[arg(long, default_value_t = 5000)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0.5)]
    v_step: f64,
}

impl McmcArgs {
    fn config(&self, seed: u64) -> MCMCConfig {
        MCMCConfig {
            burn_in: self.burn_in,
            draws: self.draws,
            thin: self.thin,
            seed,
            v_step: self.v_step,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// wang1 | wang2 | vardec | dense | pgtn
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    kappa2: Option<f64>,
    #[arg(long)]
    phi2: Option<f64>,
    #[arg(long)]
    rho2: Option<f64>,
    /// Model size cap for the p > n samplers.
    #[arg(long, default_value_t = 3)]
    pmax: usize,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated subset of: ols, oracle-ols, naive, reparam,
    /// gprior-selection, gprior-naive. Defaults per scenario.
    #[arg(long)]
    methods: Option<String>,
    /// Output path prefix; writes <prefix>.csv and <prefix>.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[command(flatten)]
    mcmc: McmcArgs,
}

#[derive(Args)]
struct FitArgs {
    /// CSV dataset with a header row.
    #[arg(long)]
    data: PathBuf,
    /// JSON design-spec file (response, treatment, controls, dummies,
    /// interactions, standardize flag).
    #[arg(long)]
    design: PathBuf,
    /// ols | naive | reparam | gprior-selection | gprior-naive
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 3)]
    pmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Write the fit summary JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optionally dump retained treatment-coefficient draws to CSV.
    #[arg(long)]
    chains: Option<PathBuf>,
    #[command(flatten)]
    mcmc: McmcArgs,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    design: PathBuf,
    /// JSON file with coefficient vectors: {"beta": [..]} for the
    /// single-equation bias, optionally {"beta_c": [..], "beta_d": [..]}
    /// for the two-equation bias.
    #[arg(long)]
    coef: PathBuf,
}

#[derive(Deserialize)]
struct CoefFile {
    beta: Option<Vec<f64>>,
    beta_c: Option<Vec<f64>>,
    beta_d: Option<Vec<f64>>,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Precondition(_) | Error::RankDeficient | Error::NoApplicableMethod(_) => 3,
        Error::SliceCollapse | Error::DegenerateResiduals | Error::EmptyChain => 4,
        _ => 2,
    }
}

fn fail(err: Error) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(exit_code_for(&err))
}

fn input_error(msg: String) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn parse_methods(spec: &str, pmax: usize) -> Result<Vec<Method>, String> {
    spec.split(',')
        .map(|s| match s.trim() {
            "ols" => Ok(Method::Ols),
            "oracle-ols" => Ok(Method::OracleOls),
            "naive" => Ok(Method::Naive),
            "reparam" => Ok(Method::Reparam),
            "gprior-selection" => Ok(Method::GpriorSelection { p_max: pmax }),
            "gprior-naive" => Ok(Method::GpriorNaive { p_max: pmax }),
            other => Err(format!("unknown method `{other}`")),
        })
        .collect()
}

fn cmd_simulate(args: &SimulateArgs) -> ExitCode {
    let vardec = |label: &str| -> Result<Scenario, String> {
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| format!("--{name} is required for scenario {label}"))
        };
        Ok(Scenario::Vardec(VardecScenario {
            n: args.n.ok_or_else(|| format!("--n is required for scenario {label}"))?,
            p: args.p.ok_or_else(|| format!("--p is required for scenario {label}"))?,
            k: args.k.ok_or_else(|| format!("--k is required for scenario {label}"))?,
            kappa2: need("kappa2", args.kappa2)?,
            phi2: need("phi2", args.phi2)?,
            rho2: need("rho2", args.rho2)?,
        }))
    };
    let scenario = match args.scenario.as_str() {
        "wang1" => Scenario::Wang1,
        "wang2" => Scenario::Wang2,
        "vardec" | "dense" => match vardec(&args.scenario) {
            Ok(s) => s,
            Err(msg) => return input_error(msg),
        },
        "pgtn" => Scenario::Pgtn,
        other => return input_error(format!("unknown scenario `{other}`")),
    };
    let methods = match &args.methods {
        Some(spec) => match parse_methods(spec, args.pmax) {
            Ok(m) => m,
            Err(msg) => return input_error(msg),
        },
        None => match scenario {
            Scenario::Pgtn => vec![
                Method::GpriorSelection { p_max: args.pmax },
                Method::GpriorNaive { p_max: args.pmax },
            ],
            _ => vec![Method::Ols, Method::OracleOls, Method::Naive, Method::Reparam],
        },
    };
    let cfg = args.mcmc.config(args.seed);
    let result = match run_study(&scenario, &methods, args.reps, args.seed, &cfg, args.threads) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    print!("{}", result.to_table_string());
    if let Some(prefix) = &args.out {
        let csv_path = prefix.with_extension("csv");
        let json_path = prefix.with_extension("json");
        if let Err(e) = std::fs::write(&csv_path, result.to_csv_string()) {
            return fail(Error::Io(e));
        }
        let json = match result.to_json_string() {
            Ok(j) => j,
            Err(e) => return fail(e),
        };
        if let Err(e) = std::fs::write(&json_path, json) {
            return fail(Error::Io(e));
        }
        println!("wrote {} and {}", csv_path.display(), json_path.display());
    }
    ExitCode::SUCCESS
}

fn load_design(args_data: &PathBuf, args_design: &PathBuf) -> Result<RegressionData, Error> {
    let table = load_table(args_data)?;
    let spec_text = std::fs::read_to_string(args_design)?;
    let spec: DesignSpec = serde_json::from_str(&spec_text)
        .map_err(|e| Error::InvalidParameter(format!("design spec: {e}")))?;
    build_design(&table, &spec)
}

fn cmd_fit(args: &FitArgs) -> ExitCode {
    let data = match load_design(&args.data, &args.design) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    println!("n = {}, p = {}", data.n(), data.p());
    let cfg = args.mcmc.config(args.seed);
    let level = args.level;
    let fit_bayes = |draws: Result<PosteriorDraws, Error>,
                     label: &str|
     -> Result<(FitSummary, Option<Vec<f64>>), Error> {
        let d = draws?;
        let s = summarize_draws(&d.alpha, level, label)?;
        Ok((s, Some(d.alpha)))
    };
    let outcome: Result<(FitSummary, Option<Vec<f64>>), Error> = match args.method.as_str() {
        "ols" => fit_ols(&data.y, &data.z, &data.x)
            .and_then(|f| summarize_ols(&f, level, "ols"))
            .map(|s| (s, None)),
        "naive" => fit_bayes(fit_naive(&data, &cfg), "naive"),
        "reparam" => fit_bayes(fit_reparam(&data, &cfg), "reparam"),
        "gprior-selection" => {
            fit_bayes(fit_selection_gprior(&data, &cfg, args.pmax), "gprior-selection")
        }
        "gprior-naive" => fit_bayes(fit_naive_gprior(&data, &cfg, args.pmax), "gprior-naive"),
        other => return input_error(format!("unknown method `{other}`")),
    };
    let (summary, chain) = match outcome {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    println!(
        "{}: estimate {:.6}, {:.1}% interval [{:.6}, {:.6}]",
        summary.method,
        summary.estimate,
        100.0 * summary.level,
        summary.lower,
        summary.upper
    );
    if let Some(path) = &args.out {
        let json = match serde_json::to_string_pretty(&summary) {
            Ok(j) => j,
            Err(e) => return input_error(format!("serialization: {e}")),
        };
        if let Err(e) = std::fs::write(path, json) {
            return fail(Error::Io(e));
        }
        println!("wrote {}", path.display());
    }
    if let Some(path) = &args.chains {
        match chain {
            Some(alpha) => {
                let mut body = String::from("alpha\n");
                for a in alpha {
                    body.push_str(&format!("{a}\n"));
                }
                if let Err(e) = std::fs::write(path, body) {
                    return fail(Error::Io(e));
                }
                println!("wrote {}", path.display());
            }
            None => {
                return input_error("--chains is only available for sampler methods".into())
            }
        }
    }
    ExitCode::SUCCESS
}

fn cmd_diagnose(args: &DiagnoseArgs) -> ExitCode {
    let data = match load_design(&args.data, &args.design) {
        Ok(d) => d,
        Err(e) => return fail(e),
    };
    let coef_text = match std::fs::read_to_string(&args.coef) {
        Ok(t) => t,
        Err(e) => return fail(Error::Io(e)),
    };
    let coef: CoefFile = match serde_json::from_str(&coef_text) {
        Ok(c) => c,
        Err(e) => return input_error(format!("coefficient file: {e}")),
    };
    let p = data.p();
    let as_vec = |name: &str, v: &Vec<f64>| -> Result<DVector<f64>, Error> {
        if v.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{name} has {} entries for p = {p}",
                v.len()
            )));
        }
        Ok(DVector::from_column_slice(v))
    };

    if let Some(beta) = &coef.beta {
        let beta = match as_vec("beta", beta) {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        match ridge_alpha_bias(&data.z, &data.x, &beta) {
            Ok(b) => println!("single-equation shrinkage bias: {b:.8}"),
            Err(e) => return fail(e),
        }
    }
    if let (Some(bc), Some(bd)) = (&coef.beta_c, &coef.beta_d) {
        let bc = match as_vec("beta_c", bc) {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        let bd = match as_vec("beta_d", bd) {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        match reparam_alpha_bias(&data.z, &data.x, &bc, &bd) {
            Ok(b) => println!("two-equation shrinkage bias: {b:.8}"),
            Err(e) => return fail(e),
        }
    }
    if coef.beta.is_none() && (coef.beta_c.is_none() || coef.beta_d.is_none()) {
        return input_error(
            "coefficient file needs `beta`, or both `beta_c` and `beta_d`".into(),
        );
    }
    match fit_ols(&data.y, &data.z, &data.x)
        .and_then(|f| residual_treatment_cov(&f.residuals, &data.z))
    {
        Ok(c) => println!("ols residual-treatment covariance: {c:.3e}"),
        Err(e) => return fail(e),
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Diagnose(args) => cmd_diagnose(args),
    }
}
