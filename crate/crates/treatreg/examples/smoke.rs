//! Quick end-to-end run of a few replications per scenario; prints the
//! aggregate table and wall time. Useful for eyeballing tuning before
//! launching a full study.

use std::time::Instant;

use treatreg::samplers::MCMCConfig;
use treatreg::simbench::{run_study, Method, Scenario, VardecScenario};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(String::as_str).unwrap_or("wang1");
    let r: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    let threads: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(8);

    let cfg = MCMCConfig { burn_in: 2000, draws: 5000, ..Default::default() };
    let (scenario, methods): (Scenario, Vec<Method>) = match which {
        "wang1" => (
            Scenario::Wang1,
            vec![Method::Ols, Method::OracleOls, Method::Naive, Method::Reparam],
        ),
        "wang2" => (
            Scenario::Wang2,
            vec![Method::Ols, Method::OracleOls, Method::Naive, Method::Reparam],
        ),
        "vardec" => (
            Scenario::Vardec(VardecScenario {
                n: 100,
                p: 30,
                k: 3,
                kappa2: 0.05,
                phi2: 0.7,
                rho2: 0.9,
            }),
            vec![Method::Ols, Method::OracleOls, Method::Naive, Method::Reparam],
        ),
        "vardec4" => (
            Scenario::Vardec(VardecScenario {
                n: 50,
                p: 30,
                k: 3,
                kappa2: 0.05,
                phi2: 0.05,
                rho2: 0.7,
            }),
            vec![Method::Ols, Method::Naive, Method::Reparam],
        ),
        "dense10" => (
            Scenario::Vardec(VardecScenario {
                n: 100,
                p: 30,
                k: 10,
                kappa2: 0.05,
                phi2: 0.7,
                rho2: 0.9,
            }),
            vec![Method::Ols, Method::Naive, Method::Reparam],
        ),
        "dense30" => (
            Scenario::Vardec(VardecScenario {
                n: 100,
                p: 30,
                k: 30,
                kappa2: 0.05,
                phi2: 0.7,
                rho2: 0.9,
            }),
            vec![Method::Ols, Method::Naive, Method::Reparam],
        ),
        "pgtn" => (
            Scenario::Pgtn,
            vec![
                Method::GpriorSelection { p_max: 3 },
                Method::GpriorNaive { p_max: 3 },
            ],
        ),
        other => {
            eprintln!("unknown scenario {other}");
            std::process::exit(2);
        }
    };

    let start = Instant::now();
    let res = run_study(&scenario, &methods, r, 20260823, &cfg, threads).expect("study");
    let elapsed = start.elapsed();
    print!("{}", res.to_table_string());
    println!("elapsed: {:.1?} ({threads} threads, R = {r})", elapsed);
}
