//! `linpot`: command-line driver.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a run
//! aborts, 2 when the command line or a config file is invalid.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use linpot::acceptance::{run_acceptance_with, DEFAULT_SEED};
use linpot::harness::{configure_workers, run_experiment, ExperimentConfig};
use linpot::potential::{verify_thm23, Thm23Config};
use linpot::report::{load_toml, render_lemma_table, write_json, write_run_artifacts};
use linpot::verify::{counterexample, run_lemma_suite, LemmaSuiteConfig};

#[derive(Parser, Debug)]
#[command(
    name = "linpot",
    version,
    about = "Bayesian linear bandit simulator and potential-bound checker"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Directory for JSON/CSV artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the master seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, env = "LINPOT_WORKERS")]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fuzz and exactly enumerate the matrix and potential lemmas.
    VerifyLemmas {
        /// Suite config (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Sets every per-check instance count.
        #[arg(long)]
        instances: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Exact Bayes on the three-atom prior whose posterior variance can grow.
    Counterexample {
        /// Prior parameter, 0 < p < 1/4.
        #[arg(long, default_value_t = 0.05)]
        p: f64,
        /// First observed reward, 0 or 1.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=1))]
        y1: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expected posterior-covariance potential against its bound.
    PotentialTrace {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo Bayes regret of Thompson sampling.
    RunBandit {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Runs the full acceptance matrix.
    Acceptance {
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    /// Bad input: exit 2.
    Config(String),
    /// A run aborted: exit 1.
    Runtime(String),
}

type Outcome = Result<bool, Failure>;

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::VerifyLemmas {
            config,
            instances,
            common,
        } => verify_lemmas(config.as_deref(), instances, &common),
        Command::Counterexample { p, y1, out } => cmd_counterexample(p, y1, out.as_deref()),
        Command::PotentialTrace { config, common } => potential_trace(&config, &common),
        Command::RunBandit { config, common } => run_bandit(&config, &common),
        Command::Acceptance { common } => acceptance(&common),
    }
}

fn apply_workers(common: &Common) -> Result<(), Failure> {
    match common.workers {
        Some(w) => configure_workers(w).map_err(config_err),
        None => Ok(()),
    }
}

fn verify_lemmas(config: Option<&Path>, instances: Option<usize>, common: &Common) -> Outcome {
    let mut cfg = match config {
        Some(path) => load_toml::<LemmaSuiteConfig>(path).map_err(config_err)?,
        None => LemmaSuiteConfig::default(),
    };
    if let Some(n) = instances {
        cfg = cfg.with_instances(n);
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(config_err)?;
    apply_workers(common)?;
    let checks = run_lemma_suite(&cfg).map_err(runtime_err)?;
    print!("{}", render_lemma_table(&checks));
    if let Some(dir) = &common.out {
        write_json(&dir.join("lemmas.json"), &checks).map_err(runtime_err)?;
    }
    Ok(checks.iter().all(|c| c.pass))
}

fn cmd_counterexample(p: f64, y1: u8, out: Option<&Path>) -> Outcome {
    let r = counterexample(p, y1).map_err(config_err)?;
    println!("p                  {}", r.p);
    println!("atoms              {:?}", r.atoms);
    println!("prior weights      {:?}", r.prior_weights);
    println!("gamma_1            {}", r.gamma_1);
    println!("y1                 {}", r.y1);
    println!("posterior weights  {:?}", r.posterior_weights);
    println!("gamma_2            {}", r.gamma_2);
    println!("posterior ratio    {}", r.posterior_ratio);
    println!("non-monotone: {}", r.non_monotone);
    if let (Some(uniform), Some(reference), Some(matches)) = (
        r.posterior_uniform,
        r.reference_gamma_2,
        r.matches_reference,
    ) {
        println!("posterior uniform on {{1/4, 3/4}}: {uniform}");
        println!("gamma_2 equals reference {reference}: {matches}");
    }
    if let Some(dir) = out {
        write_json(&dir.join("counterexample.json"), &r).map_err(runtime_err)?;
    }
    Ok(r.assertions_hold())
}

fn potential_trace(config: &Path, common: &Common) -> Outcome {
    let mut cfg: Thm23Config = load_toml(config).map_err(config_err)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    cfg.prior
        .validate(&linpot::Tolerances::DEFAULT)
        .and_then(|_| cfg.noise.validate())
        .map_err(config_err)?;
    apply_workers(common)?;
    let report = verify_thm23(&cfg).map_err(runtime_err)?;
    println!(
        "{} potential sum {:.6} ± {:.6} vs bound {:.6} ({}, {} replications, {} failed)",
        if report.pass { "PASS" } else { "FAIL" },
        report.mean,
        report.stderr,
        report.bound,
        if report.exact {
            "exact outcome tree"
        } else {
            "monte carlo"
        },
        report.replications,
        report.failed_replications
    );
    if let Some(dir) = &common.out {
        write_json(&dir.join("verification.json"), &report).map_err(runtime_err)?;
    }
    Ok(report.pass)
}

fn run_bandit(config: &Path, common: &Common) -> Outcome {
    let mut cfg: ExperimentConfig = load_toml(config).map_err(config_err)?;
    if let Some(seed) = common.seed {
        cfg.run.master_seed = seed;
    }
    cfg.validate().map_err(config_err)?;
    apply_workers(common)?;
    let outcome = run_experiment(&cfg).map_err(runtime_err)?;
    let s = &outcome.summary;
    let flag = |p: Option<bool>| match p {
        Some(true) => "pass",
        Some(false) => "FAIL",
        None => "off",
    };
    println!(
        "regret {:.6} ± {:.6} | eq4 bound {:.6} [{}] | remark33 bound {:.6} [{}]",
        s.final_regret.mean,
        s.final_regret.stderr,
        s.bounds.eq4_rhs,
        flag(s.pass_eq4),
        s.bounds.remark33_rhs,
        flag(s.pass_remark33)
    );
    println!(
        "potential {:.6} ± {:.6} | thm23 bound {:.6} [{}] | classical [{}]",
        s.potential_sum.mean,
        s.potential_sum.stderr,
        s.bounds.thm23_rhs,
        flag(s.pass_thm23),
        flag(s.pass_eq1)
    );
    println!(
        "{} replications, {} failed, {:.2}s",
        s.completed_replications, s.failed_replications, outcome.wall_time_secs
    );
    if let Some(dir) = &common.out {
        for path in write_run_artifacts(dir, &outcome).map_err(runtime_err)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(s.all_pass())
}

fn acceptance(common: &Common) -> Outcome {
    apply_workers(common)?;
    let seed = common.seed.unwrap_or(DEFAULT_SEED);
    let report = run_acceptance_with(seed, |r| println!("{}", r.line()));
    let passed = report.criteria.iter().filter(|c| c.pass).count();
    println!("{passed}/{} criteria passed", report.criteria.len());
    if let Some(dir) = &common.out {
        write_json(&dir.join("acceptance.json"), &report).map_err(runtime_err)?;
    }
    Ok(report.all_pass)
}
