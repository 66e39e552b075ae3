//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::harness::experiments;
use crate::harness::report::{summarize, ExperimentReport};

#[derive(Debug, Parser)]
#[command(name = "localwick", version, about = "Monte-Carlo and closed-form experiments for local-time Wick functionals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config file (flat keys, see README).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// `key=value` overrides applied after the config file.
    #[arg(long = "override", global = true, num_args = 1.., value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory for report.json and tables/.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed; overrides the config value.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "LOCALWICK_THREADS")]
    pub threads: Option<usize>,
    /// Only print the verdict line.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// MC mean of G_{eps,a} against the quadrature mean.
    Mean,
    /// E[Psi_k G_{eps,a}] against the closed-form Laplace transform.
    Laplace,
    /// Sign-case integration by parts: closed forms, MC, reflected form.
    Ibp,
    /// Reflected form X = |B - a|, l^0 = 2 L^a.
    Rbm,
    /// Local-time-free quadratic functional.
    Quadratic,
    /// ||P_t G_eps||^2 decay, Mehler oracle, exponential convergence.
    Decay,
    /// Exponential convergence of P_t Psi_k.
    Expc,
    /// Local time estimators.
    LocaltimeBench,
    /// Full acceptance suite.
    All,
}

fn run_command(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    Ok(match cmd {
        Command::Mean => vec![experiments::run_mean_experiment(cfg)?],
        Command::Laplace => vec![experiments::run_laplace_experiment(cfg)?],
        Command::Ibp => vec![experiments::run_ibp_experiment(cfg)?],
        Command::Rbm => vec![experiments::run_rbm_experiment(cfg)?],
        Command::Quadratic => vec![experiments::run_quadratic_experiment(cfg)?],
        Command::Decay => vec![experiments::run_decay_study(cfg)?],
        Command::Expc => vec![experiments::run_expc_experiment(cfg)?],
        Command::LocaltimeBench => vec![experiments::run_localtime_bench(cfg)?],
        Command::All => experiments::run_suite(cfg)?.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Parses `args` and runs; returns 0 when every verdict passes, 1 on a failed
/// verdict or runtime error, 2 on a usage or config error.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(p) = &cli.config {
        if !p.is_file() {
            eprintln!("error: config file {} not found\n", p.display());
            eprintln!("{}", <Cli as clap::CommandFactory>::command().render_usage());
            return ExitCode::from(2);
        }
    }
    let mut cfg = match ExperimentConfig::load(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let reports = match run_command(cli.command, &cfg) {
        Ok(r) => r,
        Err(e @ crate::Error::Config(_)) | Err(e @ crate::Error::InvalidParameter { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("experiment error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = summarize(&reports, &cli.out) {
        eprintln!("error writing {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    let pass = reports.iter().all(|r| r.verdict);
    for r in &reports {
        let lines = r.summary_lines();
        if cli.quiet {
            println!("{}", lines[0]);
        } else {
            for l in lines {
                println!("{l}");
            }
        }
    }
    println!("{} ({})", if pass { "PASS" } else { "FAIL" }, cli.out.join("report.json").display());
    ExitCode::from(if pass { 0 } else { 1 })
}
