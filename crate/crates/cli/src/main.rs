use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use ttman::completion::{lanczos_estimate, CompletionProblem, LanczosConfig};
use ttman::harness::{check_suite, emit_plot_data, run_experiment, CheckLevel, ExperimentConfig};
use ttman::tt::io::read_tt;
use ttman::{SparseTensor, TtPoint};

/// Riemannian optimization on fixed TT-rank manifolds.
#[derive(Parser)]
#[command(name = "ttman", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a tensor-completion experiment described by a JSON config.
    Complete {
        #[arg(long)]
        config: PathBuf,
        /// Trials run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle/invariant verification suite.
    Check {
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
    },
    /// Estimate the Hessian condition number of a completion problem at a TT tensor.
    Condest {
        /// TT tensor (TTZ1 format).
        #[arg(long)]
        tensor: PathBuf,
        /// Observed entries (SPT1 format).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 300)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Turn a run directory into plot-ready CSV files.
    Plotdata { run_dir: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Fast,
    Full,
}

enum Outcome {
    Ok,
    ChecksFailed,
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Complete { config, jobs, out } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let summary = run_experiment(&cfg, jobs)?;
            println!(
                "{} trials, dim {}, |Omega| {}, sampling ratio {:.4}, written to {}",
                summary.trials.len(),
                summary.manifold_dim,
                summary.omega,
                summary.sampling_ratio,
                cfg.output_dir.display()
            );
            for t in &summary.trials {
                for r in &t.runs {
                    println!(
                        "trial {:2} {:<5} iters {:4} cost {:.3e} test {:.3e} {} ({})",
                        t.trial,
                        r.algo.name(),
                        r.iterations,
                        r.final_cost,
                        r.final_test_cost.unwrap_or(f64::NAN),
                        if r.converged { "converged" } else { "not converged" },
                        r.stop
                    );
                }
            }
            Ok(Outcome::Ok)
        }
        Command::Check { level } => {
            let level = match level {
                Level::Fast => CheckLevel::Fast,
                Level::Full => CheckLevel::Full,
            };
            let report = check_suite(level);
            println!("{report}");
            Ok(if report.all_passed() { Outcome::Ok } else { Outcome::ChecksFailed })
        }
        Command::Condest { tensor, data, max_iter, seed } => {
            let x = read_tt(&tensor).with_context(|| format!("reading {}", tensor.display()))?;
            let data = SparseTensor::load(&data).with_context(|| format!("reading {}", data.display()))?;
            let problem = CompletionProblem::new(data, None)?;
            let point = TtPoint::new(&x)?;
            let est = lanczos_estimate(&point, &problem, &LanczosConfig { max_iter, seed, ..Default::default() })?;
            println!("{}", serde_json::to_string_pretty(&est)?);
            if !est.converged {
                log::warn!("Lanczos did not converge in {} iterations", est.iterations);
            }
            Ok(Outcome::Ok)
        }
        Command::Plotdata { run_dir } => {
            let out = emit_plot_data(&run_dir)?;
            for (metric, path, series) in out.files {
                println!("{metric}: {series} series -> {}", path.display());
            }
            Ok(Outcome::Ok)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(2),
        Err(e) => {
            // io errors repeat their source in their own message
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg += if msg.is_empty() { "" } else { ": " };
                    msg += &cause;
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
