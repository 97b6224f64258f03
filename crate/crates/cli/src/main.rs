mod commands;
mod config;
mod portrait;
mod reproduce;
mod runs;
mod svg;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{Ctx, CycleSource, Status};

#[derive(Parser)]
#[command(name = "rmlab", version, about = "Robbins-Monro min-max dynamics: runs, flows and diagnostics")]
struct Cli {
    /// Directory that receives every artifact.
    #[arg(long, global = true, env = "RMLAB_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Overrides the seed given in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ProblemFlags {
    /// bilinear, almost-bilinear, forsaken or gradient-well.
    #[arg(long)]
    problem: String,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Perturbation coefficient as DEGREE=VALUE; repeatable.
    #[arg(long = "coef")]
    coef: Vec<String>,
    /// Radius of the gradient-well attractor.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scheme and write its trajectory and summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate the mean dynamics.
    Flow {
        #[arg(long)]
        config: PathBuf,
    },
    /// Tabulate the Abelian integral of phi(y) = sum a_k y^k and print its root.
    Abelian {
        #[arg(long, allow_hyphen_values = true)]
        a0: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a1: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a2: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a3: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a4: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a5: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a6: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a7: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a8: Option<f64>,
        /// Also print I(h) at this radius.
        #[arg(long)]
        h: Option<f64>,
    },
    /// Detect a periodic orbit in a trajectory CSV or a flow config.
    Cycle {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        csv: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Tolerances suited to noisy runs.
        #[arg(long)]
        stochastic: bool,
        /// Fraction of the path discarded before the search.
        #[arg(long)]
        burn_in: Option<f64>,
    },
    /// Locate and classify critical points in a box.
    Critical {
        #[command(flatten)]
        problem: ProblemFlags,
        #[arg(long, default_value_t = 2.0)]
        half_width: f64,
        #[arg(long, default_value_t = 21)]
        grid: usize,
    },
    /// Run a Monte Carlo batch and write its report.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
    },
    /// Distance between a recorded run and the flow over time windows.
    AptCheck {
        #[arg(long)]
        csv: PathBuf,
        #[command(flatten)]
        problem: ProblemFlags,
        /// Window start times; repeatable.
        #[arg(long = "t", required = true)]
        times: Vec<f64>,
        #[arg(long)]
        window: f64,
        #[arg(long)]
        h_int: Option<f64>,
    },
    /// Render a phase portrait to SVG.
    Portrait {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a bundled experiment (or `all`) and check it.
    Reproduce { name: String },
    /// Print a simulate config with every default spelled out.
    ReferenceConfig,
}

fn dispatch(cli: Cli) -> anyhow::Result<Status> {
    let ctx = Ctx {
        out_dir: cli.out_dir,
        seed: cli.seed,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Simulate { config } => commands::simulate(&ctx, &config),
        Command::Flow { config } => commands::flow(&ctx, &config),
        Command::Abelian {
            a0,
            a1,
            a2,
            a3,
            a4,
            a5,
            a6,
            a7,
            a8,
            h,
        } => {
            let coefficients: BTreeMap<u32, f64> = [a0, a1, a2, a3, a4, a5, a6, a7, a8]
                .into_iter()
                .enumerate()
                .filter_map(|(k, a)| a.map(|a| (k as u32, a)))
                .collect();
            commands::abelian(&coefficients, h)
        }
        Command::Cycle {
            csv,
            config,
            stochastic,
            burn_in,
        } => {
            let source = match (&csv, &config) {
                (Some(p), _) => CycleSource::Csv(p),
                (None, Some(p)) => CycleSource::Flow(p),
                (None, None) => anyhow::bail!("give --csv or --config"),
            };
            commands::cycle(&ctx, source, stochastic, burn_in)
        }
        Command::Critical {
            problem,
            half_width,
            grid,
        } => {
            let spec = commands::problem_from_flags(&problem.problem, problem.epsilon, &problem.coef, problem.radius)?;
            commands::critical(&spec, half_width, grid)
        }
        Command::Montecarlo { config } => commands::montecarlo(&ctx, &config),
        Command::AptCheck {
            csv,
            problem,
            times,
            window,
            h_int,
        } => {
            let spec = commands::problem_from_flags(&problem.problem, problem.epsilon, &problem.coef, problem.radius)?;
            commands::apt_check(&spec, &csv, &times, window, h_int)
        }
        Command::Portrait { config } => commands::portrait(&ctx, &config),
        Command::Reproduce { name } => reproduce::reproduce(&ctx, &name),
        Command::ReferenceConfig => {
            print!("{}", config::reference_config());
            Ok(Status::Ok)
        }
    }
}

fn is_divergence(err: &anyhow::Error) -> bool {
    err.chain()
        .any(|e| matches!(e.downcast_ref::<rmlab_core::Error>(), Some(rmlab_core::Error::Diverged(_))))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ChecksFailed) => ExitCode::from(3),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_divergence(&err) { 2 } else { 1 })
        }
    }
}
