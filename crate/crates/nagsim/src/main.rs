use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nagsim::cli::{cmd_params, cmd_run, cmd_sweep};
use nagsim::config::ExperimentConfig;
use nagsim::sweep::Execution;

#[derive(Parser)]
#[command(
    name = "nagsim",
    about = "Totally asynchronous accelerated-gradient simulator: certificates, runs, sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config file (TOML); all fields optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter mode: formula | paper | explicit.
    #[arg(long)]
    mode: Option<String>,
    /// Gate probability in (0, 1].
    #[arg(long)]
    p: Option<f64>,
    /// Schedule seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Stopping tolerance on the worst agent distance.
    #[arg(long)]
    eps: Option<f64>,
    /// Maximum number of ticks.
    #[arg(long)]
    horizon: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the dominance certificate, admissible intervals, contraction
    /// factors, and the operation budget. Exits nonzero unless the chosen
    /// parameters are strictly admissible.
    Params {
        #[command(flatten)]
        common: Common,
    },
    /// Execute one run; writes trace.csv and report.txt.
    Run {
        #[command(flatten)]
        common: Common,
        /// Algorithm: nag | hb | gd.
        #[arg(long)]
        algo: Option<String>,
        /// Also write the per-tick event log (events.jsonl).
        #[arg(long)]
        events: bool,
    },
    /// Run the configured (algo, p, seed) grid; writes runs.csv,
    /// summary.csv, and fig_distance.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Force single-threaded execution.
        #[arg(long)]
        sequential: bool,
    },
}

fn load_config(common: &Common) -> nagsim::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(mode) = &common.mode {
        config.params.mode = Some(mode.clone());
    }
    if let Some(p) = common.p {
        config.schedule.p = Some(p);
    }
    if let Some(seed) = common.seed {
        config.schedule.seed = Some(seed);
    }
    if let Some(eps) = common.eps {
        config.run.eps_stop = Some(eps);
    }
    if let Some(horizon) = common.horizon {
        config.schedule.horizon = Some(horizon);
    }
    Ok(config)
}

fn out_dir(common: &Common, config: &ExperimentConfig) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| config.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> nagsim::Result<ExitCode> {
    match cli.command {
        Command::Params { common } => {
            let config = load_config(&common)?;
            let out = cmd_params(&config)?;
            print!("{}", out.text);
            Ok(if out.strictly_feasible {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Run {
            common,
            algo,
            events,
        } => {
            let mut config = load_config(&common)?;
            if let Some(algo) = algo {
                config.run.algo = Some(algo);
            }
            if events {
                config.run.record_events = Some(true);
            }
            let dir = out_dir(&common, &config);
            let artifacts = cmd_run(&config, &dir)?;
            println!("trace: {}", artifacts.trace_csv.display());
            println!("report: {}", artifacts.report.display());
            if let Some(ev) = &artifacts.events_jsonl {
                println!("events: {}", ev.display());
            }
            println!(
                "converged: {}",
                if artifacts.converged { "yes" } else { "no" }
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { common, sequential } => {
            let config = load_config(&common)?;
            let dir = out_dir(&common, &config);
            let exec = if sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            };
            let artifacts = cmd_sweep(&config, &dir, exec)?;
            println!("runs: {}", artifacts.runs_csv.display());
            println!("summary: {}", artifacts.summary_csv.display());
            println!("fig: {}", artifacts.fig_csv.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}
