use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hetbandit_core::eluder::{eluder_dimension, EluderMode, EXACT_ACTION_LIMIT};
use hetbandit_core::erm::FiniteFunctionClass;
use hetbandit_sim::output::{self, REPORT_FILE, TRACES_FILE};
use hetbandit_sim::{run_experiment, AggregateReport, ExperimentConfig, Result, SimError};
use serde_json::json;

#[derive(Parser)]
#[command(name = "hetbandit", version, about = "Multi-level bandit experiments under heteroscedastic noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Exact search when the class has at most twelve actions, greedy otherwise.
    Auto,
    Exact,
    Greedy,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces.csv and report.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Use seeds 0..N instead of the configured list.
        #[arg(long)]
        seeds: Option<u64>,
        /// Output directory; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Eluder dimension of a finite class over all of its actions.
    Eluder {
        #[arg(long)]
        class: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
    },
    /// Aggregate every CSV trace file in a directory.
    Report {
        #[arg(long)]
        traces: PathBuf,
    },
}

/// Writes a line to stdout; a closed pipe (e.g. `| head`) ends output quietly.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{line}") {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: writing to stdout: {e}");
        }
    }
}

fn run(config: PathBuf, seeds: Option<u64>, out: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let mut config = ExperimentConfig::from_path(&config)?;
    if let Some(n) = seeds {
        config.seeds = (0..n).collect();
        config.validate()?;
    }
    let out = out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("hetbandit-out"));
    std::fs::create_dir_all(&out).map_err(|e| SimError::io(&out, e))?;

    let outcome = run_experiment(&config, workers)?;
    output::emit_csv(&outcome.traces, &out.join(TRACES_FILE))?;
    let report = AggregateReport::from_outcome(&outcome).map_err(|m| SimError::config("traces", m))?;
    output::write_report(&report, &out.join(REPORT_FILE))?;

    let s = &report.final_regret;
    emit(&format!(
        "{}: {} seeds ({} failed), T = {}, sigma_bar = {:.4e}, L = {}",
        config.algorithm,
        outcome.traces.len(),
        outcome.failures.len(),
        config.horizon,
        outcome.params.sigma_bar,
        outcome.params.num_levels
    ));
    emit(&format!(
        "final regret: mean {:.4} (95% CI {:.4} .. {:.4}), median {:.4}",
        s.mean, s.ci95.0, s.ci95.1, s.median
    ));
    if let Some(c) = &report.coverage {
        emit(&format!(
            "coverage violations: {} of {} rounds, {} of {} seeds",
            c.rounds.count, c.rounds.trials, c.any_round.count, c.any_round.trials
        ));
    }
    emit(&format!("wrote {}", out.display()));
    Ok(())
}

fn eluder(class: PathBuf, eps: f64, mode: ModeArg) -> Result<()> {
    let text = std::fs::read_to_string(&class).map_err(|e| SimError::io(&class, e))?;
    let class = FiniteFunctionClass::from_json_str(&text)?;
    let actions: Vec<usize> = (0..class.num_actions()).collect();
    let mode = match mode {
        ModeArg::Exact => EluderMode::Exact,
        ModeArg::Greedy => EluderMode::GreedyLowerBound,
        ModeArg::Auto if actions.len() <= EXACT_ACTION_LIMIT => EluderMode::Exact,
        ModeArg::Auto => EluderMode::GreedyLowerBound,
    };
    let result = eluder_dimension(&class, &actions, eps, mode)?;
    let sequence: Vec<_> = result.sequence.iter().map(|&a| &class.actions()[a]).collect();
    emit(&json!({"dimension": result.dimension, "sequence": sequence, "mode": result.mode}).to_string());
    Ok(())
}

fn report(dir: PathBuf) -> Result<()> {
    let mut rows = Vec::new();
    for file in output::trace_files(&dir)? {
        rows.extend(output::read_csv(&file)?);
    }
    let report = AggregateReport::from_rows(&rows).map_err(|m| SimError::config("traces", m))?;
    emit(&serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seeds,
            out,
            workers,
        } => run(config, seeds, out, workers),
        Command::Eluder { class, eps, mode } => eluder(class, eps, mode),
        Command::Report { traces } => report(traces),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
