//! `metatutor`: corpus generation, model training, experiment runs and the
//! statistics used to read them.
//!
//! Exit codes: 0 on success, 1 when an input fails validation (bad flags,
//! malformed files, rejected configs), 2 when a file cannot be read or
//! written.

mod error;
mod files;
mod stats_cmd;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use metatutor_core::deepq::{train, Policy, TrainConfig};
use metatutor_core::domain::parse_corpus;
use metatutor_core::exec;
use metatutor_core::forest::{oob_accuracy, train_forest, Forest, ForestConfig, LabeledSample};
use metatutor_core::harness::{
    render_report, run_experiment, simulate_logged, CohortConfig, CorpusConfig, Format, Protocol,
};
use metatutor_core::sim::{fit_switch_distribution, EmpiricalDistribution};
use serde::Deserialize;

use crate::error::CliError;
use crate::files::{read_config, read_numbers, read_text, write_text};

#[derive(Debug, Parser)]
#[command(
    name = "metatutor",
    version,
    about = "Metacognitive intervention experiments on a simulated logic tutor"
)]
struct Cli {
    /// Worker threads for data-parallel steps (default: all cores). Outputs do
    /// not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a logged training corpus (JSONL, one record per training problem).
    GenCorpus(GenCorpusArgs),
    /// Fit the nudge-timing distribution from recorded switch times.
    FitSwitchDist(FitSwitchArgs),
    /// Train an intervention policy with offline Double-DQN.
    TrainPolicy(TrainPolicyArgs),
    /// Train the early group-prediction forest.
    TrainRfc(TrainRfcArgs),
    /// Run the static (exp1) or adaptive (exp2) protocol and report the results.
    RunExp(RunExpArgs),
    /// Group comparisons and learning gains.
    Stats(stats_cmd::StatsArgs),
}

#[derive(Debug, Args)]
struct GenCorpusArgs {
    #[arg(long)]
    students: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// TOML corpus config; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write each student's early-prediction features and true group (JSONL).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Also write the unprompted switch times, one per line.
    #[arg(long)]
    switch_times: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitSwitchArgs {
    /// Switch times in seconds, one per line.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainPolicyArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// TOML training config; omitted keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write the per-epoch loss curve and split sizes as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Save the network after the last epoch instead of the lowest-loss one.
    #[arg(long)]
    last_epoch: bool,
}

#[derive(Debug, Args)]
struct TrainRfcArgs {
    /// Labelled samples (JSONL), as written by `gen-corpus --labels`.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunExpArgs {
    /// exp1 (static plan) or exp2 (adaptive policy).
    #[arg(long)]
    protocol: Protocol,
    /// TOML cohort config; omitted keys keep their defaults.
    #[arg(long)]
    cohort: Option<PathBuf>,
    #[arg(long)]
    forest: PathBuf,
    /// Required for exp2.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Fitted switch-time distribution for nudge timing (JSON).
    #[arg(long)]
    switch_dist: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "text")]
    format: Format,
    /// Also write one JSON line per student with their slot-by-slot trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

/// Forest training file: the seed plus the forest hyperparameters.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RfcConfig {
    seed: u64,
    forest: ForestConfig,
}

fn gen_corpus(a: &GenCorpusArgs) -> Result<(), CliError> {
    if a.students == 0 {
        return Err(CliError::Invalid("--students must be at least 1".into()));
    }
    let config: CorpusConfig = read_config(a.config.as_deref())?;
    let g = simulate_logged(a.students, a.seed, &config)?;
    write_text(&a.out, &g.corpus.to_jsonl())?;
    if let Some(path) = &a.labels {
        let mut s = String::new();
        for l in &g.labels {
            s.push_str(&serde_json::to_string(l).expect("samples serialize"));
            s.push('\n');
        }
        write_text(path, &s)?;
    }
    if let Some(path) = &a.switch_times {
        let s: String = g.switch_times.iter().map(|t| format!("{t}\n")).collect();
        write_text(path, &s)?;
    }
    eprintln!(
        "wrote {} records for {} students to {}",
        g.corpus.len(),
        g.corpus.n_students(),
        a.out.display()
    );
    Ok(())
}

fn fit_switch(a: &FitSwitchArgs) -> Result<(), CliError> {
    let times = read_numbers(&a.input)?;
    let d = fit_switch_distribution(&times)?;
    write_text(
        &a.out,
        &(serde_json::to_string(&d).expect("floats serialize") + "\n"),
    )?;
    println!(
        "n {}  mean {:.3}  min {:.3}  max {:.3}",
        d.values().len(),
        d.mean(),
        d.min(),
        d.max()
    );
    Ok(())
}

fn train_policy(a: &TrainPolicyArgs) -> Result<(), CliError> {
    let config: TrainConfig = read_config(a.config.as_deref())?;
    let corpus =
        parse_corpus(&read_text(&a.corpus)?).map_err(|e| CliError::in_file(&a.corpus, e))?;
    let out = train(&corpus, &config)?;
    let policy = if a.last_epoch {
        &out.policy
    } else {
        &out.best_policy
    };
    write_text(&a.out, &policy.to_json())?;
    if let Some(path) = &a.report {
        let json = serde_json::to_string_pretty(&out.report).expect("report serializes");
        write_text(path, &(json + "\n"))?;
    }
    let r = &out.report;
    match (r.best_epoch, r.epochs.last()) {
        (Some(best), Some(last)) => eprintln!(
            "{} updates over {} epochs; lowest loss at epoch {best}; final train mse {:.4}",
            r.updates, last.epoch, last.train_mse
        ),
        _ => eprintln!("no epochs run; wrote the initial network"),
    }
    Ok(())
}

fn read_labeled(path: &Path) -> Result<Vec<LabeledSample>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s: LabeledSample = serde_json::from_str(line)
            .map_err(|e| CliError::Invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(s);
    }
    Ok(out)
}

fn train_rfc(a: &TrainRfcArgs) -> Result<(), CliError> {
    let config: RfcConfig = read_config(a.config.as_deref())?;
    let data = read_labeled(&a.corpus)?;
    let forest = train_forest(&data, &config.forest, config.seed)?;
    write_text(&a.out, &forest.to_json())?;
    match oob_accuracy(&forest, &data) {
        Ok(acc) => eprintln!("{} trees; out-of-bag accuracy {acc:.4}", forest.n_trees()),
        Err(e) => eprintln!(
            "{} trees; out-of-bag accuracy unavailable: {e}",
            forest.n_trees()
        ),
    }
    Ok(())
}

fn run_exp(a: &RunExpArgs) -> Result<(), CliError> {
    let cohort: CohortConfig = read_config(a.cohort.as_deref())?;
    let forest = Forest::load(read_text(&a.forest)?.as_bytes())
        .map_err(|e| CliError::in_file(&a.forest, e))?;
    let policy = match &a.policy {
        Some(p) => {
            Some(Policy::load(read_text(p)?.as_bytes()).map_err(|e| CliError::in_file(p, e))?)
        }
        None => None,
    };
    let dist = match &a.switch_dist {
        Some(p) => Some(
            serde_json::from_str::<EmpiricalDistribution>(&read_text(p)?)
                .map_err(|e| CliError::in_file(p, e))?,
        ),
        None => None,
    };
    let table = run_experiment(
        a.protocol,
        &cohort,
        dist.as_ref(),
        policy.as_ref(),
        &forest,
        a.seed,
    )?;
    write_text(&a.out, &render_report(&table, a.format))?;
    if let Some(path) = &a.trace {
        let mut s = String::new();
        for st in &table.students {
            s.push_str(&serde_json::to_string(st).expect("results serialize"));
            s.push('\n');
        }
        write_text(path, &s)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GenCorpus(a) => gen_corpus(a),
        Command::FitSwitchDist(a) => fit_switch(a),
        Command::TrainPolicy(a) => train_policy(a),
        Command::TrainRfc(a) => train_rfc(a),
        Command::RunExp(a) => run_exp(a),
        Command::Stats(a) => stats_cmd::run(a),
    }
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
    if cli.threads == Some(0) {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(1);
    }
    match exec::with_workers(cli.threads, || run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
