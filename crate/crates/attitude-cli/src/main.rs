//! Benchmark runner CLI. Exit codes: 0 success, 2 configuration error,
//! 3 runtime failure.

use attitude_core::harness::{
    emit_plot_data, emit_table, ensemble_summary, run_experiment, summarize, ExperimentConfig,
    HarnessError, RunResult, RunSample, StatsSummary, Verdict, ALGORITHM_IDS, OUT_DIR_ENV,
};
use attitude_core::Vec3;
use clap::{Parser, Subcommand};
use serde::Deserialize;
use std::path::PathBuf;

const EXIT_CONFIG: i32 = 2;
const EXIT_RUN: i32 = 3;

#[derive(Parser)]
#[command(
    name = "attitude",
    version,
    about = "Attitude estimation benchmark workbench"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment from a TOML config file.
    Run {
        config: PathBuf,
        /// Output directory override (beats the config and ATTITUDE_OUT_DIR).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also print one summary row per (algorithm, seed).
        #[arg(long)]
        per_seed: bool,
    },
    /// List the available algorithm ids.
    ListAlgorithms,
    /// Write a built-in experiment config (TOML) to stdout or a file.
    Preset {
        /// Preset name: "paper" (full benchmark) or "determination".
        name: String,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute summary statistics from a per-run series CSV.
    Stats {
        csv: PathBuf,
        /// Window start in seconds (default: start of the series).
        #[arg(long)]
        from: Option<f64>,
        /// Window end in seconds (default: end of the series).
        #[arg(long)]
        to: Option<f64>,
    },
}

struct CliError {
    code: i32,
    message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn run(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUN,
            message: message.into(),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Run {
            config,
            out_dir,
            per_seed,
        } => cmd_run(&config, out_dir, per_seed),
        Command::ListAlgorithms => cmd_list(),
        Command::Preset { name, out } => cmd_preset(&name, out),
        Command::Stats { csv, from, to } => cmd_stats(&csv, from, to),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn cmd_list() -> Result<(), CliError> {
    let width = ALGORITHM_IDS.iter().map(|(id, _)| id.len()).max().unwrap();
    for (id, summary) in ALGORITHM_IDS {
        println!("{id:width$}  {summary}");
    }
    Ok(())
}

fn builtin_preset(name: &str) -> Result<ExperimentConfig, CliError> {
    match name {
        "paper" => Ok(ExperimentConfig::benchmark_preset()),
        "determination" => Ok(ExperimentConfig::determination_preset()),
        other => Err(CliError::config(format!(
            "unknown preset '{other}'; available: paper, determination"
        ))),
    }
}

fn cmd_preset(name: &str, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = builtin_preset(name)?;
    let text = toml::to_string_pretty(&cfg)
        .map_err(|e| CliError::run(format!("cannot serialize preset: {e}")))?;
    match out {
        Some(path) => std::fs::write(&path, text)
            .map_err(|e| CliError::run(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn config_or_run(e: HarnessError) -> CliError {
    match e {
        HarnessError::Config(_) | HarnessError::EmptyWindow => CliError::config(e.to_string()),
        other => CliError::run(other.to_string()),
    }
}

fn cmd_run(config: &PathBuf, out_dir: Option<PathBuf>, per_seed: bool) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(config).map_err(config_or_run)?;
    cfg.validate().map_err(config_or_run)?;
    let dir = out_dir.unwrap_or_else(|| cfg.output.resolved_dir());

    let runs = run_experiment(&cfg).map_err(config_or_run)?;

    // Per-seed rows; a run that died before the window still gets a row
    // (NaN statistics, unstable verdict) so the table stays complete.
    let mut seed_rows = Vec::with_capacity(runs.len());
    for run in &runs {
        match summarize(run, cfg.stats_window) {
            Ok(s) => seed_rows.push((run.seed, s)),
            Err(HarnessError::EmptyWindow) if run.failure.is_some() => {
                seed_rows.push((
                    run.seed,
                    StatsSummary {
                        label: run.label.clone(),
                        mean_dist: f64::NAN,
                        std_dist: f64::NAN,
                        inf_dist: f64::NAN,
                        mean_alpha_deg: f64::NAN,
                        std_alpha_deg: f64::NAN,
                        inf_alpha_deg: f64::NAN,
                        verdict: Verdict::Unstable,
                    },
                ));
            }
            Err(e) => return Err(config_or_run(e)),
        }
    }

    // Ensemble rows, one per algorithm, in configured order.
    let mut ensemble = Vec::with_capacity(cfg.algorithms.len());
    for alg in &cfg.algorithms {
        let group: Vec<StatsSummary> = seed_rows
            .iter()
            .filter(|(_, s)| s.label == alg.label)
            .map(|(_, s)| s.clone())
            .collect();
        ensemble.push(ensemble_summary(&alg.label, &group).map_err(config_or_run)?);
    }
    let seed_rows: Vec<StatsSummary> = seed_rows
        .into_iter()
        .map(|(seed, mut s)| {
            s.label = format!("{} seed{seed:02}", s.label);
            s
        })
        .collect();

    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::run(format!("cannot create {}: {e}", dir.display())))?;
    let summary_path = dir.join("summary.csv");
    let file = std::fs::File::create(&summary_path)
        .map_err(|e| CliError::run(format!("cannot create {}: {e}", summary_path.display())))?;
    emit_table(&ensemble, file).map_err(config_or_run)?;
    let per_seed_path = dir.join("per_seed.csv");
    let file = std::fs::File::create(&per_seed_path)
        .map_err(|e| CliError::run(format!("cannot create {}: {e}", per_seed_path.display())))?;
    emit_table(&seed_rows, file).map_err(config_or_run)?;
    let mut written = vec![summary_path, per_seed_path];
    if cfg.output.plots {
        written.extend(emit_plot_data(&runs, &dir).map_err(config_or_run)?);
    }

    print_table(&ensemble);
    if per_seed {
        println!();
        print_table(&seed_rows);
    }
    report_events(&runs);
    println!();
    println!(
        "wrote {} files to {} (override with --out-dir or {OUT_DIR_ENV})",
        written.len(),
        dir.display()
    );
    Ok(())
}

fn print_table(rows: &[StatsSummary]) {
    println!(
        "{:<18} {:>10} {:>10} {:>10} {:>11} {:>10} {:>10}  {}",
        "label", "mean_dist", "std_dist", "inf_dist", "mean_alpha", "std_alpha", "inf_alpha",
        "verdict"
    );
    for s in rows {
        println!(
            "{:<18} {:>10.6} {:>10.6} {:>10.6} {:>11.6} {:>10.6} {:>10.6}  {}",
            s.label,
            s.mean_dist,
            s.std_dist,
            s.inf_dist,
            s.mean_alpha_deg,
            s.std_alpha_deg,
            s.inf_alpha_deg,
            s.verdict
        );
    }
}

fn report_events(runs: &[RunResult]) {
    for run in runs {
        if run.funnel_violations > 0 {
            println!(
                "note: {} seed {} left the performance funnel {} time(s); the error was clamped",
                run.label, run.seed, run.funnel_violations
            );
        }
        if let Some(failure) = &run.failure {
            println!(
                "warning: {} seed {} stopped after {} samples: {failure}",
                run.label,
                run.seed,
                run.samples.len()
            );
        }
    }
}

#[derive(Debug, Deserialize)]
struct PlotRow {
    t: f64,
    dist: f64,
    alpha_deg: f64,
    #[serde(default)]
    #[allow(dead_code)]
    xi_envelope: Option<f64>,
}

fn cmd_stats(path: &PathBuf, from: Option<f64>, to: Option<f64>) -> Result<(), CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for row in rdr.deserialize() {
        let row: PlotRow =
            row.map_err(|e| CliError::config(format!("bad row in {}: {e}", path.display())))?;
        samples.push(RunSample {
            t: row.t,
            dist: row.dist,
            alpha_deg: row.alpha_deg,
            b_tilde: Vec3::zeros(),
            sigma_hat: None,
        });
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    let run = RunResult {
        label,
        seed: 0,
        samples,
        envelope: None,
        funnel_violations: 0,
        unstable_events: 0,
        failure: None,
    };
    let window = (
        from.unwrap_or(f64::NEG_INFINITY),
        to.unwrap_or(f64::INFINITY),
    );
    let summary = summarize(&run, window).map_err(config_or_run)?;
    print_table(std::slice::from_ref(&summary));
    Ok(())
}
