use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dtc_oco::harness::{self, ExperimentConfig, RunOptions};
use dtc_oco::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "dtc-oco", version, about = "Delay-tolerant constrained online convex optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML). Also accepted positionally by `run` and `constants`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for trials (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log every feedback read and fail on any read before its release slot.
    #[arg(long, global = true)]
    debug_timing_audit: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write traces, summary and plots.
    Run {
        #[arg(value_name = "CONFIG")]
        path: Option<PathBuf>,
    },
    /// Redraw charts from the trace CSVs in a directory.
    Plot { dir: PathBuf },
    /// Re-check queue inequalities and bounds from stored run files.
    Verify { dir: PathBuf },
    /// Print D, β, G, ε and R for each configured environment.
    Constants {
        #[arg(value_name = "CONFIG")]
        path: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => ExitCode::from(EXIT_CONFIG),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn config_path(positional: &Option<PathBuf>, flag: &Option<PathBuf>) -> Result<PathBuf, Error> {
    positional.clone().or_else(|| flag.clone()).ok_or_else(|| Error::Config {
        field: "--config".into(),
        message: "no config file given".into(),
    })
}

fn load(path: &Path, out: &Option<PathBuf>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(dir) = out {
        cfg.output.dir = dir.clone();
    }
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

fn dispatch(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Run { path } => {
            let cfg = load(&config_path(path, &cli.config)?, &cli.out)?;
            let opts = RunOptions {
                timing_audit: cli.debug_timing_audit,
            };
            let summary = harness::run_experiment(&cfg, opts)?;
            println!("env\tmode\ttau\tseed\tavg_cost\tavg_violation\tregret_per_slot\tlemmas\tbounds\tunconverged");
            for r in &summary.runs {
                let t = r.horizon() as f64;
                let lemmas = match &r.lemma {
                    Some(l) if l.lemma1_holds() && l.lemma2_holds() => "ok",
                    Some(_) => "FAIL",
                    None => "-",
                };
                let violated = r.bounds.iter().filter(|b| b.is_violation()).count() + r.queue_bound_failures.len();
                let bounds = if r.bounds.is_empty() {
                    "-".to_string()
                } else if violated == 0 {
                    "ok".to_string()
                } else {
                    format!("FAIL({violated})")
                };
                println!(
                    "{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}",
                    r.env.label(),
                    r.mode.label(),
                    r.tau,
                    r.seed,
                    r.averages.final_cost(),
                    r.averages.final_violation(),
                    fmt_opt(r.dynamic_regret.map(|v| v / t)),
                    lemmas,
                    bounds,
                    r.unconverged_slots,
                );
                if let Some(a) = &r.audit {
                    if !a.is_clean() {
                        println!("  timing audit: {} of {} reads came early", a.early_reads, a.reads);
                    }
                }
            }
            println!("wrote {} files under {}", summary.files.len(), cfg.output.dir.display());
            Ok(if summary.has_violation() {
                ExitCode::from(EXIT_VIOLATION)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Plot { dir } => {
            let files = harness::emit_plots(dir)?;
            for f in &files {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { dir } => {
            let report = harness::verify_dir(dir)?;
            for r in &report.runs {
                let status = if r.has_violation() { "FAIL" } else { "ok" };
                println!(
                    "{status}\t{}\tslots={}\tlemma1={}\tlemma2={}\tbound_violations={}\tqueue_failures={}\tearly_reads={}",
                    r.path.display(),
                    r.lemma.slots_checked,
                    r.lemma.lemma1_holds(),
                    r.lemma.lemma2_holds(),
                    r.bounds.iter().filter(|b| b.is_violation()).count(),
                    r.queue_bound_failures.len(),
                    r.early_reads,
                );
            }
            Ok(if report.has_violation() {
                ExitCode::from(EXIT_VIOLATION)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Constants { path } => {
            let cfg = load(&config_path(path, &cli.config)?, &cli.out)?;
            for (spec, c) in harness::environment_constants(&cfg)? {
                println!(
                    "{} J={} K={} seed={} T={}: D={:e} beta={} G={} epsilon={} R={}",
                    spec.kind.label(),
                    spec.j,
                    spec.k,
                    spec.seed,
                    cfg.run.horizon,
                    c.d,
                    c.beta,
                    c.g,
                    c.epsilon.map_or_else(|| "none".to_string(), |e| e.to_string()),
                    c.r
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
