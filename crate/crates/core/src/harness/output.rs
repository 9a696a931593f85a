//! Trace CSVs, the summary CSV and per-run JSON.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, OutputFormat};
use super::{plot, RunFile, RunOutcome};
use crate::error::{Error, Result};
use crate::netenv::EnvSpec;

pub const TRACE_HEADER: [&str; 7] = ["slot", "cost", "violation_sum", "queue_norm", "avg_cost", "avg_violation", "bench_cost"];

/// One row of `summary.csv`: a series (environment, mode, delay) at one
/// probe horizon, aggregated over trials.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub env: String,
    pub mode: String,
    pub tau: usize,
    pub horizon: usize,
    pub trials: usize,
    pub avg_cost_mean: f64,
    pub avg_cost_std: Option<f64>,
    pub avg_violation_mean: f64,
    pub avg_violation_std: Option<f64>,
    /// `RE_d(t)/t` over the run's prefix.
    pub regret_per_slot_mean: Option<f64>,
    pub regret_per_slot_std: Option<f64>,
    pub bench_avg_cost_mean: Option<f64>,
}

/// Mean and sample standard deviation (`None` below two samples).
fn mean_std(v: &[f64]) -> (f64, Option<f64>) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.len() > 1).then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

pub fn summary_rows(config: &ExperimentConfig, runs: &[RunOutcome]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for env in &config.environment.kinds {
        for mode in &config.algorithm.modes {
            for tau in &config.run.taus {
                let group: Vec<&RunOutcome> = runs.iter().filter(|r| r.env == *env && r.mode == *mode && r.tau == *tau).collect();
                if group.is_empty() {
                    continue;
                }
                let prefixes: Vec<Option<Vec<f64>>> = group.iter().map(|r| r.regret_prefix()).collect();
                for h in config.probe_horizons() {
                    let i = h - 1;
                    let costs: Vec<f64> = group.iter().map(|r| r.averages.avg_cost[i]).collect();
                    let vios: Vec<f64> = group.iter().map(|r| r.averages.avg_violation[i]).collect();
                    let (cm, cs) = mean_std(&costs);
                    let (vm, vs) = mean_std(&vios);
                    let regrets: Option<Vec<f64>> = prefixes.iter().map(|p| p.as_ref().map(|p| p[i] / h as f64)).collect();
                    let (rm, rs) = match &regrets {
                        Some(r) => {
                            let (m, s) = mean_std(r);
                            (Some(m), s)
                        }
                        None => (None, None),
                    };
                    let bench: Option<Vec<f64>> = group
                        .iter()
                        .map(|r| r.bench_costs.as_ref().map(|b| b[..h].iter().sum::<f64>() / h as f64))
                        .collect();
                    rows.push(SummaryRow {
                        env: env.label().to_string(),
                        mode: mode.label().to_string(),
                        tau: *tau,
                        horizon: h,
                        trials: group.len(),
                        avg_cost_mean: cm,
                        avg_cost_std: cs,
                        avg_violation_mean: vm,
                        avg_violation_std: vs,
                        regret_per_slot_mean: rm,
                        regret_per_slot_std: rs,
                        bench_avg_cost_mean: bench.map(|b| mean_std(&b).0),
                    });
                }
            }
        }
    }
    rows
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::io(path, std::io::Error::other(e))
}

/// Shortest round-trip text, so identical runs give identical bytes.
fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_trace_csv(path: &Path, run: &RunOutcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(TRACE_HEADER).map_err(|e| csv_error(path, e))?;
    for i in 0..run.horizon() {
        let bench = run.bench_costs.as_ref().map_or(String::new(), |b| num(b[i]));
        w.write_record([
            (i + 1).to_string(),
            num(run.costs[i]),
            num(run.violation_sums[i]),
            num(run.queue_norms[i]),
            num(run.averages.avg_cost[i]),
            num(run.averages.avg_violation[i]),
            bench,
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    if rows.is_empty() {
        w.write_record(["env"]).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_run_json(path: &Path, config: &ExperimentConfig, run: &RunOutcome) -> Result<()> {
    let Some(trace) = &run.trace else { return Ok(()) };
    let file = RunFile {
        env: EnvSpec {
            kind: run.env,
            j: config.environment.j,
            k: config.environment.k,
            seed: run.seed,
        },
        seed: run.seed,
        constants: run.constants.clone(),
        variations: run.variations,
        dynamic_regret: run.dynamic_regret,
        static_regret: run.static_regret,
        trace: trace.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Write every requested output; returns the paths in write order.
pub fn write_all(config: &ExperimentConfig, runs: &[RunOutcome], rows: &[SummaryRow]) -> Result<Vec<PathBuf>> {
    let root = &config.output.dir;
    create_dir(root)?;
    let mut files = Vec::new();
    for run in runs {
        let dir = root.join(run.relative_dir());
        create_dir(&dir)?;
        if config.wants(OutputFormat::Csv) || config.wants(OutputFormat::Svg) {
            let p = dir.join(run.trace_file_name());
            write_trace_csv(&p, run)?;
            files.push(p);
        }
        if config.wants(OutputFormat::Json) {
            let p = dir.join(run.run_file_name());
            write_run_json(&p, config, run)?;
            files.push(p);
        }
    }
    let p = root.join("summary.csv");
    write_summary_csv(&p, rows)?;
    files.push(p);
    if config.wants(OutputFormat::Svg) {
        files.extend(plot::emit_plots(root)?);
    }
    Ok(files)
}
