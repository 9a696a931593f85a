//! Experiment driver: builds environments, runs the algorithm for every
//! (environment, mode, delay, trial), and writes traces, a summary and plots.

mod config;
mod output;
mod plot;
mod verify;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{AlgorithmBlock, EnvironmentBlock, ExperimentConfig, InitialPoint, OutputBlock, OutputFormat, RunBlock};
pub use output::{summary_rows, SummaryRow, TRACE_HEADER};
pub use plot::{emit_plots, render_chart, Chart, Series};
pub use verify::{verify_dir, verify_run, RunCheck, VerifyReport};

use crate::algorithm::{pick_step_sizes, run_online, DtcOco, RegularizationMode, StepSizes};
use crate::benchmarks::{BenchmarkOptions, BenchmarkTrace};
use crate::delay::TimingAudit;
use crate::error::Result;
use crate::linalg;
use crate::metrics::{
    benchmark_costs, dynamic_regret, lemma_checks, queue_bound, queue_bound_failures, static_regret, theorem_bounds,
    time_averages, variation_measures, BoundReport, LemmaReport, MeasuredRun, RunTrace, TimeAverages, Variations,
    LEMMA_TOL,
};
use crate::netenv::{EnvSpec, LteConstants, NetworkEnv, ProcessKind};
use crate::problem::{BoxSet, DecisionVector, ProblemConstants};

/// Samples for the inner maximum of the constraint variation on non-affine
/// constraints. The network constraints are affine, so this only matters for
/// custom environments.
const VARIATION_SAMPLES: usize = 512;

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Log every delay-buffer read and check none came early.
    pub timing_audit: bool,
}

/// Everything one (environment, mode, delay, seed) run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub env: ProcessKind,
    pub mode: RegularizationMode,
    pub tau: usize,
    pub seed: u64,
    /// Before the mode drops an anchor.
    pub step_sizes: StepSizes,
    pub constants: ProblemConstants,
    pub averages: TimeAverages,
    pub costs: Vec<f64>,
    pub violation_sums: Vec<f64>,
    pub queue_norms: Vec<f64>,
    pub bench_costs: Option<Vec<f64>>,
    pub dynamic_regret: Option<f64>,
    pub static_regret: Option<f64>,
    pub variations: Option<Variations>,
    pub lemma: Option<LemmaReport>,
    pub bounds: Vec<BoundReport>,
    pub queue_bound: Option<f64>,
    pub queue_bound_failures: Vec<usize>,
    pub unconverged_slots: usize,
    pub benchmark_flagged: usize,
    pub audit: Option<TimingAudit>,
    /// Slim trace (no decisions) kept for JSON output.
    pub trace: Option<RunTrace>,
}

impl RunOutcome {
    pub fn horizon(&self) -> usize {
        self.costs.len()
    }

    /// `RE_d(t)` for `t = 1..=T`, when a dynamic benchmark was computed.
    pub fn regret_prefix(&self) -> Option<Vec<f64>> {
        let b = self.bench_costs.as_ref()?;
        let mut acc = 0.0;
        Some(
            self.costs
                .iter()
                .zip(b)
                .map(|(f, fb)| {
                    acc += f - fb;
                    acc
                })
                .collect(),
        )
    }

    /// Lemma failures, bound violations with hypotheses met, queue-bound
    /// failures, or early reads.
    pub fn has_violation(&self) -> bool {
        self.lemma.as_ref().is_some_and(|l| !(l.lemma1_holds() && l.lemma2_holds()))
            || self.bounds.iter().any(|b| b.is_violation())
            || (!self.queue_bound_failures.is_empty() && self.step_sizes_meet_violation_conditions())
            || self.audit.as_ref().is_some_and(|a| !a.is_clean())
    }

    fn step_sizes_meet_violation_conditions(&self) -> bool {
        let (alpha, eta) = self.mode.coefficients(&self.step_sizes);
        StepSizes {
            alpha,
            eta,
            gamma: self.step_sizes.gamma,
        }
        .meets_violation_conditions()
    }

    pub fn relative_dir(&self) -> PathBuf {
        PathBuf::from(self.env.label()).join(self.mode.label())
    }

    pub fn trace_file_name(&self) -> String {
        format!("trace_tau{}_seed{}.csv", self.tau, self.seed)
    }

    pub fn run_file_name(&self) -> String {
        format!("run_tau{}_seed{}.json", self.tau, self.seed)
    }
}

/// Per-run JSON written when `json` output is on, read back by `verify`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    pub env: EnvSpec,
    pub seed: u64,
    pub constants: ProblemConstants,
    pub variations: Option<Variations>,
    pub dynamic_regret: Option<f64>,
    pub static_regret: Option<f64>,
    pub trace: RunTrace,
}

#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub runs: Vec<RunOutcome>,
    pub summary: Vec<SummaryRow>,
    pub files: Vec<PathBuf>,
}

impl ExperimentSummary {
    pub fn has_violation(&self) -> bool {
        self.runs.iter().any(|r| r.has_violation())
    }
}

/// Run every configured combination and write outputs under
/// `config.output.dir`. Trials run in the current rayon pool; outputs are
/// written afterwards in a fixed order.
pub fn run_experiment(config: &ExperimentConfig, opts: RunOptions) -> Result<ExperimentSummary> {
    config.validate()?;
    let runs = compute_runs(config, opts)?;
    let summary = summary_rows(config, &runs);
    let files = output::write_all(config, &runs, &summary)?;
    Ok(ExperimentSummary { runs, summary, files })
}

/// The runs without touching the filesystem.
pub fn compute_runs(config: &ExperimentConfig, opts: RunOptions) -> Result<Vec<RunOutcome>> {
    config.validate()?;
    let tasks: Vec<(ProcessKind, u64)> = config
        .environment
        .kinds
        .iter()
        .flat_map(|k| config.seeds().map(move |s| (*k, s)))
        .collect();
    let per_task: Vec<Vec<RunOutcome>> = tasks
        .par_iter()
        .map(|&(kind, seed)| run_task(config, kind, seed, opts))
        .collect::<Result<_>>()?;
    // Order: environment, mode, delay, seed.
    let mut runs: Vec<RunOutcome> = per_task.into_iter().flatten().collect();
    let pos = |r: &RunOutcome| {
        (
            config.environment.kinds.iter().position(|k| *k == r.env),
            config.algorithm.modes.iter().position(|m| *m == r.mode),
            config.run.taus.iter().position(|t| *t == r.tau),
            r.seed,
        )
    };
    runs.sort_by_key(pos);
    Ok(runs)
}

/// Build the environment for one (kind, seed) and play every mode and delay
/// against it.
fn run_task(config: &ExperimentConfig, kind: ProcessKind, seed: u64, opts: RunOptions) -> Result<Vec<RunOutcome>> {
    let run = &config.run;
    let horizon = run.horizon;
    let spec = EnvSpec {
        kind,
        j: config.environment.j,
        k: config.environment.k,
        seed,
    };
    let env = NetworkEnv::new(spec, LteConstants::default(), horizon)?;
    let constants = env.constants();
    let constraints = env.constraints();
    let set = env.feasible_set();
    let bopts = BenchmarkOptions::default();
    let dynamic: Option<BenchmarkTrace> = if run.dynamic_benchmark || run.bounds {
        Some(env.dynamic_benchmark(horizon, &bopts)?)
    } else {
        None
    };
    let stat: Option<BenchmarkTrace> = if run.static_benchmark || run.bounds {
        Some(env.static_benchmark(horizon, &bopts)?)
    } else {
        None
    };
    let bench_costs = dynamic.as_ref().map(|b| benchmark_costs(b, &env, horizon)).transpose()?;
    let variations = if run.bounds {
        Some(variation_measures(dynamic.as_ref(), &constraints, &set, horizon, VARIATION_SAMPLES, seed)?)
    } else {
        None
    };
    let bx = set.as_box().expect("network set is a box").clone();
    let mut out = Vec::new();
    for &mode in &config.algorithm.modes {
        for &tau in &run.taus {
            let sizes = step_sizes(&config.algorithm, horizon, tau, constants.beta)?;
            let x0 = initial_point(&bx, config.algorithm.x_init)?;
            let mut alg = DtcOco::initialize(set.clone(), tau, sizes, mode, constraints.count(), Some(x0))?;
            let trace = run_online(&mut alg, &env, &constraints, horizon, opts.timing_audit)?;
            out.push(evaluate(
                config,
                &env,
                &trace,
                dynamic.as_ref(),
                stat.as_ref(),
                bench_costs.clone(),
                constants.clone(),
                variations,
                seed,
            )?);
        }
    }
    Ok(out)
}

fn step_sizes(alg: &AlgorithmBlock, horizon: usize, tau: usize, beta: f64) -> Result<StepSizes> {
    let base = pick_step_sizes(alg.policy, horizon, tau, beta)?;
    StepSizes::new(
        alg.alpha.unwrap_or(base.alpha),
        alg.eta.unwrap_or(base.eta),
        alg.gamma.unwrap_or(base.gamma),
    )
}

fn initial_point(bx: &BoxSet, p: InitialPoint) -> Result<DecisionVector> {
    DecisionVector::new(match p {
        InitialPoint::Midpoint => bx.midpoint(),
        InitialPoint::Lower => bx.lower().to_vec(),
        InitialPoint::Upper => bx.upper().to_vec(),
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    config: &ExperimentConfig,
    env: &NetworkEnv,
    trace: &RunTrace,
    dynamic: Option<&BenchmarkTrace>,
    stat: Option<&BenchmarkTrace>,
    bench_costs: Option<Vec<f64>>,
    constants: ProblemConstants,
    variations: Option<Variations>,
    seed: u64,
) -> Result<RunOutcome> {
    let run = &config.run;
    let averages = time_averages(trace)?;
    let dyn_regret = dynamic.map(|b| dynamic_regret(trace, b, env)).transpose()?;
    let stat_regret = match stat {
        Some(b) => static_regret(trace, b, env)?,
        None => None,
    };
    let lemma = if run.lemma_checks || trace.audit.is_some() {
        Some(lemma_checks(trace, LEMMA_TOL)?)
    } else {
        None
    };
    let effective = trace.effective_step_sizes();
    let (bounds, qbound, qfail) = match variations {
        Some(v) if run.bounds => {
            let measured = MeasuredRun::from_trace(trace, dyn_regret, stat_regret);
            let qb = queue_bound(&constants, &effective);
            let fails = qb.map(|b| queue_bound_failures(trace, b)).unwrap_or_default();
            (theorem_bounds(&measured, &constants, &effective, &v), qb, fails)
        }
        _ => (Vec::new(), None, Vec::new()),
    };
    let keep = config.wants(OutputFormat::Json).then(|| slim(trace));
    Ok(RunOutcome {
        env: env.spec.kind,
        mode: trace.mode,
        tau: trace.tau,
        seed,
        step_sizes: trace.step_sizes,
        constants,
        costs: trace.records.iter().map(|r| r.cost).collect(),
        violation_sums: trace.records.iter().map(|r| r.constraint.iter().sum()).collect(),
        queue_norms: trace.records.iter().map(|r| linalg::norm2(&r.queue)).collect(),
        averages,
        bench_costs,
        dynamic_regret: dyn_regret,
        static_regret: stat_regret,
        variations,
        lemma,
        bounds,
        queue_bound: qbound,
        queue_bound_failures: qfail,
        unconverged_slots: trace.unconverged_slots(),
        benchmark_flagged: dynamic.map_or(0, |b| b.flagged_slots()),
        audit: trace.audit.clone(),
        trace: keep,
    })
}

/// Drop the decisions, which dominate the size and are not needed to
/// re-check the queue inequalities or bounds.
fn slim(trace: &RunTrace) -> RunTrace {
    let mut t = trace.clone();
    for r in &mut t.records {
        r.decision = Vec::new();
    }
    t
}

/// `D, β, G, ε, R` for each configured environment and the first seed.
pub fn environment_constants(config: &ExperimentConfig) -> Result<Vec<(EnvSpec, ProblemConstants)>> {
    config.validate()?;
    config
        .environment
        .kinds
        .iter()
        .map(|&kind| {
            let spec = EnvSpec {
                kind,
                j: config.environment.j,
                k: config.environment.k,
                seed: config.environment.seed,
            };
            let env = NetworkEnv::new(spec, LteConstants::default(), config.run.horizon)?;
            Ok((spec, env.constants()))
        })
        .collect()
}
