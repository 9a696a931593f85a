//! Post-hoc evaluation of a run: regrets, constraint violation, variation
//! measures, the queue and drift inequalities, theorem bounds, the physical
//! backlog recursion and running time averages.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithm::{RegularizationMode, SolverStatus, StepSizes};
use crate::benchmarks::{BenchmarkKind, BenchmarkTrace};
use crate::delay::TimingAudit;
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, Matrix};
use crate::problem::{affine_norm_bound, ConstraintOracle, FeasibleSet, LossOracle, ProblemConstants};

/// Absolute tolerance for the queue inequalities.
pub const LEMMA_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub decision: Vec<f64>,
    /// `f_t(x_t)`
    pub cost: f64,
    /// `g_t(x_t)`
    pub constraint: Vec<f64>,
    /// `Q_t` at the end of the slot.
    pub queue: Vec<f64>,
    /// `g_{t−τ}(x_t)`, absent during warm-up.
    pub delayed_constraint: Option<Vec<f64>>,
    pub solver: SolverStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub tau: usize,
    pub step_sizes: StepSizes,
    pub mode: RegularizationMode,
    /// Slots `1..=T` in order.
    pub records: Vec<SlotRecord>,
    pub audit: Option<TimingAudit>,
}

impl RunTrace {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.records.first().map_or(0, |r| r.constraint.len())
    }

    /// `(α, η, γ)` actually used in the per-slot problem.
    pub fn effective_step_sizes(&self) -> StepSizes {
        let (alpha, eta) = self.mode.coefficients(&self.step_sizes);
        StepSizes {
            alpha,
            eta,
            gamma: self.step_sizes.gamma,
        }
    }

    /// Record count and contiguous 1-based slots.
    pub fn validate(&self) -> Result<()> {
        for (i, r) in self.records.iter().enumerate() {
            if r.slot != i + 1 {
                return Err(Error::contract(format!("record {i} carries slot {}", r.slot)));
            }
        }
        Ok(())
    }

    pub fn unconverged_slots(&self) -> usize {
        self.records.iter().filter(|r| !r.solver.converged).count()
    }
}

/// `f_t(x_t*)` (or `f_t(x*)`) for slots `1..=horizon`.
pub fn benchmark_costs(benchmark: &BenchmarkTrace, loss: &dyn LossOracle, horizon: usize) -> Result<Vec<f64>> {
    if benchmark.kind == BenchmarkKind::Dynamic && benchmark.decisions.len() < horizon {
        return Err(Error::contract(format!(
            "dynamic benchmark covers {} slots, trace has {horizon}",
            benchmark.decisions.len()
        )));
    }
    Ok((1..=horizon).map(|t| loss.value(t, benchmark.decision_at(t))).collect())
}

/// `RE_d(T) = Σ_t f_t(x_t) − f_t(x_t*)`
pub fn dynamic_regret(trace: &RunTrace, benchmark: &BenchmarkTrace, loss: &dyn LossOracle) -> Result<f64> {
    if benchmark.kind != BenchmarkKind::Dynamic {
        return Err(Error::contract("dynamic regret needs a dynamic benchmark"));
    }
    let bench = benchmark_costs(benchmark, loss, trace.horizon())?;
    Ok(trace.records.iter().zip(&bench).map(|(r, b)| r.cost - b).sum())
}

/// `RE_s(T) = Σ_t f_t(x_t) − f_t(x*)`, or `None` when the static benchmark is
/// unavailable.
pub fn static_regret(trace: &RunTrace, benchmark: &BenchmarkTrace, loss: &dyn LossOracle) -> Result<Option<f64>> {
    if benchmark.kind != BenchmarkKind::Static {
        return Err(Error::contract("static regret needs a static benchmark"));
    }
    if !benchmark.is_available() {
        return Ok(None);
    }
    let bench = benchmark_costs(benchmark, loss, trace.horizon())?;
    Ok(Some(trace.records.iter().zip(&bench).map(|(r, b)| r.cost - b).sum()))
}

/// Signed `VO^c(T) = Σ_t g_t^c(x_t)`.
pub fn constraint_violation(trace: &RunTrace, c: usize) -> Result<f64> {
    if c >= trace.constraint_count() {
        return Err(Error::contract(format!(
            "constraint {c} out of range for {} constraints",
            trace.constraint_count()
        )));
    }
    Ok(trace.records.iter().map(|r| r.constraint[c]).sum())
}

/// `VO^c(T)` for every `c`.
pub fn violation_vector(trace: &RunTrace) -> Vec<f64> {
    let mut v = vec![0.0; trace.constraint_count()];
    for r in &trace.records {
        linalg::axpy(&mut v, 1.0, &r.constraint);
    }
    v
}

/// `Fit(T) = ‖[Σ_t g_t(x_t)]⁺‖₂`
pub fn dynamic_fit(trace: &RunTrace) -> f64 {
    linalg::norm2(&linalg::positive_part(&violation_vector(trace)))
}

/// Path length `Δ_{x*}` and constraint variations `Δ_g`, `Δ̃_g`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variations {
    pub path_length: f64,
    pub constraint_sq: f64,
    pub constraint_abs: f64,
}

/// `x_0* ≜ x_1*` and `g_0 ≡ 0`.
///
/// For affine constraints `g_t − g_{t−1} = d_t − d_{t−1}` is constant in `x`,
/// so every term after the first is exact; the first term `max_x ‖g_1(x)‖`
/// uses the rigorous interval bound on a box. Otherwise the inner maximum is
/// taken over box corners (up to 1024), the midpoint and `grid_samples`
/// seeded samples.
pub fn variation_measures(
    benchmark: Option<&BenchmarkTrace>,
    constraints: &ConstraintOracle,
    set: &FeasibleSet,
    horizon: usize,
    grid_samples: usize,
    seed: u64,
) -> Result<Variations> {
    let path_length = match benchmark {
        None => 0.0,
        Some(b) if b.kind == BenchmarkKind::Static => 0.0,
        Some(b) => {
            if b.decisions.len() < horizon {
                return Err(Error::contract("dynamic benchmark shorter than horizon"));
            }
            (2..=horizon).map(|t| linalg::dist2(b.decision_at(t), b.decision_at(t - 1))).sum()
        }
    };
    let bx = set.as_box();
    let mut per_slot = Vec::with_capacity(horizon);
    match constraints {
        ConstraintOracle::Affine(a) => {
            let first = match bx {
                Some(bx) => affine_norm_bound(a.matrix(), &a.offset_at(1), bx),
                None => return Err(Error::contract("variation measures need a box feasible set")),
            };
            per_slot.push(first);
            let mut prev = a.offset_at(1);
            for t in 2..=horizon {
                let cur = a.offset_at(t);
                per_slot.push(linalg::dist2(&cur, &prev));
                prev = cur;
            }
        }
        ConstraintOracle::General(_) => {
            let bx = bx.ok_or_else(|| Error::contract("variation measures need a box feasible set"))?;
            let mut grid: Vec<Vec<f64>> = Vec::new();
            if bx.dim() <= 10 {
                grid.extend((0..1u64 << bx.dim()).map(|m| bx.corner(m)));
            } else {
                grid.push(bx.lower().to_vec());
                grid.push(bx.upper().to_vec());
            }
            grid.push(bx.midpoint());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            grid.extend((0..grid_samples).map(|_| bx.sample(&mut rng)));
            let mut prev: Vec<Vec<f64>> = grid.iter().map(|_| vec![0.0; constraints.count()]).collect();
            for t in 1..=horizon {
                let cur: Vec<Vec<f64>> = grid.iter().map(|x| constraints.eval(t, x)).collect();
                per_slot.push(cur.iter().zip(&prev).map(|(a, b)| linalg::dist2(a, b)).fold(0.0, f64::max));
                prev = cur;
            }
        }
    }
    Ok(Variations {
        path_length,
        constraint_sq: per_slot.iter().map(|v| v * v).sum(),
        constraint_abs: per_slot.iter().sum(),
    })
}

/// Per-slot outcome of the queue inequalities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub slots_checked: usize,
    /// `Q_t + γ g_{t−τ}(x_t) ⪰ 0`
    pub nonnegativity_failures: Vec<usize>,
    /// `‖Q_t‖ ≥ ‖γ g_{t−τ}(x_t)‖`
    pub lower_failures: Vec<usize>,
    /// `‖Q_t‖ ≤ ‖Q_{t−1}‖ + ‖γ g_{t−τ}(x_t)‖`
    pub growth_failures: Vec<usize>,
    /// `½‖Q_t‖² − ½‖Q_{t−1}‖² ≤ γ Q_{t−1}ᵀ g + ‖γ g‖²`
    pub drift_failures: Vec<usize>,
    /// Smallest slack seen in each check.
    pub worst_slack: [f64; 4],
}

impl LemmaReport {
    pub fn lemma1_holds(&self) -> bool {
        self.nonnegativity_failures.is_empty() && self.lower_failures.is_empty() && self.growth_failures.is_empty()
    }

    pub fn lemma2_holds(&self) -> bool {
        self.drift_failures.is_empty()
    }
}

/// Check the queue inequalities at every slot `t > τ`.
pub fn lemma_checks(trace: &RunTrace, tol: f64) -> Result<LemmaReport> {
    let gamma = trace.step_sizes.gamma;
    let mut rep = LemmaReport {
        worst_slack: [f64::INFINITY; 4],
        ..Default::default()
    };
    let zero = vec![0.0; trace.constraint_count()];
    for (i, r) in trace.records.iter().enumerate() {
        let Some(g) = &r.delayed_constraint else { continue };
        let prev = if i == 0 { &zero } else { &trace.records[i - 1].queue };
        check_len("queue length", prev.len(), r.queue.len())?;
        let gg = linalg::scale(g, gamma);
        let q = &r.queue;
        let slack_nonneg = q.iter().zip(&gg).map(|(a, b)| a + b).fold(f64::INFINITY, f64::min);
        let (nq, ngg, nprev) = (linalg::norm2(q), linalg::norm2(&gg), linalg::norm2(prev));
        let slack_lower = nq - ngg;
        let slack_growth = nprev + ngg - nq;
        // ½‖Q_t‖² − ½‖Q_{t−1}‖² as Σ ½(a−b)(a+b), which avoids cancelling
        // two large squares.
        let drift: f64 = q.iter().zip(prev).map(|(a, b)| 0.5 * (a - b) * (a + b)).sum();
        let slack_drift = linalg::dot(prev, &gg) + linalg::norm2_sq(&gg) - drift;
        let t = r.slot;
        for (k, (s, list)) in [
            (slack_nonneg, &mut rep.nonnegativity_failures),
            (slack_lower, &mut rep.lower_failures),
            (slack_growth, &mut rep.growth_failures),
            (slack_drift, &mut rep.drift_failures),
        ]
        .into_iter()
        .enumerate()
        {
            if s < -tol {
                list.push(t);
            }
            rep.worst_slack[k] = rep.worst_slack[k].min(s);
        }
        rep.slots_checked += 1;
    }
    Ok(rep)
}

/// `2γG + (2γ²G² + DR + (α+η)R²)/(εγ)`, or `None` without an interior point.
pub fn queue_bound(constants: &ProblemConstants, sizes: &StepSizes) -> Option<f64> {
    let eps = constants.epsilon?;
    let ProblemConstants { d, g, r, .. } = *constants;
    let StepSizes { alpha, eta, gamma } = *sizes;
    Some(2.0 * gamma * g + (2.0 * gamma * gamma * g * g + d * r + (alpha + eta) * r * r) / (eps * gamma))
}

/// Slots `t > τ` where `‖Q_t‖` exceeds the queue bound.
pub fn queue_bound_failures(trace: &RunTrace, bound: f64) -> Vec<usize> {
    trace
        .records
        .iter()
        .filter(|r| r.delayed_constraint.is_some())
        .filter(|r| linalg::norm2(&r.queue) > bound + LEMMA_TOL * bound.abs().max(1.0))
        .map(|r| r.slot)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub satisfied: bool,
    /// False when the step sizes break the theorem's hypotheses.
    pub precondition_met: bool,
    /// False when a needed quantity (benchmark, `ε`) is missing; `lhs`, `rhs`
    /// are then NaN.
    pub available: bool,
    pub constants: ProblemConstants,
}

impl BoundReport {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64, precondition_met: bool, constants: &ProblemConstants) -> Self {
        let slack = rhs - lhs;
        BoundReport {
            name: name.into(),
            lhs,
            rhs,
            slack,
            satisfied: slack >= -1e-9 * rhs.abs().max(1.0),
            precondition_met,
            available: true,
            constants: constants.clone(),
        }
    }

    fn unavailable(name: impl Into<String>, precondition_met: bool, constants: &ProblemConstants) -> Self {
        BoundReport {
            name: name.into(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            slack: f64::NAN,
            satisfied: false,
            precondition_met,
            available: false,
            constants: constants.clone(),
        }
    }

    /// A violated bound only signals a bug when the hypotheses hold.
    pub fn is_violation(&self) -> bool {
        self.available && self.precondition_met && !self.satisfied
    }
}

/// Measured quantities the theorem bounds compare against.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasuredRun {
    pub dynamic_regret: Option<f64>,
    pub static_regret: Option<f64>,
    pub violations: Vec<f64>,
    pub final_queue_norm: f64,
    pub tau: usize,
    pub horizon: usize,
}

impl MeasuredRun {
    pub fn from_trace(trace: &RunTrace, dynamic_regret: Option<f64>, static_regret: Option<f64>) -> Self {
        MeasuredRun {
            dynamic_regret,
            static_regret,
            violations: violation_vector(trace),
            final_queue_norm: trace.records.last().map_or(0.0, |r| linalg::norm2(&r.queue)),
            tau: trace.tau,
            horizon: trace.horizon(),
        }
    }
}

/// Right-hand side of the dynamic regret bound.
pub fn dynamic_regret_bound(c: &ProblemConstants, s: &StepSizes, tau: usize, horizon: usize, v: &Variations) -> f64 {
    let (tau, t) = (tau as f64, horizon as f64);
    c.d * c.d / (4.0 * s.alpha) * t
        + s.gamma * s.gamma * c.g * c.g / 2.0
        + s.gamma * s.gamma * v.constraint_sq
        + (s.alpha * tau + s.eta) * (c.r * c.r + 2.0 * c.r * v.path_length)
        + c.d * c.r * tau
}

/// Right-hand side of the static regret bound.
pub fn static_regret_bound(c: &ProblemConstants, s: &StepSizes, tau: usize, horizon: usize, v: &Variations) -> f64 {
    let (tau, t) = (tau as f64, horizon as f64);
    c.d * c.d / (4.0 * s.alpha) * t
        + s.gamma * s.gamma * c.g * c.g / 2.0
        + s.gamma * s.gamma * v.constraint_sq
        + (s.alpha * tau + s.eta) * c.r * c.r
        + c.d * c.r * tau
}

/// Right-hand side of the violation bound, or `None` without `ε`.
pub fn violation_bound(c: &ProblemConstants, s: &StepSizes, tau: usize, v: &Variations) -> Option<f64> {
    let eps = c.epsilon?;
    let tau = tau as f64;
    Some(
        2.0 * c.g
            + (2.0 * s.gamma * s.gamma * c.g * c.g + c.d * c.r + (s.alpha + s.eta) * c.r * c.r) / (eps * s.gamma * s.gamma)
            + tau * v.constraint_abs
            + c.g * tau,
    )
}

/// Evaluate every bound. `sizes` should be the effective step sizes.
pub fn theorem_bounds(run: &MeasuredRun, constants: &ProblemConstants, sizes: &StepSizes, v: &Variations) -> Vec<BoundReport> {
    let regret_ok = sizes.meets_regret_conditions(constants.beta);
    let vio_ok = sizes.meets_violation_conditions();
    let mut out = Vec::new();
    let rd = dynamic_regret_bound(constants, sizes, run.tau, run.horizon, v);
    out.push(match run.dynamic_regret {
        Some(l) => BoundReport::new("dynamic-regret", l, rd, regret_ok, constants),
        None => BoundReport::unavailable("dynamic-regret", regret_ok, constants),
    });
    let rs = static_regret_bound(constants, sizes, run.tau, run.horizon, v);
    out.push(match run.static_regret {
        Some(l) => BoundReport::new("static-regret", l, rs, regret_ok, constants),
        None => BoundReport::unavailable("static-regret", regret_ok, constants),
    });
    let vb = violation_bound(constants, sizes, run.tau, v);
    for (c, vo) in run.violations.iter().enumerate() {
        let name = format!("violation[{c}]");
        out.push(match vb {
            Some(rhs) => BoundReport::new(name, *vo, rhs, vio_ok, constants),
            None => BoundReport::unavailable(name, vio_ok, constants),
        });
    }
    let tau = run.tau as f64;
    let lemma_rhs = run.final_queue_norm / sizes.gamma + tau * v.constraint_abs + constants.g * tau;
    for (c, vo) in run.violations.iter().enumerate() {
        out.push(BoundReport::new(format!("violation-via-queue[{c}]"), *vo, lemma_rhs, true, constants));
    }
    out
}

/// Backlog `q_{t+1} = [q_t + C x_t + d_t]⁺` from `q_1 = 0`. Returns
/// `q_1, …, q_{T+1}`.
pub fn physical_queue_trace<'a>(
    decisions: impl IntoIterator<Item = &'a [f64]>,
    matrix: &Matrix,
    offset: impl Fn(usize) -> Vec<f64>,
) -> Vec<Vec<f64>> {
    let mut q = vec![0.0; matrix.rows()];
    let mut out = vec![q.clone()];
    for (i, x) in decisions.into_iter().enumerate() {
        let mut next = matrix.mul_vec(x);
        linalg::axpy(&mut next, 1.0, &offset(i + 1));
        linalg::axpy(&mut next, 1.0, &q);
        q = linalg::positive_part(&next);
        out.push(q.clone());
    }
    out
}

/// Running `f̄(t) = (1/t) Σ_{s≤t} f_s(x_s)` and `ḡ(t) = (1/t) Σ_{s≤t} 1ᵀ g_s(x_s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeAverages {
    pub avg_cost: Vec<f64>,
    pub avg_violation: Vec<f64>,
}

impl TimeAverages {
    pub fn final_cost(&self) -> f64 {
        *self.avg_cost.last().expect("non-empty")
    }

    pub fn final_violation(&self) -> f64 {
        *self.avg_violation.last().expect("non-empty")
    }
}

pub fn time_averages(trace: &RunTrace) -> Result<TimeAverages> {
    if trace.records.is_empty() {
        return Err(Error::contract("time averages need at least one slot"));
    }
    let (mut sc, mut sg) = (0.0, 0.0);
    let mut out = TimeAverages {
        avg_cost: Vec::with_capacity(trace.horizon()),
        avg_violation: Vec::with_capacity(trace.horizon()),
    };
    for (i, r) in trace.records.iter().enumerate() {
        sc += r.cost;
        sg += r.constraint.iter().sum::<f64>();
        let n = (i + 1) as f64;
        out.avg_cost.push(sc / n);
        out.avg_violation.push(sg / n);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::FnLoss;
    use proptest::prelude::*;

    fn trace_from(costs: &[f64], cons: &[Vec<f64>], decisions: &[f64]) -> RunTrace {
        RunTrace {
            tau: 1,
            step_sizes: StepSizes::new(1.0, 1.0, 1.0).unwrap(),
            mode: RegularizationMode::Double,
            records: costs
                .iter()
                .zip(cons)
                .zip(decisions)
                .enumerate()
                .map(|(i, ((c, g), x))| SlotRecord {
                    slot: i + 1,
                    decision: vec![*x],
                    cost: *c,
                    constraint: g.clone(),
                    queue: vec![0.0; g.len()],
                    delayed_constraint: None,
                    solver: SolverStatus::default(),
                })
                .collect(),
            audit: None,
        }
    }

    fn square_loss() -> FnLoss {
        FnLoss::new(1, |_, x| x[0] * x[0], |_, x| vec![2.0 * x[0]])
    }

    fn dyn_bench(xs: &[f64]) -> BenchmarkTrace {
        BenchmarkTrace {
            kind: BenchmarkKind::Dynamic,
            decisions: xs.iter().map(|x| vec![*x]).collect(),
            feasible: vec![true; xs.len()],
            residuals: vec![0.0; xs.len()],
            converged: vec![true; xs.len()],
        }
    }

    fn static_bench(x: f64, feasible: bool) -> BenchmarkTrace {
        BenchmarkTrace {
            kind: BenchmarkKind::Static,
            decisions: vec![vec![x]],
            feasible: vec![feasible],
            residuals: vec![0.0],
            converged: vec![true],
        }
    }

    #[test]
    fn regret_of_benchmark_itself_is_zero() {
        let tr = trace_from(&[0.25, 1.0], &[vec![0.0], vec![0.0]], &[0.5, 1.0]);
        assert_eq!(dynamic_regret(&tr, &dyn_bench(&[0.5, 1.0]), &square_loss()).unwrap(), 0.0);
        let tr = trace_from(&[0.25, 0.25], &[vec![0.0], vec![0.0]], &[0.5, 0.5]);
        assert_eq!(static_regret(&tr, &static_bench(0.5, true), &square_loss()).unwrap(), Some(0.0));
    }

    #[test]
    fn two_slot_regret_arithmetic() {
        let tr = trace_from(&[1.0, 1.0], &[vec![0.0], vec![0.0]], &[1.0, 1.0]);
        assert_eq!(dynamic_regret(&tr, &dyn_bench(&[0.0, 0.0]), &square_loss()).unwrap(), 2.0);
        assert_eq!(static_regret(&tr, &static_bench(0.0, true), &square_loss()).unwrap(), Some(2.0));
    }

    #[test]
    fn regret_kind_mismatch_and_unavailable_static() {
        let tr = trace_from(&[1.0], &[vec![0.0]], &[1.0]);
        assert!(dynamic_regret(&tr, &static_bench(0.0, true), &square_loss()).is_err());
        assert!(static_regret(&tr, &dyn_bench(&[0.0]), &square_loss()).is_err());
        assert_eq!(static_regret(&tr, &static_bench(0.0, false), &square_loss()).unwrap(), None);
    }

    #[test]
    fn regret_matches_reference_accumulation() {
        let loss = FnLoss::new(1, |t, x| (x[0] - (t as f64).sin()).powi(2), |t, x| vec![2.0 * (x[0] - (t as f64).sin())]);
        let xs: Vec<f64> = (1..=200).map(|t| ((t * 7 % 13) as f64) / 13.0).collect();
        let stars: Vec<f64> = (1..=200).map(|t| (t as f64).sin()).collect();
        let costs: Vec<f64> = xs.iter().enumerate().map(|(i, x)| loss.value(i + 1, &[*x])).collect();
        let tr = trace_from(&costs, &vec![vec![0.0]; 200], &xs);
        let mut reference = 0.0;
        for t in 1..=200 {
            let x = xs[t - 1];
            reference += (x - (t as f64).sin()).powi(2);
        }
        let got = dynamic_regret(&tr, &dyn_bench(&stars), &loss).unwrap();
        assert!((got - reference).abs() <= 1e-12 * reference.abs().max(1.0));
        let fixed = 0.2;
        let reference_s: f64 = (1..=200).map(|t| (xs[t - 1] - (t as f64).sin()).powi(2) - (fixed - (t as f64).sin()).powi(2)).sum();
        let got_s = static_regret(&tr, &static_bench(fixed, true), &loss).unwrap().unwrap();
        assert!((got_s - reference_s).abs() <= 1e-10 * reference_s.abs().max(1.0));
    }

    #[test]
    fn violation_is_signed_sum() {
        let tr = trace_from(&[0.0; 3], &[vec![1.0], vec![-2.0], vec![0.5]], &[0.0; 3]);
        assert_eq!(constraint_violation(&tr, 0).unwrap(), -0.5);
        assert!(constraint_violation(&tr, 1).is_err());
        let zero = trace_from(&[0.0; 2], &[vec![0.0], vec![0.0]], &[0.0; 2]);
        assert_eq!(constraint_violation(&zero, 0).unwrap(), 0.0);
    }

    #[test]
    fn fit_is_norm_of_positive_part() {
        let tr = trace_from(&[0.0; 2], &[vec![3.0, -1.0, 2.0], vec![1.0, -1.0, 1.0]], &[0.0; 2]);
        let vo = violation_vector(&tr);
        assert_eq!(vo, vec![4.0, -2.0, 3.0]);
        assert_eq!(dynamic_fit(&tr), 5.0);
    }

    fn affine_1d(offsets: Vec<f64>) -> ConstraintOracle {
        ConstraintOracle::affine(Matrix::from_rows(&[vec![1.0]]), move |t| vec![offsets[t - 1]])
    }

    #[test]
    fn time_invariant_constraints_vary_only_at_first_slot() {
        let set = FeasibleSet::boxed(vec![0.0], vec![1.0]).unwrap();
        let v = variation_measures(None, &affine_1d(vec![-2.0; 6]), &set, 6, 0, 0).unwrap();
        // First term is max over [0, 1] of |x − 2| = 2.
        assert_eq!(v.constraint_abs, 2.0);
        assert_eq!(v.constraint_sq, 4.0);
        assert_eq!(v.path_length, 0.0);
    }

    #[test]
    fn single_offset_jump_contributes_its_norm() {
        let g = ConstraintOracle::affine(Matrix::from_rows(&[vec![0.0], vec![0.0]]), |t| {
            if t >= 3 {
                vec![3.0, 4.0]
            } else {
                vec![0.0, 0.0]
            }
        });
        let set = FeasibleSet::boxed(vec![0.0], vec![1.0]).unwrap();
        let v = variation_measures(None, &g, &set, 5, 0, 0).unwrap();
        assert_eq!(v.constraint_sq, 25.0);
        assert_eq!(v.constraint_abs, 5.0);
    }

    #[test]
    fn general_path_agrees_with_affine_path_after_first_slot() {
        let offsets: Vec<f64> = (0..8).map(|i| -((i * 3 % 5) as f64)).collect();
        let a = affine_1d(offsets.clone());
        let g = ConstraintOracle::General(a.as_general());
        let set = FeasibleSet::boxed(vec![0.0], vec![1.0]).unwrap();
        let va = variation_measures(None, &a, &set, 8, 16, 1).unwrap();
        let vg = variation_measures(None, &g, &set, 8, 16, 1).unwrap();
        assert!((va.constraint_abs - vg.constraint_abs).abs() < 1e-12);
        assert!((va.constraint_sq - vg.constraint_sq).abs() < 1e-12);
    }

    #[test]
    fn static_benchmark_has_zero_path_length() {
        let set = FeasibleSet::boxed(vec![0.0], vec![1.0]).unwrap();
        let v = variation_measures(Some(&static_bench(0.3, true)), &affine_1d(vec![0.0; 4]), &set, 4, 0, 0).unwrap();
        assert_eq!(v.path_length, 0.0);
        let d = variation_measures(Some(&dyn_bench(&[0.0, 0.5, 0.5, 0.2])), &affine_1d(vec![0.0; 4]), &set, 4, 0, 0).unwrap();
        assert!((d.path_length - 0.8).abs() < 1e-15);
    }

    #[test]
    fn physical_queue_examples() {
        let c = Matrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, -1.0]]);
        let q = physical_queue_trace([[10.0, 10.0].as_slice(); 5], &c, |_| vec![5.0, 0.0]);
        assert!(q.iter().all(|v| v.iter().all(|x| *x == 0.0)));
        let q = physical_queue_trace([[0.0, 0.0].as_slice()], &c, |_| vec![5.0, 0.0]);
        assert_eq!(q[1], vec![5.0, 0.0]);
    }

    #[test]
    fn physical_queue_matches_reference_recursion() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = Matrix::from_rows(&[vec![-1.0, -1.0, 0.0], vec![1.0, 0.0, -1.0]]);
        let xs: Vec<Vec<f64>> = (0..100).map(|_| (0..3).map(|_| rng.gen_range(0.0..3.0)).collect()).collect();
        let ds: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen_range(0.0..4.0), 0.0]).collect();
        let got = physical_queue_trace(xs.iter().map(|x| x.as_slice()), &c, |t| ds[t - 1].clone());
        let (mut q0, mut q1) = (0.0f64, 0.0f64);
        for t in 0..100 {
            let x = &xs[t];
            let n0 = q0 - x[0] - x[1] + ds[t][0];
            let n1 = q1 + x[0] - x[2];
            q0 = n0.max(0.0);
            q1 = n1.max(0.0);
            assert!((got[t + 1][0] - q0).abs() < 1e-12 && (got[t + 1][1] - q1).abs() < 1e-12);
        }
    }

    #[test]
    fn time_average_examples() {
        let tr = trace_from(&[3.0; 4], &vec![vec![0.0]; 4], &[0.0; 4]);
        assert_eq!(time_averages(&tr).unwrap().final_cost(), 3.0);
        let tr = trace_from(&[0.0; 2], &[vec![1.5, 0.5], vec![-2.0, 0.0]], &[0.0; 2]);
        assert_eq!(time_averages(&tr).unwrap().final_violation(), 0.0);
        let empty = trace_from(&[], &[], &[]);
        assert!(time_averages(&empty).is_err());
    }

    #[test]
    fn prefix_matches_truncated_trace() {
        let costs: Vec<f64> = (0..30).map(|i| (i as f64).sqrt()).collect();
        let cons: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64).cos()]).collect();
        let full = time_averages(&trace_from(&costs, &cons, &[0.0; 30])).unwrap();
        let short = time_averages(&trace_from(&costs[..17], &cons[..17], &[0.0; 17])).unwrap();
        assert_eq!(full.avg_cost[16], short.final_cost());
        assert_eq!(full.avg_violation[16], short.final_violation());
    }

    fn consts() -> ProblemConstants {
        ProblemConstants {
            d: 2.0,
            beta: 1.0,
            g: 3.0,
            epsilon: Some(0.5),
            r: 1.5,
        }
    }

    #[test]
    fn precondition_flags_follow_step_sizes() {
        let run = MeasuredRun {
            dynamic_regret: Some(0.0),
            static_regret: None,
            violations: vec![0.0],
            final_queue_norm: 0.0,
            tau: 2,
            horizon: 10,
        };
        let v = Variations {
            path_length: 0.0,
            constraint_sq: 0.0,
            constraint_abs: 0.0,
        };
        let ablation = StepSizes::new(3.0, 0.0, 1.0).unwrap();
        let reps = theorem_bounds(&run, &consts(), &ablation, &v);
        assert!(!reps[0].precondition_met);
        assert!(!reps[1].available);
        assert!(!reps[2].precondition_met);
        let faithful = StepSizes::new(3.0, 1.0, 1.0).unwrap();
        let reps = theorem_bounds(&run, &consts(), &faithful, &v);
        assert!(reps.iter().filter(|r| r.available).all(|r| r.precondition_met && r.satisfied));
        let no_eps = ProblemConstants {
            epsilon: None,
            ..consts()
        };
        let reps = theorem_bounds(&run, &no_eps, &faithful, &v);
        assert!(!reps[2].available);
        assert!(reps[3].available);
    }

    #[test]
    fn queue_bound_formula() {
        let s = StepSizes::new(1.0, 2.0, 1.0).unwrap();
        // 2·3 + (2·9 + 3 + 3·2.25)/0.5
        assert!((queue_bound(&consts(), &s).unwrap() - (6.0 + (18.0 + 3.0 + 6.75) / 0.5)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn dynamic_bound_monotone_in_tau_and_path_length(
            tau in 1usize..50,
            path in 0.0f64..100.0,
            extra in 0.0f64..10.0,
            alpha in 0.1f64..50.0,
            eta in 0.0f64..10.0,
        ) {
            let s = StepSizes { alpha, eta, gamma: 1.0 };
            let v = Variations { path_length: path, constraint_sq: 1.0, constraint_abs: 1.0 };
            let v2 = Variations { path_length: path + extra, ..v };
            let c = consts();
            let b = dynamic_regret_bound(&c, &s, tau, 100, &v);
            prop_assert!(dynamic_regret_bound(&c, &s, tau + 1, 100, &v) >= b);
            prop_assert!(dynamic_regret_bound(&c, &s, tau, 100, &v2) >= b);
        }
    }
}
