//! Offline comparators: the per-slot optimizers `x_t*`, the best fixed
//! decision `x*`, and exhaustive grid oracles used by tests.
//!
//! Both benchmarks are computed with full information and never touch the
//! delay buffer. The solver is an augmented Lagrangian on `g ⪯ 0` with
//! penalty weights `10^k`, `k = 0..=8`, and a projected-gradient inner loop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::problem::{BoxSet, ConstraintOracle, ConstraintSnapshot, DecisionVector, FeasibleSet, LossOracle, Objective, SlotObjective, SummedObjective};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkKind {
    Dynamic,
    Static,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    /// Stationarity tolerance of the inner loop.
    pub tol: f64,
    /// Largest `g^c` still counted as satisfied.
    pub feasibility_tol: f64,
    /// Penalty stages; stage `k` uses weight `10^k`.
    pub stages: u32,
    pub inner_iters: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            tol: 1e-6,
            feasibility_tol: 1e-6,
            stages: 9,
            inner_iters: 500,
        }
    }
}

/// One benchmark solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSolution {
    pub decision: Vec<f64>,
    /// Max of the stationarity residual and the constraint violation.
    pub residual: f64,
    pub max_violation: f64,
    pub feasible: bool,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTrace {
    pub kind: BenchmarkKind,
    /// `T` decisions for dynamic, one for static.
    pub decisions: Vec<Vec<f64>>,
    pub feasible: Vec<bool>,
    pub residuals: Vec<f64>,
    pub converged: Vec<bool>,
}

impl BenchmarkTrace {
    /// Decision compared against slot `t` (1-based).
    pub fn decision_at(&self, t: usize) -> &[f64] {
        match self.kind {
            BenchmarkKind::Dynamic => &self.decisions[t - 1],
            BenchmarkKind::Static => &self.decisions[0],
        }
    }

    /// A static benchmark is unavailable when no fixed point satisfied every slot.
    pub fn is_available(&self) -> bool {
        match self.kind {
            BenchmarkKind::Dynamic => true,
            BenchmarkKind::Static => self.feasible.iter().all(|f| *f),
        }
    }

    pub fn flagged_slots(&self) -> usize {
        self.feasible
            .iter()
            .zip(&self.converged)
            .filter(|(f, c)| !**f || !**c)
            .count()
    }
}

/// Vector of inequality constraints `h(x) ⪯ 0` with a vector-Jacobian product.
trait Inequalities: Sync {
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64>;
}

impl Inequalities for ConstraintSnapshot {
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        ConstraintSnapshot::eval(self, x)
    }

    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        ConstraintSnapshot::vjp(self, x, w)
    }
}

/// `g_t` for every `t` in a range, stacked.
struct Stacked<'a> {
    oracle: &'a ConstraintOracle,
    first: usize,
    last: usize,
}

impl Inequalities for Stacked<'_> {
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.first..=self.last).flat_map(|t| self.oracle.eval(t, x)).collect()
    }

    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let c = self.oracle.count();
        let mut out = vec![0.0; x.len()];
        for (i, t) in (self.first..=self.last).enumerate() {
            let wt = &w[i * c..(i + 1) * c];
            if wt.iter().any(|v| *v != 0.0) {
                linalg::axpy(&mut out, 1.0, &self.oracle.vjp(t, x, wt));
            }
        }
        out
    }
}

/// `1/T Σ_t f_t` so penalty weights see per-slot scale.
struct Averaged<'a> {
    inner: &'a dyn Objective,
    weight: f64,
}

impl Objective for Averaged<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.weight * self.inner.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        linalg::scale(&self.inner.gradient(x), self.weight)
    }
}

/// `f(x) + 1/(2ρ) Σ ([λ + ρ h(x)]⁺² − λ²)`.
struct Lagrangian<'a> {
    objective: &'a dyn Objective,
    cons: &'a dyn Inequalities,
    lambda: &'a [f64],
    rho: f64,
}

impl Lagrangian<'_> {
    fn shifted(&self, h: &[f64]) -> Vec<f64> {
        h.iter()
            .zip(self.lambda)
            .map(|(hc, l)| (l + self.rho * hc).max(0.0))
            .collect()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let s = self.shifted(&self.cons.eval(x));
        let pen: f64 = s
            .iter()
            .zip(self.lambda)
            .map(|(sc, l)| sc * sc - l * l)
            .sum::<f64>()
            / (2.0 * self.rho);
        self.objective.value(x) + pen
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let s = self.shifted(&self.cons.eval(x));
        let mut g = self.objective.gradient(x);
        if s.iter().any(|v| *v != 0.0) {
            linalg::axpy(&mut g, 1.0, &self.cons.vjp(x, &s));
        }
        g
    }
}

/// `‖x − P(x − ∇)‖∞`
fn stationarity(set: &FeasibleSet, x: &[f64], grad: &[f64]) -> Result<f64> {
    let p = set.project(&linalg::sub(x, grad))?;
    Ok(x.iter().zip(p.iter()).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// Projected gradient with Barzilai–Borwein steps and backtracking. Returns
/// the final point and whether stationarity reached `tol`.
fn projected_gradient(lag: &Lagrangian<'_>, set: &FeasibleSet, start: Vec<f64>, tol: f64, iters: usize) -> Result<(Vec<f64>, bool)> {
    let mut x = start;
    let mut fx = lag.value(&x);
    let mut gx = lag.gradient(&x);
    let mut step = 1.0 / linalg::norm2(&gx).max(1.0);
    for _ in 0..iters {
        if stationarity(set, &x, &gx)? <= tol {
            return Ok((x, true));
        }
        let (xn, fxn) = loop {
            let cand = set.project(&linalg::sub(&x, &linalg::scale(&gx, step)))?.into_inner();
            let dx = linalg::sub(&cand, &x);
            let fc = lag.value(&cand);
            let model = fx + linalg::dot(&gx, &dx) + linalg::norm2_sq(&dx) / (2.0 * step);
            if fc <= model + 1e-12 * fx.abs().max(1.0) || step < 1e-300 {
                break (cand, fc);
            }
            step *= 0.5;
        };
        let gn = lag.gradient(&xn);
        let s = linalg::sub(&xn, &x);
        let y = linalg::sub(&gn, &gx);
        let sy = linalg::dot(&s, &y);
        step = if sy > 0.0 {
            (linalg::norm2_sq(&s) / sy).clamp(1e-12, 1e12)
        } else {
            (step * 2.0).min(1e12)
        };
        if linalg::norm2_sq(&s) == 0.0 {
            x = xn;
            gx = gn;
            break;
        }
        x = xn;
        fx = fxn;
        gx = gn;
    }
    let done = stationarity(set, &x, &gx)? <= tol;
    Ok((x, done))
}

fn augmented_lagrangian(
    objective: &dyn Objective,
    cons: &dyn Inequalities,
    count: usize,
    set: &FeasibleSet,
    opts: &BenchmarkOptions,
) -> Result<BenchmarkSolution> {
    check_len("benchmark objective dimension", set.dim(), objective.dim())?;
    let mut x = set.project(&vec![0.0; set.dim()])?.into_inner();
    let mut lambda = vec![0.0; count];
    let mut best: Option<BenchmarkSolution> = None;
    for k in 0..opts.stages {
        let rho = 10f64.powi(k as i32);
        let lag = Lagrangian {
            objective,
            cons,
            lambda: &lambda,
            rho,
        };
        let (xn, inner_ok) = projected_gradient(&lag, set, x, opts.tol, opts.inner_iters)?;
        let h = cons.eval(&xn);
        let viol = h.iter().fold(0.0f64, |m, v| m.max(*v));
        let stat = stationarity(set, &xn, &lag.gradient(&xn))?;
        let sol = BenchmarkSolution {
            decision: xn.clone(),
            residual: stat.max(viol.max(0.0)),
            max_violation: viol,
            feasible: viol <= opts.feasibility_tol,
            converged: inner_ok && viol <= opts.feasibility_tol,
        };
        lambda = lag.shifted(&h);
        x = xn;
        let better = match &best {
            None => true,
            Some(b) => (sol.feasible, -sol.residual) >= (b.feasible, -b.residual),
        };
        if better {
            best = Some(sol.clone());
        }
        if sol.converged {
            // Multipliers have settled once one more stage leaves x put.
            let lag = Lagrangian {
                objective,
                cons,
                lambda: &lambda,
                rho,
            };
            if stationarity(set, &x, &lag.gradient(&x))? <= opts.tol {
                return Ok(sol);
            }
        }
    }
    Ok(best.expect("at least one stage runs"))
}

/// `x_t* = argmin f_t(x)` s.t. `g_t(x) ⪯ 0`, `x ∈ X_0`.
pub fn solve_dynamic_benchmark(
    loss: &dyn LossOracle,
    constraints: &ConstraintOracle,
    set: &FeasibleSet,
    t: usize,
    opts: &BenchmarkOptions,
) -> Result<BenchmarkSolution> {
    check_len("constraint oracle dimension", set.dim(), constraints.dim())?;
    let objective = SlotObjective { loss, slot: t };
    let snap = constraints.snapshot(t);
    augmented_lagrangian(&objective, &snap, constraints.count(), set, opts)
}

/// Dynamic benchmark for slots `1..=horizon`, solved in parallel.
pub fn dynamic_benchmark(
    loss: &dyn LossOracle,
    constraints: &ConstraintOracle,
    set: &FeasibleSet,
    horizon: usize,
    opts: &BenchmarkOptions,
) -> Result<BenchmarkTrace> {
    let sols: Vec<BenchmarkSolution> = (1..=horizon)
        .into_par_iter()
        .map(|t| solve_dynamic_benchmark(loss, constraints, set, t, opts))
        .collect::<Result<_>>()?;
    Ok(BenchmarkTrace {
        kind: BenchmarkKind::Dynamic,
        feasible: sols.iter().map(|s| s.feasible).collect(),
        residuals: sols.iter().map(|s| s.residual).collect(),
        converged: sols.iter().map(|s| s.converged).collect(),
        decisions: sols.into_iter().map(|s| s.decision).collect(),
    })
}

/// `x* = argmin Σ_t f_t(x)` s.t. `g_t(x) ⪯ 0` for every `t`, `x ∈ X_0`.
///
/// Affine constraints share one matrix, so the `T` constraint blocks reduce
/// to the row-wise maximum offset. General constraints are stacked. The
/// result has `feasible = [false]` when the intersection looks empty.
pub fn solve_static_benchmark(
    loss: &dyn LossOracle,
    constraints: &ConstraintOracle,
    set: &FeasibleSet,
    horizon: usize,
    opts: &BenchmarkOptions,
) -> Result<BenchmarkTrace> {
    if horizon == 0 {
        return Err(Error::contract("horizon must be at least one slot"));
    }
    check_len("constraint oracle dimension", set.dim(), constraints.dim())?;
    let summed = loss.summed(1, horizon);
    let fallback = SummedObjective {
        loss,
        first: 1,
        last: horizon,
    };
    let inner: &dyn Objective = match &summed {
        Some(s) => s.as_ref(),
        None => &fallback,
    };
    let objective = Averaged {
        inner,
        weight: 1.0 / horizon as f64,
    };
    let sol = match constraints {
        ConstraintOracle::Affine(a) => {
            let mut worst = a.offset_at(1);
            for t in 2..=horizon {
                for (w, v) in worst.iter_mut().zip(a.offset_at(t)) {
                    *w = w.max(v);
                }
            }
            let snap = ConstraintSnapshot::Affine {
                matrix: a.shared_matrix(),
                offset: worst,
            };
            augmented_lagrangian(&objective, &snap, constraints.count(), set, opts)?
        }
        ConstraintOracle::General(_) => {
            let stacked = Stacked {
                oracle: constraints,
                first: 1,
                last: horizon,
            };
            augmented_lagrangian(&objective, &stacked, constraints.count() * horizon, set, opts)?
        }
    };
    Ok(BenchmarkTrace {
        kind: BenchmarkKind::Static,
        decisions: vec![sol.decision],
        feasible: vec![sol.feasible],
        residuals: vec![sol.residual],
        converged: vec![sol.converged],
    })
}

/// Grid points allowed in [`brute_force_oracle`].
pub const GRID_LIMIT: f64 = 1e7;

fn axis(lo: f64, hi: f64, resolution: f64) -> Vec<f64> {
    let steps = ((hi - lo) / resolution).round() as usize;
    let mut v: Vec<f64> = (0..=steps).map(|i| (lo + i as f64 * resolution).min(hi)).collect();
    if v.last().is_some_and(|l| *l < hi) {
        v.push(hi);
    }
    v
}

/// Exhaustive grid minimizer over a box of dimension at most 3.
pub fn brute_force_oracle(objective: impl Fn(&[f64]) -> f64, set: &BoxSet, resolution: f64) -> Result<DecisionVector> {
    if set.dim() > 3 {
        return Err(Error::contract(format!("brute force needs n ≤ 3, got {}", set.dim())));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::contract("resolution must be positive"));
    }
    let points: f64 = (0..set.dim())
        .map(|i| ((set.upper()[i] - set.lower()[i]) / resolution).floor() + 1.0)
        .product();
    if points > GRID_LIMIT {
        return Err(Error::GridTooLarge {
            points,
            limit: GRID_LIMIT,
        });
    }
    let axes: Vec<Vec<f64>> = (0..set.dim())
        .map(|i| axis(set.lower()[i], set.upper()[i], resolution))
        .collect();
    let mut idx = vec![0usize; set.dim()];
    let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best = (objective(&x), x.clone());
    loop {
        let mut i = 0;
        loop {
            if i == idx.len() {
                return DecisionVector::new(best.1);
            }
            idx[i] += 1;
            if idx[i] < axes[i].len() {
                x[i] = axes[i][idx[i]];
                break;
            }
            idx[i] = 0;
            x[i] = axes[i][0];
            i += 1;
        }
        let v = objective(&x);
        if v < best.0 {
            best = (v, x.clone());
        }
    }
}

/// One sweep of exact grid search along each coordinate in turn. This finds
/// the grid minimizer whenever the objective is separable, and allows any
/// dimension.
pub fn coordinate_grid_oracle(objective: impl Fn(&[f64]) -> f64, set: &BoxSet, resolution: f64) -> Result<DecisionVector> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(Error::contract("resolution must be positive"));
    }
    let mut x = set.midpoint();
    for i in 0..set.dim() {
        let mut best = (f64::INFINITY, x[i]);
        for v in axis(set.lower()[i], set.upper()[i], resolution) {
            x[i] = v;
            let f = objective(&x);
            if f < best.0 {
                best = (f, v);
            }
        }
        x[i] = best.1;
    }
    DecisionVector::new(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problem::FnLoss;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn quad_loss(target: impl Fn(usize) -> f64 + Send + Sync + Clone + 'static) -> FnLoss {
        let t2 = target.clone();
        FnLoss::new(1, move |t, x| (x[0] - target(t)).powi(2), move |t, x| vec![2.0 * (x[0] - t2(t))])
    }

    fn upper_limit(c: impl Fn(usize) -> f64 + Send + Sync + 'static) -> ConstraintOracle {
        ConstraintOracle::affine(Matrix::from_rows(&[vec![1.0]]), move |t| vec![-c(t)])
    }

    fn grid_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        let b = BoxSet::new(vec![lo], vec![hi]).unwrap();
        brute_force_oracle(|x| f(x[0]), &b, 1e-4).unwrap()[0]
    }

    #[test]
    fn unconstrained_minimum_already_feasible() {
        let set = FeasibleSet::boxed(vec![-2.0], vec![2.0]).unwrap();
        let s = solve_dynamic_benchmark(&quad_loss(|_| 0.0), &upper_limit(|_| 1.0), &set, 1, &Default::default()).unwrap();
        assert!(s.decision[0].abs() < 1e-6);
        assert!(s.feasible && s.converged);
    }

    #[test]
    fn active_constraint_matches_grid_search() {
        let set = FeasibleSet::boxed(vec![0.0], vec![3.0]).unwrap();
        let s = solve_dynamic_benchmark(&quad_loss(|_| 2.0), &upper_limit(|_| 1.0), &set, 1, &Default::default()).unwrap();
        // Feasible region is [0, 1]; search it directly.
        let oracle = grid_1d(|x| (x - 2.0).powi(2), 0.0, 1.0);
        assert!((s.decision[0] - oracle).abs() < 1e-4, "{} vs {oracle}", s.decision[0]);
        assert!(s.max_violation <= 1e-6);
    }

    #[test]
    fn separable_instance_with_inactive_constraints_is_componentwise() {
        // f(x) = Σ w_i (x_i − a_i)², constraint far away.
        let a = [0.3, -0.7, 1.4];
        let w = [1.0, 3.0, 0.5];
        let loss = FnLoss::new(
            3,
            move |_, x| (0..3).map(|i| w[i] * (x[i] - a[i]).powi(2)).sum(),
            move |_, x| (0..3).map(|i| 2.0 * w[i] * (x[i] - a[i])).collect(),
        );
        let g = ConstraintOracle::affine(Matrix::from_rows(&[vec![1.0, 1.0, 1.0]]), |_| vec![-100.0]);
        let set = FeasibleSet::boxed(vec![-1.0, -0.5, -1.0], vec![1.0, 1.0, 1.0]).unwrap();
        let s = solve_dynamic_benchmark(&loss, &g, &set, 1, &Default::default()).unwrap();
        let expect = [0.3, -0.5, 1.0];
        for i in 0..3 {
            assert!((s.decision[i] - expect[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn static_matches_dynamic_when_time_invariant() {
        let set = FeasibleSet::boxed(vec![0.0], vec![3.0]).unwrap();
        let loss = quad_loss(|_| 2.0);
        let g = upper_limit(|_| 1.2);
        let opts = BenchmarkOptions::default();
        let d = dynamic_benchmark(&loss, &g, &set, 5, &opts).unwrap();
        let s = solve_static_benchmark(&loss, &g, &set, 5, &opts).unwrap();
        for t in 1..=5 {
            assert!((d.decision_at(t)[0] - s.decision_at(t)[0]).abs() <= 2e-6);
        }
    }

    #[test]
    fn static_two_slot_average() {
        let set = FeasibleSet::boxed(vec![-5.0], vec![5.0]).unwrap();
        let loss = quad_loss(|t| if t == 1 { 0.0 } else { 1.0 });
        let s = solve_static_benchmark(&loss, &upper_limit(|_| 10.0), &set, 2, &Default::default()).unwrap();
        let oracle = grid_1d(|x| x * x + (x - 1.0).powi(2), -5.0, 5.0);
        assert!((s.decisions[0][0] - 0.5).abs() < 1e-6);
        assert!((oracle - 0.5).abs() < 1e-4);
    }

    #[test]
    fn static_respects_tightest_slot() {
        let set = FeasibleSet::boxed(vec![0.0], vec![2.0]).unwrap();
        let loss = quad_loss(|_| 1.0);
        let g = upper_limit(|t| if t == 3 { 0.3 } else { 2.0 });
        let s = solve_static_benchmark(&loss, &g, &set, 4, &Default::default()).unwrap();
        let oracle = grid_1d(|x| 4.0 * (x - 1.0).powi(2), 0.0, 0.3);
        assert!((s.decisions[0][0] - oracle).abs() < 1e-4);
        assert!(s.is_available());
    }

    #[test]
    fn static_with_general_constraints_is_stacked() {
        let set = FeasibleSet::boxed(vec![0.0], vec![2.0]).unwrap();
        let loss = quad_loss(|_| 1.0);
        let g = upper_limit(|t| if t == 2 { 0.4 } else { 2.0 });
        let general = ConstraintOracle::General(g.as_general());
        let s = solve_static_benchmark(&loss, &general, &set, 3, &Default::default()).unwrap();
        assert!((s.decisions[0][0] - 0.4).abs() < 1e-5);
    }

    #[test]
    fn empty_intersection_makes_static_unavailable() {
        let set = FeasibleSet::boxed(vec![0.0], vec![2.0]).unwrap();
        // x ≤ −1 at slot 1 cannot hold inside [0, 2].
        let g = upper_limit(|t| if t == 1 { -1.0 } else { 2.0 });
        let s = solve_static_benchmark(&quad_loss(|_| 1.0), &g, &set, 2, &Default::default()).unwrap();
        assert!(!s.is_available());
    }

    #[test]
    fn dynamic_beats_random_feasible_points() {
        let loss = FnLoss::new(
            2,
            |t, x| (x[0] - 0.1 * t as f64).powi(2) + 2.0 * (x[1] + 0.5).powi(2) + x[0] * x[1],
            |t, x| vec![2.0 * (x[0] - 0.1 * t as f64) + x[1], 4.0 * (x[1] + 0.5) + x[0]],
        );
        let g = ConstraintOracle::affine(Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, -2.0]]), |t| vec![-0.2 * t as f64, -0.5]);
        let set = FeasibleSet::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let b = set.as_box().unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for t in 1..=4 {
            let s = solve_dynamic_benchmark(&loss, &g, &set, t, &Default::default()).unwrap();
            assert!(s.feasible);
            let best = loss.value(t, &s.decision);
            let mut checked = 0;
            while checked < 1000 {
                let x = b.sample(&mut rng);
                if g.eval(t, &x).iter().all(|v| *v <= 0.0) {
                    assert!(best <= loss.value(t, &x) + 1e-9);
                    checked += 1;
                }
            }
        }
    }

    #[test]
    fn brute_force_quadratic() {
        let b = BoxSet::new(vec![0.0], vec![1.0]).unwrap();
        let x = brute_force_oracle(|x| (x[0] - 0.123456).powi(2), &b, 1e-4).unwrap();
        assert!((x[0] - 0.123456).abs() <= 1e-4);
    }

    #[test]
    fn brute_force_nonsmooth() {
        let b = BoxSet::new(vec![0.0], vec![1.0]).unwrap();
        let x = brute_force_oracle(|x| (x[0] - 0.3).abs(), &b, 1e-4).unwrap();
        assert!((x[0] - 0.3).abs() <= 1e-4);
    }

    #[test]
    fn brute_force_matches_p2_closed_form() {
        use crate::algorithm::{solve_closed_form, P2Instance};
        let snap = ConstraintSnapshot::Affine {
            matrix: std::sync::Arc::new(Matrix::from_rows(&[vec![1.0, -0.5]])),
            offset: vec![0.2],
        };
        let p = P2Instance {
            gradient: &[0.7, -1.1],
            delayed_anchor: &[0.2, 0.9],
            previous: &[0.4, 0.3],
            multiplier: &[0.8],
            constraint: &snap,
            alpha: 1.5,
            eta: 0.5,
            gamma: 1.0,
        };
        let b = BoxSet::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let res = 1e-3;
        let grid = brute_force_oracle(|x| p.objective(x), &b, res).unwrap();
        let exact = solve_closed_form(&p, &b).unwrap();
        assert!(linalg::dist2(&grid, &exact) <= 2.0 * res * 2f64.sqrt());
    }

    #[test]
    fn brute_force_refuses_large_grids() {
        let b = BoxSet::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        assert!(matches!(brute_force_oracle(|_| 0.0, &b, 1e-3), Err(Error::GridTooLarge { .. })));
        let b4 = BoxSet::new(vec![0.0; 4], vec![1.0; 4]).unwrap();
        assert!(brute_force_oracle(|_| 0.0, &b4, 0.5).is_err());
    }

    #[test]
    fn coordinate_oracle_agrees_with_exhaustive_on_separable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = BoxSet::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        for _ in 0..5 {
            let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-0.5..1.5)).collect();
            let f = |x: &[f64]| (x[0] - a[0]).powi(2) + 3.0 * (x[1] - a[1]).powi(2);
            let full = brute_force_oracle(f, &b, 1e-3).unwrap();
            let coord = coordinate_grid_oracle(f, &b, 1e-3).unwrap();
            assert!(linalg::dist2(&full, &coord) < 1e-12);
        }
    }
}
