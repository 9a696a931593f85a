use crate::delay::{DelayBuffer, SlotFeedback};
use crate::error::{check_len, Result};
use crate::metrics::{RunTrace, SlotRecord};
use crate::problem::{ConstraintOracle, LossOracle};

use super::DtcOco;

/// Play slots `1..=horizon` against the given oracles. Feedback for slot `t`
/// enters the delay buffer at the end of slot `t`, and the buffer decides
/// when the algorithm may read it.
pub fn run_online(
    alg: &mut DtcOco,
    loss: &dyn LossOracle,
    constraints: &ConstraintOracle,
    horizon: usize,
    audit: bool,
) -> Result<RunTrace> {
    let n = alg.feasible_set().dim();
    check_len("loss oracle dimension", n, loss.dim())?;
    check_len("constraint oracle dimension", n, constraints.dim())?;
    check_len("queue length", alg.queue().len(), constraints.count())?;
    let mut buffer = DelayBuffer::new(alg.tau(), constraints.count())?;
    if audit {
        buffer = buffer.with_audit();
    }
    let mut records = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let report = alg.step(&mut buffer, t)?;
        let x = report.decision;
        let cost = loss.value(t, &x);
        let constraint = constraints.eval(t, &x);
        buffer.push(SlotFeedback {
            origin_slot: t,
            loss_gradient: loss.gradient(t, &x),
            constraint: constraints.snapshot(t),
            decision: x.clone(),
        })?;
        records.push(SlotRecord {
            slot: t,
            decision: x.into_inner(),
            cost,
            constraint,
            queue: report.queue_after.values().to_vec(),
            delayed_constraint: report.delayed_constraint,
            solver: report.solver,
        });
    }
    Ok(RunTrace {
        tau: alg.tau(),
        step_sizes: *alg.step_sizes(),
        mode: alg.mode(),
        records,
        audit: audit.then(|| buffer.audit()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithm::{RegularizationMode, StepSizes};
    use crate::linalg::Matrix;
    use crate::metrics::{lemma_checks, LEMMA_TOL};
    use crate::problem::{FeasibleSet, FnLoss};

    // f_t(x) = Σ_i (x_i − a_t,i)², g_t(x) = C x + d_t on [0, 2]².
    fn target(t: usize) -> [f64; 2] {
        [1.0 + 0.5 * (t as f64 * 0.7).sin(), 0.3 + 0.2 * (t as f64 * 1.3).cos()]
    }

    fn offset(t: usize) -> Vec<f64> {
        vec![-1.0 + 0.1 * (t as f64).sin(), -0.2]
    }

    fn rows() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.5], vec![-1.0, 1.0]]
    }

    fn oracles() -> (FnLoss, ConstraintOracle) {
        let loss = FnLoss::new(
            2,
            |t, x| {
                let a = target(t);
                (x[0] - a[0]).powi(2) + (x[1] - a[1]).powi(2)
            },
            |t, x| {
                let a = target(t);
                vec![2.0 * (x[0] - a[0]), 2.0 * (x[1] - a[1])]
            },
        );
        (loss, ConstraintOracle::affine(Matrix::from_rows(&rows()), offset))
    }

    /// Straight-line τ = 1 loop with everything written out by hand.
    fn reference(horizon: usize, alpha: f64, eta: f64, gamma: f64) -> Vec<[f64; 2]> {
        let c = rows();
        let g = |t: usize, x: &[f64; 2]| -> [f64; 2] {
            if t == 0 {
                return [0.0, 0.0];
            }
            let d = offset(t);
            [c[0][0] * x[0] + c[0][1] * x[1] + d[0], c[1][0] * x[0] + c[1][1] * x[1] + d[1]]
        };
        let mut xs = vec![[1.0, 1.0]];
        let mut q = [0.0, 0.0];
        for t in 2..=horizon {
            let prev = xs[t - 2];
            let a = target(t - 1);
            let grad = [2.0 * (prev[0] - a[0]), 2.0 * (prev[1] - a[1])];
            // g_{t−2}(x_{t−1}), with g_0 ≡ 0.
            let gp = g(t - 2, &prev);
            let m = [q[0] + gamma * gp[0], q[1] + gamma * gp[1]];
            let mut x = [0.0; 2];
            for i in 0..2 {
                let l = grad[i] + gamma * (c[0][i] * m[0] + c[1][i] * m[1]);
                let raw = (2.0 * alpha * prev[i] + 2.0 * eta * prev[i] - l) / (2.0 * (alpha + eta));
                x[i] = raw.clamp(0.0, 2.0);
            }
            let gn = g(t - 1, &x);
            for k in 0..2 {
                q[k] = (-gamma * gn[k]).max(q[k] + gamma * gn[k]);
            }
            xs.push(x);
        }
        xs
    }

    #[test]
    fn tau_one_matches_reference_loop() {
        let (loss, g) = oracles();
        let set = FeasibleSet::boxed(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let sizes = StepSizes::new(3.0, 1.5, 0.7).unwrap();
        let mut alg = DtcOco::initialize(set, 1, sizes, RegularizationMode::Double, 2, None).unwrap();
        let tr = run_online(&mut alg, &loss, &g, 60, false).unwrap();
        let reference = reference(60, 3.0, 1.5, 0.7);
        for (r, x) in tr.records.iter().zip(&reference) {
            assert!((r.decision[0] - x[0]).abs() < 1e-12 && (r.decision[1] - x[1]).abs() < 1e-12, "slot {}", r.slot);
        }
    }

    #[test]
    fn audited_runs_are_clean_and_satisfy_lemmas() {
        let (loss, g) = oracles();
        for tau in [1, 3, 8] {
            let set = FeasibleSet::boxed(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
            let sizes = StepSizes::new(2.0, 1.0, 1.0).unwrap();
            let mut alg = DtcOco::initialize(set, tau, sizes, RegularizationMode::Double, 2, None).unwrap();
            let tr = run_online(&mut alg, &loss, &g, 100, true).unwrap();
            let audit = tr.audit.clone().unwrap();
            assert!(audit.is_clean() && audit.reads > 0);
            let rep = lemma_checks(&tr, LEMMA_TOL).unwrap();
            assert_eq!(rep.slots_checked, 100 - tau);
            assert!(rep.lemma1_holds() && rep.lemma2_holds());
            tr.validate().unwrap();
        }
    }

    #[test]
    fn general_constraint_path_matches_affine_path() {
        let (loss, g) = oracles();
        let general = ConstraintOracle::General(g.as_general());
        let run = |c: &ConstraintOracle| {
            let set = FeasibleSet::boxed(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
            let sizes = StepSizes::new(2.0, 1.0, 1.0).unwrap();
            let mut alg = DtcOco::initialize(set, 2, sizes, RegularizationMode::Double, 2, None).unwrap();
            run_online(&mut alg, &loss, c, 40, false).unwrap()
        };
        let (a, b) = (run(&g), run(&general));
        for (ra, rb) in a.records.iter().zip(&b.records) {
            for (u, v) in ra.decision.iter().zip(&rb.decision) {
                assert!((u - v).abs() < 1e-6);
            }
        }
    }
}
