//! The per-slot problem
//!
//! ```text
//! min_{x ∈ X_0}  ∇f_{t−τ}(x_{t−τ})ᵀ(x − x_{t−τ})
//!              + γ [Q_{t−1} + γ g_{t−τ−1}(x_{t−1})]ᵀ g_{t−τ}(x)
//!              + α‖x − x_{t−τ}‖² + η‖x − x_{t−1}‖²
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::problem::{BoxSet, ConstraintSnapshot, DecisionVector, FeasibleSet};

#[derive(Clone, Copy, Debug)]
pub struct P2Instance<'a> {
    /// `∇f_{t−τ}(x_{t−τ})`
    pub gradient: &'a [f64],
    /// `x_{t−τ}`
    pub delayed_anchor: &'a [f64],
    /// `x_{t−1}`
    pub previous: &'a [f64],
    /// `Q_{t−1} + γ g_{t−τ−1}(x_{t−1})`
    pub multiplier: &'a [f64],
    /// `g_{t−τ}`
    pub constraint: &'a ConstraintSnapshot,
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
}

impl P2Instance<'_> {
    fn check(&self) -> Result<()> {
        let n = self.gradient.len();
        check_len("delayed anchor", n, self.delayed_anchor.len())?;
        check_len("previous decision", n, self.previous.len())?;
        check_len("queue multiplier", self.constraint.count(), self.multiplier.len())?;
        if !(self.alpha >= 0.0 && self.eta >= 0.0 && self.alpha + self.eta > 0.0) {
            return Err(Error::contract(format!(
                "P2 needs alpha + eta > 0 (alpha = {}, eta = {})",
                self.alpha, self.eta
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let lin = linalg::dot(self.gradient, &linalg::sub(x, self.delayed_anchor));
        let penalty = self.gamma * linalg::dot(self.multiplier, &self.constraint.eval(x));
        let reg = self.alpha * linalg::dist2(x, self.delayed_anchor).powi(2)
            + self.eta * linalg::dist2(x, self.previous).powi(2);
        lin + penalty + reg
    }

    pub fn objective_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.gradient.to_vec();
        let jt = self.constraint.vjp(x, self.multiplier);
        linalg::axpy(&mut g, self.gamma, &jt);
        for i in 0..g.len() {
            g[i] += 2.0 * self.alpha * (x[i] - self.delayed_anchor[i]) + 2.0 * self.eta * (x[i] - self.previous[i]);
        }
        g
    }

    /// Strong-convexity modulus of the objective.
    pub fn modulus(&self) -> f64 {
        2.0 * (self.alpha + self.eta)
    }
}

/// Exact minimizer on a box when `g_{t−τ}` is affine.
///
/// The objective is then `ℓᵀx + (α+η)‖x‖² + const` with
/// `ℓ = ∇f − 2αx_{t−τ} − 2ηx_{t−1} + γCᵀm`; the Hessian is isotropic, so
/// clamping the unconstrained minimizer is exact.
pub fn solve_closed_form(p: &P2Instance<'_>, set: &BoxSet) -> Result<DecisionVector> {
    p.check()?;
    check_len("box dimension", p.dim(), set.dim())?;
    let mut linear = p.gradient.to_vec();
    match p.constraint {
        ConstraintSnapshot::Zero { .. } => {}
        ConstraintSnapshot::Affine { matrix, .. } => {
            check_len("constraint matrix columns", p.dim(), matrix.cols())?;
            linalg::axpy(&mut linear, p.gamma, &matrix.mul_transpose_vec(p.multiplier));
        }
        ConstraintSnapshot::General { .. } => {
            return Err(Error::contract("closed-form P2 needs affine constraints"));
        }
    }
    let denom = 2.0 * (p.alpha + p.eta);
    let unconstrained: Vec<f64> = (0..p.dim())
        .map(|i| (2.0 * p.alpha * p.delayed_anchor[i] + 2.0 * p.eta * p.previous[i] - linear[i]) / denom)
        .collect();
    DecisionVector::new(set.clamp(&unconstrained))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStatus {
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct IterativeSolution {
    pub decision: DecisionVector,
    pub status: SolverStatus,
}

/// Projected gradient on P2, warm-started at `x_{t−1}`.
///
/// Trial step `1/(2(α+η))` (exact for affine constraints, where one step lands
/// on the minimizer), halved until the quadratic upper model holds. Stops when
/// the gradient mapping scaled by the trial step drops below `tol`.
pub fn solve_iterative(p: &P2Instance<'_>, set: &FeasibleSet, tol: f64, max_iters: usize) -> Result<IterativeSolution> {
    p.check()?;
    check_len("feasible set dimension", p.dim(), set.dim())?;
    let base_step = 1.0 / p.modulus();
    let mut x = set.project(p.previous)?.into_inner();
    let mut fx = p.objective(&x);
    let mut status = SolverStatus::default();
    while status.iterations < max_iters {
        status.iterations += 1;
        let grad = p.objective_gradient(&x);
        let mut step = base_step;
        let (next, f_next) = loop {
            let trial = set.project(&linalg::sub(&x, &linalg::scale(&grad, step)))?.into_inner();
            let f_trial = p.objective(&trial);
            let dx = linalg::sub(&trial, &x);
            let model = fx + linalg::dot(&grad, &dx) + linalg::norm2_sq(&dx) / (2.0 * step);
            if f_trial <= model + 1e-12 * fx.abs().max(1.0) || step < 1e-30 {
                break (trial, f_trial);
            }
            step *= 0.5;
        };
        let moved = linalg::dist2(&next, &x) * (base_step / step);
        x = next;
        fx = f_next;
        if moved < tol {
            status.converged = true;
            break;
        }
    }
    Ok(IterativeSolution {
        decision: DecisionVector::new(x)?,
        status,
    })
}

/// `‖x − P(x − s∇h(x))‖ / s` with `s = 1/(2(α+η))`. Zero exactly at the minimizer.
pub fn gradient_mapping_norm(p: &P2Instance<'_>, set: &FeasibleSet, x: &[f64]) -> Result<f64> {
    let s = 1.0 / p.modulus();
    let stepped = set.project(&linalg::sub(x, &linalg::scale(&p.objective_gradient(x), s)))?;
    Ok(linalg::dist2(x, &stepped) / s)
}
