//! The delay-tolerant constrained OCO algorithm.
//!
//! Slots `1..=τ` play a fixed initial decision with an empty queue. At each
//! later slot `t` the decision is the minimizer of the per-slot problem built
//! from slot-`t−τ` feedback, and the queue then absorbs `γ g_{t−τ}(x_t)`.

mod p2;
mod run;
mod step_size;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

pub use p2::{gradient_mapping_norm, solve_closed_form, solve_iterative, IterativeSolution, P2Instance, SolverStatus};
pub use run::run_online;
pub use step_size::{pick_step_sizes, StepSizePolicy, StepSizes};

use crate::delay::DelayBuffer;
use crate::error::{check_len, Error, Result};
use crate::linalg;
use crate::problem::{DecisionVector, FeasibleSet};

/// Virtual queue `Q_t ∈ R^C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualQueue(Vec<f64>);

impl VirtualQueue {
    pub fn zeros(count: usize) -> Self {
        VirtualQueue(vec![0.0; count])
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        VirtualQueue(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm2(&self.0)
    }

    /// `Q_t^c = max{−γ g^c, Q_{t−1}^c + γ g^c}` where `g = g_{t−τ}(x_t)`.
    pub fn updated(&self, delayed_g: &[f64], gamma: f64) -> Result<VirtualQueue> {
        check_len("delayed constraint value", self.0.len(), delayed_g.len())?;
        Ok(VirtualQueue(
            self.0
                .iter()
                .zip(delayed_g)
                .map(|(q, g)| (-gamma * g).max(q + gamma * g))
                .collect(),
        ))
    }
}

/// Which proximal anchors the per-slot problem keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizationMode {
    /// Both `α‖x−x_{t−τ}‖²` and `η‖x−x_{t−1}‖²`.
    #[default]
    Double,
    /// Drop the `η` term.
    OnlyDelayedAnchor,
    /// Drop the `α` term.
    OnlyPreviousAnchor,
}

impl RegularizationMode {
    pub fn label(self) -> &'static str {
        match self {
            RegularizationMode::Double => "double",
            RegularizationMode::OnlyDelayedAnchor => "only-delayed-anchor",
            RegularizationMode::OnlyPreviousAnchor => "only-previous-anchor",
        }
    }

    /// Effective `(α, η)` after dropping the disabled anchor.
    pub fn coefficients(self, sizes: &StepSizes) -> (f64, f64) {
        match self {
            RegularizationMode::Double => (sizes.alpha, sizes.eta),
            RegularizationMode::OnlyDelayedAnchor => (sizes.alpha, 0.0),
            RegularizationMode::OnlyPreviousAnchor => (0.0, sizes.eta),
        }
    }
}

/// Inner solver choice for the per-slot problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum P2Solver {
    /// Closed form when the set is a box and constraints are affine, else iterative.
    Auto { tol: f64, max_iters: usize },
    Iterative { tol: f64, max_iters: usize },
}

impl Default for P2Solver {
    fn default() -> Self {
        P2Solver::Auto {
            tol: 1e-10,
            max_iters: 10_000,
        }
    }
}

/// Everything that happened in one slot.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub slot: usize,
    pub decision: DecisionVector,
    pub queue_before: VirtualQueue,
    pub queue_after: VirtualQueue,
    /// `g_{t−τ}(x_t)`; `None` during warm-up.
    pub delayed_constraint: Option<Vec<f64>>,
    pub solver: SolverStatus,
}

#[derive(Clone, Debug)]
pub struct DtcOco {
    set: FeasibleSet,
    tau: usize,
    sizes: StepSizes,
    mode: RegularizationMode,
    solver: P2Solver,
    init: DecisionVector,
    queue: VirtualQueue,
    /// `x_{t−τ}, …, x_{t−1}` at the start of slot `t`.
    history: VecDeque<DecisionVector>,
    next_slot: usize,
}

impl DtcOco {
    /// Fix `x_1..x_τ` (default: the set's midpoint) and zero the queue.
    pub fn initialize(
        set: FeasibleSet,
        tau: usize,
        sizes: StepSizes,
        mode: RegularizationMode,
        constraint_count: usize,
        x_init: Option<DecisionVector>,
    ) -> Result<Self> {
        if tau == 0 {
            return Err(Error::contract("delay must be at least one slot"));
        }
        sizes.validate()?;
        let (alpha, eta) = mode.coefficients(&sizes);
        if alpha + eta <= 0.0 {
            return Err(Error::contract(format!(
                "mode {} leaves no regularization (alpha = {alpha}, eta = {eta})",
                mode.label()
            )));
        }
        let init = match x_init {
            Some(x) => {
                check_len("initial decision", set.dim(), x.len())?;
                if !set.contains(&x, 1e-12) {
                    return Err(Error::contract("initial decision is outside the feasible set"));
                }
                x
            }
            None => set.default_point(),
        };
        Ok(DtcOco {
            set,
            tau,
            sizes,
            mode,
            solver: P2Solver::default(),
            init,
            queue: VirtualQueue::zeros(constraint_count),
            history: VecDeque::with_capacity(tau + 1),
            next_slot: 1,
        })
    }

    pub fn with_solver(mut self, solver: P2Solver) -> Self {
        self.solver = solver;
        self
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn step_sizes(&self) -> &StepSizes {
        &self.sizes
    }

    pub fn mode(&self) -> RegularizationMode {
        self.mode
    }

    pub fn queue(&self) -> &VirtualQueue {
        &self.queue
    }

    pub fn initial_decision(&self) -> &DecisionVector {
        &self.init
    }

    pub fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    /// Decisions `x_{t−τ}..x_{t−1}` held for the next slot.
    pub fn history(&self) -> impl Iterator<Item = &DecisionVector> {
        self.history.iter()
    }

    /// Decide `x_t` and, after the warm-up, update the queue at the end of the slot.
    pub fn step(&mut self, buffer: &mut DelayBuffer, t: usize) -> Result<StepReport> {
        if t != self.next_slot {
            return Err(Error::contract(format!("expected slot {}, got {t}", self.next_slot)));
        }
        if buffer.tau() != self.tau {
            return Err(Error::contract(format!(
                "buffer delay {} differs from algorithm delay {}",
                buffer.tau(),
                self.tau
            )));
        }
        let queue_before = self.queue.clone();
        let report = if t <= self.tau {
            StepReport {
                slot: t,
                decision: self.init.clone(),
                queue_before: queue_before.clone(),
                queue_after: queue_before,
                delayed_constraint: None,
                solver: SolverStatus {
                    iterations: 0,
                    converged: true,
                },
            }
        } else {
            self.solve_slot(buffer, t, queue_before)?
        };
        self.history.push_back(report.decision.clone());
        if self.history.len() > self.tau {
            self.history.pop_front();
        }
        self.queue = report.queue_after.clone();
        self.next_slot += 1;
        Ok(report)
    }

    fn solve_slot(&self, buffer: &mut DelayBuffer, t: usize, queue_before: VirtualQueue) -> Result<StepReport> {
        let origin = t - self.tau;
        let gradient = buffer
            .latest_usable(t)
            .map(|f| f.loss_gradient.clone())
            .ok_or_else(|| Error::contract(format!("feedback for slot {origin} missing at slot {t}")))?;
        let delayed = buffer.constraint_at(t, origin)?;
        let earlier = buffer.constraint_at(t, origin - 1)?;
        check_len("delayed constraint count", self.queue.len(), delayed.count())?;

        let delayed_anchor = self.history.front().expect("history holds tau decisions");
        let previous = self.history.back().expect("history holds tau decisions");
        let gamma = self.sizes.gamma;
        let mut multiplier = self.queue.values().to_vec();
        linalg::axpy(&mut multiplier, gamma, &earlier.eval(previous));

        let (alpha, eta) = self.mode.coefficients(&self.sizes);
        let instance = P2Instance {
            gradient: &gradient,
            delayed_anchor,
            previous,
            multiplier: &multiplier,
            constraint: &delayed,
            alpha,
            eta,
            gamma,
        };
        let (decision, solver) = match (self.solver, self.set.as_box()) {
            (P2Solver::Auto { .. }, Some(bx)) if delayed.is_affine_or_zero() => (
                solve_closed_form(&instance, bx)?,
                SolverStatus {
                    iterations: 1,
                    converged: true,
                },
            ),
            (P2Solver::Auto { tol, max_iters }, _) | (P2Solver::Iterative { tol, max_iters }, _) => {
                let sol = solve_iterative(&instance, &self.set, tol, max_iters)?;
                (sol.decision, sol.status)
            }
        };
        let delayed_value = delayed.eval(&decision);
        let queue_after = queue_before.updated(&delayed_value, gamma)?;
        Ok(StepReport {
            slot: t,
            decision,
            queue_before,
            queue_after,
            delayed_constraint: Some(delayed_value),
            solver,
        })
    }
}
