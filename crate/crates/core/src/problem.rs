//! Shared domain types: decisions, the short-term feasible set, loss and
//! long-term constraint oracles, and the bound constants `D, β, G, ε, R`.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, Matrix};

/// A per-slot decision `x_t`. All coordinates are finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector(Vec<f64>);

impl DecisionVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "decision coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(DecisionVector(coords))
    }

    pub fn zeros(n: usize) -> Self {
        DecisionVector(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DecisionVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Axis-aligned box `{x : lower ⪯ x ⪯ upper}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len("box bounds", lower.len(), upper.len())?;
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(Error::contract(format!(
                    "box coordinate {i} has invalid bounds [{l}, {u}]"
                )));
            }
        }
        Ok(BoxSet { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        linalg::dist2(&self.upper, &self.lower)
    }

    pub fn clamp(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (l, u))| x.clamp(*l, *u))
            .collect()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
    }

    /// Corner selected by the low `dim` bits of `mask` (bit set = upper bound).
    pub fn corner(&self, mask: u64) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                if i < 64 && mask >> i & 1 == 1 {
                    self.upper[i]
                } else {
                    self.lower[i]
                }
            })
            .collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| if l == u { *l } else { rng.gen_range(*l..=*u) })
            .collect()
    }
}

pub type ProjectionFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// The short-term constraint set `X_0`.
#[derive(Clone)]
pub enum FeasibleSet {
    Box(BoxSet),
    /// A user-supplied Euclidean projection.
    General {
        dim: usize,
        project: Arc<ProjectionFn>,
    },
}

impl fmt::Debug for FeasibleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeasibleSet::Box(b) => f.debug_tuple("Box").field(b).finish(),
            FeasibleSet::General { dim, .. } => {
                f.debug_struct("General").field("dim", dim).finish_non_exhaustive()
            }
        }
    }
}

impl FeasibleSet {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        BoxSet::new(lower, upper).map(FeasibleSet::Box)
    }

    pub fn general(
        dim: usize,
        project: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FeasibleSet::General {
            dim,
            project: Arc::new(project),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box(b) => b.dim(),
            FeasibleSet::General { dim, .. } => *dim,
        }
    }

    pub fn as_box(&self) -> Option<&BoxSet> {
        match self {
            FeasibleSet::Box(b) => Some(b),
            FeasibleSet::General { .. } => None,
        }
    }

    pub fn project(&self, v: &[f64]) -> Result<DecisionVector> {
        check_len("projection input", self.dim(), v.len())?;
        let out = match self {
            FeasibleSet::Box(b) => b.clamp(v),
            FeasibleSet::General { dim, project } => {
                let p = project(v);
                check_len("projection oracle output", *dim, p.len())?;
                p
            }
        };
        DecisionVector::new(out)
    }

    /// Membership test. For general sets this compares against the projection.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::Box(b) => b.contains(x, tol),
            FeasibleSet::General { dim, project } => {
                x.len() == *dim && linalg::dist2(&project(x), x) <= tol
            }
        }
    }

    /// Default starting decision: the box midpoint, or the projection of the
    /// origin for general sets.
    pub fn default_point(&self) -> DecisionVector {
        match self {
            FeasibleSet::Box(b) => DecisionVector(b.midpoint()),
            FeasibleSet::General { dim, project } => DecisionVector(project(&vec![0.0; *dim])),
        }
    }
}

/// A slot-independent smooth objective. Used for offline benchmarks.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

/// Time-varying convex loss `f_t`. Slots are 1-based.
pub trait LossOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: usize, x: &[f64]) -> f64;
    fn gradient(&self, t: usize, x: &[f64]) -> Vec<f64>;

    /// `Σ_{s=first}^{last} f_s` as one objective, when the oracle can build
    /// it more cheaply than summing slot by slot.
    fn summed(&self, _first: usize, _last: usize) -> Option<Box<dyn Objective>> {
        None
    }
}

type LossValueFn = dyn Fn(usize, &[f64]) -> f64 + Send + Sync;
type LossGradFn = dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync;

/// Loss oracle built from a pair of closures.
#[derive(Clone)]
pub struct FnLoss {
    dim: usize,
    value: Arc<LossValueFn>,
    gradient: Arc<LossGradFn>,
}

impl FnLoss {
    pub fn new(
        dim: usize,
        value: impl Fn(usize, &[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(usize, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        FnLoss {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }
}

impl LossOracle for FnLoss {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, t: usize, x: &[f64]) -> f64 {
        (self.value)(t, x)
    }

    fn gradient(&self, t: usize, x: &[f64]) -> Vec<f64> {
        (self.gradient)(t, x)
    }
}

/// `f_t` restricted to one slot, as an [`Objective`].
pub struct SlotObjective<'a> {
    pub loss: &'a dyn LossOracle,
    pub slot: usize,
}

impl Objective for SlotObjective<'_> {
    fn dim(&self) -> usize {
        self.loss.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.loss.value(self.slot, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.loss.gradient(self.slot, x)
    }
}

/// `Σ_{s=first}^{last} f_s` evaluated slot by slot.
pub struct SummedObjective<'a> {
    pub loss: &'a dyn LossOracle,
    pub first: usize,
    pub last: usize,
}

impl Objective for SummedObjective<'_> {
    fn dim(&self) -> usize {
        self.loss.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.first..=self.last).map(|t| self.loss.value(t, x)).sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for t in self.first..=self.last {
            linalg::axpy(&mut g, 1.0, &self.loss.gradient(t, x));
        }
        g
    }
}

pub type OffsetFn = dyn Fn(usize) -> Vec<f64> + Send + Sync;
pub type ConstraintValueFn = dyn Fn(usize, &[f64]) -> Vec<f64> + Send + Sync;
pub type ConstraintJacobianFn = dyn Fn(usize, &[f64]) -> Matrix + Send + Sync;

/// `g_t(x) = C x + d_t` with a fixed matrix and slot-varying offset.
#[derive(Clone)]
pub struct AffineConstraints {
    matrix: Arc<Matrix>,
    offset: Arc<OffsetFn>,
}

impl AffineConstraints {
    pub fn new(matrix: Matrix, offset: impl Fn(usize) -> Vec<f64> + Send + Sync + 'static) -> Self {
        AffineConstraints {
            matrix: Arc::new(matrix),
            offset: Arc::new(offset),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn shared_matrix(&self) -> Arc<Matrix> {
        Arc::clone(&self.matrix)
    }

    pub fn offset_at(&self, t: usize) -> Vec<f64> {
        (self.offset)(t)
    }
}

/// Convex `g_t(x)` given as a closure, with an optional Jacobian. Without a
/// Jacobian, vector-Jacobian products fall back to central differences.
#[derive(Clone)]
pub struct GeneralConstraints {
    count: usize,
    dim: usize,
    value: Arc<ConstraintValueFn>,
    jacobian: Option<Arc<ConstraintJacobianFn>>,
}

impl GeneralConstraints {
    pub fn new(
        count: usize,
        dim: usize,
        value: impl Fn(usize, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        GeneralConstraints {
            count,
            dim,
            value: Arc::new(value),
            jacobian: None,
        }
    }

    pub fn with_jacobian(
        mut self,
        jacobian: impl Fn(usize, &[f64]) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.jacobian = Some(Arc::new(jacobian));
        self
    }

    pub fn value(&self, t: usize, x: &[f64]) -> Vec<f64> {
        (self.value)(t, x)
    }

    /// `J_t(x)ᵀ w`
    pub fn vjp(&self, t: usize, x: &[f64], w: &[f64]) -> Vec<f64> {
        if let Some(jac) = &self.jacobian {
            return jac(t, x).mul_transpose_vec(w);
        }
        let mut out = vec![0.0; x.len()];
        let mut probe = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-6 * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = linalg::dot(&(self.value)(t, &probe), w);
            probe[i] = x[i] - h;
            let down = linalg::dot(&(self.value)(t, &probe), w);
            probe[i] = x[i];
            out[i] = (up - down) / (2.0 * h);
        }
        out
    }
}

/// Long-term constraint functions `g_t : R^n → R^C`.
#[derive(Clone)]
pub enum ConstraintOracle {
    Affine(AffineConstraints),
    General(GeneralConstraints),
}

impl ConstraintOracle {
    pub fn affine(matrix: Matrix, offset: impl Fn(usize) -> Vec<f64> + Send + Sync + 'static) -> Self {
        ConstraintOracle::Affine(AffineConstraints::new(matrix, offset))
    }

    pub fn count(&self) -> usize {
        match self {
            ConstraintOracle::Affine(a) => a.matrix.rows(),
            ConstraintOracle::General(g) => g.count,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintOracle::Affine(a) => a.matrix.cols(),
            ConstraintOracle::General(g) => g.dim,
        }
    }

    pub fn eval(&self, t: usize, x: &[f64]) -> Vec<f64> {
        match self {
            ConstraintOracle::Affine(a) => {
                let mut v = a.matrix.mul_vec(x);
                linalg::axpy(&mut v, 1.0, &a.offset_at(t));
                v
            }
            ConstraintOracle::General(g) => g.value(t, x),
        }
    }

    /// `J_t(x)ᵀ w`
    pub fn vjp(&self, t: usize, x: &[f64], w: &[f64]) -> Vec<f64> {
        match self {
            ConstraintOracle::Affine(a) => a.matrix.mul_transpose_vec(w),
            ConstraintOracle::General(g) => g.vjp(t, x, w),
        }
    }

    /// Evaluable copy of `g_t`, as carried by delayed feedback.
    pub fn snapshot(&self, t: usize) -> ConstraintSnapshot {
        match self {
            ConstraintOracle::Affine(a) => ConstraintSnapshot::Affine {
                matrix: a.shared_matrix(),
                offset: a.offset_at(t),
            },
            ConstraintOracle::General(g) => ConstraintSnapshot::General {
                slot: t,
                oracle: g.clone(),
            },
        }
    }

    /// The same constraints viewed through the generic closure path.
    pub fn as_general(&self) -> GeneralConstraints {
        match self {
            ConstraintOracle::General(g) => g.clone(),
            ConstraintOracle::Affine(a) => {
                let a_val = a.clone();
                let a_jac = a.clone();
                GeneralConstraints::new(a.matrix.rows(), a.matrix.cols(), move |t, x| {
                    let mut v = a_val.matrix.mul_vec(x);
                    linalg::axpy(&mut v, 1.0, &a_val.offset_at(t));
                    v
                })
                .with_jacobian(move |_, _| (*a_jac.matrix).clone())
            }
        }
    }
}

/// A single slot's constraint function, frozen for later evaluation.
#[derive(Clone)]
pub enum ConstraintSnapshot {
    /// `g_0 ≡ 0`.
    Zero { count: usize },
    Affine { matrix: Arc<Matrix>, offset: Vec<f64> },
    General { slot: usize, oracle: GeneralConstraints },
}

impl fmt::Debug for ConstraintSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintSnapshot::Zero { count } => write!(f, "Zero({count})"),
            ConstraintSnapshot::Affine { offset, .. } => {
                f.debug_struct("Affine").field("offset", offset).finish_non_exhaustive()
            }
            ConstraintSnapshot::General { slot, .. } => {
                f.debug_struct("General").field("slot", slot).finish_non_exhaustive()
            }
        }
    }
}

impl ConstraintSnapshot {
    pub fn count(&self) -> usize {
        match self {
            ConstraintSnapshot::Zero { count } => *count,
            ConstraintSnapshot::Affine { matrix, .. } => matrix.rows(),
            ConstraintSnapshot::General { oracle, .. } => oracle.count,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConstraintSnapshot::Zero { count } => vec![0.0; *count],
            ConstraintSnapshot::Affine { matrix, offset } => {
                let mut v = matrix.mul_vec(x);
                linalg::axpy(&mut v, 1.0, offset);
                v
            }
            ConstraintSnapshot::General { slot, oracle } => oracle.value(*slot, x),
        }
    }

    pub fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        match self {
            ConstraintSnapshot::Zero { .. } => vec![0.0; x.len()],
            ConstraintSnapshot::Affine { matrix, .. } => matrix.mul_transpose_vec(w),
            ConstraintSnapshot::General { slot, oracle } => oracle.vjp(*slot, x, w),
        }
    }

    pub fn is_affine_or_zero(&self) -> bool {
        !matches!(self, ConstraintSnapshot::General { .. })
    }
}

/// Bound constants: gradient bound `D`, Lipschitz constant `β`, constraint
/// bound `G`, interior slack `ε` and set radius `R`.
///
/// `epsilon` is `None` when no interior point was found; the violation bound
/// is then unavailable but everything else still applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub d: f64,
    pub beta: f64,
    pub g: f64,
    pub epsilon: Option<f64>,
    pub r: f64,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("D", self.d), ("beta", self.beta), ("G", self.g), ("R", self.r)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::contract(format!("constant {name} must be positive, got {v}")));
            }
        }
        match self.epsilon {
            Some(e) if !(e.is_finite() && e > 0.0) => {
                Err(Error::contract(format!("epsilon must be positive when present, got {e}")))
            }
            _ => Ok(()),
        }
    }
}

/// Sampling knobs for [`compute_constants`].
#[derive(Clone, Copy, Debug)]
pub struct ConstantsOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ConstantsOptions {
    fn default() -> Self {
        ConstantsOptions { samples: 512, seed: 0 }
    }
}

/// Corner evaluations (slots × corners) allowed before corners are probed on
/// a thinned set of slots.
const CORNER_BUDGET: usize = 1 << 22;
/// Corners are enumerated exhaustively up to this dimension.
const MAX_CORNER_DIM: usize = 20;
/// Largest corner set used in the interior-point grid.
const EPSILON_CORNER_CAP: usize = 1 << 10;

fn corner_masks(dim: usize) -> Vec<u64> {
    if dim <= MAX_CORNER_DIM {
        (0..1u64 << dim).collect()
    } else {
        vec![0, u64::MAX]
    }
}

/// Evenly spaced slots in `1..=horizon`, at most `count` of them.
fn thinned_slots(horizon: usize, count: usize) -> Vec<usize> {
    if count >= horizon {
        return (1..=horizon).collect();
    }
    if count <= 1 {
        return vec![1];
    }
    (0..count).map(|i| 1 + i * (horizon - 1) / (count - 1)).collect()
}

/// Upper bound on `max_{x ∈ box} ‖C x + d‖₂` from per-row interval maxima.
/// Exact whenever the maximizing corners of the rows coincide.
pub fn affine_norm_bound(matrix: &Matrix, offset: &[f64], set: &BoxSet) -> f64 {
    (0..matrix.rows())
        .map(|r| {
            let row = matrix.row(r);
            let (mut lo, mut hi) = (offset[r], offset[r]);
            for (i, c) in row.iter().enumerate() {
                let (a, b) = (c * set.lower()[i], c * set.upper()[i]);
                lo += a.min(b);
                hi += a.max(b);
            }
            lo.abs().max(hi.abs()).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Numerically estimate the bound constants over slots `1..=horizon`.
///
/// `D` and `G` are maxima over box corners and seeded random `(t, x)` samples
/// (for affine constraints `G` uses the rigorous per-row interval bound),
/// `β` is the exact spectral norm for affine constraints, `R` is the box
/// diagonal, and `ε` is `min_t max_x min_c −g_t^c(x)` over a fixed grid of
/// corners and samples.
pub fn compute_constants(
    loss: &dyn LossOracle,
    constraints: &ConstraintOracle,
    set: &FeasibleSet,
    horizon: usize,
    opts: ConstantsOptions,
) -> Result<ProblemConstants> {
    let bx = set
        .as_box()
        .ok_or_else(|| Error::contract("constant estimation needs a box feasible set"))?;
    if opts.samples == 0 {
        return Err(Error::contract("constant estimation needs at least one sample"));
    }
    if horizon == 0 {
        return Err(Error::contract("horizon must be at least one slot"));
    }
    let n = bx.dim();
    check_len("loss oracle dimension", n, loss.dim())?;
    check_len("constraint oracle dimension", n, constraints.dim())?;

    let masks = corner_masks(n);
    let corners: Vec<Vec<f64>> = masks.iter().map(|m| bx.corner(*m)).collect();
    let extremes = [bx.lower().to_vec(), bx.upper().to_vec()];
    let corner_slots = thinned_slots(horizon, CORNER_BUDGET / corners.len().max(1));

    // One seeded stream; sample k is the same no matter how many are drawn,
    // so maxima are monotone in `samples`.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let samples: Vec<(usize, Vec<f64>)> = (0..opts.samples)
        .map(|_| (rng.gen_range(1..=horizon), bx.sample(&mut rng)))
        .collect();

    let grad_norm = |t: usize, x: &[f64]| linalg::norm2(&loss.gradient(t, x));
    let mut d: f64 = 0.0;
    for t in 1..=horizon {
        for x in &extremes {
            d = d.max(grad_norm(t, x));
        }
    }
    for &t in &corner_slots {
        for x in &corners {
            d = d.max(grad_norm(t, x));
        }
    }
    for (t, x) in &samples {
        d = d.max(grad_norm(*t, x));
    }

    let (beta, g) = match constraints {
        ConstraintOracle::Affine(a) => {
            let g = (1..=horizon)
                .map(|t| affine_norm_bound(a.matrix(), &a.offset_at(t), bx))
                .fold(0.0, f64::max);
            (a.matrix().spectral_norm(), g)
        }
        ConstraintOracle::General(gen) => {
            let mut g: f64 = 0.0;
            for t in 1..=horizon {
                for x in &extremes {
                    g = g.max(linalg::norm2(&gen.value(t, x)));
                }
            }
            for &t in &corner_slots {
                for x in &corners {
                    g = g.max(linalg::norm2(&gen.value(t, x)));
                }
            }
            for (t, x) in &samples {
                g = g.max(linalg::norm2(&gen.value(*t, x)));
            }
            // Lipschitz estimate from sampled secants.
            let mut beta: f64 = 0.0;
            for pair in samples.windows(2) {
                let (t, x) = &pair[0];
                let (_, y) = &pair[1];
                let dx = linalg::dist2(x, y);
                if dx > 0.0 {
                    let dg = linalg::dist2(&gen.value(*t, x), &gen.value(*t, y));
                    beta = beta.max(dg / dx);
                }
            }
            (beta, g)
        }
    };

    let r = bx.diameter();

    let mut grid: Vec<Vec<f64>> = if corners.len() <= EPSILON_CORNER_CAP {
        corners.clone()
    } else {
        extremes.to_vec()
    };
    grid.push(bx.midpoint());
    grid.extend(samples.iter().map(|(_, x)| x.clone()));
    let eps = (1..=horizon)
        .map(|t| {
            grid.iter()
                .map(|x| {
                    constraints
                        .eval(t, x)
                        .iter()
                        .fold(f64::INFINITY, |m, v| m.min(-v))
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    let epsilon = (eps > 0.0 && eps.is_finite()).then_some(eps);

    Ok(ProblemConstants {
        d,
        beta,
        g,
        epsilon,
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box(n: usize) -> FeasibleSet {
        FeasibleSet::boxed(vec![0.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn project_keeps_feasible_points() {
        let set = unit_box(2);
        assert_eq!(set.project(&[0.5, 0.5]).unwrap().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn project_clamps_into_box() {
        let set = unit_box(2);
        assert_eq!(set.project(&[-0.3, 2.0]).unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn project_is_idempotent_on_example() {
        let set = unit_box(1);
        let once = set.project(&[0.4]).unwrap();
        assert_eq!(set.project(&once).unwrap(), once);
        assert_eq!(once.as_slice(), &[0.4]);
    }

    #[test]
    fn project_rejects_wrong_length() {
        let set = unit_box(2);
        assert!(matches!(set.project(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn decision_vector_rejects_nan() {
        assert!(DecisionVector::new(vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn box_rejects_inverted_bounds() {
        assert!(BoxSet::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn general_set_delegates_to_oracle() {
        // Projection onto the unit disc.
        let set = FeasibleSet::general(2, |v| {
            let n = linalg::norm2(v);
            if n <= 1.0 {
                v.to_vec()
            } else {
                linalg::scale(v, 1.0 / n)
            }
        });
        let p = set.project(&[3.0, 4.0]).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    fn zero_loss(n: usize) -> FnLoss {
        FnLoss::new(n, |_, _| 0.0, move |_, x| vec![0.0; x.len()])
    }

    #[test]
    fn beta_is_spectral_norm_for_affine() {
        let c = Matrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, -1.0]]);
        let g = ConstraintOracle::affine(c, |_| vec![-10.0, -10.0]);
        let k = compute_constants(&zero_loss(2), &g, &unit_box(2), 3, ConstantsOptions::default())
            .unwrap();
        // Oracle: eigenvalues of CᵀC = [[2,-1],[-1,1]] by the quadratic formula.
        let (tr, det) = (3.0f64, 1.0f64);
        let top = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
        assert!((k.beta - top.sqrt()).abs() < 1e-9, "beta = {}", k.beta);
        assert!((k.beta - 1.618).abs() < 1e-3);
    }

    #[test]
    fn radius_of_unit_interval_is_one() {
        let g = ConstraintOracle::affine(Matrix::from_rows(&[vec![1.0]]), |_| vec![-2.0]);
        let k = compute_constants(&zero_loss(1), &g, &unit_box(1), 1, ConstantsOptions::default())
            .unwrap();
        assert_eq!(k.r, 1.0);
    }

    #[test]
    fn epsilon_matches_grid_search() {
        // g(x) = x − 2 on [0,1].
        let g = ConstraintOracle::General(GeneralConstraints::new(1, 1, |_, x| vec![x[0] - 2.0]));
        let k = compute_constants(&zero_loss(1), &g, &unit_box(1), 4, ConstantsOptions::default())
            .unwrap();
        // Independent grid search of max_x −g(x).
        let (best_x, best) = (0..=10_000)
            .map(|i| i as f64 / 10_000.0)
            .map(|x| (x, 2.0 - x))
            .fold((f64::NAN, f64::NEG_INFINITY), |acc, p| if p.1 > acc.1 { p } else { acc });
        assert_eq!(best_x, 0.0);
        assert_eq!(k.epsilon, Some(best));
        assert_eq!(best, 2.0);
    }

    #[test]
    fn epsilon_absent_without_interior_point() {
        let g = ConstraintOracle::General(GeneralConstraints::new(1, 1, |_, x| vec![x[0] + 1.0]));
        let k = compute_constants(&zero_loss(1), &g, &unit_box(1), 2, ConstantsOptions::default())
            .unwrap();
        assert_eq!(k.epsilon, None);
    }

    #[test]
    fn constants_need_a_box() {
        let set = FeasibleSet::general(1, |v| v.to_vec());
        let g = ConstraintOracle::affine(Matrix::from_rows(&[vec![1.0]]), |_| vec![0.0]);
        assert!(compute_constants(&zero_loss(1), &g, &set, 1, ConstantsOptions::default()).is_err());
    }

    fn quad_loss() -> FnLoss {
        FnLoss::new(
            3,
            |t, x| x.iter().map(|v| (v - 0.1 * t as f64).powi(2)).sum(),
            |t, x| x.iter().map(|v| 2.0 * (v - 0.1 * t as f64)).collect(),
        )
    }

    #[test]
    fn d_and_g_monotone_in_samples() {
        let set = FeasibleSet::boxed(vec![-1.0; 3], vec![2.0; 3]).unwrap();
        let g = ConstraintOracle::General(GeneralConstraints::new(2, 3, |t, x| {
            vec![x[0] * x[0] + x[1] - t as f64, (x[2] - 0.5).abs() - 3.0]
        }));
        let mut prev = (0.0, 0.0);
        for samples in [1, 4, 16, 64, 256] {
            let k = compute_constants(&quad_loss(), &g, &set, 5, ConstantsOptions { samples, seed: 9 })
                .unwrap();
            assert!(k.d >= prev.0 && k.g >= prev.1);
            prev = (k.d, k.g);
        }
    }

    proptest! {
        #[test]
        fn box_projection_is_nonexpansive(
            u in proptest::collection::vec(-5.0f64..5.0, 4),
            v in proptest::collection::vec(-5.0f64..5.0, 4),
        ) {
            let set = FeasibleSet::boxed(vec![-1.0, 0.0, 0.5, -2.0], vec![1.0, 3.0, 0.5, -1.0]).unwrap();
            let (pu, pv) = (set.project(&u).unwrap(), set.project(&v).unwrap());
            prop_assert!(linalg::dist2(&pu, &pv) <= linalg::dist2(&u, &v) + 1e-12);
            prop_assert_eq!(set.project(&pu).unwrap(), pu.clone());
            prop_assert!(set.contains(&pu, 0.0));
        }

        #[test]
        fn affine_and_closure_paths_agree(
            x in proptest::collection::vec(-3.0f64..3.0, 3),
            t in 1usize..50,
        ) {
            let c = Matrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.0, 3.0, -1.0]]);
            let g = ConstraintOracle::affine(c, |t| vec![t as f64 * 0.3, -(t as f64).sqrt()]);
            let via_affine = g.eval(t, &x);
            let via_closure = g.as_general().value(t, &x);
            for (a, b) in via_affine.iter().zip(&via_closure) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }

        #[test]
        fn convex_loss_satisfies_first_order_condition(
            x in proptest::collection::vec(-2.0f64..2.0, 3),
            y in proptest::collection::vec(-2.0f64..2.0, 3),
            t in 1usize..20,
        ) {
            let f = quad_loss();
            let lin = f.value(t, &x) + linalg::dot(&f.gradient(t, &x), &linalg::sub(&y, &x));
            prop_assert!(f.value(t, &y) >= lin - 1e-12);
        }
    }
}
