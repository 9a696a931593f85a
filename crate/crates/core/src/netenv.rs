//! Network resource allocation environment: `J` scheduling nodes route data
//! over `J×K` links to `K` processing nodes.
//!
//! Decision layout: `y^{jk}` at index `jK + k`, then `z^k` at `JK + k`
//! (0-based). Rates are in kB per 1 ms slot, which is numerically MB/s.
//! Arrivals `d_t^j` are in kB per slot, so `g_t(x) = C x + d_t` compares like
//! with like.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::benchmarks::{BenchmarkKind, BenchmarkOptions, BenchmarkSolution, BenchmarkTrace};
use crate::error::{check_len, Error, Result};
use crate::linalg::{self, Matrix};
use crate::problem::{affine_norm_bound, BoxSet, ConstraintOracle, FeasibleSet, LossOracle, Objective, ProblemConstants};

/// Radio and compute constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LteConstants {
    /// Noise spectral density, dBm/Hz.
    pub n0_dbm_per_hz: f64,
    /// Noise figure, dB.
    pub noise_figure_db: f64,
    pub bandwidth_mhz: f64,
    /// W/GHz².
    pub theta: f64,
    pub slot_ms: f64,
}

impl Default for LteConstants {
    fn default() -> Self {
        LteConstants {
            n0_dbm_per_hz: -174.0,
            noise_figure_db: 10.0,
            bandwidth_mhz: 10.0,
            theta: 120.0,
            slot_ms: 1.0,
        }
    }
}

impl LteConstants {
    /// `σ² = N0 + 10 log10(BW) + NF` in dBm.
    pub fn noise_dbm(&self) -> f64 {
        self.n0_dbm_per_hz + 10.0 * (self.bandwidth_mhz * 1e6).log10() + self.noise_figure_db
    }

    pub fn noise_mw(&self) -> f64 {
        10f64.powf(self.noise_dbm() / 10.0)
    }

    /// Rate in kB/slot to the dimensionless Shannon exponent `y[Mb/s] / BW[MHz]`.
    pub fn exponent_per_rate(&self) -> f64 {
        // kB per slot → MB/s is ×(1/slot_ms); MB/s → Mb/s is ×8.
        8.0 / (self.slot_ms * self.bandwidth_mhz)
    }

    /// Processing rate in kB/slot times cycles/byte to GHz.
    pub fn ghz_per_cycle_rate(&self) -> f64 {
        // kB/slot → bytes/s is ×1e3/(slot_ms·1e−3) = ×1e6/slot_ms.
        1e6 / self.slot_ms / 1e9
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub j: usize,
    pub k: usize,
    pub matrix: Matrix,
    /// `y_max^{jk}` then `z_max^k`.
    pub x_max: Vec<f64>,
}

fn topology_matrix(j: usize, k: usize) -> Matrix {
    let mut c = Matrix::zeros(j + k, j * k + k);
    for s in 0..j {
        for p in 0..k {
            c.set(s, s * k + p, -1.0);
            c.set(j + p, s * k + p, 1.0);
        }
    }
    for p in 0..k {
        c.set(j + p, j * k + p, -1.0);
    }
    c
}

impl NetworkTopology {
    pub fn new(j: usize, k: usize, x_max: Vec<f64>) -> Result<Self> {
        if j == 0 || k == 0 {
            return Err(Error::contract("network needs J, K ≥ 1"));
        }
        check_len("rate caps", j * k + k, x_max.len())?;
        if x_max.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::contract("rate caps must be finite and nonnegative"));
        }
        Ok(NetworkTopology {
            j,
            k,
            matrix: topology_matrix(j, k),
            x_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.j * self.k + self.k
    }

    pub fn constraint_count(&self) -> usize {
        self.j + self.k
    }

    pub fn link(&self, j: usize, k: usize) -> usize {
        j * self.k + k
    }

    pub fn processor(&self, k: usize) -> usize {
        self.j * self.k + k
    }

    pub fn feasible_set(&self) -> FeasibleSet {
        FeasibleSet::Box(BoxSet::new(vec![0.0; self.dim()], self.x_max.clone()).expect("caps are nonnegative"))
    }
}

/// Caps `y_max ~ U(10, 100)`, `z_max ~ U(100, 250)` from the seed's caps stream.
pub fn build_topology(j: usize, k: usize, seed: u64) -> Result<NetworkTopology> {
    let mut rng = family_rng(seed, Family::Caps, 0);
    let mut caps: Vec<f64> = (0..j * k).map(|_| rng.gen_range(10.0..100.0)).collect();
    caps.extend((0..k).map(|_| rng.gen_range(100.0..250.0)));
    NetworkTopology::new(j, k, caps)
}

#[derive(Clone, Copy, Debug)]
enum Family {
    Caps = 1,
    Arrivals = 2,
    Gain = 3,
    Complexity = 4,
}

/// Independent stream per parameter family, addressed by slot.
fn family_rng(seed: u64, family: Family, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(family as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Per-slot parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotParameters {
    /// Extended arrival vector, length `J+K`, last `K` entries zero.
    pub d: Vec<f64>,
    /// Path gains in dB, `J×K` row-major.
    pub gain_db: Vec<f64>,
    /// Cycles per byte, length `K`.
    pub xi: Vec<f64>,
}

impl SlotParameters {
    pub fn gain_linear(&self) -> Vec<f64> {
        self.gain_db.iter().map(|db| 10f64.powf(db / 10.0)).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    #[default]
    Iid,
    Periodic,
}

impl ProcessKind {
    pub fn label(self) -> &'static str {
        match self {
            ProcessKind::Iid => "iid",
            ProcessKind::Periodic => "periodic",
        }
    }
}

/// Seeded parameter process. `params(t)` is a pure function of `(seed, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParameterProcess {
    pub kind: ProcessKind,
    pub j: usize,
    pub k: usize,
    pub seed: u64,
}

impl ParameterProcess {
    pub fn params(&self, t: usize) -> SlotParameters {
        let (j, k) = (self.j, self.k);
        let mut rd = family_rng(self.seed, Family::Arrivals, t as u64);
        let mut rl = family_rng(self.seed, Family::Gain, t as u64);
        let mut rx = family_rng(self.seed, Family::Complexity, t as u64);
        let mut d = vec![0.0; j + k];
        let (gain_db, xi);
        match self.kind {
            ProcessKind::Iid => {
                for v in d.iter_mut().take(j) {
                    *v = rd.gen_range(10.0..100.0);
                }
                gain_db = (0..j * k).map(|_| rl.gen_range(-126.0..-120.0)).collect();
                xi = (0..k).map(|_| rx.gen_range(1.0..3.0)).collect();
            }
            ProcessKind::Periodic => {
                let s = (std::f64::consts::PI * t as f64 / 20.0).sin();
                for v in d.iter_mut().take(j) {
                    *v = 30.0 * s + rd.gen_range(40.0..70.0);
                }
                gain_db = (0..j * k).map(|_| -120.0 - 3.0 * s - rl.gen_range(6.0..9.0)).collect();
                xi = (0..k).map(|_| 0.5 * s + rx.gen_range(1.0..3.0)).collect();
            }
        }
        SlotParameters { d, gain_db, xi }
    }
}

/// The slot cost `Σ a^{jk}(2^{b·y^{jk}} − 1) + Σ c^k (z^k)²` in watts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostCoefficients {
    /// `σ²/L^{jk}` in W.
    pub link: Vec<f64>,
    /// `θ (ξ^k · GHz per unit rate)²`.
    pub processor: Vec<f64>,
    /// `b`
    pub exponent: f64,
}

impl CostCoefficients {
    pub fn new(params: &SlotParameters, lte: &LteConstants) -> Result<Self> {
        let gains = params.gain_linear();
        if gains.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::contract("path gains must be positive"));
        }
        let noise_w = lte.noise_mw() * 1e-3;
        let scale = lte.ghz_per_cycle_rate();
        Ok(CostCoefficients {
            link: gains.iter().map(|g| noise_w / g).collect(),
            processor: params.xi.iter().map(|xi| lte.theta * (xi * scale).powi(2)).collect(),
            exponent: lte.exponent_per_rate(),
        })
    }

    fn add(&mut self, other: &CostCoefficients) {
        linalg::axpy(&mut self.link, 1.0, &other.link);
        linalg::axpy(&mut self.processor, 1.0, &other.processor);
    }

    pub fn dim(&self) -> usize {
        self.link.len() + self.processor.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms(x).iter().sum()
    }

    /// The summands of the cost, one per coordinate. The total can be many
    /// orders of magnitude above a single term, so finite differences are
    /// best taken term by term.
    pub fn terms(&self, x: &[f64]) -> Vec<f64> {
        let m = self.link.len();
        let mut v: Vec<f64> = self.link.iter().zip(&x[..m]).map(|(a, y)| a * ((self.exponent * y).exp2() - 1.0)).collect();
        v.extend(self.processor.iter().zip(&x[m..]).map(|(c, z)| c * z * z));
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let m = self.link.len();
        let ln2b = std::f64::consts::LN_2 * self.exponent;
        let mut g: Vec<f64> = self.link.iter().zip(&x[..m]).map(|(a, y)| a * ln2b * (self.exponent * y).exp2()).collect();
        g.extend(self.processor.iter().zip(&x[m..]).map(|(c, z)| 2.0 * c * z));
        g
    }

    /// Diagonal of the Hessian.
    pub fn curvature(&self, x: &[f64]) -> Vec<f64> {
        let m = self.link.len();
        let ln2b = std::f64::consts::LN_2 * self.exponent;
        let mut h: Vec<f64> = self.link.iter().zip(&x[..m]).map(|(a, y)| a * ln2b * ln2b * (self.exponent * y).exp2()).collect();
        h.extend(self.processor.iter().map(|c| 2.0 * c));
        h
    }
}

impl Objective for CostCoefficients {
    fn dim(&self) -> usize {
        CostCoefficients::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        CostCoefficients::value(self, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        CostCoefficients::gradient(self, x)
    }
}

/// Cost and gradient at `x` for one slot's parameters.
pub fn cost_value_and_gradient(
    topology: &NetworkTopology,
    params: &SlotParameters,
    lte: &LteConstants,
    x: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_len("network decision", topology.dim(), x.len())?;
    check_len("path gains", topology.j * topology.k, params.gain_db.len())?;
    check_len("complexities", topology.k, params.xi.len())?;
    let c = CostCoefficients::new(params, lte)?;
    Ok((c.value(x), c.gradient(x)))
}

/// Environment spec: process kind, sizes and seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: ProcessKind,
    pub j: usize,
    pub k: usize,
    pub seed: u64,
}

/// A network instance with parameters precomputed for slots `0..=horizon`.
#[derive(Clone, Debug)]
pub struct NetworkEnv {
    pub spec: EnvSpec,
    pub lte: LteConstants,
    pub topology: NetworkTopology,
    horizon: usize,
    arrivals: Arc<Vec<Vec<f64>>>,
    coefficients: Vec<CostCoefficients>,
}

impl NetworkEnv {
    pub fn new(spec: EnvSpec, lte: LteConstants, horizon: usize) -> Result<Self> {
        let topology = build_topology(spec.j, spec.k, spec.seed)?;
        let process = ParameterProcess {
            kind: spec.kind,
            j: spec.j,
            k: spec.k,
            seed: spec.seed,
        };
        let params: Vec<SlotParameters> = (0..=horizon).map(|t| process.params(t)).collect();
        let coefficients = params.iter().map(|p| CostCoefficients::new(p, &lte)).collect::<Result<_>>()?;
        Ok(NetworkEnv {
            spec,
            lte,
            topology,
            horizon,
            arrivals: Arc::new(params.into_iter().map(|p| p.d).collect()),
            coefficients,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn arrivals(&self, t: usize) -> &[f64] {
        &self.arrivals[t]
    }

    pub fn coefficients(&self, t: usize) -> &CostCoefficients {
        &self.coefficients[t]
    }

    pub fn feasible_set(&self) -> FeasibleSet {
        self.topology.feasible_set()
    }

    /// `g_t(x) = C x + d_t`
    pub fn constraints(&self) -> ConstraintOracle {
        let d = Arc::clone(&self.arrivals);
        ConstraintOracle::affine(self.topology.matrix.clone(), move |t| d[t].clone())
    }

    /// Exact constants over slots `1..=horizon`: `D` at the upper corner
    /// (every gradient entry increases in its own coordinate), `β = ‖C‖₂`,
    /// `G` from the interval bound, `R` the box diagonal, and `ε` from the
    /// per-slot maximum slack.
    pub fn constants(&self) -> ProblemConstants {
        let bx = self.feasible_set();
        let bx = bx.as_box().expect("network set is a box");
        let top = &self.topology.x_max;
        let d = (1..=self.horizon)
            .map(|t| linalg::norm2(&self.coefficients[t].gradient(top)))
            .fold(0.0, f64::max);
        let g = (1..=self.horizon)
            .map(|t| affine_norm_bound(&self.topology.matrix, &self.arrivals[t], bx))
            .fold(0.0, f64::max);
        // Only slots that beat the running minimum need the full bisection.
        let mut eps = f64::INFINITY;
        for t in 1..=self.horizon {
            let d = &self.arrivals[t];
            if eps.is_finite() && eps > 0.0 && slack_feasible(&self.topology, d, eps).is_some() {
                continue;
            }
            match max_slack(&self.topology, d) {
                Some((_, s)) => eps = eps.min(s),
                None => {
                    eps = f64::NEG_INFINITY;
                    break;
                }
            }
        }
        ProblemConstants {
            d,
            beta: self.topology.matrix.spectral_norm(),
            g,
            epsilon: (eps > 0.0 && eps.is_finite()).then_some(eps),
            r: bx.diameter(),
        }
    }
}

impl LossOracle for NetworkEnv {
    fn dim(&self) -> usize {
        self.topology.dim()
    }

    fn value(&self, t: usize, x: &[f64]) -> f64 {
        self.coefficients[t].value(x)
    }

    fn gradient(&self, t: usize, x: &[f64]) -> Vec<f64> {
        self.coefficients[t].gradient(x)
    }

    fn summed(&self, first: usize, last: usize) -> Option<Box<dyn Objective>> {
        let mut acc = self.coefficients[first].clone();
        for t in first + 1..=last {
            acc.add(&self.coefficients[t]);
        }
        Some(Box::new(acc))
    }
}

/// Rates at a fixed fraction of the caps, with slack
/// `min_t (−max_c g_t^c(x̃))`. Tries `fraction`, then full caps.
pub fn interior_point(topology: &NetworkTopology, arrivals: &[Vec<f64>], fraction: f64) -> Result<(Vec<f64>, f64)> {
    let slack_at = |f: f64| {
        let x = linalg::scale(&topology.x_max, f);
        let base = topology.matrix.mul_vec(&x);
        let eps = arrivals
            .iter()
            .map(|d| base.iter().zip(d).map(|(a, b)| -(a + b)).fold(f64::INFINITY, f64::min))
            .fold(f64::INFINITY, f64::min);
        (x, eps)
    };
    let mut last = f64::NAN;
    for f in [fraction, 1.0] {
        let (x, eps) = slack_at(f);
        if eps > 0.0 {
            return Ok((x, eps));
        }
        last = eps;
    }
    Err(Error::NoInteriorPoint(format!(
        "caps cannot drain the arrivals (best slack {last} at full caps)"
    )))
}

/// Largest `s` such that some `x ∈ [0, x_max]` has `C x + d ⪯ −s·1`, with a
/// witness. `None` when even `s = 0` fails.
///
/// For fixed `s ≥ 0` this is a flow problem: source→`j` must carry
/// `d_j + s`, link `jk` carries at most `y_max^{jk}`, and processor `k` can
/// take at most `z_max^k − s`. Bisection on `s` with a max-flow test, then the
/// slack is re-measured on the witness.
pub fn max_slack(topology: &NetworkTopology, d: &[f64]) -> Option<(Vec<f64>, f64)> {
    let zmax = &topology.x_max[topology.j * topology.k..];
    let feasible = |s: f64| slack_feasible(topology, d, s);
    let slack_of = |x: &[f64]| {
        let g = topology.matrix.mul_vec(x);
        g.iter().zip(d).map(|(a, b)| -(a + b)).fold(f64::INFINITY, f64::min)
    };
    let mut best = feasible(0.0)?;
    let (mut lo, mut hi) = (0.0, zmax.iter().cloned().fold(f64::INFINITY, f64::min));
    for _ in 0..100 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match feasible(mid) {
            Some(x) => {
                lo = mid;
                best = x;
            }
            None => hi = mid,
        }
    }
    let s = slack_of(&best);
    Some((best, s))
}

/// A point with `C x + d ⪯ −s·1` when the flow test finds one.
fn slack_feasible(topology: &NetworkTopology, d: &[f64], s: f64) -> Option<Vec<f64>> {
    let (j, k) = (topology.j, topology.k);
    let zmax = &topology.x_max[j * k..];
    if zmax.iter().any(|z| *z < s) {
        return None;
    }
    let need: Vec<f64> = d[..j].iter().map(|v| (v + s).max(0.0)).collect();
    let total: f64 = need.iter().sum();
    let flow = transport_flow(&need, &topology.x_max[..j * k], &zmax.iter().map(|z| z - s).collect::<Vec<_>>(), k);
    let sent: f64 = flow.iter().sum();
    if sent < total - 1e-9 * total.max(1.0) {
        return None;
    }
    let mut x = flow;
    // Processors run as fast as the caps allow.
    x.extend_from_slice(zmax);
    Some(x)
}

/// Max flow on the bipartite graph source → `need_j` → links (caps
/// `link_caps`, row-major `J×K`) → `sink_caps_k` → sink. Returns the
/// per-link flow. Dinic's algorithm on `J+K+2` nodes.
fn transport_flow(need: &[f64], link_caps: &[f64], sink_caps: &[f64], k: usize) -> Vec<f64> {
    let j = need.len();
    let n = j + k + 2;
    let (src, sink) = (j + k, j + k + 1);
    struct Edge {
        to: usize,
        cap: f64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut add = |edges: &mut Vec<Edge>, a: usize, b: usize, c: f64| {
        adj[a].push(edges.len());
        edges.push(Edge { to: b, cap: c.max(0.0) });
        adj[b].push(edges.len());
        edges.push(Edge { to: a, cap: 0.0 });
        edges.len() - 2
    };
    for (s, v) in need.iter().enumerate() {
        add(&mut edges, src, s, *v);
    }
    let mut link_edges = Vec::with_capacity(j * k);
    for s in 0..j {
        for p in 0..k {
            link_edges.push(add(&mut edges, s, j + p, link_caps[s * k + p]));
        }
    }
    for (p, c) in sink_caps.iter().enumerate() {
        add(&mut edges, j + p, sink, *c);
    }
    let tiny = 1e-12;
    loop {
        let mut level = vec![usize::MAX; n];
        level[src] = 0;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &e in &adj[u] {
                let v = edges[e].to;
                if edges[e].cap > tiny && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        if level[sink] == usize::MAX {
            break;
        }
        let mut next = vec![0usize; n];
        #[allow(clippy::too_many_arguments)]
        fn push(
            u: usize,
            sink: usize,
            f: f64,
            level: &[usize],
            next: &mut [usize],
            adj: &[Vec<usize>],
            edges: &mut [Edge],
            tiny: f64,
        ) -> f64 {
            if u == sink {
                return f;
            }
            while next[u] < adj[u].len() {
                let e = adj[u][next[u]];
                let v = edges[e].to;
                if edges[e].cap > tiny && level[v] == level[u] + 1 {
                    let got = push(v, sink, f.min(edges[e].cap), level, next, adj, edges, tiny);
                    if got > 0.0 {
                        edges[e].cap -= got;
                        edges[e ^ 1].cap += got;
                        return got;
                    }
                }
                next[u] += 1;
            }
            0.0
        }
        loop {
            let f = push(src, sink, f64::INFINITY, &level, &mut next, &adj, &mut edges, tiny);
            if f <= 0.0 {
                break;
            }
        }
    }
    link_edges.iter().map(|&e| edges[e ^ 1].cap).collect()
}

/// Exact benchmark for the network: `min f(x)` s.t. `C x + d ⪯ 0`,
/// `0 ⪯ x ⪯ x_max`.
///
/// The cost is separable and strictly convex, so for dual prices `λ_j`
/// (arrival rows) and `μ_k` (processor rows) the box minimizer has a closed
/// form per coordinate. The dual is maximized by exact coordinate ascent and
/// the primal point is read off the final prices.
pub fn solve_network_benchmark(
    topology: &NetworkTopology,
    cost: &CostCoefficients,
    d: &[f64],
    opts: &BenchmarkOptions,
) -> Result<BenchmarkSolution> {
    let (j, k) = (topology.j, topology.k);
    check_len("network arrivals", j + k, d.len())?;
    check_len("network cost", topology.dim(), cost.dim())?;
    let cap = &topology.x_max;
    let zmax = &cap[j * k..];
    let need: Vec<f64> = d[..j].iter().map(|v| v.max(0.0)).collect();
    let sent: f64 = transport_flow(&need, &cap[..j * k], zmax, k).iter().sum();
    let total: f64 = need.iter().sum();
    let extra: Vec<f64> = d[j..].to_vec();
    if sent < total - 1e-9 * total.max(1.0) || extra.iter().any(|v| *v > 1e-12) {
        // Arrivals exceed the capacity: the slot has no feasible point.
        let x = cap.clone();
        let g = topology.matrix.mul_vec(&x);
        let viol = g.iter().zip(d).map(|(a, b)| a + b).fold(f64::NEG_INFINITY, f64::max);
        return Ok(BenchmarkSolution {
            decision: x,
            residual: viol.max(0.0),
            max_violation: viol,
            feasible: false,
            converged: false,
        });
    }

    let ln2b = std::f64::consts::LN_2 * cost.exponent;
    let b = cost.exponent;
    // Marginal cost of link jk at zero rate.
    let thr: Vec<f64> = cost.link.iter().map(|a| a * ln2b).collect();
    let link_rate = |l: usize, r: f64| -> f64 {
        if r <= thr[l] {
            0.0
        } else {
            ((r / thr[l]).log2() / b).min(cap[l])
        }
    };
    let link_slope = |l: usize, r: f64| -> f64 {
        if r <= thr[l] || (r / thr[l]).log2() / b >= cap[l] {
            0.0
        } else {
            1.0 / (ln2b * r)
        }
    };
    let proc_rate = |p: usize, m: f64| (m / (2.0 * cost.processor[p])).clamp(0.0, zmax[p]);

    let mut lam: Vec<f64> = (0..j).map(|s| (0..k).map(|p| thr[s * k + p]).fold(f64::INFINITY, f64::min)).collect();
    let mut mu = vec![0.0; k];
    let tol = opts.tol.min(1e-9);
    let max_sweeps = 20 * opts.inner_iters.max(1);
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        sweeps += 1;
        for s in 0..j {
            let target = need[s];
            if target <= 0.0 {
                lam[s] = 0.0;
                continue;
            }
            let f = |l: f64| {
                let mut v = -target;
                let mut dv = 0.0;
                for p in 0..k {
                    v += link_rate(s * k + p, l - mu[p]);
                    dv += link_slope(s * k + p, l - mu[p]);
                }
                (v, dv)
            };
            let lo = (0..k).map(|p| mu[p] + thr[s * k + p]).fold(f64::INFINITY, f64::min);
            let hi = (0..k)
                .map(|p| mu[p] + thr[s * k + p] * (b * cap[s * k + p]).exp2())
                .fold(0.0, f64::max)
                * (1.0 + 1e-12);
            lam[s] = increasing_root(f, lo, hi, lam[s], tol);
        }
        for p in 0..k {
            let f = |m: f64| {
                let mut v = -proc_rate(p, m);
                let mut dv = if m / (2.0 * cost.processor[p]) < zmax[p] {
                    -1.0 / (2.0 * cost.processor[p])
                } else {
                    0.0
                };
                for s in 0..j {
                    v += link_rate(s * k + p, lam[s] - m);
                    dv -= link_slope(s * k + p, lam[s] - m);
                }
                (-v, -dv)
            };
            let (g0, _) = f(0.0);
            if g0 >= 0.0 {
                mu[p] = 0.0;
                continue;
            }
            let hi = lam.iter().cloned().fold(2.0 * cost.processor[p] * zmax[p], f64::max) * (1.0 + 1e-12);
            mu[p] = increasing_root(f, 0.0, hi, mu[p], tol);
        }
        let x = network_primal(&lam, &mu, j, k, &link_rate, &proc_rate);
        residual = dual_residual(topology, &x, d, &lam, &mu);
        if residual <= tol {
            break;
        }
        // Sweeps alone crawl once a processor cap binds and the prices
        // couple; a projected Newton step on the dual fixes that.
        let dual = |lam: &[f64], mu: &[f64]| {
            let x = network_primal(lam, mu, j, k, &link_rate, &proc_rate);
            let g = topology.matrix.mul_vec(&x);
            let lin: f64 = lam.iter().chain(mu).zip(g.iter().zip(d)).map(|(p, (a, b))| p * (a + b)).sum();
            (cost.value(&x) + lin, x)
        };
        let nu: Vec<f64> = lam.iter().chain(&mu).cloned().collect();
        let grad: Vec<f64> = topology.matrix.mul_vec(&x).iter().zip(d).map(|(a, b)| a + b).collect();
        let free: Vec<usize> = (0..j + k).filter(|&i| nu[i] > 0.0 || grad[i] > 0.0).collect();
        let mut slope = vec![0.0; j * k];
        for s in 0..j {
            for p in 0..k {
                slope[s * k + p] = link_slope(s * k + p, lam[s] - mu[p]);
            }
        }
        let zslope: Vec<f64> = (0..k)
            .map(|p| {
                if mu[p] / (2.0 * cost.processor[p]) < zmax[p] {
                    1.0 / (2.0 * cost.processor[p])
                } else {
                    0.0
                }
            })
            .collect();
        // `C S Cᵀ`, the negated dual Hessian.
        let mut h = vec![0.0; (j + k) * (j + k)];
        let n = j + k;
        for s in 0..j {
            for p in 0..k {
                let v = slope[s * k + p];
                h[s * n + s] += v;
                h[(j + p) * n + (j + p)] += v;
                h[s * n + j + p] -= v;
                h[(j + p) * n + s] -= v;
            }
        }
        for p in 0..k {
            h[(j + p) * n + (j + p)] += zslope[p];
        }
        let m = free.len();
        let mut sub = vec![0.0; m * m];
        let diag = free.iter().map(|&i| h[i * n + i]).fold(0.0, f64::max);
        for (a, &ia) in free.iter().enumerate() {
            for (b, &ib) in free.iter().enumerate() {
                sub[a * m + b] = h[ia * n + ib];
            }
            sub[a * m + a] += 1e-12 * diag + f64::MIN_POSITIVE;
        }
        let rhs: Vec<f64> = free.iter().map(|&i| grad[i]).collect();
        if let Some(step) = cholesky_solve(&mut sub, &rhs, m) {
            let (q0, _) = dual(&lam, &mu);
            let mut t = 1.0;
            for _ in 0..40 {
                let mut trial = nu.clone();
                for (a, &i) in free.iter().enumerate() {
                    trial[i] = (nu[i] + t * step[a]).max(0.0);
                }
                let gain: f64 = trial.iter().zip(&nu).zip(&grad).map(|((a, b), g)| g * (a - b)).sum();
                let (q1, x1) = dual(&trial[..j], &trial[j..]);
                let better = dual_residual(topology, &x1, d, &trial[..j], &trial[j..]) < residual;
                if (gain > 0.0 && q1 >= q0 + 1e-4 * gain) || better {
                    lam.copy_from_slice(&trial[..j]);
                    mu.copy_from_slice(&trial[j..]);
                    break;
                }
                t *= 0.5;
            }
        }
    }
    let x = network_primal(&lam, &mu, j, k, &link_rate, &proc_rate);
    let g = topology.matrix.mul_vec(&x);
    let viol = g.iter().zip(d).map(|(a, b)| a + b).fold(f64::NEG_INFINITY, f64::max);
    Ok(BenchmarkSolution {
        decision: x,
        residual,
        max_violation: viol,
        feasible: viol <= opts.feasibility_tol,
        converged: residual <= opts.tol,
    })
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major,
/// overwritten by its factor). `None` when a pivot is not positive.
fn cholesky_solve(a: &mut [f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    for c in 0..n {
        let mut piv = a[c * n + c];
        for p in 0..c {
            piv -= a[c * n + p] * a[c * n + p];
        }
        if !(piv > 0.0) {
            return None;
        }
        let piv = piv.sqrt();
        a[c * n + c] = piv;
        for r in c + 1..n {
            let mut v = a[r * n + c];
            for p in 0..c {
                v -= a[r * n + p] * a[c * n + p];
            }
            a[r * n + c] = v / piv;
        }
    }
    let mut y = b.to_vec();
    for r in 0..n {
        for p in 0..r {
            y[r] -= a[r * n + p] * y[p];
        }
        y[r] /= a[r * n + r];
    }
    for r in (0..n).rev() {
        for p in r + 1..n {
            y[r] -= a[p * n + r] * y[p];
        }
        y[r] /= a[r * n + r];
    }
    Some(y)
}

fn network_primal(
    lam: &[f64],
    mu: &[f64],
    j: usize,
    k: usize,
    link_rate: &impl Fn(usize, f64) -> f64,
    proc_rate: &impl Fn(usize, f64) -> f64,
) -> Vec<f64> {
    let mut x = Vec::with_capacity(j * k + k);
    for s in 0..j {
        for p in 0..k {
            x.push(link_rate(s * k + p, lam[s] - mu[p]));
        }
    }
    x.extend((0..k).map(|p| proc_rate(p, mu[p])));
    x
}

/// Projected dual gradient: row value where the price is positive, its
/// positive part where the price is zero.
fn dual_residual(topology: &NetworkTopology, x: &[f64], d: &[f64], lam: &[f64], mu: &[f64]) -> f64 {
    let g = topology.matrix.mul_vec(x);
    let prices = lam.iter().chain(mu);
    g.iter()
        .zip(d)
        .zip(prices)
        .map(|((a, b), p)| if *p > 0.0 { (a + b).abs() } else { (a + b).max(0.0) })
        .fold(0.0, f64::max)
}

/// Root of a nondecreasing `f` on `[lo, hi]` with `f(lo) ≤ 0 ≤ f(hi)`,
/// safeguarded Newton from `guess`. Clamps to the bracket end when the sign
/// condition fails there.
fn increasing_root(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64, guess: f64, tol: f64) -> f64 {
    if f(lo).0 >= 0.0 {
        return lo;
    }
    if f(hi).0 <= 0.0 {
        return hi;
    }
    let mut x = if guess > lo && guess < hi { guess } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let (v, dv) = f(x);
        if v.abs() <= 0.1 * tol {
            return x;
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = if dv > 0.0 { x - v / dv } else { f64::NAN };
        x = if newton > lo && newton < hi {
            newton
        } else if lo > 0.0 && hi / lo > 4.0 {
            // The bracket spans orders of magnitude; split it geometrically.
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 1e-15 * hi.abs() {
            break;
        }
    }
    x
}

impl NetworkEnv {
    /// Per-slot optimizers for slots `1..=horizon`, solved in parallel.
    pub fn dynamic_benchmark(&self, horizon: usize, opts: &BenchmarkOptions) -> Result<BenchmarkTrace> {
        if horizon > self.horizon {
            return Err(Error::contract("benchmark horizon exceeds the environment horizon"));
        }
        let sols: Vec<BenchmarkSolution> = (1..=horizon)
            .into_par_iter()
            .map(|t| solve_network_benchmark(&self.topology, &self.coefficients[t], &self.arrivals[t], opts))
            .collect::<Result<_>>()?;
        Ok(BenchmarkTrace {
            kind: BenchmarkKind::Dynamic,
            feasible: sols.iter().map(|s| s.feasible).collect(),
            residuals: sols.iter().map(|s| s.residual).collect(),
            converged: sols.iter().map(|s| s.converged).collect(),
            decisions: sols.into_iter().map(|s| s.decision).collect(),
        })
    }

    /// Best fixed decision over slots `1..=horizon`: the summed cost against
    /// the row-wise largest arrivals.
    pub fn static_benchmark(&self, horizon: usize, opts: &BenchmarkOptions) -> Result<BenchmarkTrace> {
        if horizon == 0 || horizon > self.horizon {
            return Err(Error::contract("benchmark horizon must lie in 1..=environment horizon"));
        }
        let mut cost = self.coefficients[1].clone();
        let mut worst = self.arrivals[1].clone();
        for t in 2..=horizon {
            cost.add(&self.coefficients[t]);
            for (w, v) in worst.iter_mut().zip(&self.arrivals[t]) {
                *w = w.max(*v);
            }
        }
        let sol = solve_network_benchmark(&self.topology, &cost, &worst, opts)?;
        Ok(BenchmarkTrace {
            kind: BenchmarkKind::Static,
            feasible: vec![sol.feasible],
            residuals: vec![sol.residual],
            converged: vec![sol.converged],
            decisions: vec![sol.decision],
        })
    }
}
