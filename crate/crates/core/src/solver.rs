//! Preconditioned primal–dual iterations for GTV minimization.
//!
//! Each iteration runs a node-wise primal phase (one proximal step of every
//! local loss, driven by the signed sum of incident flows) followed by an
//! edge-wise dual phase (a proximal step of the scaled penalty conjugate on
//! the over-relaxed parameter differences). Step sizes are `τᵢ = 1/|N(i)|`
//! and `σₑ = 1/2`.
//!
//! Within a phase all node (resp. edge) updates are independent; they run in
//! parallel on large problems and write disjoint rows, so results do not
//! depend on the worker count.
//!
//! The iterative primal updates (logistic, lasso) are solved to a fixed inner
//! tolerance. Convergence of the outer method under inexact updates is only
//! guaranteed when the inner errors are summable over the iterations; a fixed
//! tolerance of `1e-10` keeps them far below the outer accuracy in practice.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GtvError, Result};
use crate::graph::{EdgeField, EmpiricalGraph, NodeField};
use crate::linalg;
use crate::losses::LocalLoss;
use crate::penalties::GtvPenalty;

/// Dual step size on every edge.
pub const SIGMA: f64 = 0.5;
/// Absolute slack separating saturated from interior edges in the
/// complementarity residual.
pub const SATURATION_TOL: f64 = 1e-9;
/// Problems with at least this many scalar unknowns per phase run the node
/// and edge updates on the rayon pool.
const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub penalty: GtvPenalty,
    pub max_iters: usize,
    /// Stop once the primal–dual gap drops to this value (when computable).
    pub gap_tol: Option<f64>,
    /// Stride (in iterations) between trace records and gap checks.
    pub trace_every: usize,
}

impl SolverConfig {
    pub fn new(lambda: f64, penalty: GtvPenalty) -> Self {
        Self {
            lambda,
            penalty,
            max_iters: 1000,
            gap_tol: None,
            trace_every: 10,
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_gap_tol(mut self, gap_tol: f64) -> Self {
        self.gap_tol = Some(gap_tol);
        self
    }

    pub fn with_trace_every(mut self, trace_every: usize) -> Self {
        self.trace_every = trace_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(GtvError::InvalidArgument(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(GtvError::InvalidArgument("max_iters must be at least 1".into()));
        }
        if self.trace_every == 0 {
            return Err(GtvError::InvalidArgument("trace_every must be at least 1".into()));
        }
        if let Some(tol) = self.gap_tol {
            if !(tol >= 0.0) {
                return Err(GtvError::InvalidArgument(format!(
                    "gap tolerance must be nonnegative, got {tol}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub objective: f64,
    pub gtv: f64,
    /// `None` when some conjugate is not available in closed form.
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub w: NodeField,
    pub u: EdgeField,
    pub tau: Vec<f64>,
    pub sigma: Vec<f64>,
    pub k: usize,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    GapTol,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub w: NodeField,
    pub u: EdgeField,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub trace: Vec<TraceRecord>,
}

/// Zero iterates with the preconditioned step sizes. Isolated nodes get
/// `τᵢ = 1`; their subproblem is decoupled and any positive step reaches the
/// same fixed point.
pub fn init_state(g: &EmpiricalGraph, d: usize) -> Result<SolverState> {
    if d == 0 {
        return Err(GtvError::InvalidArgument("parameter dimension must be positive".into()));
    }
    let tau = (0..g.node_count())
        .map(|i| match g.degree(i) {
            0 => 1.0,
            deg => 1.0 / deg as f64,
        })
        .collect();
    Ok(SolverState {
        w: NodeField::zeros(g.node_count(), d),
        u: EdgeField::zeros(g.edge_count(), d),
        tau,
        sigma: vec![SIGMA; g.edge_count()],
        k: 0,
        trace: Vec::new(),
    })
}

fn check_problem(g: &EmpiricalGraph, losses: &[LocalLoss], d: usize) -> Result<()> {
    if losses.len() != g.node_count() {
        return Err(GtvError::DimensionMismatch {
            expected: g.node_count(),
            got: losses.len(),
        });
    }
    if let Some(bad) = losses.iter().find(|l| l.dim() != d) {
        return Err(GtvError::DimensionMismatch {
            expected: d,
            got: bad.dim(),
        });
    }
    Ok(())
}

fn check_state(g: &EmpiricalGraph, state: &SolverState) -> Result<()> {
    if state.w.len() != g.node_count() {
        return Err(GtvError::DimensionMismatch {
            expected: g.node_count(),
            got: state.w.len(),
        });
    }
    if state.u.len() != g.edge_count() || (g.edge_count() > 0 && state.u.dim() != state.w.dim()) {
        return Err(GtvError::DimensionMismatch {
            expected: g.edge_count(),
            got: state.u.len(),
        });
    }
    Ok(())
}

/// Runs `f(row_index, row)` over every row of `out`, in parallel when the
/// problem is large. Each call writes only its own row.
fn for_each_row<F>(out: &mut [f64], d: usize, parallel: bool, f: F) -> Result<()>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync + Send,
{
    if out.is_empty() {
        return Ok(());
    }
    if parallel {
        out.par_chunks_mut(d).enumerate().try_for_each(|(k, row)| f(k, row))
    } else {
        out.chunks_mut(d).enumerate().try_for_each(|(k, row)| f(k, row))
    }
}

/// Advances the state by one primal–dual iteration.
///
/// With `λ = 0` the problem decouples: the dual phase is skipped (flows stay
/// zero) and every node takes plain proximal-point steps with unit step size.
/// A non-finite iterate leaves the state untouched and returns
/// [`GtvError::NonFinite`].
pub fn run_iteration(
    state: &mut SolverState,
    g: &EmpiricalGraph,
    losses: &[LocalLoss],
    config: &SolverConfig,
) -> Result<()> {
    let d = state.w.dim();
    check_problem(g, losses, d)?;
    check_state(g, state)?;
    let decoupled = config.lambda == 0.0;

    // Primal phase: w̃ = ŵ_k − τᵢ (Dᵀû_k)ᵢ, then ŵ_{k+1} = PU(w̃).
    let div = g.apply_incidence_transpose(&state.u)?;
    let mut w_next = NodeField::zeros(g.node_count(), d);
    let parallel = g.node_count() * d >= PARALLEL_THRESHOLD;
    {
        let (w, tau) = (&state.w, &state.tau);
        for_each_row(w_next.as_mut_slice(), d, parallel, |i, out| {
            let step = if decoupled { 1.0 } else { tau[i] };
            let arg: Vec<f64> = w.row(i).iter().zip(div.row(i)).map(|(w, s)| w - step * s).collect();
            out.copy_from_slice(&losses[i].primal_update(&arg, step)?);
            Ok(())
        })?;
    }
    if !w_next.is_finite() {
        return Err(GtvError::NonFinite(format!("primal iterate at k = {}", state.k + 1)));
    }

    // Dual phase on the over-relaxed differences 2Dŵ_{k+1} − Dŵ_k.
    if !decoupled && g.edge_count() > 0 {
        let mut u_next = EdgeField::zeros(g.edge_count(), d);
        let parallel = g.edge_count() * d >= PARALLEL_THRESHOLD;
        let (w_old, u_old, sigma) = (&state.w, &state.u, &state.sigma);
        let (w_new, penalty, lambda) = (&w_next, &config.penalty, config.lambda);
        for_each_row(u_next.as_mut_slice(), d, parallel, |e, out| {
            let edge = g.edge(e);
            let s = sigma[e];
            let arg: Vec<f64> = (0..d)
                .map(|k| {
                    let new_diff = w_new.row(edge.head)[k] - w_new.row(edge.tail)[k];
                    let old_diff = w_old.row(edge.head)[k] - w_old.row(edge.tail)[k];
                    u_old.row(e)[k] + s * (2.0 * new_diff - old_diff)
                })
                .collect();
            out.copy_from_slice(&penalty.dual_update(&arg, s, lambda * edge.weight));
            Ok(())
        })?;
        if !u_next.is_finite() {
            return Err(GtvError::NonFinite(format!("dual iterate at k = {}", state.k + 1)));
        }
        state.u = u_next;
    }
    state.w = w_next;
    state.k += 1;
    Ok(())
}

/// Runs iterations from the zero initialization until `max_iters` or until
/// the primal–dual gap (checked every `trace_every` iterations) reaches
/// `gap_tol`.
pub fn solve(g: &EmpiricalGraph, losses: &[LocalLoss], config: &SolverConfig) -> Result<SolveResult> {
    let d = losses
        .first()
        .map(LocalLoss::dim)
        .ok_or_else(|| GtvError::InvalidArgument("graph has no nodes".into()))?;
    let state = init_state(g, d)?;
    solve_from(state, g, losses, config)
}

/// Like [`solve`] but continues from a given state (warm start).
pub fn solve_from(
    mut state: SolverState,
    g: &EmpiricalGraph,
    losses: &[LocalLoss],
    config: &SolverConfig,
) -> Result<SolveResult> {
    config.validate()?;
    check_problem(g, losses, state.w.dim())?;
    check_state(g, &state)?;

    let record = |state: &mut SolverState| -> Result<Option<f64>> {
        let gtv = gtv_eval(g, &state.w, &config.penalty)?.0;
        let loss: f64 = sum_losses(losses, &state.w)?;
        let gap = pd_gap(g, losses, &config.penalty, config.lambda, &state.w, &state.u)?;
        state.trace.push(TraceRecord {
            iter: state.k,
            objective: loss + config.lambda * gtv,
            gtv,
            gap,
        });
        Ok(gap)
    };

    if state.trace.is_empty() {
        record(&mut state)?;
    }
    let start = state.k;
    let mut stop_reason = StopReason::MaxIters;
    while state.k - start < config.max_iters {
        match run_iteration(&mut state, g, losses, config) {
            Ok(()) => {}
            Err(GtvError::NonFinite(_)) => {
                stop_reason = StopReason::NonFinite;
                break;
            }
            Err(e) => return Err(e),
        }
        let done = state.k - start == config.max_iters;
        if (state.k - start).is_multiple_of(config.trace_every) || done {
            let gap = record(&mut state)?;
            if let (Some(tol), Some(gap)) = (config.gap_tol, gap) {
                if gap <= tol {
                    stop_reason = StopReason::GapTol;
                    break;
                }
            }
        }
    }
    Ok(SolveResult {
        iterations: state.k - start,
        w: state.w,
        u: state.u,
        stop_reason,
        trace: state.trace,
    })
}

fn sum_losses(losses: &[LocalLoss], w: &NodeField) -> Result<f64> {
    losses.iter().enumerate().map(|(i, l)| l.eval(w.row(i))).sum()
}

/// GTV `Σₑ Aₑ φ(w⁽ᵉ⁺⁾ − w⁽ᵉ⁻⁾)` and its per-edge terms.
pub fn gtv_eval(g: &EmpiricalGraph, w: &NodeField, penalty: &GtvPenalty) -> Result<(f64, Vec<f64>)> {
    let diffs = g.apply_incidence(w)?;
    let per_edge: Vec<f64> = g
        .edges()
        .iter()
        .zip(diffs.rows())
        .map(|(e, diff)| e.weight * penalty.eval(diff))
        .collect();
    Ok((per_edge.iter().sum(), per_edge))
}

/// Primal objective `Σᵢ ℓᵢ(w⁽ⁱ⁾) + λ GTV(w)`.
pub fn primal_objective(
    g: &EmpiricalGraph,
    losses: &[LocalLoss],
    penalty: &GtvPenalty,
    lambda: f64,
    w: &NodeField,
) -> Result<f64> {
    check_problem(g, losses, w.dim())?;
    Ok(sum_losses(losses, w)? + lambda * gtv_eval(g, w, penalty)?.0)
}

/// Dual objective `−Σᵢ ℓᵢ*(−(Dᵀu)ᵢ) − Σₑ λAₑ φ*(uₑ/(λAₑ))`.
///
/// `None` when some local conjugate is not available; `−∞` when `u` is
/// infeasible.
pub fn dual_objective(
    g: &EmpiricalGraph,
    losses: &[LocalLoss],
    penalty: &GtvPenalty,
    lambda: f64,
    u: &EdgeField,
) -> Result<Option<f64>> {
    let demand = g.apply_incidence_transpose(u)?;
    check_problem(g, losses, demand.dim())?;
    let mut value = 0.0;
    for (i, loss) in losses.iter().enumerate() {
        let neg: Vec<f64> = demand.row(i).iter().map(|x| -x).collect();
        match loss.conjugate(&neg) {
            Ok(c) => value -= c,
            Err(GtvError::Unsupported(_)) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    for (e, edge) in g.edges().iter().enumerate() {
        let lam_a = lambda * edge.weight;
        let row = u.row(e);
        let c = if lam_a > 0.0 {
            penalty.scaled_conjugate(row, lam_a)
        } else if row.iter().all(|&x| x == 0.0) {
            0.0
        } else {
            f64::INFINITY
        };
        value -= c;
    }
    Ok(Some(value))
}

/// Primal–dual gap; an upper bound on the suboptimality of `w`. `None` when
/// unavailable, `+∞` when `u` is dual infeasible.
pub fn pd_gap(
    g: &EmpiricalGraph,
    losses: &[LocalLoss],
    penalty: &GtvPenalty,
    lambda: f64,
    w: &NodeField,
    u: &EdgeField,
) -> Result<Option<f64>> {
    let primal = primal_objective(g, losses, penalty, lambda, w)?;
    Ok(dual_objective(g, losses, penalty, lambda, u)?.map(|dual| {
        if dual == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            primal - dual
        }
    }))
}

/// Violations of the optimality conditions for norm penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `maxᵢ ‖(Dᵀu)ᵢ + ∇ℓᵢ(w⁽ⁱ⁾)‖₂`
    pub conservation: f64,
    /// `maxₑ (‖uₑ‖* − λAₑ)₊`
    pub feasibility: f64,
    /// `max ‖w⁽ᵉ⁺⁾ − w⁽ᵉ⁻⁾‖₂` over edges with `‖uₑ‖* < λAₑ − tol`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.conservation.max(self.feasibility).max(self.complementarity)
    }
}

pub fn kkt_residuals(
    g: &EmpiricalGraph,
    losses: &[LocalLoss],
    penalty: &GtvPenalty,
    lambda: f64,
    w: &NodeField,
    u: &EdgeField,
) -> Result<KktResiduals> {
    if !penalty.is_norm() {
        return Err(GtvError::Unsupported(format!(
            "KKT residuals for the non-norm penalty {penalty}"
        )));
    }
    check_problem(g, losses, w.dim())?;
    let div = g.apply_incidence_transpose(u)?;
    let mut conservation: f64 = 0.0;
    for (i, loss) in losses.iter().enumerate() {
        let grad = loss.grad(w.row(i))?;
        let r: Vec<f64> = div.row(i).iter().zip(&grad).map(|(a, b)| a + b).collect();
        conservation = conservation.max(linalg::norm2(&r));
    }
    let mut feasibility: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    for (e, edge) in g.edges().iter().enumerate() {
        let lam_a = lambda * edge.weight;
        let norm = penalty.dual_norm(u.row(e)).expect("norm penalty");
        feasibility = feasibility.max(norm - lam_a);
        if norm < lam_a - SATURATION_TOL {
            complementarity = complementarity.max(linalg::dist2(w.row(edge.head), w.row(edge.tail)));
        }
    }
    Ok(KktResiduals {
        conservation,
        feasibility,
        complementarity,
    })
}
