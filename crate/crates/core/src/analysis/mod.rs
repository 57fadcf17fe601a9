//! Cluster-structure analysis: cluster graphs, pooled (cluster-wise) optima,
//! the well-connectedness certificate and the resulting error bound for GTV
//! solutions with norm penalties.
//!
//! The well-connectedness condition for a cluster `C` with hub `i₀` asks
//! that every nonempty `A ⊆ C∖{i₀}` satisfies `Σ_{i∈A} βᵢ < cut(A, C∖A)`,
//! where `βᵢ = Σ_{i'∉C} A_{ii'} + Lᵢ|∂C|/σ_C + εᵢ/λ` and the cut only counts
//! edges inside `C`. Enumerating subsets is exponential; the default check
//! decides the same condition with one max-flow per non-hub node.

mod maxflow;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GtvError, Result};
use crate::graph::{EmpiricalGraph, NodeField};
use crate::linalg::{self, SymEigen};
use crate::losses::LocalLoss;
use crate::penalties::GtvPenalty;

pub use maxflow::FlowNetwork;

/// Subsets whose slack `cut(A) − β(A)` is at most this count as violating.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Largest cluster (hub excluded: `|C| − 1` free nodes) accepted by the
/// exhaustive check.
pub const EXHAUSTIVE_MAX_CLUSTER: usize = 25;
const ORACLE_TOL: f64 = 1e-10;
const ORACLE_MAX_ITERS: usize = 100;

/// Disjoint covering of the nodes by nonempty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Partition {
    assignment: Vec<usize>,
    clusters: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(n: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        let mut assignment = vec![usize::MAX; n];
        for (c, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(GtvError::InvalidArgument(format!("cluster {c} is empty")));
            }
            for &i in members {
                if i >= n {
                    return Err(GtvError::InvalidArgument(format!(
                        "cluster {c} names node {i}, graph has {n} nodes"
                    )));
                }
                if assignment[i] != usize::MAX {
                    return Err(GtvError::InvalidArgument(format!(
                        "node {i} appears in clusters {} and {c}",
                        assignment[i]
                    )));
                }
                assignment[i] = c;
            }
        }
        if let Some(i) = assignment.iter().position(|&c| c == usize::MAX) {
            return Err(GtvError::InvalidArgument(format!("node {i} is not in any cluster")));
        }
        Ok(Self { assignment, clusters })
    }

    /// From a node → cluster map with ids `0..F`, every id used.
    pub fn from_assignment(assignment: &[usize]) -> Result<Self> {
        let count = assignment.iter().map(|&c| c + 1).max().unwrap_or(0);
        let mut clusters = vec![Vec::new(); count];
        for (i, &c) in assignment.iter().enumerate() {
            clusters[c].push(i);
        }
        Self::new(assignment.len(), clusters)
    }

    /// Every node in its own cluster.
    pub fn singletons(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
            clusters: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster(&self, c: usize) -> &[usize] {
        &self.clusters[c]
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster_of(&self, node: usize) -> usize {
        self.assignment[node]
    }
}

/// Sum of member losses, treated as one loss on a merged node.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedLoss {
    members: Vec<LocalLoss>,
    dim: usize,
}

impl AggregatedLoss {
    pub fn new(members: Vec<LocalLoss>) -> Result<Self> {
        let dim = members
            .first()
            .map(LocalLoss::dim)
            .ok_or_else(|| GtvError::InvalidArgument("aggregated loss needs a member".into()))?;
        if let Some(bad) = members.iter().find(|l| l.dim() != dim) {
            return Err(GtvError::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        Ok(Self { members, dim })
    }

    pub fn members(&self) -> &[LocalLoss] {
        &self.members
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, v: &[f64]) -> Result<f64> {
        self.members.iter().map(|l| l.eval(v)).sum()
    }

    pub fn grad(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; self.dim];
        for l in &self.members {
            for (t, g) in total.iter_mut().zip(l.grad(v)?) {
                *t += g;
            }
        }
        Ok(total)
    }

    pub fn hessian(&self, v: &[f64]) -> Result<DMatrix<f64>> {
        let mut total = DMatrix::zeros(self.dim, self.dim);
        for l in &self.members {
            total += l.hessian(v)?;
        }
        Ok(total)
    }

    /// Summed `(Q, b, c)` when every member is in the squared family.
    pub fn quadratic_form(&self) -> Option<(DMatrix<f64>, Vec<f64>, f64)> {
        let mut q = DMatrix::zeros(self.dim, self.dim);
        let mut b = vec![0.0; self.dim];
        let mut c = 0.0;
        for l in &self.members {
            let (lq, lb, lc) = l.quadratic_form()?;
            q += lq;
            for (t, x) in b.iter_mut().zip(lb) {
                *t += x;
            }
            c += lc;
        }
        Some((q, b, c))
    }

    /// A single [`LocalLoss`] equal to the sum, for solving on the cluster
    /// graph. Singletons return their member unchanged.
    pub fn to_local_loss(&self) -> Result<LocalLoss> {
        if let [only] = self.members.as_slice() {
            return Ok(only.clone());
        }
        let (q, b, c) = self
            .quadratic_form()
            .ok_or_else(|| GtvError::Unsupported("merging losses outside the squared family".into()))?;
        LocalLoss::from_quadratic(q, b, c)
    }
}

/// Graph whose nodes are the clusters of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGraph {
    pub graph: EmpiricalGraph,
    pub losses: Vec<AggregatedLoss>,
}

/// Merges every cluster into one node. Edges between clusters are summed;
/// edges inside a cluster disappear.
pub fn build_cluster_graph(g: &EmpiricalGraph, p: &Partition, losses: &[LocalLoss]) -> Result<ClusterGraph> {
    check_sizes(g, p, losses)?;
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in g.edges() {
        let (a, b) = (p.cluster_of(e.head), p.cluster_of(e.tail));
        if a != b {
            *weights.entry((a.min(b), a.max(b))).or_insert(0.0) += e.weight;
        }
    }
    let records: Vec<_> = weights.into_iter().map(|((a, b), w)| (a, b, w)).collect();
    let graph = EmpiricalGraph::new(p.cluster_count(), &records)?;
    let losses = p
        .clusters()
        .iter()
        .map(|members| AggregatedLoss::new(members.iter().map(|&i| losses[i].clone()).collect()))
        .collect::<Result<_>>()?;
    Ok(ClusterGraph { graph, losses })
}

fn check_sizes(g: &EmpiricalGraph, p: &Partition, losses: &[LocalLoss]) -> Result<()> {
    if p.node_count() != g.node_count() {
        return Err(GtvError::DimensionMismatch {
            expected: g.node_count(),
            got: p.node_count(),
        });
    }
    if losses.len() != g.node_count() {
        return Err(GtvError::DimensionMismatch {
            expected: g.node_count(),
            got: losses.len(),
        });
    }
    Ok(())
}

fn members_of(p: &Partition, cluster: usize, losses: &[LocalLoss]) -> Result<AggregatedLoss> {
    if cluster >= p.cluster_count() {
        return Err(GtvError::InvalidArgument(format!(
            "cluster {cluster} out of range (partition has {})",
            p.cluster_count()
        )));
    }
    AggregatedLoss::new(p.cluster(cluster).iter().map(|&i| losses[i].clone()).collect())
}

/// Minimizer of the pooled loss. Closed form for the squared family, damped
/// Newton otherwise. A non-unique minimizer is reported as
/// [`GtvError::Singular`].
pub fn cluster_oracle(loss: &AggregatedLoss) -> Result<Vec<f64>> {
    if let Some((q, b, _)) = loss.quadratic_form() {
        let eig = SymEigen::new(&q);
        if eig.min() <= linalg_singular_floor(&eig) {
            return Err(GtvError::Singular(format!(
                "pooled quadratic has smallest eigenvalue {:e}",
                eig.min()
            )));
        }
        return Ok(eig.apply(&b, |mu| 1.0 / mu));
    }

    let mut w = vec![0.0; loss.dim()];
    for _ in 0..ORACLE_MAX_ITERS {
        let grad = loss.grad(&w)?;
        let gnorm = linalg::norm2(&grad);
        if gnorm <= ORACLE_TOL {
            return Ok(w);
        }
        let hess = loss.hessian(&w)?;
        let step = hess
            .cholesky()
            .ok_or_else(|| GtvError::Singular("pooled Hessian is not positive definite".into()))?
            .solve(&DVector::from_column_slice(&grad));
        let f0 = loss.eval(&w)?;
        let slope = -linalg::dot(&grad, step.as_slice());
        let mut t = 1.0;
        let next = loop {
            let cand: Vec<f64> = w.iter().zip(step.iter()).map(|(w, s)| w - t * s).collect();
            if loss.eval(&cand)? <= f0 + 1e-4 * t * slope || t < 1e-12 {
                break cand;
            }
            t *= 0.5;
        };
        w = next;
    }
    let residual = linalg::norm2(&loss.grad(&w)?);
    if residual <= ORACLE_TOL {
        Ok(w)
    } else {
        Err(GtvError::InnerSolve {
            iterations: ORACLE_MAX_ITERS,
            residual,
        })
    }
}

fn linalg_singular_floor(eig: &SymEigen) -> f64 {
    crate::losses::SINGULAR_RTOL * eig.max().abs().max(1.0)
}

/// Problem constants entering the well-connectedness condition for one
/// cluster, with per-member entries in cluster order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterConstants {
    /// Strong-convexity parameter of the pooled loss.
    pub sigma: f64,
    /// Gradient Lipschitz constant of each member loss.
    pub lipschitz: Vec<f64>,
    /// `‖∇ℓᵢ(w̄)‖₂` at the pooled minimizer `w̄`.
    pub clustering_error: Vec<f64>,
}

impl ClusterConstants {
    /// Analytic constants for squared-family losses: `σ = 2λ_min(ΣQᵢ)`,
    /// `Lᵢ = 2λ_max(Qᵢ)`.
    pub fn from_quadratic(loss: &AggregatedLoss, oracle: &[f64]) -> Result<Self> {
        let unsupported = || {
            GtvError::Unsupported(
                "cluster constants are only derived for squared-family losses; supply them explicitly".into(),
            )
        };
        let (q, _, _) = loss.quadratic_form().ok_or_else(unsupported)?;
        let sigma = 2.0 * SymEigen::new(&q).min();
        let mut lipschitz = Vec::with_capacity(loss.members().len());
        let mut clustering_error = Vec::with_capacity(loss.members().len());
        for m in loss.members() {
            let (mq, _, _) = m.quadratic_form().ok_or_else(unsupported)?;
            lipschitz.push(2.0 * SymEigen::new(&mq).max().max(0.0));
            clustering_error.push(linalg::norm2(&m.grad(oracle)?));
        }
        Ok(Self {
            sigma,
            lipschitz,
            clustering_error,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    /// Enumerate every subset (at most [`EXHAUSTIVE_MAX_CLUSTER`] nodes).
    Exhaustive,
    #[default]
    MaxFlow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    WellConnected,
    /// `witness` is a subset of the cluster (hub excluded) whose demand
    /// reaches its internal cut.
    Violated {
        witness: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterCertificate {
    pub cluster: usize,
    pub hub: usize,
    pub sigma: f64,
    pub lipschitz: Vec<f64>,
    pub clustering_error: Vec<f64>,
    /// Weighted boundary `|∂C|`.
    pub boundary: f64,
    /// Per-member demand bounds `βᵢ`, in cluster order.
    pub demands: Vec<f64>,
    /// `min_A cut(A) − β(A)` over nonempty subsets avoiding the hub
    /// (`+∞` for singleton clusters).
    pub min_slack: f64,
    pub verdict: Verdict,
}

impl ClusterCertificate {
    pub fn is_well_connected(&self) -> bool {
        self.verdict == Verdict::WellConnected
    }
}

/// Certificate for one cluster with constants derived from squared-family
/// losses. With `hub = None` every member is tried; the first passing hub
/// (or, if none passes, the one with the largest slack) is reported.
pub fn check_well_connected(
    g: &EmpiricalGraph,
    p: &Partition,
    cluster: usize,
    losses: &[LocalLoss],
    lambda: f64,
    hub: Option<usize>,
    mode: CheckMode,
) -> Result<ClusterCertificate> {
    check_sizes(g, p, losses)?;
    let pooled = members_of(p, cluster, losses)?;
    let oracle = cluster_oracle(&pooled)?;
    let constants = ClusterConstants::from_quadratic(&pooled, &oracle)?;
    check_well_connected_with(g, p, cluster, lambda, &constants, hub, mode)
}

/// Like [`check_well_connected`] with caller-supplied constants.
pub fn check_well_connected_with(
    g: &EmpiricalGraph,
    p: &Partition,
    cluster: usize,
    lambda: f64,
    constants: &ClusterConstants,
    hub: Option<usize>,
    mode: CheckMode,
) -> Result<ClusterCertificate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(GtvError::InvalidArgument(format!(
            "well-connectedness needs a positive finite lambda, got {lambda}"
        )));
    }
    if cluster >= p.cluster_count() {
        return Err(GtvError::InvalidArgument(format!("cluster {cluster} out of range")));
    }
    let members = p.cluster(cluster);
    if constants.lipschitz.len() != members.len() || constants.clustering_error.len() != members.len() {
        return Err(GtvError::DimensionMismatch {
            expected: members.len(),
            got: constants.lipschitz.len(),
        });
    }
    if !(constants.sigma > 0.0) {
        return Err(GtvError::Singular(format!(
            "pooled loss is not strongly convex (sigma = {:e})",
            constants.sigma
        )));
    }

    let boundary = g.weighted_boundary(members);
    let inside = g.membership(members);
    let demands: Vec<f64> = members
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let external: f64 = g
                .incident(i)
                .iter()
                .map(|inc| g.edge(inc.edge))
                .filter(|e| !inside[e.other(i)])
                .map(|e| e.weight)
                .sum();
            external + constants.lipschitz[k] * boundary / constants.sigma + constants.clustering_error[k] / lambda
        })
        .collect();

    let local = induced_subgraph(g, members)?;
    if mode == CheckMode::Exhaustive && members.len() > EXHAUSTIVE_MAX_CLUSTER {
        return Err(GtvError::InvalidArgument(format!(
            "exhaustive check limited to {EXHAUSTIVE_MAX_CLUSTER} nodes, cluster has {}",
            members.len()
        )));
    }
    let hubs: Vec<usize> = match hub {
        Some(h) => vec![members
            .iter()
            .position(|&i| i == h)
            .ok_or_else(|| GtvError::InvalidArgument(format!("hub {h} is not in cluster {cluster}")))?],
        None => (0..members.len()).collect(),
    };

    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for h in hubs {
        let (slack, witness) = match mode {
            CheckMode::Exhaustive => min_slack_exhaustive(&local, &demands, h),
            CheckMode::MaxFlow => min_slack_maxflow(&local, &demands, h),
        };
        let better = best.as_ref().is_none_or(|b| slack > b.1);
        if better {
            best = Some((h, slack, witness));
        }
        if slack > STRICT_MARGIN {
            break;
        }
    }
    let (h, min_slack, witness) = best.expect("cluster is nonempty");
    let verdict = if min_slack > STRICT_MARGIN {
        Verdict::WellConnected
    } else {
        Verdict::Violated {
            witness: witness.into_iter().map(|k| members[k]).collect(),
        }
    };
    Ok(ClusterCertificate {
        cluster,
        hub: members[h],
        sigma: constants.sigma,
        lipschitz: constants.lipschitz.clone(),
        clustering_error: constants.clustering_error.clone(),
        boundary,
        demands,
        min_slack,
        verdict,
    })
}

/// Subgraph on `nodes` (relabelled `0..nodes.len()` in the given order).
fn induced_subgraph(g: &EmpiricalGraph, nodes: &[usize]) -> Result<EmpiricalGraph> {
    let mut local = vec![usize::MAX; g.node_count()];
    for (k, &i) in nodes.iter().enumerate() {
        local[i] = k;
    }
    let records: Vec<_> = g
        .edges()
        .iter()
        .filter(|e| local[e.head] != usize::MAX && local[e.tail] != usize::MAX)
        .map(|e| (local[e.head], local[e.tail], e.weight))
        .collect();
    EmpiricalGraph::new(nodes.len(), &records)
}

fn cut_weight(g: &EmpiricalGraph, in_a: &[bool]) -> f64 {
    g.edges()
        .iter()
        .filter(|e| in_a[e.head] != in_a[e.tail])
        .map(|e| e.weight)
        .sum()
}

fn subset_slack(g: &EmpiricalGraph, demands: &[f64], in_a: &[bool]) -> f64 {
    let beta: f64 = demands.iter().zip(in_a).filter(|(_, &a)| a).map(|(b, _)| b).sum();
    cut_weight(g, in_a) - beta
}

/// Minimum of `cut(A) − β(A)` over nonempty `A` avoiding `hub`, by Gray-code
/// enumeration. The returned slack is recomputed from scratch for the
/// minimizing subset.
pub fn min_slack_exhaustive(g: &EmpiricalGraph, demands: &[f64], hub: usize) -> (f64, Vec<usize>) {
    let free: Vec<usize> = (0..g.node_count()).filter(|&i| i != hub).collect();
    if free.is_empty() {
        return (f64::INFINITY, Vec::new());
    }
    let mut in_a = vec![false; g.node_count()];
    let (mut beta, mut cut) = (0.0, 0.0);
    let mut best = (f64::INFINITY, Vec::new());
    for k in 1u64..(1u64 << free.len()) {
        let v = free[k.trailing_zeros() as usize];
        for inc in g.incident(v) {
            let e = g.edge(inc.edge);
            let u = e.other(v);
            cut += if in_a[u] != in_a[v] { -e.weight } else { e.weight };
        }
        beta += if in_a[v] { -demands[v] } else { demands[v] };
        in_a[v] = !in_a[v];
        let slack = cut - beta;
        if slack < best.0 {
            best = (slack, (0..g.node_count()).filter(|&i| in_a[i]).collect());
        }
    }
    let mut mask = vec![false; g.node_count()];
    for &i in &best.1 {
        mask[i] = true;
    }
    (subset_slack(g, demands, &mask), best.1)
}

/// Same quantity as [`min_slack_exhaustive`] via max-flow: forcing node `j`
/// into the source side, the minimum cut of the network
/// `source →(βᵢ) i`, internal edges `(A_e)`, sink = hub equals
/// `β_total + min_{A∋j} (cut(A) − β(A))`.
pub fn min_slack_maxflow(g: &EmpiricalGraph, demands: &[f64], hub: usize) -> (f64, Vec<usize>) {
    let n = g.node_count();
    let source = n;
    let mut best = (f64::INFINITY, Vec::new());
    for j in (0..n).filter(|&j| j != hub) {
        let mut net = FlowNetwork::new(n + 1);
        for i in (0..n).filter(|&i| i != hub) {
            net.add_arc(source, i, if i == j { f64::INFINITY } else { demands[i] });
        }
        for e in g.edges() {
            net.add_edge(e.head, e.tail, e.weight);
        }
        net.max_flow(source, hub);
        let mut in_a = net.source_side(source);
        in_a.truncate(n);
        let slack = subset_slack(g, demands, &in_a);
        if slack < best.0 {
            best = (slack, (0..n).filter(|&i| in_a[i]).collect());
        }
    }
    best
}

/// Outcome of the strict flow feasibility test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowCheck {
    pub feasible: bool,
    pub min_slack: f64,
    /// Per-edge flow (positive from head to tail) carrying `βᵢ` out of every
    /// non-hub node into the hub with `|fₑ| < Aₑ`; present when feasible.
    pub flow: Option<Vec<f64>>,
    /// Violating subset; present when infeasible.
    pub cut: Option<Vec<usize>>,
}

/// Decides whether a scalar flow routes demand `βᵢ ≥ 0` from every non-hub
/// node to `hub` with every edge strictly below its capacity `A_e`.
pub fn flow_feasible(g: &EmpiricalGraph, demands: &[f64], hub: usize) -> Result<FlowCheck> {
    if demands.len() != g.node_count() {
        return Err(GtvError::DimensionMismatch {
            expected: g.node_count(),
            got: demands.len(),
        });
    }
    if hub >= g.node_count() {
        return Err(GtvError::NodeOutOfRange {
            index: 0,
            node: hub,
            n: g.node_count(),
        });
    }
    if let Some(b) = demands.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(GtvError::InvalidArgument(format!(
            "demand bounds must be finite and nonnegative, got {b}"
        )));
    }
    let (min_slack, witness) = min_slack_maxflow(g, demands, hub);
    if min_slack <= STRICT_MARGIN {
        return Ok(FlowCheck {
            feasible: false,
            min_slack,
            flow: None,
            cut: Some(witness),
        });
    }

    // Shrinking every capacity by at most slack/(2|E|) keeps all cuts above
    // their demand, so a max flow on the shrunk network is strictly feasible.
    let n = g.node_count();
    let shrink = if min_slack.is_finite() {
        min_slack / (2.0 * g.edge_count().max(1) as f64)
    } else {
        0.0
    };
    let mut net = FlowNetwork::new(n + 1);
    for i in (0..n).filter(|&i| i != hub) {
        net.add_arc(n, i, demands[i]);
    }
    let handles: Vec<_> = g
        .edges()
        .iter()
        .map(|e| {
            let cap = e.weight - shrink.min(0.5 * e.weight);
            (net.add_edge(e.head, e.tail, cap), cap)
        })
        .collect();
    net.max_flow(n, hub);
    let flow = handles.iter().map(|&(h, cap)| net.flow_on(h, cap)).collect();
    Ok(FlowCheck {
        feasible: true,
        min_slack,
        flow: Some(flow),
        cut: None,
    })
}

/// Per-cluster comparison of a GTV solution against the cluster-wise
/// optimum and the deviation bound `2|∂C|λ/σ_C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub cluster: usize,
    /// Whether the cluster passed the well-connectedness check; the bound is
    /// only asserted for certified clusters.
    pub certified: bool,
    /// Largest distance between learnt parameters of two cluster members.
    pub spread: f64,
    /// `maxᵢ ‖ŵᵢ − w̄_C‖₂`
    pub deviation: f64,
    pub bound: f64,
}

impl BoundReport {
    /// `None` when inconclusive (cluster not certified).
    pub fn holds(&self, tol: f64) -> Option<bool> {
        self.certified
            .then_some(self.spread <= tol && self.deviation <= self.bound + tol)
    }
}

pub fn verify_theorem_bound(
    g: &EmpiricalGraph,
    p: &Partition,
    losses: &[LocalLoss],
    lambda: f64,
    penalty: &GtvPenalty,
    w: &NodeField,
) -> Result<Vec<BoundReport>> {
    if !penalty.is_norm() {
        return Err(GtvError::Unsupported(format!(
            "the deviation bound needs a norm penalty, got {penalty}"
        )));
    }
    check_sizes(g, p, losses)?;
    (0..p.cluster_count())
        .map(|c| {
            let pooled = members_of(p, c, losses)?;
            let oracle = cluster_oracle(&pooled)?;
            let constants = ClusterConstants::from_quadratic(&pooled, &oracle)?;
            let cert = check_well_connected_with(g, p, c, lambda, &constants, None, CheckMode::MaxFlow)?;
            let members = p.cluster(c);
            let mut spread: f64 = 0.0;
            let mut deviation: f64 = 0.0;
            for (k, &i) in members.iter().enumerate() {
                deviation = deviation.max(linalg::dist2(w.row(i), &oracle));
                for &j in &members[k + 1..] {
                    spread = spread.max(linalg::dist2(w.row(i), w.row(j)));
                }
            }
            Ok(BoundReport {
                cluster: c,
                certified: cert.is_well_connected(),
                spread,
                deviation,
                bound: 2.0 * cert.boundary * lambda / constants.sigma,
            })
        })
        .collect()
}
