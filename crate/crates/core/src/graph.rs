//! Empirical graph data model.
//!
//! Nodes are the indices `0..n`; every undirected edge is stored once with a
//! canonical orientation (the smaller index is the head `e₊`, the larger the
//! tail `e₋`). Node and edge vector fields are stored as flat row-major
//! buffers, and the block-incidence operator is only ever applied, never
//! materialized.

use std::collections::HashSet;
use std::marker::PhantomData;

use crate::error::{GtvError, Result};

/// One stored edge. `head < tail` always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub head: usize,
    pub tail: usize,
    pub weight: f64,
}

impl Edge {
    /// The endpoint opposite to `node`. `node` must be incident to the edge.
    pub fn other(&self, node: usize) -> usize {
        if node == self.head {
            self.tail
        } else {
            self.head
        }
    }
}

/// Incidence of an edge at a node: `sign` is `+1.0` when the node is the head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incidence {
    pub edge: usize,
    pub sign: f64,
}

/// Undirected weighted graph with strictly positive weights, no self-loops and
/// no parallel edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGraph {
    n: usize,
    edges: Vec<Edge>,
    incident: Vec<Vec<Incidence>>,
}

impl EmpiricalGraph {
    /// Builds a graph from `(i, j, weight)` records with 0-based node indices.
    ///
    /// Records may use either orientation; `(i, j)` and `(j, i)` name the same
    /// undirected edge, so listing both is rejected as a duplicate. Edge
    /// storage order follows record order.
    pub fn new(n: usize, records: &[(usize, usize, f64)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        let mut edges = Vec::with_capacity(records.len());
        for (index, &(i, j, weight)) in records.iter().enumerate() {
            for node in [i, j] {
                if node >= n {
                    return Err(GtvError::NodeOutOfRange { index, node, n });
                }
            }
            if i == j {
                return Err(GtvError::SelfLoop { index, node: i });
            }
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(GtvError::InvalidWeight { index, weight });
            }
            let (head, tail) = if i < j { (i, j) } else { (j, i) };
            if !seen.insert((head, tail)) {
                return Err(GtvError::DuplicateEdge { index, i, j });
            }
            edges.push(Edge { head, tail, weight });
        }

        let mut incident = vec![Vec::new(); n];
        for (e, edge) in edges.iter().enumerate() {
            incident[edge.head].push(Incidence { edge: e, sign: 1.0 });
            incident[edge.tail].push(Incidence { edge: e, sign: -1.0 });
        }
        Ok(Self { n, edges, incident })
    }

    /// Graph without edges.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            incident: vec![Vec::new(); n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Signed incident edges of `node`, in edge storage order.
    pub fn incident(&self, node: usize) -> &[Incidence] {
        &self.incident[node]
    }

    /// Neighbourhood size `|N(i)|`.
    pub fn degree(&self, node: usize) -> usize {
        self.incident[node].len()
    }

    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.incident[node]
            .iter()
            .map(move |inc| self.edges[inc.edge].other(node))
    }

    /// Weight `A_{i,j}`, zero when the pair is not connected.
    pub fn weight_between(&self, i: usize, j: usize) -> f64 {
        self.incident[i]
            .iter()
            .map(|inc| &self.edges[inc.edge])
            .find(|e| e.other(i) == j)
            .map_or(0.0, |e| e.weight)
    }

    /// Sum of the weights of edges with exactly one endpoint in `cluster`.
    pub fn weighted_boundary(&self, cluster: &[usize]) -> f64 {
        let mask = self.membership(cluster);
        self.edges
            .iter()
            .filter(|e| mask[e.head] != mask[e.tail])
            .map(|e| e.weight)
            .sum()
    }

    /// Indicator vector of a node set; out-of-range entries are ignored.
    pub fn membership(&self, nodes: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.n];
        for &i in nodes {
            if i < self.n {
                mask[i] = true;
            }
        }
        mask
    }

    /// Connected component label per node; labels are `0..count` in order of
    /// the smallest member.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for u in self.neighbors(v) {
                    if label[u] == usize::MAX {
                        label[u] = count;
                        stack.push(u);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().0 == 1
    }

    /// `u⁽ᵉ⁾ = w⁽ᵉ⁺⁾ − w⁽ᵉ⁻⁾` for every edge.
    pub fn apply_incidence(&self, w: &NodeField) -> Result<EdgeField> {
        check_len(self.n, w.len())?;
        let d = w.dim();
        let mut u = EdgeField::zeros(self.edges.len(), d);
        for (e, edge) in self.edges.iter().enumerate() {
            let (head, tail) = (w.row(edge.head), w.row(edge.tail));
            for ((out, a), b) in u.row_mut(e).iter_mut().zip(head).zip(tail) {
                *out = a - b;
            }
        }
        Ok(u)
    }

    /// Adjoint of [`apply_incidence`](Self::apply_incidence): the signed sum
    /// of incident edge vectors at every node.
    pub fn apply_incidence_transpose(&self, u: &EdgeField) -> Result<NodeField> {
        check_len(self.edges.len(), u.len())?;
        let d = u.dim();
        let mut w = NodeField::zeros(self.n, d);
        for i in 0..self.n {
            let out = w.row_mut(i);
            for inc in &self.incident[i] {
                for (o, x) in out.iter_mut().zip(u.row(inc.edge)) {
                    *o += inc.sign * x;
                }
            }
        }
        Ok(w)
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GtvError::DimensionMismatch { expected, got })
    }
}

/// Marker for fields indexed by nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nodes;

/// Marker for fields indexed by edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edges;

/// A map from nodes (or edges) to vectors in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<K> {
    dim: usize,
    data: Vec<f64>,
    _kind: PhantomData<K>,
}

/// Node space: one parameter vector per node.
pub type NodeField = Field<Nodes>;
/// Edge space: one flow vector per edge, in edge storage order.
pub type EdgeField = Field<Edges>;

impl<K> Field<K> {
    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; len * dim],
            _kind: PhantomData,
        }
    }

    /// Builds a field from a flat row-major buffer.
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 && !data.is_empty() {
            return Err(GtvError::InvalidArgument("dimension must be positive".into()));
        }
        if dim > 0 && !data.len().is_multiple_of(dim) {
            return Err(GtvError::DimensionMismatch {
                expected: (data.len() / dim + 1) * dim,
                got: data.len(),
            });
        }
        Ok(Self {
            dim,
            data,
            _kind: PhantomData,
        })
    }

    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            check_len(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Self::from_flat(dim, data)
    }

    /// Every entry set to the same vector.
    pub fn constant(len: usize, value: &[f64]) -> Self {
        let mut data = Vec::with_capacity(len * value.len());
        for _ in 0..len {
            data.extend_from_slice(value);
        }
        Self {
            dim: value.len(),
            data,
            _kind: PhantomData,
        }
    }

    /// Number of entries (nodes or edges).
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Euclidean inner product over all entries.
    pub fn dot(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Largest per-entry change `maxₖ ‖self⁽ᵏ⁾ − other⁽ᵏ⁾‖₂`.
    pub fn max_row_distance(&self, other: &Self) -> f64 {
        self.rows()
            .zip(other.rows())
            .map(|(a, b)| crate::linalg::dist2(a, b))
            .fold(0.0, f64::max)
    }

    /// Entry-wise sum of all rows.
    pub fn row_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, b) in s.iter_mut().zip(row) {
                *a += b;
            }
        }
        s
    }
}
