//! Discretized domains and scalar fields over them.
//!
//! A [`Graph`] is either a uniform lattice over a box (low-dimensional feature
//! spaces) or a symmetrized k-nearest-neighbor graph over sample points (high
//! dimensions). A [`ScalarField`] attaches one value per vertex; its linear
//! interpolation along edges is the surrogate the boundary analysis works on.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Largest vertex count a lattice may have.
pub const MAX_GRID_VERTICES: usize = 1 << 31;

/// Undirected simple graph with an embedding of each vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph<P = f64> {
    vertex_count: usize,
    dim: usize,
    edges: Vec<(usize, usize)>,
    positions: Vec<P>,
    adj_offsets: Vec<usize>,
    adj: Vec<usize>,
}

impl<P: Copy> Graph<P> {
    /// Builds a graph from flat row-major `positions` (`vertex_count * dim`
    /// entries) and an edge list. Edges are stored as `(min, max)`.
    pub fn new(
        vertex_count: usize,
        dim: usize,
        positions: Vec<P>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if positions.len() != vertex_count * dim {
            return Err(Error::Structural(format!(
                "{} coordinates for {} vertices of dimension {}",
                positions.len(),
                vertex_count,
                dim
            )));
        }
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        for &(u, v) in &edges {
            if u == v {
                return Err(Error::Structural(format!("self-loop at vertex {u}")));
            }
            if v >= vertex_count {
                return Err(Error::Structural(format!(
                    "edge ({u}, {v}) references a vertex >= {vertex_count}"
                )));
            }
        }
        let mut sorted = edges.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Structural(format!("duplicate edge {:?}", w[0])));
        }
        edges.shrink_to_fit();

        let mut degree = vec![0usize; vertex_count + 1];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(vertex_count + 1);
        let mut acc = 0;
        for d in &degree[..vertex_count] {
            adj_offsets.push(acc);
            acc += d;
        }
        adj_offsets.push(acc);
        let mut fill = adj_offsets.clone();
        let mut adj = vec![0usize; acc];
        for &(u, v) in &edges {
            adj[fill[u]] = v;
            fill[u] += 1;
            adj[fill[v]] = u;
            fill[v] += 1;
        }
        for v in 0..vertex_count {
            adj[adj_offsets[v]..adj_offsets[v + 1]].sort_unstable();
        }

        Ok(Self {
            vertex_count,
            dim,
            edges,
            positions,
            adj_offsets,
            adj,
        })
    }

    /// A graph with no embedding (dimension 0), for purely combinatorial use.
    pub fn abstract_graph(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        Self::new(vertex_count, 0, Vec::new(), edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn position(&self, v: usize) -> &[P] {
        &self.positions[v * self.dim..(v + 1) * self.dim]
    }

    /// Iterates over vertex coordinates in index order.
    pub fn positions(&self) -> impl ExactSizeIterator<Item = &[P]> + '_ {
        (0..self.vertex_count).map(move |v| self.position(v))
    }

    /// Sorted neighbor list of `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.adj_offsets[v]..self.adj_offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj_offsets[v + 1] - self.adj_offsets[v]
    }

    /// Connected component label of every vertex, labels numbered by first
    /// appearance in index order.
    pub fn component_labels(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.vertex_count];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.vertex_count {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &w in self.neighbors(u) {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        (next, label)
    }
}

/// Axis-aligned uniform lattice over a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<P = f64> {
    pub resolution_per_axis: usize,
    pub dim: usize,
    pub bounds: Vec<(P, P)>,
}

impl<P: Real> GridSpec<P> {
    /// Lattice over the unit box `[0, 1]^dim`.
    pub fn unit(resolution_per_axis: usize, dim: usize) -> Self {
        Self {
            resolution_per_axis,
            dim,
            bounds: vec![(P::zero(), P::one()); dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution_per_axis < 2 {
            return Err(Error::InvalidGrid(format!(
                "resolution {} < 2",
                self.resolution_per_axis
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if self.bounds.len() != self.dim {
            return Err(Error::InvalidGrid(format!(
                "{} bounds for dimension {}",
                self.bounds.len(),
                self.dim
            )));
        }
        for (axis, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} has bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// Total vertex count, or a capacity error when it does not fit.
    pub fn vertex_count(&self) -> Result<usize> {
        u32::try_from(self.dim)
            .ok()
            .and_then(|d| self.resolution_per_axis.checked_pow(d))
            .filter(|&n| n <= MAX_GRID_VERTICES)
            .ok_or(Error::Capacity {
                resolution: self.resolution_per_axis,
                dim: self.dim,
            })
    }
}

/// Builds the lattice graph of `spec`. Vertex indices are row-major (axis 0
/// varies slowest) and edges join axis-aligned neighbors only.
pub fn build_grid_graph<P: Real>(spec: &GridSpec<P>) -> Result<Graph<P>> {
    spec.validate()?;
    let n = spec.vertex_count()?;
    let res = spec.resolution_per_axis;
    let dim = spec.dim;

    let steps: Vec<P> = spec
        .bounds
        .iter()
        .map(|&(lo, hi)| (hi - lo) / P::from_usize(res - 1).unwrap())
        .collect();
    // stride of axis a is res^(dim - 1 - a)
    let mut strides = vec![1usize; dim];
    for a in (0..dim.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * res;
    }

    let mut positions = Vec::with_capacity(n * dim);
    let mut edges = Vec::with_capacity(dim * (n / res) * (res - 1));
    for v in 0..n {
        for a in 0..dim {
            let i = (v / strides[a]) % res;
            let (lo, hi) = spec.bounds[a];
            // pin the last lattice coordinate to the upper bound exactly
            let x = if i == res - 1 {
                hi
            } else {
                lo + steps[a] * P::from_usize(i).unwrap()
            };
            positions.push(x);
        }
        for a in 0..dim {
            if (v / strides[a]) % res + 1 < res {
                edges.push((v, v + strides[a]));
            }
        }
    }
    Graph::new(n, dim, positions, edges)
}

/// Exact k-nearest-neighbor graph under Euclidean distance with union
/// symmetrization. Distance ties are broken by the smaller vertex index.
pub fn build_knn_graph<P: Real, R: AsRef<[P]> + Sync>(points: &[R], k: usize) -> Result<Graph<P>> {
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidInput("KNN graph needs at least one point".into()));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "k = {k} must satisfy 1 <= k < {n}"
        )));
    }
    let dim = points[0].as_ref().len();
    if let Some(i) = points.iter().position(|p| p.as_ref().len() != dim) {
        return Err(Error::InvalidInput(format!(
            "point {i} has dimension {} instead of {dim}",
            points[i].as_ref().len()
        )));
    }

    let mut positions = Vec::with_capacity(n * dim);
    for p in points {
        positions.extend_from_slice(p.as_ref());
    }

    let neighbor_lists: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let pu = points[u].as_ref();
            let mut cand: Vec<(P, usize)> = (0..n)
                .filter(|&v| v != u)
                .map(|v| (squared_distance(pu, points[v].as_ref()), v))
                .collect();
            let by_dist = |a: &(P, usize), b: &(P, usize)| {
                a.0.partial_cmp(&b.0)
                    .unwrap_or(Ordering::Equal)
                    .then(a.1.cmp(&b.1))
            };
            cand.select_nth_unstable_by(k - 1, by_dist);
            cand.truncate(k);
            cand.into_iter().map(|(_, v)| v).collect()
        })
        .collect();

    let mut edges: Vec<(usize, usize)> = neighbor_lists
        .iter()
        .enumerate()
        .flat_map(|(u, nbrs)| nbrs.iter().map(move |&v| (u.min(v), u.max(v))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Graph::new(n, dim, positions, edges)
}

#[inline]
pub(crate) fn squared_distance<P: Real>(a: &[P], b: &[P]) -> P {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .fold(P::zero(), |acc, d| acc + d)
}

/// Per-vertex values over a graph.
#[derive(Clone, Debug)]
pub struct ScalarField<'g, T, P = T> {
    graph: &'g Graph<P>,
    values: Vec<T>,
}

impl<'g, T: Scalar, P: Copy> ScalarField<'g, T, P> {
    pub fn new(graph: &'g Graph<P>, values: Vec<T>) -> Result<Self> {
        if values.len() != graph.vertex_count() {
            return Err(Error::Structural(format!(
                "{} values for {} vertices",
                values.len(),
                graph.vertex_count()
            )));
        }
        Ok(Self { graph, values })
    }

    pub fn graph(&self) -> &'g Graph<P> {
        self.graph
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, v: usize) -> T {
        self.values[v]
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// The field `-f` over the same graph.
    pub fn negated(&self) -> Self {
        Self {
            graph: self.graph,
            values: self.values.iter().map(|&v| -v).collect(),
        }
    }

    /// The field `c * f` over the same graph.
    pub fn scaled(&self, c: T) -> Self {
        Self {
            graph: self.graph,
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }
}

/// Evaluates `predict` at every vertex position.
pub fn evaluate_field<'g, T, P, F>(predict: F, graph: &'g Graph<P>) -> Result<ScalarField<'g, T, P>>
where
    T: Real,
    P: Copy + Send + Sync,
    F: Fn(&[P]) -> T + Sync,
{
    let values: Vec<T> = (0..graph.vertex_count())
        .into_par_iter()
        .map(|v| predict(graph.position(v)))
        .collect();
    if let Some(vertex) = values.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { vertex });
    }
    ScalarField::new(graph, values)
}

/// Per-axis min-max scaling recorded so it can be replayed on new points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitBoxTransform<T = f64> {
    pub ranges: Vec<(T, T)>,
}

impl<T: Real> UnitBoxTransform<T> {
    /// Fits per-axis `(min, max)` over `points`.
    pub fn fit<R: AsRef<[T]>>(points: &[R]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidInput("cannot normalize an empty point set".into()))?
            .as_ref();
        let mut ranges: Vec<(T, T)> = first.iter().map(|&x| (x, x)).collect();
        for p in points {
            let p = p.as_ref();
            if p.len() != ranges.len() {
                return Err(Error::InvalidInput("ragged point dimensions".into()));
            }
            for (r, &x) in ranges.iter_mut().zip(p) {
                r.0 = r.0.min(x);
                r.1 = r.1.max(x);
            }
        }
        Ok(Self { ranges })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            ranges: vec![(T::zero(), T::one()); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    /// Maps one point; a degenerate axis (min = max) maps to 0.5.
    pub fn apply(&self, point: &[T]) -> Vec<T> {
        point
            .iter()
            .zip(&self.ranges)
            .map(|(&x, &(lo, hi))| {
                if hi > lo {
                    (x - lo) / (hi - lo)
                } else {
                    T::lit(0.5)
                }
            })
            .collect()
    }

    pub fn apply_all<R: AsRef<[T]>>(&self, points: &[R]) -> Vec<Vec<T>> {
        points.iter().map(|p| self.apply(p.as_ref())).collect()
    }
}

/// Min-max scales `points` into the unit box and returns the fitted transform.
pub fn normalize_unit_box<T: Real, R: AsRef<[T]>>(
    points: &[R],
) -> Result<(Vec<Vec<T>>, UnitBoxTransform<T>)> {
    let transform = UnitBoxTransform::fit(points)?;
    Ok((transform.apply_all(points), transform))
}
