use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_graph::{build_grid_graph, build_knn_graph, Graph, GridSpec};
use crate::klr::model::{dot, gaussian_kernel};
use crate::scalar::Real;

/// Kernel rows are cached when `vertices * train_points` stays below this.
pub const DENSE_KERNEL_LIMIT: usize = 8 << 20;

/// How the feature space is discretized for boundary analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Discretization {
    /// Uniform lattice over the unit box with this many vertices per axis.
    Grid { resolution: usize },
    /// k-nearest-neighbor graph over the training points.
    Knn { k: usize },
}

impl Discretization {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Discretization::Grid { resolution } if resolution < 2 => {
                Err(Error::Config(format!("grid resolution {resolution} < 2")))
            }
            Discretization::Knn { k: 0 } => Err(Error::Config("knn k must be >= 1".into())),
            _ => Ok(()),
        }
    }

    pub fn build_graph<T: Real>(&self, train_points: &[Vec<T>]) -> Result<Graph<T>> {
        self.validate()?;
        match *self {
            Discretization::Grid { resolution } => {
                let dim = train_points.first().map_or(0, Vec::len);
                build_grid_graph(&GridSpec::unit(resolution, dim))
            }
            Discretization::Knn { k } => build_knn_graph(train_points, k),
        }
    }
}

enum KernelRows<T> {
    /// Row-major `vertices x train_points`.
    Dense(Vec<T>),
    /// Vertices are the training points themselves; rows come from the Gram matrix.
    Train,
    /// Lattice too large to cache: per-axis kernel factors, since the
    /// Gaussian kernel is a product over coordinates. `factors[a]` is
    /// `resolution x train_points`.
    Separable { resolution: usize, factors: Vec<Vec<T>> },
}

/// Discretization graph together with its kernel rows against the training set.
pub struct TopoDomain<T> {
    graph: Graph<T>,
    rows: KernelRows<T>,
}

impl<T: Real> TopoDomain<T> {
    pub fn new(disc: Discretization, train_points: &[Vec<T>], sigma: T) -> Result<Self> {
        Self::with_cache_limit(disc, train_points, sigma, DENSE_KERNEL_LIMIT)
    }

    fn with_cache_limit(disc: Discretization, train_points: &[Vec<T>], sigma: T, limit: usize) -> Result<Self> {
        let graph = disc.build_graph(train_points)?;
        let n = train_points.len();
        let rows = match disc {
            Discretization::Knn { .. } => KernelRows::Train,
            Discretization::Grid { .. } if graph.vertex_count().saturating_mul(n) <= limit => {
                let mut dense = vec![T::zero(); graph.vertex_count() * n];
                dense
                    .par_chunks_mut(n.max(1))
                    .enumerate()
                    .for_each(|(v, row)| {
                        let x = graph.position(v);
                        for (slot, p) in row.iter_mut().zip(train_points) {
                            *slot = gaussian_kernel(x, p, sigma);
                        }
                    });
                KernelRows::Dense(dense)
            }
            Discretization::Grid { resolution } => {
                let dim = graph.dim();
                let mut stride = 1;
                let mut factors = vec![Vec::new(); dim];
                for a in (0..dim).rev() {
                    let mut table = Vec::with_capacity(resolution * n);
                    for i in 0..resolution {
                        let x = graph.position(i * stride)[a];
                        table.extend(train_points.iter().map(|p| gaussian_kernel(&[x], &[p[a]], sigma)));
                    }
                    factors[a] = table;
                    stride *= resolution;
                }
                KernelRows::Separable { resolution, factors }
            }
        };
        Ok(Self { graph, rows })
    }

    pub fn graph(&self) -> &Graph<T> {
        &self.graph
    }

    pub fn into_graph(self) -> Graph<T> {
        self.graph
    }

    /// Kernel vector of vertex `v` against the training points.
    pub fn kernel_row<'a>(&'a self, v: usize, train_points: &[Vec<T>], gram: &'a [T]) -> Cow<'a, [T]> {
        let n = train_points.len();
        match &self.rows {
            KernelRows::Dense(d) => Cow::Borrowed(&d[v * n..(v + 1) * n]),
            KernelRows::Train => Cow::Borrowed(&gram[v * n..(v + 1) * n]),
            KernelRows::Separable { resolution, factors } => {
                let mut row = vec![T::one(); n];
                let mut rest = v;
                for table in factors.iter().rev() {
                    let i = rest % resolution;
                    rest /= resolution;
                    for (r, &k) in row.iter_mut().zip(&table[i * n..(i + 1) * n]) {
                        *r = *r * k;
                    }
                }
                Cow::Owned(row)
            }
        }
    }

    /// Linear scores `phi(v)^T w` at every vertex, one vector per weight row.
    pub fn scores(&self, train_points: &[Vec<T>], gram: &[T], weights: &[Vec<T>]) -> Vec<Vec<T>> {
        let per_vertex: Vec<Vec<T>> = (0..self.graph.vertex_count())
            .into_par_iter()
            .map(|v| {
                let row = self.kernel_row(v, train_points, gram);
                weights.iter().map(|w| dot(&row, w)).collect()
            })
            .collect();
        (0..weights.len())
            .map(|k| per_vertex.iter().map(|s| s[k]).collect())
            .collect()
    }
}

/// Row-major Gram matrix of the training points.
pub fn gram_matrix<T: Real>(points: &[Vec<T>], sigma: T) -> Vec<T> {
    let n = points.len();
    let mut gram = vec![T::zero(); n * n];
    gram.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (slot, p) in row.iter_mut().zip(points) {
            *slot = gaussian_kernel(&points[i], p, sigma);
        }
    });
    gram
}
