//! Kernel classifiers regularized by the topology of their decision boundary.
//!
//! The decision function is sampled on a graph (a lattice in low dimension,
//! a k-nearest-neighbor graph otherwise). Zero-dimensional persistence of the
//! sampled field and of its negation enumerates the connected components of
//! the zero level set; each component is scored by its robustness, the
//! smallest perturbation that removes it. Training adds the sum of squared
//! robustness (all but the most robust component) to the cross-entropy and
//! follows its exact gradient through the sampled surrogate.
//!
//! The topology code is generic over [`Scalar`] and runs on floats or exact
//! rationals; learning code is generic over [`Real`] (`f32`/`f64`).

pub mod boundary;
pub mod datasets;
pub mod error;
pub mod field_graph;
pub mod harness;
pub mod klr;
pub mod persistence;
pub mod scalar;
mod union_find;

pub use boundary::{
    boundary_components, penalty_seeds, select_weak_critical, topo_penalty, BoundaryComponent,
    ComponentSet, Origin,
};
pub use datasets::{Dataset, FoldPlan};
pub use error::{Error, Result};
pub use field_graph::{
    build_grid_graph, build_knn_graph, evaluate_field, normalize_unit_box, Graph, GridSpec,
    ScalarField, UnitBoxTransform,
};
pub use klr::{Discretization, KernelModel, Link, TrainConfig};
pub use persistence::{merge_pairs, total_order, zero_crossing_filter, PersistencePair, PersistenceResult};
pub use scalar::{Real, Scalar};

/// Exact rational filtration values.
pub type Rational = num_rational::Ratio<i64>;

pub type Graph64 = Graph<f64>;
pub type Graph32 = Graph<f32>;
pub type Field64<'g> = ScalarField<'g, f64, f64>;
pub type Field32<'g> = ScalarField<'g, f32, f32>;
/// Rational values over a floating-point embedding.
pub type RationalField<'g> = ScalarField<'g, Rational, f64>;
pub type Components64 = ComponentSet<f64>;
pub type ComponentsExact = ComponentSet<Rational>;
pub type Model64 = KernelModel<f64>;
pub type Model32 = KernelModel<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type TrainConfig64 = TrainConfig<f64>;
