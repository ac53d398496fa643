//! Connected components of the zero level set and the robustness penalty.
//!
//! Every component of the piecewise-linear zero set of `f` corresponds to one
//! critical pair: a crossing pair of the sublevel sweep of `f`, a crossing
//! pair of the sweep of `-f`, or the essential (minimum, maximum) pair of a
//! graph component whose values change sign. A component's robustness is the
//! smaller absolute value of its two critical vertices.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field_graph::{Graph, ScalarField};
use crate::persistence::{merge_pairs, zero_crossing_filter, PersistencePair, PersistenceResult};
use crate::scalar::{is_negative, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Origin {
    /// Crossing pair from the sublevel sweep of `f`.
    SublevelF,
    /// Crossing pair from the sublevel sweep of `-f`.
    SublevelNegF,
    /// Minimum/maximum pair of a graph component.
    Essential,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::SublevelF => "sublevel_f",
            Origin::SublevelNegF => "sublevel_neg_f",
            Origin::Essential => "essential",
        }
    }
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One component of the zero level set. `pair` values are always those of
/// `f`, including for components found in the sweep of `-f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryComponent<T> {
    pub pair: PersistencePair<T>,
    pub robustness: T,
    pub weak_vertex: usize,
    pub weak_value: T,
    pub origin: Origin,
}

impl<T: Scalar> BoundaryComponent<T> {
    fn from_pair(pair: PersistencePair<T>, origin: Origin) -> Self {
        let (weak_vertex, weak_value) = select_weak_critical(&pair);
        Self {
            pair,
            robustness: weak_value.abs(),
            weak_vertex,
            weak_value,
            origin,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComponentSet<T> {
    pub components: Vec<BoundaryComponent<T>>,
    /// Index of the most robust component, left out of the penalty.
    pub excluded_index: Option<usize>,
}

impl<T: Scalar> ComponentSet<T> {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn penalized(&self) -> impl Iterator<Item = &BoundaryComponent<T>> + '_ {
        self.components
            .iter()
            .enumerate()
            .filter(move |(i, _)| Some(*i) != self.excluded_index)
            .map(|(_, c)| c)
    }

    /// Identity of the pairing: critical vertices, weak vertices, origins and
    /// the excluded slot. Two fields with the same signature have the same
    /// penalty structure.
    pub fn signature(&self) -> (Vec<(usize, usize, usize, Origin)>, Option<usize>) {
        (
            self.components
                .iter()
                .map(|c| (c.pair.birth_vertex, c.pair.death_vertex, c.weak_vertex, c.origin))
                .collect(),
            self.excluded_index,
        )
    }
}

/// Returns the critical vertex with the smaller absolute value together with
/// its value. Equal magnitudes pick the birth vertex.
pub fn select_weak_critical<T: Scalar>(pair: &PersistencePair<T>) -> (usize, T) {
    if pair.death_value.abs() < pair.birth_value.abs() {
        (pair.death_vertex, pair.death_value)
    } else {
        (pair.birth_vertex, pair.birth_value)
    }
}

/// Enumerates the components of the zero level set of `field`.
pub fn boundary_components<T: Scalar, P: Copy + Sync>(
    graph: &Graph<P>,
    field: &ScalarField<'_, T, P>,
) -> Result<ComponentSet<T>> {
    let neg = field.negated();
    let (pos_sweep, neg_sweep) = rayon::join(|| merge_pairs(graph, field), || merge_pairs(graph, &neg));
    let (pos_sweep, neg_sweep) = (pos_sweep?, neg_sweep?);
    Ok(assemble(field, &pos_sweep, &neg_sweep))
}

fn assemble<T: Scalar, P: Copy>(
    field: &ScalarField<'_, T, P>,
    pos_sweep: &PersistenceResult<T>,
    neg_sweep: &PersistenceResult<T>,
) -> ComponentSet<T> {
    let value = |v: usize| field.value(v);

    let mut from_f: Vec<_> = zero_crossing_filter(pos_sweep, field)
        .into_iter()
        .map(|p| BoundaryComponent::from_pair(p, Origin::SublevelF))
        .collect();

    // In the sweep of -f a crossing tree is born on the non-negative side of
    // f and dies on its negative side. Zeros stay on the positive side of f
    // in both sweeps.
    let mut from_neg: Vec<_> = neg_sweep
        .pairs
        .iter()
        .filter(|p| !is_negative(value(p.birth_vertex)) && is_negative(value(p.death_vertex)))
        .map(|p| {
            let pair = PersistencePair {
                birth_vertex: p.birth_vertex,
                death_vertex: p.death_vertex,
                birth_value: value(p.birth_vertex),
                death_value: value(p.death_vertex),
            };
            BoundaryComponent::from_pair(pair, Origin::SublevelNegF)
        })
        .collect();

    let mut essential: Vec<_> = pos_sweep
        .essential_pairs(field)
        .into_iter()
        .filter(|p| is_negative(p.birth_value) && !is_negative(p.death_value))
        .map(|p| BoundaryComponent::from_pair(p, Origin::Essential))
        .collect();

    from_f.sort_by_key(|c| c.pair.birth_vertex);
    from_neg.sort_by_key(|c| c.pair.birth_vertex);
    essential.sort_by_key(|c| c.pair.birth_vertex);

    let mut components = from_f;
    components.append(&mut from_neg);
    components.append(&mut essential);

    let excluded_index = most_robust(&components);
    ComponentSet {
        components,
        excluded_index,
    }
}

fn most_robust<T: Scalar>(components: &[BoundaryComponent<T>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in components.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &components[b];
                if c.robustness > cur.robustness
                    || (c.robustness == cur.robustness && c.weak_vertex < cur.weak_vertex)
                {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Sum of squared robustness over all components but the excluded one.
pub fn topo_penalty<T: Scalar>(set: &ComponentSet<T>) -> T {
    set.penalized()
        .fold(T::zero(), |acc, c| acc + c.robustness * c.robustness)
}

/// Gradient seeds `(p*, 2 f(p*))` of the penalty with respect to the field
/// values, one per penalized component, sorted by vertex index.
pub fn penalty_seeds<T: Scalar>(set: &ComponentSet<T>) -> Vec<(usize, T)> {
    let mut seeds: Vec<(usize, T)> = set
        .penalized()
        .map(|c| (c.weak_vertex, c.weak_value + c.weak_value))
        .collect();
    seeds.sort_by_key(|&(v, _)| v);
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn path(n: usize) -> Graph<f64> {
        Graph::abstract_graph(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    const WORKED: [f64; 6] = [-1.0, 0.21, -0.55, 0.9, -2.0, 1.5];

    fn pair(b: usize, d: usize, bv: f64, dv: f64) -> PersistencePair<f64> {
        PersistencePair { birth_vertex: b, death_vertex: d, birth_value: bv, death_value: dv }
    }

    #[test]
    fn worked_path_components() {
        let g = path(6);
        let f = ScalarField::new(&g, WORKED.to_vec()).unwrap();
        let set = boundary_components(&g, &f).unwrap();
        let summary: Vec<_> = set
            .components
            .iter()
            .map(|c| (c.origin, c.pair.birth_vertex, c.pair.death_vertex, c.robustness, c.weak_vertex))
            .collect();
        assert_eq!(
            summary,
            vec![
                (Origin::SublevelF, 0, 3, 0.9, 3),
                (Origin::SublevelF, 2, 1, 0.21, 1),
                (Origin::SublevelNegF, 1, 2, 0.21, 1),
                (Origin::SublevelNegF, 3, 4, 0.9, 3),
                (Origin::Essential, 4, 5, 1.5, 5),
            ]
        );
        assert_eq!(set.excluded_index, Some(4));
        assert!((topo_penalty(&set) - 1.7082).abs() <= 1e-12);

        let seeds = penalty_seeds(&set);
        assert_eq!(seeds, vec![(1, 0.42), (1, 0.42), (3, 1.8), (3, 1.8)]);
    }

    #[test]
    fn worked_path_is_exact_over_rationals() {
        let g = path(6);
        let vals: Vec<Ratio<i64>> = [(-100, 100), (21, 100), (-55, 100), (90, 100), (-200, 100), (150, 100)]
            .iter()
            .map(|&(n, d)| Ratio::new(n, d))
            .collect();
        let f = ScalarField::new(&g, vals).unwrap();
        let set = boundary_components(&g, &f).unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(topo_penalty(&set), Ratio::new(17082, 10000));
    }

    #[test]
    fn uniform_sign_has_no_boundary() {
        let g = path(4);
        let f = ScalarField::new(&g, vec![1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!(boundary_components(&g, &f).unwrap().is_empty());
        let f = ScalarField::new(&g, vec![-1.0, -3.0, -2.0, -4.0]).unwrap();
        assert!(boundary_components(&g, &f).unwrap().is_empty());
        let f = ScalarField::new(&g, vec![0.0; 4]).unwrap();
        assert!(boundary_components(&g, &f).unwrap().is_empty());
    }

    #[test]
    fn zeros_do_not_create_phantom_components() {
        // with zero on the positive side, (1, 0, 1) has no sign change
        let g = path(3);
        let f = ScalarField::new(&g, vec![1.0, 0.0, 1.0]).unwrap();
        assert!(boundary_components(&g, &f).unwrap().is_empty());
        // (-1, 0, -1) has two sign changes
        let f = ScalarField::new(&g, vec![-1.0, 0.0, -1.0]).unwrap();
        let set = boundary_components(&g, &f).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.components.iter().all(|c| c.robustness == 0.0));
    }

    #[test]
    fn figure_like_robustness_values() {
        // a shallow basin cut off by a saddle at 0.21 and a basin of depth
        // 0.83 behind a high ridge, between global extremes -3 and 4
        let g = path(6);
        let f = ScalarField::new(&g, vec![-3.0, 0.21, -0.55, 2.5, -0.83, 4.0]).unwrap();
        let set = boundary_components(&g, &f).unwrap();
        assert_eq!(set.len(), 5);
        let mut rho: Vec<f64> = set.components.iter().map(|c| c.robustness).collect();
        rho.sort_by(f64::total_cmp);
        assert_eq!(rho, vec![0.21, 0.21, 0.83, 0.83, 3.0]);
        let excluded = &set.components[set.excluded_index.unwrap()];
        assert_eq!(excluded.origin, Origin::Essential);
    }

    #[test]
    fn weak_critical_selection() {
        assert_eq!(select_weak_critical(&pair(0, 1, -0.55, 0.21)), (1, 0.21));
        assert_eq!(select_weak_critical(&pair(4, 5, -2.0, 1.5)), (5, 1.5));
        assert_eq!(select_weak_critical(&pair(2, 3, -0.3, 0.3)), (2, -0.3));
    }

    #[test]
    fn penalty_of_small_sets() {
        let empty = ComponentSet::<f64> { components: vec![], excluded_index: None };
        assert_eq!(topo_penalty(&empty), 0.0);
        assert!(penalty_seeds(&empty).is_empty());

        let one = ComponentSet {
            components: vec![BoundaryComponent::from_pair(pair(0, 1, -1.0, 2.0), Origin::Essential)],
            excluded_index: Some(0),
        };
        assert_eq!(topo_penalty(&one), 0.0);
        assert!(penalty_seeds(&one).is_empty());
    }

    #[test]
    fn seed_is_twice_weak_value() {
        let set = ComponentSet {
            components: vec![
                BoundaryComponent::from_pair(pair(3, 7, -0.9, 0.21), Origin::SublevelF),
                BoundaryComponent::from_pair(pair(0, 1, -5.0, 4.0), Origin::Essential),
            ],
            excluded_index: Some(1),
        };
        assert_eq!(penalty_seeds(&set), vec![(7, 0.42)]);
    }

    #[test]
    fn exclusion_tie_prefers_smaller_weak_vertex() {
        let g = path(4);
        // -1 +1 -1 +1: three components, robustness all 1
        let f = ScalarField::new(&g, vec![-1.0, 1.0, -1.0, 1.0]).unwrap();
        let set = boundary_components(&g, &f).unwrap();
        assert_eq!(set.len(), 3);
        let ex = &set.components[set.excluded_index.unwrap()];
        let min_weak = set.components.iter().map(|c| c.weak_vertex).min().unwrap();
        assert_eq!(ex.weak_vertex, min_weak);
    }
}
