//! Zero-dimensional sublevel-set persistence on graphs.
//!
//! Vertices are swept in ascending value order (ties by index). Each vertex
//! without earlier neighbors starts a tree; when a vertex joins several trees
//! the one whose minimum came first survives and every other tree dies there,
//! producing a `(birth, death)` pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_graph::{Graph, ScalarField};
use crate::scalar::{cmp_values, is_negative, Scalar};
use crate::union_find::ElderSets;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair<T> {
    pub birth_vertex: usize,
    pub death_vertex: usize,
    pub birth_value: T,
    pub death_value: T,
}

/// Output of one sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct PersistenceResult<T> {
    /// Finite pairs in the order they were created.
    pub pairs: Vec<PersistencePair<T>>,
    /// Minimum vertex of every connected component, in sweep order.
    pub essential_roots: Vec<usize>,
    /// Maximum vertex of the component rooted at the matching `essential_roots` entry.
    pub essential_peaks: Vec<usize>,
    /// Vertex indices in sweep order.
    pub total_order: Vec<usize>,
}

impl<T: Scalar> PersistenceResult<T> {
    /// Essential classes as pairs running from component minimum to maximum.
    pub fn essential_pairs<P: Copy>(&self, field: &ScalarField<'_, T, P>) -> Vec<PersistencePair<T>> {
        self.essential_roots
            .iter()
            .zip(&self.essential_peaks)
            .map(|(&b, &d)| PersistencePair {
                birth_vertex: b,
                death_vertex: d,
                birth_value: field.value(b),
                death_value: field.value(d),
            })
            .collect()
    }
}

/// Vertex indices sorted by ascending value, ties by ascending index.
pub fn total_order<T: Scalar, P: Copy>(field: &ScalarField<'_, T, P>) -> Vec<usize> {
    order_of(field.values())
}

pub(crate) fn order_of<T: Scalar>(values: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps index order among equal values
    order.sort_by(|&a, &b| cmp_values(&values[a], &values[b]));
    order
}

/// Runs the elder-rule union-find sweep of `field` over `graph`.
pub fn merge_pairs<T: Scalar, P: Copy>(
    graph: &Graph<P>,
    field: &ScalarField<'_, T, P>,
) -> Result<PersistenceResult<T>> {
    let n = graph.vertex_count();
    if field.values().len() != n || field.graph().vertex_count() != n {
        return Err(Error::Structural(format!(
            "field has {} values, graph has {} vertices",
            field.values().len(),
            n
        )));
    }
    let values = field.values();
    let order = order_of(values);
    let mut rank_of = vec![0usize; n];
    for (i, &v) in order.iter().enumerate() {
        rank_of[v] = i;
    }

    let mut sets = ElderSets::new(n);
    let mut pairs = Vec::new();
    let mut roots: Vec<usize> = Vec::new();

    for &v in &order {
        roots.clear();
        for &u in graph.neighbors(v) {
            if rank_of[u] < rank_of[v] {
                let r = sets.find(u);
                if !roots.contains(&r) {
                    roots.push(r);
                }
            }
        }
        if roots.is_empty() {
            // birth: v is its own tree, elder already v
            continue;
        }
        roots.sort_unstable_by_key(|&r| rank_of[sets.elder(r)]);
        let mut survivor = roots[0];
        let eldest = sets.elder(survivor);
        for &r in &roots[1..] {
            let b = sets.elder(r);
            pairs.push(PersistencePair {
                birth_vertex: b,
                death_vertex: v,
                birth_value: values[b],
                death_value: values[v],
            });
            survivor = sets.union_roots(survivor, r, eldest);
        }
        let vroot = sets.find(v);
        sets.union_roots(survivor, vroot, eldest);
    }

    // one essential class per component; its peak is the last vertex swept
    let mut peak_of_root = vec![usize::MAX; n];
    for &v in &order {
        let r = sets.find(v);
        peak_of_root[r] = v;
    }
    let mut essential = Vec::new();
    for v in 0..n {
        if sets.find(v) == v {
            essential.push((sets.elder(v), peak_of_root[v]));
        }
    }
    essential.sort_unstable_by_key(|&(b, _)| rank_of[b]);

    Ok(PersistenceResult {
        pairs,
        essential_roots: essential.iter().map(|&(b, _)| b).collect(),
        essential_peaks: essential.iter().map(|&(_, d)| d).collect(),
        total_order: order,
    })
}

/// Keeps the pairs born below zero that die at or above zero. Exact zeros
/// count as positive.
pub fn zero_crossing_filter<T: Scalar, P: Copy>(
    result: &PersistenceResult<T>,
    field: &ScalarField<'_, T, P>,
) -> Vec<PersistencePair<T>> {
    result
        .pairs
        .iter()
        .filter(|p| {
            is_negative(field.value(p.birth_vertex)) && !is_negative(field.value(p.death_vertex))
        })
        .copied()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph<f64> {
        Graph::abstract_graph(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    #[test]
    fn total_order_examples() {
        let g = path(3);
        let f = ScalarField::new(&g, vec![3.0, 1.0, 2.0]).unwrap();
        assert_eq!(total_order(&f), vec![1, 2, 0]);
        let f = ScalarField::new(&g, vec![1.0, 1.0, 0.0]).unwrap();
        assert_eq!(total_order(&f), vec![2, 0, 1]);
    }

    #[test]
    fn path_elder_rule_trace() {
        let g = path(6);
        let f = ScalarField::new(&g, vec![1.0, 5.0, 2.0, 6.0, 3.0, 7.0]).unwrap();
        let r = merge_pairs(&g, &f).unwrap();
        assert_eq!(
            r.pairs,
            vec![
                PersistencePair { birth_vertex: 2, death_vertex: 1, birth_value: 2.0, death_value: 5.0 },
                PersistencePair { birth_vertex: 4, death_vertex: 3, birth_value: 3.0, death_value: 6.0 },
            ]
        );
        assert_eq!(r.essential_roots, vec![0]);
        assert_eq!(r.essential_peaks, vec![5]);
    }

    #[test]
    fn monotone_path_has_no_pairs() {
        let g = path(5);
        let f = ScalarField::new(&g, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = merge_pairs(&g, &f).unwrap();
        assert!(r.pairs.is_empty());
        assert_eq!(r.essential_roots, vec![0]);
    }

    #[test]
    fn disconnected_vertices_are_each_essential() {
        let g = Graph::<f64>::abstract_graph(2, []).unwrap();
        let f = ScalarField::new(&g, vec![0.0, 1.0]).unwrap();
        let r = merge_pairs(&g, &f).unwrap();
        assert!(r.pairs.is_empty());
        assert_eq!(r.essential_roots, vec![0, 1]);
        assert_eq!(r.essential_peaks, vec![0, 1]);
    }

    #[test]
    fn three_way_merge_keeps_eldest() {
        // star: center 0 joins leaves 1, 2, 3 born at values 2, 1, 3
        let g = Graph::<f64>::abstract_graph(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let f = ScalarField::new(&g, vec![10.0, 2.0, 1.0, 3.0]).unwrap();
        let r = merge_pairs(&g, &f).unwrap();
        let births: Vec<_> = r.pairs.iter().map(|p| (p.birth_vertex, p.death_vertex)).collect();
        assert_eq!(births, vec![(1, 0), (3, 0)]);
        assert_eq!(r.essential_roots, vec![2]);
    }

    #[test]
    fn ties_resolved_by_index() {
        // equal minima at both ends of a path; vertex 0 is elder
        let g = path(3);
        let f = ScalarField::new(&g, vec![0.0, 1.0, 0.0]).unwrap();
        let r = merge_pairs(&g, &f).unwrap();
        assert_eq!(r.pairs[0].birth_vertex, 2);
        assert_eq!(r.essential_roots, vec![0]);
    }

    #[test]
    fn mismatched_sizes_error() {
        let g = path(3);
        let g2 = path(2);
        let f = ScalarField::new(&g2, vec![0.0, 1.0]).unwrap();
        assert!(matches!(merge_pairs(&g, &f), Err(Error::Structural(_))));
    }

    #[test]
    fn crossing_filter_examples() {
        let g = path(4);
        let f = ScalarField::new(&g, vec![-0.55, 0.21, 2.0, 5.0]).unwrap();
        let result = PersistenceResult {
            pairs: vec![
                PersistencePair { birth_vertex: 0, death_vertex: 1, birth_value: -0.55, death_value: 0.21 },
                PersistencePair { birth_vertex: 2, death_vertex: 3, birth_value: 2.0, death_value: 5.0 },
            ],
            essential_roots: vec![],
            essential_peaks: vec![],
            total_order: vec![0, 1, 2, 3],
        };
        let kept = zero_crossing_filter(&result, &f);
        assert_eq!(kept, vec![result.pairs[0]]);

        let f = ScalarField::new(&g, vec![-1.0, 0.0, 0.0, 0.0]).unwrap();
        let result = PersistenceResult {
            pairs: vec![PersistencePair { birth_vertex: 0, death_vertex: 1, birth_value: -1.0, death_value: 0.0 }],
            essential_roots: vec![],
            essential_peaks: vec![],
            total_order: vec![0, 1, 2, 3],
        };
        assert_eq!(zero_crossing_filter(&result, &f).len(), 1);

        let empty = PersistenceResult::<f64> {
            pairs: vec![],
            essential_roots: vec![],
            essential_peaks: vec![],
            total_order: vec![],
        };
        assert!(zero_crossing_filter(&empty, &f).is_empty());
    }
}
