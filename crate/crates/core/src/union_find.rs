//! Disjoint sets that remember the eldest member of every set.
//!
//! Union-by-rank decides which root becomes the parent; the eldest member is
//! kept in a separate table indexed by root, so rank balancing never changes
//! which tree survives a merge.

#[derive(Clone, Debug)]
pub(crate) struct ElderSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
    // eldest vertex of the set rooted at `r`, valid only for roots
    elder: Vec<usize>,
}

impl ElderSets {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            elder: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    pub(crate) fn elder(&self, root: usize) -> usize {
        self.elder[root]
    }

    /// Merges the sets rooted at `a` and `b`; `eldest` becomes the elder of
    /// the merged set. Returns the new root.
    pub(crate) fn union_roots(&mut self, a: usize, b: usize, eldest: usize) -> usize {
        debug_assert_eq!(self.parent[a], a);
        debug_assert_eq!(self.parent[b], b);
        if a == b {
            self.elder[a] = eldest;
            return a;
        }
        let (hi, lo) = if self.rank[a] >= self.rank[b] { (a, b) } else { (b, a) };
        self.parent[lo] = hi;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] = self.rank[hi].saturating_add(1);
        }
        self.elder[hi] = eldest;
        hi
    }
}
