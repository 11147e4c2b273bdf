//! Two-level hierarchy and its aggregation algebra.
//!
//! Nodes are kept in canonical order: the root, then mid-level nodes by
//! ascending id, then bottom-level nodes by ascending id. Every matrix and
//! panel in the crate uses this row order.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Root,
    Mid,
    Bottom,
}

/// A validated rooted tree of depth exactly two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    nodes: Vec<u32>,
    n_mid: usize,
    /// For each bottom position, the canonical index of its mid-level parent.
    bottom_parent: Vec<usize>,
    /// For each upper node (root first), its descendant bottom positions, ascending.
    descendants: Vec<Vec<usize>>,
}

impl Hierarchy {
    /// Builds a hierarchy from `(child, parent)` pairs.
    pub fn from_parent_map<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u32, u32)>,
    {
        let parent: BTreeMap<u32, u32> = pairs.into_iter().collect();
        let mut nodes: Vec<u32> = parent.keys().chain(parent.values()).copied().collect();
        nodes.sort_unstable();
        nodes.dedup();
        Self::build(&nodes, &parent)
    }

    /// Builds a hierarchy from an explicit node list plus `child -> parent`
    /// map. Parents must appear in `nodes`.
    pub fn from_nodes(nodes: &[u32], parent: &BTreeMap<u32, u32>) -> Result<Self> {
        let mut all: Vec<u32> = nodes.to_vec();
        all.sort_unstable();
        all.dedup();
        for (&c, &p) in parent {
            if all.binary_search(&p).is_err() {
                return Err(Error::UnknownNode(p));
            }
            if all.binary_search(&c).is_err() {
                return Err(Error::UnknownNode(c));
            }
        }
        Self::build(&all, parent)
    }

    fn build(nodes: &[u32], parent: &BTreeMap<u32, u32>) -> Result<Self> {
        let roots: Vec<u32> = nodes.iter().copied().filter(|n| !parent.contains_key(n)).collect();

        // Walk every parent chain; anything longer than |N| loops.
        let mut depth: BTreeMap<u32, usize> = BTreeMap::new();
        for &n in nodes {
            let mut cur = n;
            let mut d = 0usize;
            while let Some(&p) = parent.get(&cur) {
                d += 1;
                if d > nodes.len() {
                    return Err(Error::Cycle(n));
                }
                cur = p;
            }
            depth.insert(n, d);
        }
        if roots.len() != 1 {
            return Err(Error::RootCount(roots.len()));
        }
        let root = roots[0];

        if let Some((&node, &d)) = depth.iter().find(|(_, &d)| d > 2) {
            return Err(Error::Depth { node, depth: d });
        }
        let mids: Vec<u32> = nodes.iter().copied().filter(|n| depth[n] == 1).collect();
        let bottoms: Vec<u32> = nodes.iter().copied().filter(|n| depth[n] == 2).collect();
        if bottoms.is_empty() {
            return Err(Error::Depth {
                node: root,
                depth: if mids.is_empty() { 0 } else { 1 },
            });
        }
        for &m in &mids {
            if !bottoms.iter().any(|b| parent[b] == m) {
                return Err(Error::MidWithoutChildren(m));
            }
        }

        let n_mid = mids.len();
        let bottom_parent: Vec<usize> = bottoms
            .iter()
            .map(|b| 1 + mids.binary_search(&parent[b]).expect("parent of bottom is mid"))
            .collect();
        let mut descendants = vec![(0..bottoms.len()).collect::<Vec<_>>()];
        for k in 0..n_mid {
            descendants.push(
                bottom_parent
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p == k + 1)
                    .map(|(i, _)| i)
                    .collect(),
            );
        }

        let mut ordered = Vec::with_capacity(nodes.len());
        ordered.push(root);
        ordered.extend_from_slice(&mids);
        ordered.extend_from_slice(&bottoms);
        Ok(Self {
            nodes: ordered,
            n_mid,
            bottom_parent,
            descendants,
        })
    }

    /// The seven-node tree with mids {2,3} and bottoms {4,5,6,7}.
    pub fn small_example() -> Self {
        Self::from_parent_map([(2, 1), (3, 1), (4, 2), (5, 2), (6, 3), (7, 3)])
            .expect("static tree is valid")
    }

    /// The thirteen-node benchmark tree: mids {2,3,4}, three bottoms each.
    pub fn benchmark() -> Self {
        Self::from_parent_map((5..=13).map(|b| (b, 2 + (b - 5) / 3)).chain([(2, 1), (3, 1), (4, 1)]))
            .expect("static tree is valid")
    }

    /// Node ids in canonical order.
    pub fn node_ids(&self) -> &[u32] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_mid(&self) -> usize {
        self.n_mid
    }

    /// Root plus mid-level nodes.
    pub fn n_upper(&self) -> usize {
        1 + self.n_mid
    }

    pub fn n_bottom(&self) -> usize {
        self.nodes.len() - self.n_upper()
    }

    pub fn root_id(&self) -> u32 {
        self.nodes[0]
    }

    pub fn mid_ids(&self) -> &[u32] {
        &self.nodes[1..self.n_upper()]
    }

    pub fn bottom_ids(&self) -> &[u32] {
        &self.nodes[self.n_upper()..]
    }

    /// Canonical row index of a node id.
    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.nodes.iter().position(|&n| n == id)
    }

    pub fn level(&self, index: usize) -> Level {
        match index {
            0 => Level::Root,
            i if i < self.n_upper() => Level::Mid,
            _ => Level::Bottom,
        }
    }

    /// Canonical index of the mid-level parent of bottom position `b`.
    pub fn bottom_parent(&self, b: usize) -> usize {
        self.bottom_parent[b]
    }

    /// Bottom positions summed into upper node `k` (0 = root), ascending.
    pub fn descendants(&self, k: usize) -> &[usize] {
        &self.descendants[k]
    }

    /// `child -> parent` pairs by node id.
    pub fn parent_pairs(&self) -> Vec<(u32, u32)> {
        let root = self.root_id();
        let mut out: Vec<(u32, u32)> = self.mid_ids().iter().map(|&m| (m, root)).collect();
        for (b, &id) in self.bottom_ids().iter().enumerate() {
            out.push((id, self.nodes[self.bottom_parent[b]]));
        }
        out
    }

    /// The 0/1 matrix mapping bottom nodes to their ancestors.
    pub fn structure_matrix(&self) -> StructureMatrix {
        let mut h = Matrix::zeros(self.n_upper(), self.n_bottom());
        for (k, desc) in self.descendants.iter().enumerate() {
            for &b in desc {
                h[(k, b)] = 1.0;
            }
        }
        StructureMatrix(h)
    }

    /// The structure matrix stacked on the bottom-level identity.
    pub fn summing_matrix(&self) -> SummingMatrix {
        let h = self.structure_matrix();
        let nb = self.n_bottom();
        let nu = self.n_upper();
        let mut s = Matrix::zeros(self.n_nodes(), nb);
        for k in 0..nu {
            s.row_mut(k).copy_from_slice(h.0.row(k));
        }
        for b in 0..nb {
            s[(nu + b, b)] = 1.0;
        }
        SummingMatrix(s)
    }

    /// Sums bottom-level values into upper nodes for a single timepoint.
    /// `out` has length |N|; `bottom` has length |B|.
    pub fn aggregate_vec_into(&self, bottom: &[f64], out: &mut [f64]) {
        debug_assert_eq!(bottom.len(), self.n_bottom());
        let nu = self.n_upper();
        for (k, desc) in self.descendants.iter().enumerate() {
            out[k] = sum_in_order(desc.iter().map(|&b| bottom[b]));
        }
        out[nu..].copy_from_slice(bottom);
    }

    /// Expands a `|B| x T` bottom-level matrix into the full `|N| x T` panel.
    pub fn aggregate_bottom(&self, bottom: &Matrix) -> Result<Matrix> {
        if bottom.rows() != self.n_bottom() {
            return Err(Error::Shape(format!(
                "expected {} bottom rows, got {}",
                self.n_bottom(),
                bottom.rows()
            )));
        }
        let nu = self.n_upper();
        let mut out = Matrix::zeros(self.n_nodes(), bottom.cols());
        for t in 0..bottom.cols() {
            for (k, desc) in self.descendants.iter().enumerate() {
                out[(k, t)] = sum_in_order(desc.iter().map(|&b| bottom[(b, t)]));
            }
        }
        for b in 0..self.n_bottom() {
            out.row_mut(nu + b).copy_from_slice(bottom.row(b));
        }
        Ok(out)
    }

    /// Largest aggregation-constraint violation per upper node.
    pub fn check_coherence(&self, panel: &Matrix, tol: f64) -> Result<CoherenceReport> {
        if panel.rows() != self.n_nodes() {
            return Err(Error::Shape(format!(
                "expected {} rows, got {}",
                self.n_nodes(),
                panel.rows()
            )));
        }
        let nu = self.n_upper();
        let mut max_violation = vec![0.0f64; nu];
        for t in 0..panel.cols() {
            for (k, desc) in self.descendants.iter().enumerate() {
                let sum = sum_in_order(desc.iter().map(|&b| panel[(nu + b, t)]));
                let v = libm::fabs(panel[(k, t)] - sum);
                // NaN must surface as a violation
                if v > max_violation[k] || v.is_nan() {
                    max_violation[k] = v;
                }
            }
        }
        let violations = self.nodes[..nu].iter().copied().zip(max_violation).collect::<Vec<_>>();
        let flagged = violations
            .iter()
            .filter(|(_, v)| !(*v <= tol))
            .map(|(n, _)| *n)
            .collect();
        Ok(CoherenceReport { violations, flagged })
    }
}

fn sum_in_order(values: impl Iterator<Item = f64>) -> f64 {
    let mut acc = 0.0;
    for v in values {
        acc += v;
    }
    acc
}

/// `H`: rows are upper nodes (root first), columns bottom nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrix(pub Matrix);

impl StructureMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }
}

/// `S = [H; I]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummingMatrix(pub Matrix);

impl SummingMatrix {
    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceReport {
    /// `(node id, max_t |y_kt - sum of descendants|)` for each upper node.
    pub violations: Vec<(u32, f64)>,
    /// Upper nodes whose violation exceeds the tolerance.
    pub flagged: Vec<u32>,
}

impl CoherenceReport {
    pub fn max_violation(&self) -> f64 {
        self.violations.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }

    pub fn is_coherent(&self) -> bool {
        self.flagged.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_tree_layout() {
        let h = Hierarchy::small_example();
        assert_eq!(h.n_nodes(), 7);
        assert_eq!(h.bottom_ids(), &[4, 5, 6, 7]);
        assert_eq!(h.mid_ids(), &[2, 3]);
        assert_eq!(h.level(0), Level::Root);
        assert_eq!(h.level(2), Level::Mid);
        assert_eq!(h.level(3), Level::Bottom);
    }

    #[test]
    fn small_tree_structure_matrix() {
        let h = Hierarchy::small_example().structure_matrix();
        let expected = Matrix::from_rows(&[
            [1.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
        ]);
        assert_eq!(h.0, expected);
    }

    #[test]
    fn small_tree_summing_matrix() {
        let s = Hierarchy::small_example().summing_matrix();
        let expected = Matrix::from_rows(&[
            [1.0, 1.0, 1.0, 1.0],
            [1.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]);
        assert_eq!(s.0, expected);
    }

    #[test]
    fn benchmark_tree() {
        let h = Hierarchy::benchmark();
        assert_eq!(h.n_nodes(), 13);
        assert_eq!(h.bottom_ids(), &[5, 6, 7, 8, 9, 10, 11, 12, 13]);
        assert_eq!(h.mid_ids(), &[2, 3, 4]);
    }

    #[test]
    fn rejects_chain_of_depth_three() {
        let err = Hierarchy::from_parent_map([(2, 1), (3, 2), (4, 3)]).unwrap_err();
        assert_eq!(err, Error::Depth { node: 4, depth: 3 });
    }

    #[test]
    fn rejects_cycles_and_multiple_roots() {
        assert!(matches!(
            Hierarchy::from_parent_map([(1, 2), (2, 1)]),
            Err(Error::Cycle(_))
        ));
        assert_eq!(
            Hierarchy::from_parent_map([(3, 1), (4, 2)]).unwrap_err(),
            Error::RootCount(2)
        );
    }

    #[test]
    fn rejects_childless_mid() {
        // node 3 hangs directly off the root with no children
        let err = Hierarchy::from_parent_map([(2, 1), (3, 1), (4, 2)]).unwrap_err();
        assert_eq!(err, Error::MidWithoutChildren(3));
    }

    #[test]
    fn rejects_star() {
        assert!(matches!(
            Hierarchy::from_parent_map([(2, 1), (3, 1)]),
            Err(Error::Depth { .. })
        ));
    }

    #[test]
    fn from_nodes_checks_membership() {
        let mut parent = BTreeMap::new();
        parent.insert(2, 1);
        parent.insert(3, 2);
        assert_eq!(Hierarchy::from_nodes(&[2, 3], &parent).unwrap_err(), Error::UnknownNode(1));
        let h = Hierarchy::from_nodes(&[1, 2, 3], &parent).unwrap();
        assert_eq!(h.node_ids(), &[1, 2, 3]);
    }

    #[test]
    fn single_mid_owns_everything() {
        let h = Hierarchy::from_parent_map([(2, 1), (3, 2), (4, 2), (5, 2)]).unwrap();
        let hm = h.structure_matrix();
        assert_eq!(hm.0.row(0), &[1.0, 1.0, 1.0]);
        assert_eq!(hm.0.row(1), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_bottom_summing_matrix() {
        let h = Hierarchy::from_parent_map([(2, 1), (3, 2)]).unwrap();
        let s = h.summing_matrix();
        assert_eq!(s.0, Matrix::from_rows(&[[1.0], [1.0], [1.0]]));
    }

    #[test]
    fn aggregate_unit_values() {
        let h = Hierarchy::small_example();
        let y = h.aggregate_bottom(&Matrix::from_rows(&[[1.0], [1.0], [1.0], [1.0]])).unwrap();
        assert_eq!(y.column(0), [4.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0]);
        let z = h.aggregate_bottom(&Matrix::zeros(4, 3)).unwrap();
        assert_eq!(z, Matrix::zeros(7, 3));
        assert!(h.aggregate_bottom(&Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn coherence_detects_root_perturbation() {
        let h = Hierarchy::small_example();
        let mut y = h
            .aggregate_bottom(&Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]]))
            .unwrap();
        let ok = h.check_coherence(&y, 0.0).unwrap();
        assert!(ok.is_coherent());
        assert_eq!(ok.max_violation(), 0.0);

        y[(0, 1)] += 0.5;
        let bad = h.check_coherence(&y, 0.0).unwrap();
        assert_eq!(bad.violations, vec![(1, 0.5), (2, 0.0), (3, 0.0)]);
        assert_eq!(bad.flagged, vec![1]);
    }
}
