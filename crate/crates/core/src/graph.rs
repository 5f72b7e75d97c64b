//! Weighted directed graphs, Laplacians, and the rooted/non-rooted
//! decomposition that the rest of the crate builds on.
//!
//! Conventions: `weight(to, from)` stores the influence of agent `from` on
//! agent `to`, i.e. entry (i, j) of the weight matrix is the weight of edge
//! j -> i. The Laplacian is in-degree based: L[i][i] = sum_j w(i, j),
//! L[i][j] = -w(i, j). All edge weights are nonnegative; antagonistic
//! interactions enter through per-agent scalings elsewhere, never through
//! signed edges.

use crate::error::{CoordError, Result};
use crate::spectral;
use crate::tol;
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    n: usize,
    // w[(i, j)] = weight of edge j -> i
    w: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl Digraph {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(CoordError::InvalidGraph(
                "graph must have at least one node".into(),
            ));
        }
        Ok(Digraph {
            n,
            w: DMatrix::zeros(n, n),
            labels: None,
        })
    }

    /// Build from (from, to, weight) triples, 0-based node indices.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut g = Digraph::new(n)?;
        for &(from, to, weight) in edges {
            if g.has_edge(from, to) {
                return Err(CoordError::InvalidGraph(format!(
                    "duplicate edge {from} -> {to}"
                )));
            }
            g.add_edge(from, to, weight)?;
        }
        Ok(g)
    }

    /// Build directly from a weight matrix (entry (i, j) = weight of j -> i).
    pub fn from_weights(w: DMatrix<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(CoordError::NotSquare {
                rows: w.nrows(),
                cols: w.ncols(),
            });
        }
        if w.nrows() == 0 {
            return Err(CoordError::InvalidGraph(
                "graph must have at least one node".into(),
            ));
        }
        for i in 0..w.nrows() {
            if w[(i, i)] != 0.0 {
                return Err(CoordError::InvalidGraph(format!(
                    "self-loop on node {i} (nonzero diagonal weight)"
                )));
            }
            for j in 0..w.ncols() {
                if w[(i, j)] < 0.0 {
                    return Err(CoordError::NegativeWeight {
                        from: j,
                        to: i,
                        weight: w[(i, j)],
                    });
                }
                if !w[(i, j)].is_finite() {
                    return Err(CoordError::InvalidGraph(format!(
                        "non-finite weight on edge {j} -> {i}"
                    )));
                }
            }
        }
        Ok(Digraph {
            n: w.nrows(),
            w,
            labels: None,
        })
    }

    pub fn add_edge(&mut self, from: usize, to: usize, weight: f64) -> Result<()> {
        if from >= self.n || to >= self.n {
            return Err(CoordError::InvalidGraph(format!(
                "edge {from} -> {to} out of range for {} nodes",
                self.n
            )));
        }
        if from == to {
            return Err(CoordError::InvalidGraph(format!(
                "self-loop on node {from} is not allowed"
            )));
        }
        if weight < 0.0 {
            return Err(CoordError::NegativeWeight { from, to, weight });
        }
        if !weight.is_finite() {
            return Err(CoordError::InvalidGraph(format!(
                "non-finite weight on edge {from} -> {to}"
            )));
        }
        self.w[(to, from)] = weight;
        Ok(())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(CoordError::DimensionMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        from < self.n && to < self.n && self.w[(to, from)] > 0.0
    }

    /// In-degree Laplacian: L = diag(row sums of W) - W.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n;
        let mut l = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut deg = 0.0;
            for j in 0..n {
                if i != j {
                    deg += self.w[(i, j)];
                    l[(i, j)] = -self.w[(i, j)];
                }
            }
            l[(i, i)] = deg;
        }
        l
    }

    /// Transitive closure: reach[i][j] = true iff a directed path i -> j
    /// exists (every node reaches itself). Boolean matrix squaring, so the
    /// result is exact — no tolerances involved.
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.n;
        let mut reach = vec![vec![false; n]; n];
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
            for j in 0..n {
                if self.w[(j, i)] > 0.0 {
                    row[j] = true;
                }
            }
        }
        // Squaring the relation log2(n) + 1 times reaches the fixed point.
        let mut rounds = 0usize;
        let mut len = 1usize;
        while len < n {
            len *= 2;
            rounds += 1;
        }
        for _ in 0..=rounds {
            let prev = reach.clone();
            for i in 0..n {
                for j in 0..n {
                    if !reach[i][j] {
                        reach[i][j] = (0..n).any(|k| prev[i][k] && prev[k][j]);
                    }
                }
            }
        }
        reach
    }

    /// Nodes from which every other node is reachable.
    pub fn find_roots(&self) -> Vec<usize> {
        let reach = self.reachability();
        (0..self.n)
            .filter(|&i| reach[i].iter().all(|&r| r))
            .collect()
    }

    pub fn has_spanning_tree(&self) -> bool {
        !self.find_roots().is_empty()
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.find_roots().len() == self.n
    }

    /// True iff every non-leader node is reachable from at least one leader.
    pub fn has_spanning_forest(&self, leaders: &[usize]) -> Result<bool> {
        self.validate_node_set(leaders)?;
        let reach = self.reachability();
        Ok((0..self.n)
            .filter(|i| !leaders.contains(i))
            .all(|j| leaders.iter().any(|&l| reach[l][j])))
    }

    /// Edge-wise union: weights are summed entrywise.
    pub fn union(graphs: &[Digraph]) -> Result<Digraph> {
        let first = graphs
            .first()
            .ok_or_else(|| CoordError::InvalidGraph("union of zero graphs".into()))?;
        let n = first.n;
        let mut w = DMatrix::zeros(n, n);
        for g in graphs {
            if g.n != n {
                return Err(CoordError::DimensionMismatch(format!(
                    "union over graphs with {} and {} nodes",
                    n, g.n
                )));
            }
            w += &g.w;
        }
        Digraph::from_weights(w)
    }

    /// Rooted/non-rooted block decomposition of the Laplacian.
    ///
    /// Rooted agents are detected structurally and listed first (ascending
    /// original index, so the permutation is stable); the remaining agents
    /// follow, also in ascending order. The permuted Laplacian then has the
    /// lower block-triangular form [[L1, 0], [L2, L3]] where L1 is itself a
    /// zero-row-sum Laplacian of the strongly connected rooted subgraph.
    pub fn decompose(&self) -> Result<LaplacianBlocks> {
        let roots = self.find_roots();
        if roots.is_empty() {
            return Err(CoordError::Hypothesis(
                "graph has no directed spanning tree (no rooted agents); \
                 designate leaders explicitly if a forest structure is intended"
                    .into(),
            ));
        }
        self.decompose_ordered(&roots)
    }

    /// Same block decomposition, but with an explicitly designated leader
    /// set (used for spanning-forest / containment setups and for models
    /// where every agent is treated as rooted regardless of structure).
    /// Leaders keep the given order; they must not receive edges from
    /// non-leaders, otherwise the block-triangular form does not exist.
    pub fn decompose_with_leaders(&self, leaders: &[usize]) -> Result<LaplacianBlocks> {
        self.validate_node_set(leaders)?;
        for &l in leaders {
            for j in 0..self.n {
                if !leaders.contains(&j) && self.w[(l, j)] > 0.0 {
                    return Err(CoordError::Hypothesis(format!(
                        "designated leader {l} receives an edge from non-leader {j}; \
                         the leader block cannot be isolated"
                    )));
                }
            }
        }
        self.decompose_ordered(leaders)
    }

    fn decompose_ordered(&self, first_block: &[usize]) -> Result<LaplacianBlocks> {
        let n = self.n;
        let m = first_block.len();
        let mut permutation: Vec<usize> = first_block.to_vec();
        permutation.extend((0..n).filter(|i| !first_block.contains(i)));

        let l = self.laplacian();
        let mut full = DMatrix::zeros(n, n);
        for p in 0..n {
            for q in 0..n {
                full[(p, q)] = l[(permutation[p], permutation[q])];
            }
        }
        // The upper-right block must vanish for the decomposition to be
        // meaningful; for structurally detected roots this is guaranteed.
        for i in 0..m {
            for j in m..n {
                if full[(i, j)] != 0.0 {
                    return Err(CoordError::Numerical(format!(
                        "rooted block is not isolated: permuted Laplacian entry \
                         ({i}, {j}) = {}",
                        full[(i, j)]
                    )));
                }
            }
        }
        let l1 = full.view((0, 0), (m, m)).into_owned();
        let l2 = full.view((m, 0), (n - m, m)).into_owned();
        let l3 = full.view((m, m), (n - m, n - m)).into_owned();
        Ok(LaplacianBlocks {
            m,
            n,
            permutation,
            full,
            l1,
            l2,
            l3,
        })
    }

    fn validate_node_set(&self, nodes: &[usize]) -> Result<()> {
        for &v in nodes {
            if v >= self.n {
                return Err(CoordError::InvalidGraph(format!(
                    "node {v} out of range for {} nodes",
                    self.n
                )));
            }
        }
        for (a, &v) in nodes.iter().enumerate() {
            if nodes[..a].contains(&v) {
                return Err(CoordError::InvalidGraph(format!(
                    "node {v} listed twice in leader set"
                )));
            }
        }
        Ok(())
    }
}

/// Block form of a permuted Laplacian: rows/columns reordered so the rooted
/// (or designated leader) agents come first.
#[derive(Debug, Clone)]
pub struct LaplacianBlocks {
    /// Number of rooted agents.
    pub m: usize,
    /// Total number of agents.
    pub n: usize,
    /// `permutation[p]` = original node index at block position p.
    pub permutation: Vec<usize>,
    /// Full permuted Laplacian.
    pub full: DMatrix<f64>,
    /// Rooted-to-rooted block (m x m), itself a zero-row-sum Laplacian.
    pub l1: DMatrix<f64>,
    /// Non-rooted-from-rooted block ((n-m) x m).
    pub l2: DMatrix<f64>,
    /// Non-rooted-to-non-rooted block ((n-m) x (n-m)).
    pub l3: DMatrix<f64>,
}

/// Joint-connectivity test over a family of graphs sharing a node set.
///
/// For each graph, the Laplacian spectrum is sorted canonically (by real
/// part, then imaginary part), one structurally forced zero is removed, and
/// the remaining eigenvalues are indexed s = 1..N-1. The covered index set
/// of a graph collects the positions holding nonzero eigenvalues; the family
/// passes when the union of covered sets is all of {1, ..., N-1}.
#[derive(Debug, Clone)]
pub struct JointConnectivity {
    pub holds: bool,
    pub per_graph: Vec<Vec<usize>>,
    pub missing: Vec<usize>,
}

pub fn jointly_connected(graphs: &[Digraph]) -> Result<JointConnectivity> {
    let first = graphs
        .first()
        .ok_or_else(|| CoordError::InvalidGraph("empty graph family".into()))?;
    let n = first.n();
    if n < 2 {
        return Err(CoordError::InvalidGraph(
            "joint connectivity needs at least two nodes".into(),
        ));
    }
    let mut per_graph = Vec::with_capacity(graphs.len());
    let mut covered = vec![false; n - 1];
    for g in graphs {
        if g.n() != n {
            return Err(CoordError::DimensionMismatch(format!(
                "graph family mixes {} and {} nodes",
                n,
                g.n()
            )));
        }
        let l = g.laplacian();
        let tau = tol::zero_tol(spectral::norm_scale(&l));
        let mut eigs = spectral::eigenvalues(&l)?;
        // Remove one structurally forced zero: the eigenvalue of smallest
        // modulus (every Laplacian has at least one zero).
        let (drop_idx, min_mod) = eigs
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty spectrum");
        if min_mod > tau {
            return Err(CoordError::Numerical(format!(
                "Laplacian spectrum has no zero eigenvalue (min modulus {min_mod:.3e})"
            )));
        }
        eigs.remove(drop_idx);
        let phi: Vec<usize> = eigs
            .iter()
            .enumerate()
            .filter(|(_, e)| e.norm() > tau)
            .map(|(i, _)| i + 1)
            .collect();
        for &s in &phi {
            covered[s - 1] = true;
        }
        per_graph.push(phi);
    }
    let missing: Vec<usize> = covered
        .iter()
        .enumerate()
        .filter(|(_, &c)| !c)
        .map(|(i, _)| i + 1)
        .collect();
    Ok(JointConnectivity {
        holds: missing.is_empty(),
        per_graph,
        missing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> Digraph {
        // 0 -> 1 -> 2 -> ... -> n-1
        let edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        Digraph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn laplacian_row_sums_vanish() {
        let g = Digraph::from_edges(4, &[(0, 1, 2.0), (1, 2, 0.5), (3, 2, 1.5), (2, 0, 1.0)])
            .unwrap();
        let l = g.laplacian();
        for i in 0..4 {
            assert!(l.row(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_negative_weight_and_self_loop() {
        let mut g = Digraph::new(3).unwrap();
        assert!(matches!(
            g.add_edge(0, 1, -1.0),
            Err(CoordError::NegativeWeight { .. })
        ));
        assert!(g.add_edge(1, 1, 1.0).is_err());
    }

    #[test]
    fn roots_of_path_graph() {
        let g = path_graph(4);
        assert_eq!(g.find_roots(), vec![0]);
        assert!(g.has_spanning_tree());
        assert!(!g.is_strongly_connected());
    }

    #[test]
    fn roots_of_cycle() {
        let g = Digraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        assert_eq!(g.find_roots(), vec![0, 1, 2]);
        assert!(g.is_strongly_connected());
    }

    #[test]
    fn no_root_when_two_sources() {
        // two isolated sources feeding a shared sink
        let g = Digraph::from_edges(3, &[(0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        assert!(g.find_roots().is_empty());
        assert!(!g.has_spanning_tree());
        assert!(g.has_spanning_forest(&[0, 1]).unwrap());
        assert!(!g.has_spanning_forest(&[0]).unwrap());
    }

    #[test]
    fn decompose_blocks_have_expected_shape() {
        // rooted pair {0, 1} strongly connected, feeding 2 and 3
        let g = Digraph::from_edges(
            4,
            &[(0, 1, 1.0), (1, 0, 2.0), (0, 2, 1.0), (2, 3, 1.0), (3, 2, 0.5)],
        )
        .unwrap();
        let b = g.decompose().unwrap();
        assert_eq!(b.m, 2);
        assert_eq!(b.permutation, vec![0, 1, 2, 3]);
        // L1 rows sum to zero on their own
        for i in 0..b.m {
            assert!(b.l1.row(i).sum().abs() < 1e-12);
        }
        // upper-right block of the permuted Laplacian vanishes
        for i in 0..b.m {
            for j in b.m..b.n {
                assert_eq!(b.full[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn decompose_permutation_is_stable() {
        // roots are {1, 3}: 1 <-> 3 cycle feeding 0 and 2
        let g = Digraph::from_edges(
            4,
            &[(1, 3, 1.0), (3, 1, 1.0), (1, 0, 1.0), (3, 2, 1.0)],
        )
        .unwrap();
        let b = g.decompose().unwrap();
        assert_eq!(b.permutation, vec![1, 3, 0, 2]);
    }

    #[test]
    fn leader_receiving_from_follower_is_rejected() {
        let g = Digraph::from_edges(3, &[(2, 0, 1.0), (0, 1, 1.0)]).unwrap();
        assert!(g.decompose_with_leaders(&[0]).is_err());
    }

    #[test]
    fn union_sums_weights() {
        let g1 = Digraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        let g2 = Digraph::from_edges(3, &[(0, 1, 0.5), (1, 2, 1.0)]).unwrap();
        let u = Digraph::union(&[g1, g2]).unwrap();
        assert_eq!(u.weights()[(1, 0)], 1.5);
        assert_eq!(u.weights()[(2, 1)], 1.0);
    }

    #[test]
    fn joint_connectivity_single_strong_graph() {
        let g = Digraph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let jc = jointly_connected(&[g]).unwrap();
        assert!(jc.holds);
        assert_eq!(jc.per_graph[0], vec![1, 2]);
    }

    #[test]
    fn joint_connectivity_all_empty_family_fails() {
        let g1 = Digraph::new(3).unwrap();
        let g2 = Digraph::new(3).unwrap();
        let jc = jointly_connected(&[g1, g2]).unwrap();
        assert!(!jc.holds);
        assert_eq!(jc.missing, vec![1, 2]);
    }
}
