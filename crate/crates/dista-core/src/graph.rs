//! Network topologies and consensus (averaging) matrices.
//!
//! The estimate-exchange step multiplies the estimate matrix by the
//! transpose of a symmetric, doubly stochastic matrix `P` that is
//! *adapted* to the communication graph: `P[v][w] != 0` only when `v`
//! and `w` are neighbors or `v == w`, and every node keeps a positive
//! self-weight. Two constructors cover the shipped experiments: the
//! complete graph with uniform weights `1/N`, and circulant `d`-regular
//! rings (`d` odd, self-loop included in the degree) with weights `1/d`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::numerics::{ensure_finite_mat, EstimateMatrix, Matrix};

/// Undirected communication graph with explicit self-loops.
///
/// Neighbor lists are sorted and always contain the node itself; for the
/// constructors in this module every node has the same degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Number of nodes in the graph.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Sorted neighbor list of `v`, including `v` itself.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    /// Degree of `v`, counting the self-loop.
    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    /// Common degree if the graph is regular, `None` otherwise.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.neighbors.first().map(Vec::len)?;
        self.neighbors.iter().all(|l| l.len() == d).then_some(d)
    }
}

/// A symmetric stochastic averaging matrix together with its graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusMatrix {
    weights: Matrix,
    topology: Topology,
}

impl ConsensusMatrix {
    /// Builds from raw parts without validation. Intended for tests and
    /// diagnostics that need to inject deliberately broken matrices;
    /// run [`ConsensusMatrix::validate`] afterwards when in doubt.
    pub fn from_parts(weights: Matrix, topology: Topology) -> Self {
        ConsensusMatrix { weights, topology }
    }

    /// The averaging weights `P`.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// The communication graph `P` is adapted to.
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Number of nodes.
    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    /// Checks the structural requirements on `P` and returns every
    /// violation found (empty means the matrix is valid): square shape
    /// matching the graph, finite nonnegative entries, row sums within
    /// `1e-12` of one, exact symmetry, positive self-weights, and
    /// adaptedness to the graph.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let n = self.topology.node_count();
        if self.weights.dim() != (n, n) {
            problems.push(format!(
                "weights are {:?} but the graph has {n} nodes",
                self.weights.dim()
            ));
            return problems; // index checks below would be meaningless
        }
        if ensure_finite_mat(&self.weights, "consensus weights").is_err() {
            problems.push("weights contain NaN or Inf".into());
            return problems;
        }
        for v in 0..n {
            let row_sum: f64 = self.weights.row(v).sum();
            if (row_sum - 1.0).abs() > 1e-12 {
                problems.push(format!("row {v} sums to {row_sum}, expected 1"));
            }
            if self.weights[[v, v]] <= 0.0 {
                problems.push(format!("node {v} has non-positive self-weight"));
            }
            for w in 0..n {
                let p = self.weights[[v, w]];
                if p < 0.0 {
                    problems.push(format!("negative weight at ({v}, {w})"));
                }
                if p != self.weights[[w, v]] {
                    problems.push(format!("asymmetric pair at ({v}, {w})"));
                }
                let is_neighbor = self.topology.neighbors(v).binary_search(&w).is_ok();
                if p != 0.0 && !is_neighbor {
                    problems.push(format!("weight on non-edge ({v}, {w})"));
                }
            }
        }
        problems
    }
}

/// Complete graph on `n` nodes with uniform weights `1/n`.
pub fn build_complete(n: usize) -> Result<ConsensusMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "a network needs at least one node".into(),
        ));
    }
    let weights = Array2::from_elem((n, n), 1.0 / n as f64);
    let neighbors = (0..n).map(|_| (0..n).collect()).collect();
    Ok(ConsensusMatrix {
        weights,
        topology: Topology {
            node_count: n,
            neighbors,
        },
    })
}

/// Circulant `d`-regular graph on `n` nodes with uniform weights `1/d`.
///
/// Node `v` is linked to the `(d - 1) / 2` nearest nodes on each side of
/// the ring plus itself, so `d` must be odd and `1 <= d <= n`. `d = 1`
/// is the edgeless graph (identity weights) and `d = n` (odd `n`)
/// coincides with [`build_complete`].
pub fn build_d_regular(n: usize, d: usize) -> Result<ConsensusMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "a network needs at least one node".into(),
        ));
    }
    if d % 2 == 0 || d == 0 || d > n {
        return Err(Error::InvalidParameter(format!(
            "circulant degree must be odd and within 1..={n}, got {d}"
        )));
    }
    let half = (d - 1) / 2;
    let w = 1.0 / d as f64;
    let mut weights = Array2::zeros((n, n));
    let mut neighbors = Vec::with_capacity(n);
    for v in 0..n {
        let mut list = Vec::with_capacity(d);
        list.push(v);
        for offset in 1..=half {
            list.push((v + offset) % n);
            list.push((v + n - offset) % n);
        }
        list.sort_unstable();
        for &u in &list {
            weights[[v, u]] = w;
        }
        neighbors.push(list);
    }
    Ok(ConsensusMatrix {
        weights,
        topology: Topology {
            node_count: n,
            neighbors,
        },
    })
}

/// One consensus exchange: returns `X P^T`, i.e. column `v` of the
/// result is the `P`-weighted average of the neighbor columns of `X`.
pub fn apply_consensus(x: &EstimateMatrix, p: &ConsensusMatrix) -> Result<EstimateMatrix> {
    let n_nodes = p.node_count();
    if x.ncols() != n_nodes {
        return Err(Error::ShapeMismatch(format!(
            "estimate matrix has {} columns but the network has {n_nodes} nodes",
            x.ncols()
        )));
    }
    Ok(x.dot(&p.weights().t()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn complete_two_nodes_is_half_everywhere() {
        let p = build_complete(2).unwrap();
        assert_eq!(p.weights(), &array![[0.5, 0.5], [0.5, 0.5]]);
        assert!(p.validate().is_empty());
    }

    #[test]
    fn complete_single_node_is_identity() {
        let p = build_complete(1).unwrap();
        assert_eq!(p.weights(), &array![[1.0]]);
        assert!(p.validate().is_empty());
    }

    #[test]
    fn degree_one_ring_is_identity() {
        let p = build_d_regular(5, 1).unwrap();
        assert_eq!(p.weights(), &Array2::eye(5));
        assert!(p.validate().is_empty());
    }

    #[test]
    fn full_degree_ring_matches_complete_graph() {
        for n in [1usize, 3, 5, 9] {
            let ring = build_d_regular(n, n).unwrap();
            let complete = build_complete(n).unwrap();
            assert_eq!(ring.weights(), complete.weights(), "n = {n}");
        }
    }

    #[test]
    fn rejects_even_degree_oversized_degree_and_empty_graph() {
        assert!(build_d_regular(6, 2).is_err());
        assert!(build_d_regular(4, 5).is_err());
        assert!(build_d_regular(0, 1).is_err());
        assert!(build_complete(0).is_err());
    }

    #[test]
    fn ring_matrices_are_valid_and_regular() {
        for (n, d) in [(7usize, 3usize), (10, 5), (9, 7), (12, 11)] {
            let p = build_d_regular(n, d).unwrap();
            assert!(p.validate().is_empty(), "n={n} d={d}: {:?}", p.validate());
            assert_eq!(p.topology().regular_degree(), Some(d));
            // Exact symmetry, not just within tolerance.
            for v in 0..n {
                for w in 0..n {
                    assert_eq!(p.weights()[[v, w]], p.weights()[[w, v]]);
                }
            }
        }
    }

    #[test]
    fn validate_flags_asymmetric_and_nonstochastic_matrices() {
        let good = build_d_regular(6, 3).unwrap();
        let mut bad = good.weights().clone();
        bad[[0, 1]] += 0.1; // breaks symmetry and the row sum
        let injected = ConsensusMatrix::from_parts(bad, good.topology().clone());
        let problems = injected.validate();
        assert!(problems.iter().any(|p| p.contains("asymmetric")));
        assert!(problems.iter().any(|p| p.contains("sums to")));
    }

    #[test]
    fn consensus_preserves_constant_columns() {
        // A doubly stochastic exchange leaves consensus states untouched.
        let p = build_d_regular(8, 3).unwrap();
        let col = array![1.5, -2.0, 0.25];
        let mut x = Array2::zeros((3, 8));
        for v in 0..8 {
            x.column_mut(v).assign(&col);
        }
        let out = apply_consensus(&x, &p).unwrap();
        for v in 0..8 {
            for i in 0..3 {
                assert!((out[[i, v]] - col[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn consensus_output_stays_in_neighbor_hull() {
        // Each output entry is a convex combination of neighbor entries.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let p = build_d_regular(9, 5).unwrap();
        let x = Array2::from_shape_fn((4, 9), |_| rng.sample::<f64, _>(StandardNormal));
        let out = apply_consensus(&x, &p).unwrap();
        for v in 0..9 {
            for i in 0..4 {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &w in p.topology().neighbors(v) {
                    lo = lo.min(x[[i, w]]);
                    hi = hi.max(x[[i, w]]);
                }
                assert!(out[[i, v]] >= lo - 1e-12 && out[[i, v]] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn consensus_matches_row_wise_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let p = build_d_regular(7, 3).unwrap();
        let x = Array2::from_shape_fn((5, 7), |_| rng.sample::<f64, _>(StandardNormal));
        let out = apply_consensus(&x, &p).unwrap();
        for v in 0..7 {
            let mut col = Array1::<f64>::zeros(5);
            for w in 0..7 {
                col = col + p.weights()[[v, w]] * &x.column(w);
            }
            for i in 0..5 {
                assert!((out[[i, v]] - col[i]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn consensus_rejects_column_mismatch() {
        let p = build_complete(4).unwrap();
        let x = Array2::<f64>::zeros((3, 5));
        assert!(apply_consensus(&x, &p).is_err());
    }
}
