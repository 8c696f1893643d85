//! Weighted undirected networks, cluster partitions, and the partition checks
//! that cluster synchronization analysis rests on.

use std::collections::VecDeque;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KuraError, Result};
use crate::linalg;

/// Relative asymmetry above which adjacency symmetrization is reported.
pub const ASYMMETRY_WARN: f64 = 1e-6;

/// An undirected edge stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Connected undirected network with positive edge weights.
#[derive(Debug, Clone)]
pub struct WeightedNetwork {
    n: usize,
    edges: Vec<Edge>,
    adjacency: DMatrix<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

impl WeightedNetwork {
    /// Builds a network from `(i, j, w)` triples. Orientation of the input
    /// pair is irrelevant; duplicates, self-loops and nonpositive weights are
    /// rejected, as is a disconnected result.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n < 2 {
            return Err(KuraError::InvalidNetwork(format!(
                "need at least two nodes, got {n}"
            )));
        }
        let mut adjacency = DMatrix::zeros(n, n);
        let mut list = Vec::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(KuraError::InvalidNetwork(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                return Err(KuraError::InvalidNetwork(format!("self-loop at node {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(KuraError::InvalidNetwork(format!(
                    "edge ({a}, {b}) has non-positive or non-finite weight {w}"
                )));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if adjacency[(i, j)] != 0.0 {
                return Err(KuraError::InvalidNetwork(format!("duplicate edge ({i}, {j})")));
            }
            adjacency[(i, j)] = w;
            adjacency[(j, i)] = w;
            list.push(Edge { i, j, weight: w });
        }
        list.sort_by(|x, y| (x.i, x.j).cmp(&(y.i, y.j)));
        let mut neighbors = vec![Vec::new(); n];
        for e in &list {
            neighbors[e.i].push((e.j, e.weight));
            neighbors[e.j].push((e.i, e.weight));
        }
        for nb in &mut neighbors {
            nb.sort_by_key(|&(k, _)| k);
        }
        let net = WeightedNetwork {
            n,
            edges: list,
            adjacency,
            neighbors,
        };
        let all: Vec<usize> = (0..n).collect();
        if !net.is_connected_subset(&all) {
            return Err(KuraError::InvalidNetwork("network is not connected".into()));
        }
        Ok(net)
    }

    /// Builds a network from a dense adjacency matrix.
    ///
    /// Nearly symmetric inputs are replaced by `(A + A^T) / 2`; a warning is
    /// logged when the relative asymmetry exceeds [`ASYMMETRY_WARN`]. Diagonal
    /// entries are ignored.
    pub fn from_adjacency(a: &DMatrix<f64>) -> Result<Self> {
        let (sym, asym) = symmetrize(a)?;
        if asym > ASYMMETRY_WARN {
            warn!("adjacency matrix is asymmetric (relative {asym:.3e}); using (A + A^T)/2");
        }
        let n = sym.nrows();
        let mut triples = Vec::new();
        for i in 0..n {
            if sym[(i, i)] != 0.0 {
                warn!("ignoring diagonal entry a[{i},{i}] = {}", sym[(i, i)]);
            }
            for j in (i + 1)..n {
                if sym[(i, j)] > 0.0 {
                    triples.push((i, j, sym[(i, j)]));
                }
            }
        }
        Self::from_edges(n, triples)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    /// Edges in lexicographic `(i, j)` order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    /// Neighbors of `i` with weights, sorted by neighbor index.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).fold(0.0, f64::max)
    }

    pub fn weighted_degree(&self, i: usize) -> f64 {
        self.neighbors[i].iter().map(|&(_, w)| w).sum()
    }

    pub fn max_weighted_degree(&self) -> f64 {
        (0..self.n)
            .map(|i| self.weighted_degree(i))
            .fold(0.0, f64::max)
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        linalg::laplacian(&self.adjacency)
    }

    /// Whether the subgraph induced by `nodes` is connected.
    pub fn is_connected_subset(&self, nodes: &[usize]) -> bool {
        if nodes.is_empty() {
            return false;
        }
        let mut inside = vec![false; self.n];
        for &v in nodes {
            inside[v] = true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([nodes[0]]);
        seen[nodes[0]] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.neighbors[u] {
                if inside[v] && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == nodes.len()
    }

    /// Returns a copy with every edge weight replaced by `f(edge)`.
    pub fn map_weights<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&Edge) -> f64,
    {
        Self::from_edges(self.n, self.edges.iter().map(|e| (e.i, e.j, f(e))))
    }

    /// Scales intra-cluster weights by `intra` and inter-cluster weights by `inter`.
    pub fn scaled(&self, part: &Partition, intra: f64, inter: f64) -> Result<Self> {
        self.map_weights(|e| {
            if part.cluster_of(e.i) == part.cluster_of(e.j) {
                e.weight * intra
            } else {
                e.weight * inter
            }
        })
    }
}

/// Returns `(A + A^T)/2` and the relative asymmetry `max|A - A^T| / max|A|`.
pub fn symmetrize(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if a.nrows() != a.ncols() {
        return Err(KuraError::InvalidNetwork(format!(
            "adjacency must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(KuraError::InvalidNetwork(
            "adjacency entries must be finite and nonnegative".into(),
        ));
    }
    let scale = linalg::max_abs(a);
    let diff = linalg::max_abs(&(a - a.transpose()));
    let rel = if scale > 0.0 { diff / scale } else { 0.0 };
    Ok(((a + a.transpose()) * 0.5, rel))
}

/// Nontrivial partition of the node set into clusters of size at least two.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    clusters: Vec<Vec<usize>>,
    membership: Vec<usize>,
}

impl Partition {
    /// Validates the structural conditions: at least two clusters, each with
    /// at least two nodes, pairwise disjoint, covering `0..n_nodes`.
    /// Cluster members are stored sorted.
    pub fn new(n_nodes: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        if clusters.len() < 2 {
            return Err(KuraError::InvalidPartition(format!(
                "need at least two clusters, got {}",
                clusters.len()
            )));
        }
        let mut membership = vec![usize::MAX; n_nodes];
        let mut sorted = Vec::with_capacity(clusters.len());
        for (p, mut c) in clusters.into_iter().enumerate() {
            if c.len() < 2 {
                return Err(KuraError::InvalidPartition(format!(
                    "cluster {p} has {} node(s); at least two required",
                    c.len()
                )));
            }
            c.sort_unstable();
            for &v in &c {
                if v >= n_nodes {
                    return Err(KuraError::InvalidPartition(format!(
                        "node {v} in cluster {p} is outside 0..{n_nodes}"
                    )));
                }
                if membership[v] != usize::MAX {
                    return Err(KuraError::InvalidPartition(format!(
                        "node {v} belongs to clusters {} and {p}",
                        membership[v]
                    )));
                }
                membership[v] = p;
            }
            sorted.push(c);
        }
        if let Some(v) = membership.iter().position(|&m| m == usize::MAX) {
            return Err(KuraError::InvalidPartition(format!(
                "node {v} is not assigned to any cluster"
            )));
        }
        Ok(Partition {
            clusters: sorted,
            membership,
        })
    }

    /// Structural validation plus connectivity of every induced subgraph.
    pub fn for_network(net: &WeightedNetwork, clusters: Vec<Vec<usize>>) -> Result<Self> {
        let part = Self::new(net.n_nodes(), clusters)?;
        part.ensure_connected(net)?;
        Ok(part)
    }

    /// Contiguous index blocks with the given sizes.
    pub fn contiguous(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let mut clusters = Vec::with_capacity(sizes.len());
        for &s in sizes {
            clusters.push((start..start + s).collect());
            start += s;
        }
        Self::new(start, clusters)
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.membership.len()
    }

    pub fn cluster_of(&self, node: usize) -> usize {
        self.membership[node]
    }

    pub fn is_intra(&self, e: &Edge) -> bool {
        self.membership[e.i] == self.membership[e.j]
    }

    pub fn ensure_connected(&self, net: &WeightedNetwork) -> Result<()> {
        if net.n_nodes() != self.n_nodes() {
            return Err(KuraError::DimensionMismatch(format!(
                "partition covers {} nodes, network has {}",
                self.n_nodes(),
                net.n_nodes()
            )));
        }
        for (p, c) in self.clusters.iter().enumerate() {
            if !net.is_connected_subset(c) {
                return Err(KuraError::ClusterNotConnected { cluster: p });
            }
        }
        Ok(())
    }
}

/// Oriented incidence matrix `B` and diagonal weights `W` with the edge
/// enumeration fixed: intra-cluster edges first (cluster by cluster,
/// lexicographic inside each), then inter-cluster edges lexicographically.
/// Each column has `-1` at the smaller node (source) and `+1` at the larger.
#[derive(Debug, Clone)]
pub struct OrientedIncidence {
    edges: Vec<Edge>,
    b: DMatrix<f64>,
    n_intra: usize,
}

impl OrientedIncidence {
    fn from_ordered(n: usize, edges: Vec<Edge>, n_intra: usize) -> Self {
        let mut b = DMatrix::zeros(n, edges.len());
        for (k, e) in edges.iter().enumerate() {
            b[(e.i, k)] = -1.0;
            b[(e.j, k)] = 1.0;
        }
        OrientedIncidence { edges, b, n_intra }
    }

    /// Incidence in plain lexicographic edge order, without a partition.
    pub fn unpartitioned(net: &WeightedNetwork) -> Self {
        Self::from_ordered(net.n_nodes(), net.edges().to_vec(), 0)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n_intra(&self) -> usize {
        self.n_intra
    }

    pub fn n_inter(&self) -> usize {
        self.edges.len() - self.n_intra
    }

    pub fn weights(&self) -> DVector<f64> {
        DVector::from_iterator(self.edges.len(), self.edges.iter().map(|e| e.weight))
    }

    pub fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.weights())
    }

    pub fn b_intra(&self) -> DMatrix<f64> {
        self.b.columns(0, self.n_intra).into_owned()
    }

    pub fn b_inter(&self) -> DMatrix<f64> {
        self.b.columns(self.n_intra, self.n_inter()).into_owned()
    }

    pub fn w_intra(&self) -> DMatrix<f64> {
        diag_of(&self.edges[..self.n_intra])
    }

    pub fn w_inter(&self) -> DMatrix<f64> {
        diag_of(&self.edges[self.n_intra..])
    }

    pub fn intra_edges(&self) -> &[Edge] {
        &self.edges[..self.n_intra]
    }

    pub fn inter_edges(&self) -> &[Edge] {
        &self.edges[self.n_intra..]
    }
}

fn diag_of(edges: &[Edge]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        edges.len(),
        edges.iter().map(|e| e.weight),
    ))
}

/// Incidence matrix with the cluster-block edge enumeration.
pub fn build_incidence(net: &WeightedNetwork, part: &Partition) -> OrientedIncidence {
    let mut ordered = Vec::with_capacity(net.edges().len());
    for p in 0..part.n_clusters() {
        ordered.extend(
            net.edges()
                .iter()
                .filter(|e| part.cluster_of(e.i) == p && part.cluster_of(e.j) == p)
                .copied(),
        );
    }
    let n_intra = ordered.len();
    ordered.extend(net.edges().iter().filter(|e| !part.is_intra(e)).copied());
    OrientedIncidence::from_ordered(net.n_nodes(), ordered, n_intra)
}

/// Node pair attaining the largest deviation from an equitable partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    pub from_cluster: usize,
    pub node_i: usize,
    pub node_j: usize,
    pub to_cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EepReport {
    pub is_exact: bool,
    pub deviation_k: f64,
    pub worst_pair: Option<WorstPair>,
    pub tolerance: f64,
}

/// Tolerance for treating the equitable-partition deviation as zero.
pub fn eep_tolerance(net: &WeightedNetwork) -> f64 {
    1e-9 * (1.0 + net.max_weight())
}

/// Measures how far `part` is from an external equitable partition: the
/// largest `|sum_{k in C_q} (a_ik - a_jk)|` over clusters `p != q` and
/// `i, j in C_p`.
pub fn check_partition(net: &WeightedNetwork, part: &Partition) -> Result<EepReport> {
    part.ensure_connected(net)?;
    let r = part.n_clusters();
    // row sums of each node toward each cluster
    let mut toward = vec![vec![0.0; r]; net.n_nodes()];
    for e in net.edges() {
        toward[e.i][part.cluster_of(e.j)] += e.weight;
        toward[e.j][part.cluster_of(e.i)] += e.weight;
    }
    let mut deviation = 0.0;
    let mut worst = None;
    for (p, members) in part.clusters().iter().enumerate() {
        for q in (0..r).filter(|&q| q != p) {
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    let d = (toward[i][q] - toward[j][q]).abs();
                    if d > deviation {
                        deviation = d;
                        worst = Some(WorstPair {
                            from_cluster: p,
                            node_i: i,
                            node_j: j,
                            to_cluster: q,
                        });
                    }
                }
            }
        }
    }
    let tolerance = eep_tolerance(net);
    Ok(EepReport {
        is_exact: deviation <= tolerance,
        deviation_k: deviation,
        worst_pair: worst,
        tolerance,
    })
}

/// Weighted Laplacian of the subgraph induced by `nodes` (in the given order).
pub fn induced_laplacian(net: &WeightedNetwork, nodes: &[usize]) -> DMatrix<f64> {
    let k = nodes.len();
    let sub = DMatrix::from_fn(k, k, |a, b| {
        if a == b {
            0.0
        } else {
            net.weight(nodes[a], nodes[b])
        }
    });
    linalg::laplacian(&sub)
}

/// Second-smallest Laplacian eigenvalue of each cluster subgraph.
pub fn cluster_connectivities(net: &WeightedNetwork, part: &Partition) -> Result<Vec<f64>> {
    part.ensure_connected(net)?;
    Ok(part
        .clusters()
        .iter()
        .map(|c| linalg::symmetric_eigenvalues(&induced_laplacian(net, c))[1])
        .collect())
}

/// Smallest algebraic connectivity over the cluster subgraphs.
pub fn algebraic_connectivity(net: &WeightedNetwork, part: &Partition) -> Result<f64> {
    Ok(cluster_connectivities(net, part)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}
