//! Spanning-tree coordinates for cluster synchronization.
//!
//! A spanning tree `T` made of one tree per cluster plus `r - 1` inter-cluster
//! edges gives the incidence `Bt = [Bt_intra Bt_inter]`. Every edge difference
//! `B^T theta` is then a linear combination of tree differences,
//! `B^T = R Bt^T` with `R = [[R1, 0], [R3, R4]]`, and `R` follows from the
//! column-partitioned pseudoinverse of `Bt`.

use std::collections::VecDeque;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{KuraError, Result};
use crate::graph::{build_incidence, Edge, OrientedIncidence, Partition, WeightedNetwork};
use crate::linalg::{self, pinv, rank, wrap_angle};

/// Tolerance for the `B^T = R Bt^T` identity and for `R2 = 0`.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// Pseudoinverse of `[M1 M2]` assembled blockwise as
/// `[(P2 M1)^+; (P1 M2)^+]` with `Pi = I - Mi Mi^+`.
///
/// Valid only when the column images of `M1` and `M2` intersect trivially,
/// which is checked through `rank [M1 M2] = rank M1 + rank M2`.
pub fn partitioned_pinv(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m1.nrows() != m2.nrows() {
        return Err(KuraError::DimensionMismatch(format!(
            "blocks have {} and {} rows",
            m1.nrows(),
            m2.nrows()
        )));
    }
    let rows = m1.nrows();
    let (r1, r2) = (rank(m1), rank(m2));
    let joint = rank(&hcat(m1, m2));
    if joint < r1 + r2 {
        return Err(KuraError::ImageOverlap {
            joint,
            first: r1,
            second: r2,
        });
    }
    let eye = DMatrix::<f64>::identity(rows, rows);
    let p1 = &eye - m1 * pinv(m1);
    let p2 = &eye - m2 * pinv(m2);
    Ok(vcat(&pinv(&(p2 * m1)), &pinv(&(p1 * m2))))
}

pub(crate) fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

pub(crate) fn vcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.rows_mut(0, a.nrows()).copy_from(a);
    out.rows_mut(a.nrows(), b.nrows()).copy_from(b);
    out
}

fn incidence_of(n: usize, edges: &[Edge]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, edges.len());
    for (k, e) in edges.iter().enumerate() {
        b[(e.i, k)] = -1.0;
        b[(e.j, k)] = 1.0;
    }
    b
}

/// Spanning tree of the network: per-cluster breadth-first trees followed by
/// the inter-cluster edges that join the cluster quotient graph.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    pub intra_edges: Vec<Edge>,
    pub inter_edges: Vec<Edge>,
    pub b_intra: DMatrix<f64>,
    pub b_inter: DMatrix<f64>,
}

impl SpanningTree {
    pub fn incidence(&self) -> DMatrix<f64> {
        hcat(&self.b_intra, &self.b_inter)
    }
}

/// Builds the deterministic spanning tree.
///
/// Each cluster tree is grown breadth-first from its lowest-index node,
/// visiting neighbours in increasing index order. The `r - 1` inter-cluster
/// tree edges are taken greedily in lexicographic order whenever they join
/// two not yet connected clusters.
pub fn build_spanning_tree(net: &WeightedNetwork, part: &Partition) -> Result<SpanningTree> {
    part.ensure_connected(net)?;
    let n = net.n_nodes();
    let mut intra_edges = Vec::with_capacity(n - part.n_clusters());
    for (p, members) in part.clusters().iter().enumerate() {
        let root = members[0];
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        let mut cluster_edges = Vec::with_capacity(members.len() - 1);
        while let Some(u) = queue.pop_front() {
            for &(v, w) in net.neighbors(u) {
                if part.cluster_of(v) == p && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                    cluster_edges.push(Edge {
                        i: u.min(v),
                        j: u.max(v),
                        weight: w,
                    });
                }
            }
        }
        if cluster_edges.len() + 1 != members.len() {
            return Err(KuraError::ClusterNotConnected { cluster: p });
        }
        cluster_edges.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
        intra_edges.extend(cluster_edges);
    }

    let r = part.n_clusters();
    let mut parent: Vec<usize> = (0..r).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut inter_edges = Vec::with_capacity(r - 1);
    for e in net.edges().iter().filter(|e| !part.is_intra(e)) {
        let a = find(&mut parent, part.cluster_of(e.i));
        let b = find(&mut parent, part.cluster_of(e.j));
        if a != b {
            parent[a] = b;
            inter_edges.push(*e);
            if inter_edges.len() == r - 1 {
                break;
            }
        }
    }
    if inter_edges.len() != r - 1 {
        return Err(KuraError::QuotientDisconnected);
    }
    Ok(SpanningTree {
        b_intra: incidence_of(n, &intra_edges),
        b_inter: incidence_of(n, &inter_edges),
        intra_edges,
        inter_edges,
    })
}

/// The nonzero blocks of `R` together with the projectors used to get them.
#[derive(Debug, Clone)]
pub struct Reduction {
    pub r1: DMatrix<f64>,
    pub r3: DMatrix<f64>,
    pub r4: DMatrix<f64>,
    pub p_intra: DMatrix<f64>,
    pub p_inter: DMatrix<f64>,
    /// `max |R2|`, which must vanish.
    pub r2_max_abs: f64,
    /// `max |B^T - R Bt^T|`.
    pub residual: f64,
}

/// Computes `R1`, `R3`, `R4` from the closed forms
/// `R1 = B_intra^T (Bt_intra^T P_inter)^+`, `R3 = B_inter^T (Bt_intra^T P_inter)^+`,
/// `R4 = B_inter^T (Bt_inter^T P_intra)^+`, and verifies the reconstruction.
pub fn reduction_matrices(inc: &OrientedIncidence, tree: &SpanningTree) -> Result<Reduction> {
    let n = inc.matrix().nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let p_intra = &eye - &tree.b_intra * pinv(&tree.b_intra);
    let p_inter = &eye - &tree.b_inter * pinv(&tree.b_inter);

    let bt_pinv = partitioned_pinv(&tree.b_intra, &tree.b_inter)?;
    let n_intra_tree = tree.b_intra.ncols();
    // (Bt_intra^T P_inter)^+ = ((P_inter Bt_intra)^+)^T is the transpose of the first block
    let left = bt_pinv.rows(0, n_intra_tree).transpose();
    let right = bt_pinv
        .rows(n_intra_tree, tree.b_inter.ncols())
        .transpose();

    let b_intra_t = inc.b_intra().transpose();
    let b_inter_t = inc.b_inter().transpose();
    let r1 = &b_intra_t * &left;
    let r2 = &b_intra_t * &right;
    let r3 = &b_inter_t * &left;
    let r4 = &b_inter_t * &right;

    let r2_max_abs = linalg::max_abs(&r2);
    let r = vcat(&hcat(&r1, &r2), &hcat(&r3, &r4));
    let residual = linalg::max_abs(&(inc.matrix().transpose() - r * tree.incidence().transpose()));
    if residual > RECONSTRUCTION_TOL || r2_max_abs > RECONSTRUCTION_TOL {
        return Err(KuraError::ReconstructionFailure {
            residual: residual.max(r2_max_abs),
        });
    }
    Ok(Reduction {
        r1,
        r3,
        r4,
        p_intra,
        p_inter,
        r2_max_abs,
        residual,
    })
}

/// Whether every row of `m` holds a single `+-1` with zeros elsewhere.
pub fn has_signed_unit_rows(m: &DMatrix<f64>) -> bool {
    m.row_iter().all(|row| {
        let mut units = 0;
        for &x in row.iter() {
            if (x.abs() - 1.0).abs() < RECONSTRUCTION_TOL {
                units += 1;
            } else if x.abs() > RECONSTRUCTION_TOL {
                return false;
            }
        }
        units == 1
    })
}

/// Spanning tree, edge enumeration and reduction matrices bundled together.
#[derive(Debug, Clone)]
pub struct TreeDecomposition {
    incidence: OrientedIncidence,
    tree: SpanningTree,
    reduction: Reduction,
    r4_signed_unit_rows: bool,
}

impl TreeDecomposition {
    pub fn new(net: &WeightedNetwork, part: &Partition) -> Result<Self> {
        let incidence = build_incidence(net, part);
        let tree = build_spanning_tree(net, part)?;
        let reduction = reduction_matrices(&incidence, &tree)?;
        let r4_signed_unit_rows = has_signed_unit_rows(&reduction.r4);
        if !r4_signed_unit_rows {
            warn!("R4 rows are not single +-1 entries for this tree; gamma uses the ||R4||_inf fallback");
        }
        Ok(TreeDecomposition {
            incidence,
            tree,
            reduction,
            r4_signed_unit_rows,
        })
    }

    pub fn incidence(&self) -> &OrientedIncidence {
        &self.incidence
    }

    pub fn tree(&self) -> &SpanningTree {
        &self.tree
    }

    /// Number of intra-cluster tree edges, `sum_p (|C_p| - 1)`.
    pub fn n(&self) -> usize {
        self.tree.b_intra.ncols()
    }

    /// Number of inter-cluster tree edges, `r - 1`.
    pub fn m(&self) -> usize {
        self.tree.b_inter.ncols()
    }

    pub fn b_tilde(&self) -> DMatrix<f64> {
        self.tree.incidence()
    }

    pub fn b_tilde_intra(&self) -> &DMatrix<f64> {
        &self.tree.b_intra
    }

    pub fn b_tilde_inter(&self) -> &DMatrix<f64> {
        &self.tree.b_inter
    }

    pub fn r1(&self) -> &DMatrix<f64> {
        &self.reduction.r1
    }

    pub fn r3(&self) -> &DMatrix<f64> {
        &self.reduction.r3
    }

    pub fn r4(&self) -> &DMatrix<f64> {
        &self.reduction.r4
    }

    pub fn reduction(&self) -> &Reduction {
        &self.reduction
    }

    pub fn p_intra(&self) -> &DMatrix<f64> {
        &self.reduction.p_intra
    }

    pub fn p_inter(&self) -> &DMatrix<f64> {
        &self.reduction.p_inter
    }

    pub fn r4_signed_unit_rows(&self) -> bool {
        self.r4_signed_unit_rows
    }

    /// Intra-cluster tree differences `x = Bt_intra^T theta`.
    pub fn x_coords(&self, theta: &[f64]) -> DVector<f64> {
        tree_differences(&self.tree.intra_edges, theta, false)
    }

    /// Like [`Self::x_coords`] but with every difference wrapped to `(-pi, pi]`.
    pub fn x_coords_wrapped(&self, theta: &[f64]) -> DVector<f64> {
        tree_differences(&self.tree.intra_edges, theta, true)
    }

    /// Inter-cluster tree differences `z = Bt_inter^T theta`.
    pub fn z_coords(&self, theta: &[f64]) -> DVector<f64> {
        tree_differences(&self.tree.inter_edges, theta, false)
    }
}

fn tree_differences(edges: &[Edge], theta: &[f64], wrap: bool) -> DVector<f64> {
    DVector::from_iterator(
        edges.len(),
        edges.iter().map(|e| {
            let d = theta[e.j] - theta[e.i];
            if wrap {
                wrap_angle(d)
            } else {
                d
            }
        }),
    )
}
