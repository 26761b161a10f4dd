//! Cluster graphs, node roles, the canonical Bogoliubov matrix Re U and the
//! nullifier map.

use serde::{Deserialize, Serialize};

use crate::error::{OwqcError, Result};
use crate::matrix::{block2, inv_sqrt_posdef, max_abs, max_abs_diff, select, Mat};

/// Symmetric weighted adjacency matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterGraph {
    adjacency: Mat,
}

impl ClusterGraph {
    pub fn new(adjacency: Mat) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n {
            return Err(OwqcError::InvalidGraph(format!(
                "adjacency must be square and non-empty, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        if adjacency.iter().any(|v| !v.is_finite()) {
            return Err(OwqcError::InvalidGraph("non-finite weight".into()));
        }
        if let Some(i) = (0..n).find(|&i| adjacency[(i, i)] != 0.0) {
            return Err(OwqcError::InvalidGraph(format!("nonzero diagonal entry at node {i}")));
        }
        let asym = max_abs_diff(&adjacency, &adjacency.transpose());
        if asym > 1e-12 * max_abs(&adjacency).max(1.0) {
            return Err(OwqcError::InvalidGraph(format!("adjacency is not symmetric (asymmetry {asym:.3e})")));
        }
        Ok(Self { adjacency })
    }

    /// Graph on `n` nodes from undirected weighted edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut a = Mat::zeros(n, n);
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(OwqcError::InvalidGraph(format!("bad edge ({i}, {j})")));
            }
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
        Self::new(a)
    }

    pub fn n(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &Mat {
        &self.adjacency
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.adjacency[(i, j)]
    }

    /// Same graph with nodes renamed: node `perm[k]` of the result is node `k` here.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(OwqcError::InvalidGraph("relabeling is not a permutation".into()));
        }
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                a[(perm[i], perm[j])] = self.adjacency[(i, j)];
            }
        }
        Ok(Self { adjacency: a })
    }
}

/// Which computation class a partition describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Inputs mixed directly with the output nodes.
    Case1,
    /// Inputs mixed with measured nodes, n = 2m.
    Case2,
    /// Inputs mixed with measured nodes, n = 2m + l.
    Case3,
}

/// Role of every node. In the case-1 layout `outputs` repeats `input_mixed`
/// (each input is mixed onto its own output node); otherwise the three lists
/// are disjoint and `outputs[k]` carries input `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodePartition {
    pub input_mixed: Vec<usize>,
    pub outputs: Vec<usize>,
    #[serde(default)]
    pub measured_only: Vec<usize>,
}

impl NodePartition {
    pub fn new(input_mixed: Vec<usize>, outputs: Vec<usize>, measured_only: Vec<usize>) -> Self {
        Self { input_mixed, outputs, measured_only }
    }

    /// Inputs attached to the output nodes themselves.
    pub fn direct(nodes: Vec<usize>, measured_only: Vec<usize>) -> Self {
        Self::new(nodes.clone(), nodes, measured_only)
    }

    pub fn m(&self) -> usize {
        self.input_mixed.len()
    }

    pub fn l(&self) -> usize {
        self.measured_only.len()
    }

    pub fn layout(&self) -> Layout {
        if self.input_mixed == self.outputs {
            Layout::Case1
        } else if self.measured_only.is_empty() {
            Layout::Case2
        } else {
            Layout::Case3
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Err(OwqcError::InvalidPartition("no input modes".into()));
        }
        if self.outputs.len() != m {
            return Err(OwqcError::InvalidPartition(format!(
                "{} outputs for {m} inputs; each input needs exactly one output",
                self.outputs.len()
            )));
        }
        let mut seen = vec![false; n];
        let lists: Vec<&Vec<usize>> = if self.layout() == Layout::Case1 {
            vec![&self.input_mixed, &self.measured_only]
        } else {
            vec![&self.input_mixed, &self.outputs, &self.measured_only]
        };
        for &k in lists.into_iter().flatten() {
            if k >= n {
                return Err(OwqcError::InvalidPartition(format!("node {k} out of range for {n} nodes")));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(OwqcError::InvalidPartition(format!(
                    "node {k} has more than one role (inputs may attach to one node only)"
                )));
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(OwqcError::InvalidPartition(format!("node {k} has no role")));
        }
        Ok(())
    }

    /// Node order used by the block formulas: inputs, outputs, measured
    /// (case 1: inputs then measured).
    pub fn order(&self) -> Vec<usize> {
        let mut v = self.input_mixed.clone();
        if self.layout() != Layout::Case1 {
            v.extend(&self.outputs);
        }
        v.extend(&self.measured_only);
        v
    }
}

/// Adjacency blocks in role order. Index 1 is the input-mixed nodes. For
/// cases 2 and 3 index 2 is the outputs and 3 the measured-only nodes. In the
/// case-1 layout index 2 is the measured-only nodes and the index-3 blocks are
/// empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSet {
    pub a11: Mat,
    pub a12: Mat,
    pub a13: Mat,
    pub a22: Mat,
    pub a23: Mat,
    pub a33: Mat,
    pub order: Vec<usize>,
}

impl BlockSet {
    /// The role-reordered adjacency rebuilt from the blocks.
    pub fn reassemble(&self) -> Mat {
        let top = hcat(&[&self.a11, &self.a12, &self.a13]);
        let mid = hcat(&[&self.a12.transpose(), &self.a22, &self.a23]);
        let bot = hcat(&[&self.a13.transpose(), &self.a23.transpose(), &self.a33]);
        hcat(&[&top.transpose(), &mid.transpose(), &bot.transpose()]).transpose()
    }
}

fn hcat(parts: &[&Mat]) -> Mat {
    let rows = parts[0].nrows();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut m = Mat::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        m.view_mut((0, c), (rows, p.ncols())).copy_from(*p);
        c += p.ncols();
    }
    m
}

pub fn partition_blocks(graph: &ClusterGraph, p: &NodePartition) -> Result<BlockSet> {
    p.validate(graph.n())?;
    let a = graph.adjacency();
    let one = &p.input_mixed;
    let (two, three): (&[usize], &[usize]) =
        if p.layout() == Layout::Case1 { (&p.measured_only, &[]) } else { (&p.outputs, &p.measured_only) };
    Ok(BlockSet {
        a11: select(a, one, one),
        a12: select(a, one, two),
        a13: select(a, one, three),
        a22: select(a, two, two),
        a23: select(a, two, three),
        a33: select(a, three, three),
        order: p.order(),
    })
}

/// Graph together with the Bogoliubov matrix that prepares it:
/// x_r = Re U x_s, y_r = Re U y_s.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub graph: ClusterGraph,
    pub re_u: Mat,
    pub orthogonal_freedom: Mat,
}

impl ClusterModel {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn adjacency(&self) -> &Mat {
        self.graph.adjacency()
    }

    /// ‖(Re U)ᵀ (I + A²) Re U − I‖.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.n();
        let a = self.adjacency();
        let g = Mat::identity(n, n) + a * a;
        max_abs_diff(&(self.re_u.transpose() * g * &self.re_u), &Mat::identity(n, n))
    }

    /// Symplectic map from squeezed oscillators (x_s, y_s) to the cluster
    /// quadratures (X, Y): X = Re U x_s − A Re U y_s, Y = A Re U x_s + Re U y_s.
    pub fn preparation_symplectic(&self) -> Mat {
        let a = self.adjacency();
        let ar = a * &self.re_u;
        block2(&self.re_u, &(-&ar), &ar, &self.re_u)
    }
}

/// Re U = (I + A²)^(−1/2) · O, with O = I unless supplied.
pub fn build_cluster(graph: &ClusterGraph, orthogonal_freedom: Option<&Mat>) -> Result<ClusterModel> {
    let n = graph.n();
    let a = graph.adjacency();
    let o = match orthogonal_freedom {
        None => Mat::identity(n, n),
        Some(o) => {
            if o.shape() != (n, n) {
                return Err(OwqcError::DimensionMismatch(format!(
                    "orthogonal freedom is {}x{}, graph has {n} nodes",
                    o.nrows(),
                    o.ncols()
                )));
            }
            let res = max_abs_diff(&(o.transpose() * o), &Mat::identity(n, n));
            if res > 1e-9 {
                return Err(OwqcError::NotOrthogonal(res));
            }
            o.clone()
        }
    };
    let g = Mat::identity(n, n) + a * a;
    let re_u = inv_sqrt_posdef(&g)? * o;
    Ok(ClusterModel {
        graph: graph.clone(),
        re_u,
        orthogonal_freedom: orthogonal_freedom.cloned().unwrap_or_else(|| Mat::identity(n, n)),
    })
}

/// Matrix taking y_s to the nullifiers N = (A² + I) Re U y_s.
pub fn nullifier_map(model: &ClusterModel) -> Mat {
    let n = model.n();
    let a = model.adjacency();
    (a * a + Mat::identity(n, n)) * &model.re_u
}
