//! Sparse undirected graphs, symmetric normalization, K-hop feature
//! propagation, neighborhood sampling, and a stochastic block model generator
//! for fixtures.

use ndarray::{Array1, Array2};
use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec;
use crate::seeds::{domain, stream_rng};

/// Undirected node-labelled graph with dense node features.
///
/// Edges are stored once with `u < v`, deduplicated, self-loop free.
/// Labels live in a global class space shared across tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGraph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: Array2<f64>,
    labels: Vec<usize>,
}

impl SparseGraph {
    /// Build a graph, normalizing the edge list: endpoints are ordered,
    /// duplicates and self-loops dropped, directed inputs symmetrized.
    pub fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: Array2<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if features.nrows() != num_nodes {
            return Err(Error::Shape(format!(
                "feature rows {} != num_nodes {}",
                features.nrows(),
                num_nodes
            )));
        }
        if labels.len() != num_nodes {
            return Err(Error::Shape(format!(
                "label count {} != num_nodes {}",
                labels.len(),
                num_nodes
            )));
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Invalid(format!(
                    "edge ({u},{v}) endpoint out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                continue;
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        normalized.dedup();
        Ok(Self {
            num_nodes,
            edges: normalized,
            features,
            labels,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Deduplicated undirected edges with `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Distinct labels, ascending.
    pub fn class_ids(&self) -> Vec<usize> {
        let mut ids = self.labels.clone();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Subgraph induced on `nodes` (distinct ids), relabelled `0..nodes.len()`
    /// in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Result<SparseGraph> {
        let mut new_id = vec![usize::MAX; self.num_nodes];
        for (new, &old) in nodes.iter().enumerate() {
            if old >= self.num_nodes {
                return Err(Error::Invalid(format!("node {old} out of range")));
            }
            if new_id[old] != usize::MAX {
                return Err(Error::Invalid(format!("node {old} listed twice")));
            }
            new_id[old] = new;
        }
        let mut edges = Vec::new();
        for &(u, v) in &self.edges {
            let (nu, nv) = (new_id[u], new_id[v]);
            if nu != usize::MAX && nv != usize::MAX {
                edges.push((nu, nv));
            }
        }
        let mut features = Array2::zeros((nodes.len(), self.feature_dim()));
        let mut labels = Vec::with_capacity(nodes.len());
        for (new, &old) in nodes.iter().enumerate() {
            features.row_mut(new).assign(&self.features.row(old));
            labels.push(self.labels[old]);
        }
        SparseGraph::new(nodes.len(), edges, features, labels)
    }
}

/// Symmetric normalized adjacency with self-loops, in CSR form.
///
/// Entries are `1/sqrt(d_u d_v)` for each edge and `1/d_u` on the diagonal,
/// where `d` counts degree plus the self-loop.
#[derive(Debug, Clone)]
pub struct PropagationMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl PropagationMatrix {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Entry (i, j); zero when absent.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(pos) => self.values[lo + pos],
            Err(_) => 0.0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Sparse-dense product `S · X`, rows computed independently.
    fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        let cols = x.ncols();
        let rows = exec::map_indexed(self.n, |i| {
            let mut acc = vec![0.0f64; cols];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let w = self.values[k];
                let src = x.row(self.col_idx[k]);
                for (a, &s) in acc.iter_mut().zip(src.iter()) {
                    *a += w * s;
                }
            }
            acc
        });
        let mut out = Array2::zeros((self.n, cols));
        for (i, row) in rows.into_iter().enumerate() {
            out.row_mut(i).assign(&Array1::from_vec(row));
        }
        out
    }
}

/// Compute `S = D^{-1/2} (A + I) D^{-1/2}` with self-loop degrees.
/// Isolated nodes get a diagonal entry of exactly 1.
pub fn normalize_adjacency(graph: &SparseGraph) -> PropagationMatrix {
    let n = graph.num_nodes();
    let mut degree = vec![1.0f64; n]; // self-loop
    for &(u, v) in graph.edges() {
        degree[u] += 1.0;
        degree[v] += 1.0;
    }

    // Per-row column/value lists; the off-diagonal value is computed once per
    // edge (a single rounding of 1/sqrt(d_u d_v)), so the matrix is symmetric
    // to the bit.
    let mut cols: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut vals: Vec<Vec<f64>> = degree.iter().map(|d| vec![1.0 / d]).collect();
    for &(u, v) in graph.edges() {
        let w = 1.0 / (degree[u] * degree[v]).sqrt();
        cols[u].push(v);
        vals[u].push(w);
        cols[v].push(u);
        vals[v].push(w);
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for i in 0..n {
        let mut order: Vec<usize> = (0..cols[i].len()).collect();
        order.sort_unstable_by_key(|&k| cols[i][k]);
        for k in order {
            col_idx.push(cols[i][k]);
            values.push(vals[i][k]);
        }
        row_ptr.push(col_idx.len());
    }
    PropagationMatrix {
        n,
        row_ptr,
        col_idx,
        values,
    }
}

/// K-hop propagation `S^k X`; `k = 0` returns `X` unchanged.
pub fn propagate(s: &PropagationMatrix, x: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
    if x.nrows() != s.num_nodes() {
        return Err(Error::Shape(format!(
            "feature rows {} != matrix size {}",
            x.nrows(),
            s.num_nodes()
        )));
    }
    let mut out = x.clone();
    for _ in 0..k {
        out = s.matmul(&out);
    }
    Ok(out)
}

/// Result of neighborhood sampling: an induced subgraph plus the positions of
/// the original seed nodes inside it, so their rows can be picked out after
/// propagation.
#[derive(Debug, Clone)]
pub struct SampledSubgraph {
    pub graph: SparseGraph,
    pub seed_positions: Vec<usize>,
}

/// Neighbor lists for repeated sampling from the same graph.
pub struct NeighborSampler<'g> {
    graph: &'g SparseGraph,
    neighbors: Vec<Vec<usize>>,
}

impl<'g> NeighborSampler<'g> {
    pub fn new(graph: &'g SparseGraph) -> Self {
        let mut neighbors = vec![Vec::new(); graph.num_nodes()];
        for &(u, v) in graph.edges() {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Self { graph, neighbors }
    }

    /// Expand `seeds` by up to `fanout` uniformly chosen neighbors per
    /// frontier node per hop (without replacement within a node's list), then
    /// return the induced subgraph. Deterministic given the RNG state.
    pub fn sample<R: Rng>(
        &self,
        seeds: &[usize],
        fanout: usize,
        hops: usize,
        rng: &mut R,
    ) -> Result<SampledSubgraph> {
        if fanout == 0 {
            return Err(Error::Invalid("fanout must be >= 1".into()));
        }
        if hops == 0 {
            return Err(Error::Invalid("hops must be >= 1".into()));
        }
        for &s in seeds {
            if s >= self.graph.num_nodes() {
                return Err(Error::Invalid(format!("seed node {s} out of range")));
            }
        }

        let mut selected = Vec::new();
        let mut in_set = vec![false; self.graph.num_nodes()];
        for &s in seeds {
            if !in_set[s] {
                in_set[s] = true;
                selected.push(s);
            }
        }
        let num_seeds = selected.len();
        let mut frontier: Vec<usize> = selected.clone();
        for _ in 0..hops {
            let mut next = Vec::new();
            for &node in &frontier {
                let list = &self.neighbors[node];
                let take = fanout.min(list.len());
                if take == 0 {
                    continue;
                }
                let picked = index_sample(rng, list.len(), take);
                for idx in picked {
                    let nb = list[idx];
                    if !in_set[nb] {
                        in_set[nb] = true;
                        selected.push(nb);
                        next.push(nb);
                    }
                }
            }
            frontier = next;
        }

        let graph = self.graph.induced(&selected)?;
        // Seeds were inserted first, so they occupy the leading positions.
        let seed_positions = (0..num_seeds).collect();
        Ok(SampledSubgraph {
            graph,
            seed_positions,
        })
    }
}

/// One-shot convenience wrapper around [`NeighborSampler`].
pub fn sample_neighborhood<R: Rng>(
    graph: &SparseGraph,
    seeds: &[usize],
    fanout: usize,
    hops: usize,
    rng: &mut R,
) -> Result<SampledSubgraph> {
    NeighborSampler::new(graph).sample(seeds, fanout, hops, rng)
}

/// Stochastic block model parameters for desk-scale fixtures.
#[derive(Debug, Clone)]
pub struct SbmParams {
    pub block_sizes: Vec<usize>,
    pub intra_prob: f64,
    pub inter_prob: f64,
    pub feature_dim: usize,
    /// Norm of the per-block mean offset added to standard-normal features.
    pub feature_center_scale: f64,
    pub seed: u64,
}

impl SbmParams {
    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.iter().any(|&b| b == 0) {
            return Err(Error::Invalid(
                "block_sizes must be non-empty with all > 0".into(),
            ));
        }
        for (name, p) in [
            ("intra_prob", self.intra_prob),
            ("inter_prob", self.inter_prob),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Invalid(format!("{name} must be in [0,1], got {p}")));
            }
        }
        if self.feature_dim == 0 {
            return Err(Error::Invalid("feature_dim must be >= 1".into()));
        }
        Ok(())
    }
}

/// Generate an SBM graph: node `i` in block `c` gets label `c`; features are
/// i.i.d. standard normal plus the block's mean vector. Deterministic given
/// the seed (block means drawn first, then edges, then feature noise).
pub fn generate_sbm(params: &SbmParams) -> Result<SparseGraph> {
    params.validate()?;
    let n: usize = params.block_sizes.iter().sum();
    let f = params.feature_dim;
    let mut block_of = Vec::with_capacity(n);
    for (b, &size) in params.block_sizes.iter().enumerate() {
        block_of.extend(std::iter::repeat(b).take(size));
    }

    let mut rng = stream_rng(params.seed, domain::SBM_STRUCTURE, 0);

    // Per-block mean directions, scaled to exactly feature_center_scale.
    let mut centers = Array2::<f64>::zeros((params.block_sizes.len(), f));
    for mut row in centers.rows_mut() {
        loop {
            for x in row.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for x in row.iter_mut() {
                    *x *= params.feature_center_scale / norm;
                }
                break;
            }
        }
    }

    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if block_of[u] == block_of[v] {
                params.intra_prob
            } else {
                params.inter_prob
            };
            if rng.random::<f64>() < p {
                edges.push((u, v));
            }
        }
    }

    let mut features = Array2::<f64>::zeros((n, f));
    for i in 0..n {
        let center = centers.row(block_of[i]);
        for (j, x) in features.row_mut(i).iter_mut().enumerate() {
            let noise: f64 = rng.sample(StandardNormal);
            *x = center[j] + noise;
        }
    }

    SparseGraph::new(n, edges, features, block_of)
}
