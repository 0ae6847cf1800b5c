//! Simple connected unweighted undirected graphs: construction, Laplacians,
//! random generators and k-nearest-neighbor graphs.

use ndarray::{Array2, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A simple connected unweighted undirected graph.
///
/// Edges are stored in canonical `(i, j)` form with `i < j`, deduplicated and
/// sorted, together with per-node sorted adjacency lists. The structure is
/// immutable after construction, so it can be shared freely across solver
/// runs.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Build a graph from an edge list.
    ///
    /// Pairs may appear in either order and may be duplicated; they are
    /// canonicalized and deduplicated. Self-loops, out-of-range indices and
    /// disconnected inputs are rejected.
    pub fn from_edges(n: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(a, b) in edge_list {
            if a >= n {
                return Err(Error::IndexOutOfRange { index: a, n });
            }
            if b >= n {
                return Err(Error::IndexOutOfRange { index: b, n });
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        edges.dedup();

        let comps = component_count(n, &edges);
        if comps != 1 {
            return Err(Error::Disconnected { components: comps });
        }

        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let degrees = neighbors.iter().map(Vec::len).collect();

        Ok(Self { n, edges, neighbors, degrees })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list, each edge once with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Trace of the Laplacian, Tr(L) = sum of degrees = 2|E|.
    pub fn laplacian_trace(&self) -> f64 {
        self.degrees.iter().sum::<usize>() as f64
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for &(i, j) in &self.edges {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
        a
    }

    /// Dense combinatorial Laplacian L = D - A.
    pub fn laplacian_dense(&self) -> Array2<f64> {
        let mut l = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            l[[i, i]] = self.degrees[i] as f64;
        }
        for &(i, j) in &self.edges {
            l[[i, j]] = -1.0;
            l[[j, i]] = -1.0;
        }
        l
    }

    /// True by construction; kept so callers can assert the invariant.
    pub fn is_connected(&self) -> bool {
        component_count(self.n, &self.edges) == 1
    }

    /// Per-node connected-component labels (all zero for a valid graph).
    pub fn components(&self) -> Vec<usize> {
        component_labels(self.n, &self.edges)
    }
}

/// BFS component labeling over a raw edge list. Labels are assigned in order
/// of first discovery starting from node 0.
pub fn component_labels(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in edges {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

/// Number of connected components of a raw edge list.
pub fn component_count(n: usize, edges: &[(usize, usize)]) -> usize {
    component_labels(n, edges).into_iter().max().map_or(0, |m| m + 1)
}

pub fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    component_count(n, edges) == 1
}

/// Repeatedly add one uniformly random edge between the two largest
/// components until the edge list is connected. Returns the number of edges
/// added. Used by the random generators and by the CLI's `--repair` path for
/// external edge lists.
pub fn repair_connectivity(
    n: usize,
    edges: &mut Vec<(usize, usize)>,
    rng: &mut impl Rng,
) -> usize {
    let mut added = 0;
    loop {
        let labels = component_labels(n, edges);
        let comps = labels.iter().max().map_or(0, |m| m + 1);
        if comps <= 1 {
            return added;
        }
        let mut sizes = vec![0usize; comps];
        for &l in &labels {
            sizes[l] += 1;
        }
        let mut order: Vec<usize> = (0..comps).collect();
        order.sort_by_key(|&c| std::cmp::Reverse(sizes[c]));
        let (ca, cb) = (order[0], order[1]);
        let pick = |rng: &mut dyn RngCore, comp: usize, labels: &[usize]| {
            let members: Vec<usize> =
                (0..n).filter(|&i| labels[i] == comp).collect();
            members[rng.random_range(0..members.len())]
        };
        let a = pick(rng, ca, &labels);
        let b = pick(rng, cb, &labels);
        edges.push((a.min(b), a.max(b)));
        added += 1;
    }
}

/// A random community graph together with its ground-truth labels.
#[derive(Clone, Debug)]
pub struct PlantedPartition {
    pub graph: Graph,
    /// Community index (0-based) of each node.
    pub labels: Vec<usize>,
    /// Number of edges added by connectivity repair.
    pub repair_edges: usize,
}

impl PlantedPartition {
    /// Edges whose endpoints lie in different planted communities.
    pub fn inter_community_edges(&self) -> Vec<(usize, usize)> {
        self.graph
            .edges()
            .iter()
            .copied()
            .filter(|&(i, j)| self.labels[i] != self.labels[j])
            .collect()
    }
}

/// Sample a planted-partition graph: node pairs inside a community are
/// connected independently with probability `p`, pairs across communities
/// with probability `q`. A disconnected sample is repaired by bridging the
/// two largest components with random edges.
pub fn planted_partition(
    sizes: &[usize],
    p: f64,
    q: f64,
    seed: u64,
) -> Result<PlantedPartition> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidParameter(
            "community sizes must be nonempty and positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) || q > p {
        return Err(Error::ProbabilityOutOfRange { p, q });
    }
    let n: usize = sizes.iter().sum();
    let mut labels = Vec::with_capacity(n);
    for (c, &s) in sizes.iter().enumerate() {
        labels.extend(std::iter::repeat_n(c, s));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let prob = if labels[i] == labels[j] { p } else { q };
            if rng.random::<f64>() < prob {
                edges.push((i, j));
            }
        }
    }
    let repair_edges = repair_connectivity(n, &mut edges, &mut rng);
    let graph = Graph::from_edges(n, &edges)?;
    Ok(PlantedPartition { graph, labels, repair_edges })
}

/// Symmetrized k-nearest-neighbor graph on row features under Euclidean
/// distance: edge (i, j) is present iff j is among i's k nearest or i among
/// j's. Distance ties break toward the smaller node index. A disconnected
/// result is repaired deterministically by joining the closest feature pair
/// across the two largest components.
pub fn knn_graph(features: ArrayView2<'_, f64>, k: usize) -> Result<Graph> {
    let n = features.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n <= k {
        return Err(Error::InvalidParameter(format!(
            "need more than k={k} points, got {n}"
        )));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("features must be finite".into()));
    }

    let dist2 = |a: usize, b: usize| -> f64 {
        let ra = features.row(a);
        let rb = features.row(b);
        ra.iter().zip(rb.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
    };

    let mut max_d2 = 0.0f64;
    let mut edges = Vec::new();
    for i in 0..n {
        let mut cand: Vec<(f64, usize)> =
            (0..n).filter(|&j| j != i).map(|j| (dist2(i, j), j)).collect();
        cand.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for &(d2, j) in cand.iter().take(k) {
            max_d2 = max_d2.max(d2);
            edges.push((i.min(j), i.max(j)));
        }
    }
    if max_d2 == 0.0 {
        return Err(Error::DegenerateFeatures);
    }
    edges.sort_unstable();
    edges.dedup();

    // Deterministic connectivity repair: closest cross-component pair.
    loop {
        let labels = component_labels(n, &edges);
        let comps = labels.iter().max().map_or(0, |m| m + 1);
        if comps <= 1 {
            break;
        }
        let mut sizes = vec![0usize; comps];
        for &l in &labels {
            sizes[l] += 1;
        }
        let mut order: Vec<usize> = (0..comps).collect();
        order.sort_by_key(|&c| std::cmp::Reverse(sizes[c]));
        let (ca, cb) = (order[0], order[1]);
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| labels[i] == ca) {
            for j in (0..n).filter(|&j| labels[j] == cb) {
                let d2 = dist2(i, j);
                let key = (d2, i.min(j), i.max(j));
                if best.is_none_or(|(bd, bi, bj)| key < (bd, bi, bj)) {
                    best = Some(key);
                }
            }
        }
        let (_, i, j) = best.expect("both components are nonempty");
        edges.push((i, j));
        edges.sort_unstable();
        edges.dedup();
    }

    Graph::from_edges(n, &edges)
}
