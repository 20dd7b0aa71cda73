//! Unweighted simple graphs: named families, random G(n, M) sampling,
//! brute-force isomorphism-free enumeration, hop distances and the square
//! graph.

use std::collections::{HashSet, VecDeque};

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Unordered node pair, always stored with `0 < 1`.
pub type Edge = (usize, usize);

/// Rejection budget for connected G(n, M) samples.
pub const ER_MAX_ATTEMPTS: usize = 10_000;

/// Largest node count accepted by [`enumerate_connected_graphs`].
pub const ENUMERATION_MAX_NODES: usize = 6;

/// Undirected simple graph on nodes `0..n`.
///
/// Edges are normalized to `(i, j)` with `i < j` and kept sorted, so two
/// graphs with the same edge set compare equal and [`Graph::edge_index`] is a
/// binary search.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("a graph needs at least one node".into()));
        }
        let mut normalized = Vec::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            normalized.push(normalize(i, j));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Graph { n, edges: normalized })
    }

    /// Graph with no edges.
    pub fn empty(n: usize) -> Result<Self> {
        Graph::new(n, std::iter::empty())
    }

    /// Complete graph `K_n`. Panics if `n == 0`.
    pub fn complete(n: usize) -> Self {
        assert!(n >= 1, "complete graph needs n >= 1");
        Graph {
            n,
            edges: (0..n).tuple_combinations().collect(),
        }
    }

    /// Star `K(1, m)`: node 0 is the hub.
    pub fn star(m: usize) -> Self {
        assert!(m >= 1, "star needs at least one leaf");
        Graph {
            n: m + 1,
            edges: (1..=m).map(|i| (0, i)).collect(),
        }
    }

    /// Complete bipartite `K(l, m)` with parts `0..l` and `l..l+m`.
    pub fn complete_bipartite(l: usize, m: usize) -> Self {
        assert!(l >= 1 && m >= 1, "both parts must be nonempty");
        Graph {
            n: l + m,
            edges: (0..l).cartesian_product(l..l + m).collect(),
        }
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidArgument(format!("cycle needs n >= 3, got {n}")));
        }
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self> {
        Graph::new(n, (1..n).map(|i| (i - 1, i)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Position of edge `{i, j}` in [`Graph::edges`].
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.binary_search(&normalize(i, j)).ok()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_index(i, j).is_some()
    }

    pub fn density(&self) -> f64 {
        let max = max_edges(self.n);
        if max == 0 {
            1.0
        } else {
            self.edges.len() as f64 / max as f64
        }
    }

    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// BFS hop counts from `source`; `None` for unreachable nodes.
    pub fn distances_from(&self, source: usize) -> Vec<Option<usize>> {
        bfs(&self.adjacency_lists(), source)
    }

    pub fn is_connected(&self) -> bool {
        self.distances_from(0).iter().all(Option::is_some)
    }

    /// Largest shortest-path hop count; `None` when disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let adj = self.adjacency_lists();
        let mut diam = 0;
        for s in 0..self.n {
            for d in bfs(&adj, s) {
                diam = diam.max(d?);
            }
        }
        Some(diam)
    }

    /// Square graph: `(i, j)` is an edge iff `i` and `j` are at hop distance
    /// 1 or 2 in `self`.
    pub fn square(&self) -> Graph {
        let adj = self.adjacency_lists();
        let mut edges = Vec::new();
        for i in 0..self.n {
            let mut near: Vec<usize> = adj[i]
                .iter()
                .flat_map(|&k| std::iter::once(k).chain(adj[k].iter().copied()))
                .filter(|&j| j > i)
                .collect();
            near.sort_unstable();
            near.dedup();
            edges.extend(near.into_iter().map(|j| (i, j)));
        }
        Graph { n: self.n, edges }
    }

    /// Connected uniform G(n, M) sample by rejection, deterministic in `seed`.
    pub fn erdos_renyi(n: usize, edge_count: usize, seed: u64) -> Result<Graph> {
        let max = max_edges(n);
        if n == 0 || edge_count + 1 < n || edge_count > max {
            return Err(Error::Infeasible(format!(
                "{edge_count} edges cannot form a connected simple graph on {n} nodes"
            )));
        }
        let pairs: Vec<Edge> = (0..n).tuple_combinations().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..ER_MAX_ATTEMPTS {
            let picked = rand::seq::index::sample(&mut rng, max, edge_count);
            let g = Graph::new(n, picked.into_iter().map(|k| pairs[k]))?;
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(Error::ResamplingExhausted {
            attempts: ER_MAX_ATTEMPTS,
        })
    }

    /// Graph obtained by relabelling node `v` as `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: perm.len(),
            });
        }
        Graph::new(self.n, self.edges.iter().map(|&(i, j)| (perm[i], perm[j])))
    }
}

/// Number of node pairs, `n (n - 1) / 2`.
pub fn max_edges(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Edge count closest to `density * n (n - 1) / 2`.
pub fn edge_count_for_density(n: usize, density: f64) -> Result<usize> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Infeasible(format!("density {density} outside (0, 1]")));
    }
    let m = (density * max_edges(n) as f64).round() as usize;
    if m + 1 < n {
        return Err(Error::Infeasible(format!(
            "density {density} gives {m} edges, fewer than the {} needed to connect {n} nodes",
            n - 1
        )));
    }
    Ok(m)
}

fn normalize(i: usize, j: usize) -> Edge {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

fn bfs(adj: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = VecDeque::from([source]);
    dist[source] = Some(0);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap_or(0);
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// One representative per isomorphism class of connected graphs on `n`
/// nodes, ordered by edge count then canonical code.
///
/// Every edge subset is tested; isomorphic copies are rejected by the
/// canonical code (the minimum adjacency bit string over all `n!`
/// relabellings). The representative returned is the canonical labelling.
pub fn enumerate_connected_graphs(n: usize) -> Result<Vec<Graph>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    if n > ENUMERATION_MAX_NODES {
        return Err(Error::TooLarge(n));
    }
    let pairs: Vec<Edge> = (0..n).tuple_combinations().collect();
    let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let mut seen = HashSet::new();
    let mut codes = Vec::new();
    for mask in 0u32..(1u32 << pairs.len()) {
        let g = decode(n, &pairs, mask);
        if !g.is_connected() {
            continue;
        }
        let code = canonical_code(&g, &pairs, &perms);
        if seen.insert(code) {
            codes.push(code);
        }
    }
    codes.sort_unstable_by_key(|&c| (c.count_ones(), c));
    Ok(codes.into_iter().map(|c| decode(n, &pairs, c)).collect())
}

fn decode(n: usize, pairs: &[Edge], mask: u32) -> Graph {
    Graph {
        n,
        edges: pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &e)| e)
            .collect(),
    }
}

fn canonical_code(g: &Graph, pairs: &[Edge], perms: &[Vec<usize>]) -> u32 {
    let n = g.n;
    let mut adj = vec![false; n * n];
    for &(i, j) in &g.edges {
        adj[i * n + j] = true;
        adj[j * n + i] = true;
    }
    perms
        .iter()
        .map(|p| {
            pairs
                .iter()
                .enumerate()
                .filter(|(_, &(i, j))| adj[p[i] * n + p[j]])
                .fold(0u32, |acc, (k, _)| acc | 1 << k)
        })
        .min()
        .unwrap_or(0)
}
