//! Interaction graphs: generation, diagnostics and edge-list files.

use std::collections::{BTreeMap, VecDeque};
use std::io::{self, BufRead, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected simple graph in compressed adjacency form. Neighbour lists are
/// sorted and the graph is immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SocialGraph {
    offsets: Vec<usize>,
    neighbours: Vec<u32>,
}

impl SocialGraph {
    /// Builds a graph from undirected edges. Self-loops, duplicates and
    /// out-of-range endpoints are rejected.
    pub fn from_edges<I>(nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut lists: Vec<Vec<u32>> = vec![Vec::new(); nodes];
        for (a, b) in edges {
            if a >= nodes || b >= nodes {
                return Err(Error::Network(format!(
                    "edge ({a}, {b}) out of range for {nodes} nodes"
                )));
            }
            if a == b {
                return Err(Error::Network(format!("self-loop at node {a}")));
            }
            lists[a].push(b as u32);
            lists[b].push(a as u32);
        }
        for (i, list) in lists.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(Error::Network(format!("duplicate edge ({i}, {})", w[0])));
            }
        }
        Ok(Self::from_sorted_lists(lists))
    }

    fn from_sorted_lists(lists: Vec<Vec<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut neighbours = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for list in lists {
            neighbours.extend_from_slice(&list);
            offsets.push(neighbours.len());
        }
        SocialGraph {
            offsets,
            neighbours,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.neighbours.len() / 2
    }

    #[inline]
    pub fn neighbours(&self, node: usize) -> &[u32] {
        &self.neighbours[self.offsets[node]..self.offsets[node + 1]]
    }

    #[inline]
    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbours(a).binary_search(&(b as u32)).is_ok()
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |i| {
            self.neighbours(i)
                .iter()
                .map(|&j| j as usize)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.node_count() as f64
    }

    /// Checks symmetry, absence of self-loops and of parallel edges.
    pub fn is_simple_undirected(&self) -> bool {
        (0..self.node_count()).all(|i| {
            let ns = self.neighbours(i);
            ns.windows(2).all(|w| w[0] < w[1])
                && ns
                    .iter()
                    .all(|&j| j as usize != i && self.has_edge(j as usize, i))
        })
    }

    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# nodes {}", self.node_count())?;
        for (i, j) in self.edges() {
            writeln!(w, "{i} {j}")?;
        }
        Ok(())
    }

    /// Reads `i j` lines. Blank lines and `#` comments are skipped; a
    /// `# nodes N` header fixes the node count, otherwise it is the largest
    /// index plus one.
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut declared = None;
        let mut edges = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(n) = comment.trim().strip_prefix("nodes") {
                    let n = n.trim().parse::<usize>().map_err(|e| Error::EdgeList {
                        line: line_no,
                        reason: format!("bad node count: {e}"),
                    })?;
                    declared = Some(n);
                }
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let mut next = || -> Result<usize> {
                let tok = parts.next().ok_or_else(|| Error::EdgeList {
                    line: line_no,
                    reason: "expected two node indices".into(),
                })?;
                tok.parse().map_err(|e| Error::EdgeList {
                    line: line_no,
                    reason: format!("bad node index {tok:?}: {e}"),
                })
            };
            let (a, b) = (next()?, next()?);
            if parts.next().is_some() {
                return Err(Error::EdgeList {
                    line: line_no,
                    reason: "trailing fields".into(),
                });
            }
            edges.push((a, b));
        }
        let inferred = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(0);
        let nodes = declared.unwrap_or(inferred);
        SocialGraph::from_edges(nodes, edges)
    }
}

/// Holme-Kim growth parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkParams {
    /// Final node count.
    pub nodes: usize,
    /// Edges attached per new node.
    pub edges_per_node: usize,
    /// Expected number of those edges created by triad formation.
    pub triad_edges: f64,
    /// Size of the complete seed graph.
    pub seed_clique: usize,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            nodes: 1000,
            edges_per_node: 6,
            triad_edges: 5.0,
            seed_clique: 13,
        }
    }
}

impl NetworkParams {
    pub fn with_nodes(nodes: usize) -> Self {
        NetworkParams {
            nodes,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let NetworkParams {
            nodes,
            edges_per_node: m,
            triad_edges: mt,
            seed_clique: n0,
        } = *self;
        if m < 1 {
            return Err(Error::Network("edges_per_node must be >= 1".into()));
        }
        if n0 < m {
            return Err(Error::Network(format!(
                "seed_clique ({n0}) must be >= edges_per_node ({m})"
            )));
        }
        if !(0.0..=m as f64).contains(&mt) {
            return Err(Error::Network(format!(
                "triad_edges ({mt}) must lie in [0, {m}]"
            )));
        }
        if nodes < n0 {
            return Err(Error::Network(format!(
                "nodes ({nodes}) must be >= seed_clique ({n0})"
            )));
        }
        if nodes < 2 {
            return Err(Error::Network("need at least 2 nodes".into()));
        }
        Ok(())
    }

    /// `C(n0, 2) + (n - n0) * m`.
    pub fn expected_edges(&self) -> usize {
        let n0 = self.seed_clique;
        n0 * (n0 - 1) / 2 + (self.nodes - n0) * self.edges_per_node
    }
}

/// Holme-Kim growth: a complete seed graph, then each new node attaches
/// `m` edges. The first is always preferential attachment; each later edge
/// is a triad-formation step with probability `m_t / (m - 1)` (capped at 1),
/// so a new node makes `m_t` triad edges on average, closing a triangle
/// through a neighbour of the last preferentially attached target. When no
/// triad candidate is left the edge falls back to preferential attachment.
/// Self-loops and duplicates are redrawn.
pub fn generate_holme_kim<R: Rng + ?Sized>(
    params: &NetworkParams,
    rng: &mut R,
) -> Result<SocialGraph> {
    params.validate()?;
    let n = params.nodes;
    let m = params.edges_per_node;
    let n0 = params.seed_clique;
    let triad_prob = if m > 1 {
        (params.triad_edges / (m - 1) as f64).min(1.0)
    } else {
        0.0
    };

    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    // one entry per edge endpoint, so a uniform pick is degree-proportional
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * params.expected_edges());
    for i in 0..n0 {
        for j in (i + 1)..n0 {
            adj[i].push(j as u32);
            adj[j].push(i as u32);
            endpoints.push(i as u32);
            endpoints.push(j as u32);
        }
    }

    let mut candidates = Vec::new();
    for v in n0..n {
        let mut anchor: Option<u32> = None;
        for e in 0..m {
            let mut target = None;
            if e > 0 && rng.random::<f64>() < triad_prob {
                if let Some(a) = anchor {
                    candidates.clear();
                    candidates.extend(
                        adj[a as usize]
                            .iter()
                            .copied()
                            .filter(|&u| u as usize != v && !adj[v].contains(&u)),
                    );
                    if !candidates.is_empty() {
                        target = Some(candidates[rng.random_range(0..candidates.len())]);
                    }
                }
            }
            let t = match target {
                Some(t) => t,
                None => loop {
                    let t = endpoints[rng.random_range(0..endpoints.len())];
                    if t as usize != v && !adj[v].contains(&t) {
                        anchor = Some(t);
                        break t;
                    }
                },
            };
            adj[v].push(t);
            adj[t as usize].push(v as u32);
            endpoints.push(t);
        }
        endpoints.extend(std::iter::repeat_n(v as u32, m));
    }

    for list in &mut adj {
        list.sort_unstable();
    }
    Ok(SocialGraph::from_sorted_lists(adj))
}

/// G(n, p): every unordered pair linked independently with probability `p`.
/// Pairs are visited in `(i, j)`, `i < j` lexicographic order.
pub fn generate_erdos_renyi<R: Rng + ?Sized>(
    nodes: usize,
    edge_prob: f64,
    rng: &mut R,
) -> Result<SocialGraph> {
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::Network(format!(
            "edge probability {edge_prob} outside [0, 1]"
        )));
    }
    if nodes < 2 {
        return Err(Error::Network("need at least 2 nodes".into()));
    }
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); nodes];
    for i in 0..nodes {
        for j in (i + 1)..nodes {
            if rng.random::<f64>() < edge_prob {
                adj[i].push(j as u32);
                adj[j].push(i as u32);
            }
        }
    }
    // pairs are visited in increasing order, so lists are already sorted
    Ok(SocialGraph::from_sorted_lists(adj))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub edges: usize,
    pub mean_degree: f64,
    pub max_degree: usize,
    /// `3 * triangles / connected triples`.
    pub global_clustering: f64,
    /// Mean shortest-path length over ordered pairs in the largest component.
    pub characteristic_path_length: f64,
    pub connected: bool,
    pub largest_component: usize,
    /// `degree -> count`, ascending.
    pub degree_histogram: BTreeMap<usize, usize>,
}

impl GraphStats {
    pub fn write_degree_histogram_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["degree", "count"])
            .map_err(io::Error::from)?;
        for (degree, count) in &self.degree_histogram {
            out.serialize((degree, count)).map_err(io::Error::from)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn graph_stats(graph: &SocialGraph) -> Result<GraphStats> {
    let n = graph.node_count();
    if n == 0 || graph.edge_count() == 0 {
        return Err(Error::EmptyGraph(format!(
            "graph with {n} nodes has no edges"
        )));
    }

    let mut degree_histogram = BTreeMap::new();
    for i in 0..n {
        *degree_histogram.entry(graph.degree(i)).or_insert(0) += 1;
    }

    let global_clustering = transitivity(graph);

    let component = largest_component(graph);
    let in_component = {
        let mut mask = vec![false; n];
        for &i in &component {
            mask[i] = true;
        }
        mask
    };
    let total: u64 = component
        .par_iter()
        .map(|&source| bfs_distance_sum(graph, source, &in_component))
        .sum();
    let pairs = component.len() as u64 * (component.len() as u64 - 1);
    let characteristic_path_length = if pairs == 0 {
        0.0
    } else {
        total as f64 / pairs as f64
    };

    Ok(GraphStats {
        nodes: n,
        edges: graph.edge_count(),
        mean_degree: graph.mean_degree(),
        max_degree: (0..n).map(|i| graph.degree(i)).max().unwrap_or(0),
        global_clustering,
        characteristic_path_length,
        connected: component.len() == n,
        largest_component: component.len(),
        degree_histogram,
    })
}

fn transitivity(graph: &SocialGraph) -> f64 {
    let mut triangles = 0u64;
    for (i, j) in graph.edges() {
        // count k > j adjacent to both, so each triangle is seen once
        let (a, b) = (graph.neighbours(i), graph.neighbours(j));
        let (mut x, mut y) = (0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    if a[x] as usize > j {
                        triangles += 1;
                    }
                    x += 1;
                    y += 1;
                }
            }
        }
    }
    let triples: u64 = (0..graph.node_count())
        .map(|i| {
            let d = graph.degree(i) as u64;
            d * d.saturating_sub(1) / 2
        })
        .sum();
    if triples == 0 {
        0.0
    } else {
        3.0 * triangles as f64 / triples as f64
    }
}

fn largest_component(graph: &SocialGraph) -> Vec<usize> {
    let n = graph.node_count();
    let mut seen = vec![false; n];
    let mut best = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut members = vec![start];
        seen[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &w in graph.neighbours(u) {
                let w = w as usize;
                if !seen[w] {
                    seen[w] = true;
                    members.push(w);
                    queue.push_back(w);
                }
            }
        }
        if members.len() > best.len() {
            best = members;
        }
    }
    best.sort_unstable();
    best
}

fn bfs_distance_sum(graph: &SocialGraph, source: usize, in_component: &[bool]) -> u64 {
    let mut dist = vec![u32::MAX; graph.node_count()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    let mut total = 0u64;
    while let Some(u) = queue.pop_front() {
        total += dist[u] as u64;
        for &w in graph.neighbours(u) {
            let w = w as usize;
            if dist[w] == u32::MAX && in_component[w] {
                dist[w] = dist[u] + 1;
                queue.push_back(w);
            }
        }
    }
    total
}
