//! Cache-network graphs, publisher placement and static routing.
//!
//! Graphs are grown with Barabási–Albert preferential attachment from a
//! fully connected seed of `attach + 1` nodes. Publishers attach to the
//! nodes with the highest betweenness centrality and each owns a block of
//! content ranks. Every node routes a request for a content towards the
//! attachment node of its publisher along a BFS shortest path, picking the
//! lowest-id neighbour when several are equally close.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain};
use crate::{ContentId, NodeId, Result};

/// Default one-way delay of every link, in seconds.
pub const DEFAULT_HOP_DELAY: f64 = 0.010;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub delay: f64,
}

/// Undirected graph with per-edge delays. Neighbour lists are sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<(NodeId, f64)>>,
}

impl Graph {
    pub fn new(nodes: usize) -> Self {
        Self {
            adjacency: vec![Vec::new(); nodes],
        }
    }

    pub fn from_edges(nodes: usize, edges: &[Edge]) -> Result<Self> {
        let mut g = Self::new(nodes);
        for e in edges {
            g.add_edge(e.u, e.v, e.delay)?;
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId, delay: f64) -> Result<()> {
        let n = self.node_count();
        if u >= n || v >= n {
            return Err(domain(format!("edge {u}-{v} outside {n} nodes")));
        }
        if u == v {
            return Err(domain(format!("self-loop at node {u}")));
        }
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(domain(format!("edge {u}-{v} has invalid delay {delay}")));
        }
        if self.has_edge(u, v) {
            return Err(domain(format!("duplicate edge {u}-{v}")));
        }
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.adjacency[a];
            let at = list.partition_point(|&(x, _)| x < b);
            list.insert(at, (b, delay));
        }
        Ok(())
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency
            .get(u)
            .is_some_and(|l| l.binary_search_by_key(&v, |&(x, _)| x).is_ok())
    }

    pub fn edge_delay(&self, u: NodeId, v: NodeId) -> Option<f64> {
        let l = self.adjacency.get(u)?;
        l.binary_search_by_key(&v, |&(x, _)| x).ok().map(|i| l[i].1)
    }

    pub fn set_edge_delay(&mut self, u: NodeId, v: NodeId, delay: f64) -> Result<()> {
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(domain(format!("edge {u}-{v} has invalid delay {delay}")));
        }
        if !self.has_edge(u, v) {
            return Err(domain(format!("no edge {u}-{v}")));
        }
        for (a, b) in [(u, v), (v, u)] {
            for entry in &mut self.adjacency[a] {
                if entry.0 == b {
                    entry.1 = delay;
                }
            }
        }
        Ok(())
    }

    /// Neighbours of `u` in ascending id order.
    pub fn neighbors(&self, u: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[u].iter().map(|&(v, _)| v)
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adjacency[u].len()
    }

    /// Every edge once, with `u < v`, in lexicographic order.
    pub fn edges(&self) -> Vec<Edge> {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, l)| {
                l.iter()
                    .filter(move |&&(v, _)| u < v)
                    .map(move |&(v, delay)| Edge { u, v, delay })
            })
            .collect()
    }

    /// Hop distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::from([source]);
        dist[source] = Some(0);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("queued nodes are reached");
            for v in self.neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() == 0 || self.bfs_distances(0).iter().all(Option::is_some)
    }

    /// One `u v delay` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = String::new();
        for e in self.edges() {
            writeln!(s, "{} {} {}", e.u, e.v, e.delay).expect("write to string");
        }
        s
    }

    /// Parses `u v delay` lines; blank lines and `#` comments are skipped.
    /// The node count is one more than the largest id seen.
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<_> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                [u, v, d] => u
                    .parse()
                    .ok()
                    .zip(v.parse().ok())
                    .zip(d.parse().ok())
                    .map(|((u, v), delay)| Edge { u, v, delay }),
                _ => None,
            };
            edges.push(parsed.ok_or_else(|| {
                config(format!("edge list line {}: expected `u v delay`", i + 1))
            })?);
        }
        let nodes = edges.iter().map(|e| e.u.max(e.v) + 1).max().unwrap_or(0);
        Self::from_edges(nodes, &edges)
    }
}

/// Grows a preferential-attachment graph of `m` nodes; every node after the
/// seed clique links to `attach` distinct existing nodes chosen with
/// probability proportional to their degree.
pub fn generate_ba(m: usize, attach: usize, seed: u64) -> Result<Graph> {
    if attach < 1 || m <= attach {
        return Err(domain(format!(
            "need m > attach >= 1, got m = {m}, attach = {attach}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(m);
    // Each edge contributes both endpoints, so uniform draws from this list
    // are degree-proportional.
    let mut endpoints = Vec::with_capacity(2 * (attach * m));
    for u in 0..=attach {
        for v in u + 1..=attach {
            g.add_edge(u, v, DEFAULT_HOP_DELAY)?;
            endpoints.extend([u, v]);
        }
    }
    for new in attach + 1..m {
        let mut targets = BTreeSet::new();
        while targets.len() < attach {
            targets.insert(endpoints[rng.random_range(0..endpoints.len())]);
        }
        for t in targets {
            g.add_edge(new, t, DEFAULT_HOP_DELAY)?;
            endpoints.extend([new, t]);
        }
    }
    Ok(g)
}

/// Shortest-path betweenness of every node (Brandes). Each unordered pair
/// of endpoints counts once.
pub fn betweenness(graph: &Graph) -> Result<Vec<f64>> {
    if !graph.is_connected() {
        return Err(domain("betweenness needs a connected graph"));
    }
    let n = graph.node_count();
    let mut score = vec![0.0; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut delta = vec![0.0; n];
    let mut preds: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        sigma.fill(0.0);
        dist.fill(usize::MAX);
        delta.fill(0.0);
        preds.iter_mut().for_each(Vec::clear);
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for v in graph.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if dist[v] == dist[u] + 1 {
                    sigma[v] += sigma[u];
                    preds[v].push(u);
                }
            }
        }
        for &w in order.iter().rev() {
            for &u in &preds[w] {
                delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                score[w] += delta[w];
            }
        }
    }
    // Every pair was accumulated from both ends.
    score.iter_mut().for_each(|x| *x /= 2.0);
    Ok(score)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Publisher {
    /// 1-based publisher number.
    pub id: usize,
    pub attachment: NodeId,
    /// Number of contents owned.
    pub items: u32,
}

/// Nodes ordered by descending score, lowest id first among equals.
pub fn rank_by_score(scores: &[f64]) -> Vec<NodeId> {
    // Quantized so that float noise in equal scores does not decide ties.
    let key = |x: f64| (x * 1e9).round() as i64;
    let mut nodes: Vec<NodeId> = (0..scores.len()).collect();
    nodes.sort_by_key(|&u| (std::cmp::Reverse(key(scores[u])), u));
    nodes
}

/// Attaches `p` publishers, each owning `items` contents, to the `p`
/// highest-scoring nodes.
pub fn place_publishers(
    graph: &Graph,
    scores: &[f64],
    p: usize,
    items: u32,
) -> Result<Vec<Publisher>> {
    if scores.len() != graph.node_count() {
        return Err(domain("one score per node required"));
    }
    if p == 0 || p > graph.node_count() {
        return Err(domain(format!(
            "publisher count {p} must lie in 1..={}",
            graph.node_count()
        )));
    }
    if items == 0 {
        return Err(domain("publishers need at least one item"));
    }
    Ok(rank_by_score(scores)
        .into_iter()
        .take(p)
        .enumerate()
        .map(|(i, attachment)| Publisher {
            id: i + 1,
            attachment,
            items,
        })
        .collect())
}

/// Publisher (1-based) owning `rank` under contiguous blocks of `items`.
pub fn contiguous_owner(rank: ContentId, items: u32) -> usize {
    ((rank - 1) / items) as usize + 1
}

/// How content ranks are split among publishers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ContentMapping {
    /// Publisher `k` owns ranks `(k-1)*items+1 ..= k*items`.
    #[default]
    Contiguous,
    /// Ranks are shuffled with `seed` before being cut into blocks.
    Permuted { seed: u64 },
}

/// Per-publisher next hops towards the attachment node.
#[derive(Debug, Clone, PartialEq)]
pub struct Routing {
    /// `next_hop[p][u]`; `None` at the attachment node itself.
    next_hop: Vec<Vec<Option<NodeId>>>,
    hops: Vec<Vec<usize>>,
}

impl Routing {
    pub fn next_hop(&self, node: NodeId, publisher: usize) -> Option<NodeId> {
        self.next_hop[publisher - 1][node]
    }

    /// Hop count from `node` to the attachment node of `publisher`.
    pub fn hops(&self, node: NodeId, publisher: usize) -> usize {
        self.hops[publisher - 1][node]
    }
}

pub fn build_routing(graph: &Graph, publishers: &[Publisher]) -> Result<Routing> {
    let mut next_hop = Vec::with_capacity(publishers.len());
    let mut hops = Vec::with_capacity(publishers.len());
    for p in publishers {
        let dist = graph.bfs_distances(p.attachment);
        let dist: Vec<usize> = dist
            .into_iter()
            .enumerate()
            .map(|(u, d)| {
                d.ok_or_else(|| domain(format!("node {u} cannot reach publisher {}", p.id)))
            })
            .collect::<Result<_>>()?;
        let table = (0..graph.node_count())
            .map(|u| {
                if dist[u] == 0 {
                    None
                } else {
                    graph.neighbors(u).find(|&v| dist[v] + 1 == dist[u])
                }
            })
            .collect();
        next_hop.push(table);
        hops.push(dist);
    }
    Ok(Routing { next_hop, hops })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyParams {
    pub nodes: usize,
    pub attach: usize,
    pub publishers: usize,
    pub items_per_publisher: u32,
    pub seed: u64,
    /// One-way delay of every link, publisher links included, in seconds.
    pub hop_delay: f64,
    /// Per-edge delay overrides.
    pub edge_delays: Vec<Edge>,
    pub mapping: ContentMapping,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self {
            nodes: 30,
            attach: 2,
            publishers: 5,
            items_per_publisher: 1000,
            seed: 1,
            hop_delay: DEFAULT_HOP_DELAY,
            edge_delays: Vec::new(),
            mapping: ContentMapping::Contiguous,
        }
    }
}

impl TopologyParams {
    pub fn catalog_size(&self) -> u32 {
        self.items_per_publisher
            .saturating_mul(self.publishers as u32)
    }
}

/// A cache network ready for simulation. Immutable once built.
#[derive(Debug, Clone)]
pub struct Topology {
    graph: Graph,
    publishers: Vec<Publisher>,
    routing: Routing,
    /// Owning publisher of rank `r` at index `r - 1`.
    owner: Vec<u16>,
    publisher_delay: f64,
    seed: u64,
}

impl Topology {
    /// Grows a preferential-attachment graph; networks too small to grow
    /// (`nodes <= attach`) are a complete graph on `nodes` nodes.
    pub fn build(params: &TopologyParams) -> Result<Self> {
        let mut graph = if params.nodes <= params.attach {
            if params.nodes == 0 {
                return Err(config("a network needs at least one node"));
            }
            let mut g = Graph::new(params.nodes);
            for u in 0..params.nodes {
                for v in u + 1..params.nodes {
                    g.add_edge(u, v, params.hop_delay)?;
                }
            }
            g
        } else {
            generate_ba(params.nodes, params.attach, params.seed)?
        };
        for u in 0..graph.node_count() {
            let neighbors: Vec<_> = graph.neighbors(u).filter(|&v| v > u).collect();
            for v in neighbors {
                graph.set_edge_delay(u, v, params.hop_delay)?;
            }
        }
        for e in &params.edge_delays {
            graph.set_edge_delay(e.u, e.v, e.delay)?;
        }
        Self::from_graph(graph, params)
    }

    /// Places publishers and routes on an existing graph; `params.nodes`,
    /// `attach` and `edge_delays` are ignored.
    pub fn from_graph(graph: Graph, params: &TopologyParams) -> Result<Self> {
        if !(params.hop_delay >= 0.0 && params.hop_delay.is_finite()) {
            return Err(config(format!(
                "hop_delay must be >= 0, got {}",
                params.hop_delay
            )));
        }
        if params.publishers > u16::MAX as usize {
            return Err(config("too many publishers"));
        }
        let scores = betweenness(&graph)?;
        let publishers = place_publishers(
            &graph,
            &scores,
            params.publishers,
            params.items_per_publisher,
        )?;
        let routing = build_routing(&graph, &publishers)?;
        let catalog = params.catalog_size();
        let mut owner: Vec<u16> = (1..=catalog)
            .map(|r| contiguous_owner(r, params.items_per_publisher) as u16)
            .collect();
        if let ContentMapping::Permuted { seed } = params.mapping {
            owner.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        Ok(Self {
            graph,
            publishers,
            routing,
            owner,
            publisher_delay: params.hop_delay,
            seed: params.seed,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn publishers(&self) -> &[Publisher] {
        &self.publishers
    }

    pub fn routing(&self) -> &Routing {
        &self.routing
    }

    pub fn catalog_size(&self) -> u32 {
        self.owner.len() as u32
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Delay of the link between a publisher and its attachment node.
    pub fn publisher_delay(&self) -> f64 {
        self.publisher_delay
    }

    /// Publisher (1-based) owning `rank`.
    pub fn owner(&self, rank: ContentId) -> Result<usize> {
        rank.checked_sub(1)
            .and_then(|i| self.owner.get(i as usize))
            .map(|&p| p as usize)
            .ok_or_else(|| config(format!("content {rank} has no publisher")))
    }

    pub fn next_hop(&self, node: NodeId, rank: ContentId) -> Result<Option<NodeId>> {
        Ok(self.routing.next_hop(node, self.owner(rank)?))
    }

    /// Nodes a request for `rank` visits from `origin`, ending at the
    /// publisher's attachment node.
    pub fn path(&self, origin: NodeId, rank: ContentId) -> Result<Vec<NodeId>> {
        let p = self.owner(rank)?;
        let mut path = vec![origin];
        let mut u = origin;
        while let Some(v) = self.routing.next_hop(u, p) {
            path.push(v);
            u = v;
        }
        Ok(path)
    }

    /// Cumulative one-way delay from `path[0]` to each node on the path.
    pub fn cumulative_delays(&self, path: &[NodeId]) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(path.len());
        out.push(0.0);
        for w in path.windows(2) {
            acc += self
                .graph
                .edge_delay(w[0], w[1])
                .expect("path follows edges");
            out.push(acc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path_graph(n: usize) -> Graph {
        let edges: Vec<_> = (0..n - 1)
            .map(|u| Edge {
                u,
                v: u + 1,
                delay: 1.0,
            })
            .collect();
        Graph::from_edges(n, &edges).unwrap()
    }

    fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves)
            .map(|v| Edge {
                u: 0,
                v,
                delay: 1.0,
            })
            .collect();
        Graph::from_edges(leaves + 1, &edges).unwrap()
    }

    fn complete(n: usize) -> Graph {
        let mut g = Graph::new(n);
        for u in 0..n {
            for v in u + 1..n {
                g.add_edge(u, v, 1.0).unwrap();
            }
        }
        g
    }

    /// Betweenness by enumerating every shortest path of every pair.
    fn brute_betweenness(g: &Graph) -> Vec<f64> {
        fn paths(
            g: &Graph,
            dist: &[Option<usize>],
            u: NodeId,
            acc: &mut Vec<NodeId>,
            out: &mut Vec<Vec<NodeId>>,
        ) {
            // Walk back towards the source along decreasing distance.
            if dist[u] == Some(0) {
                out.push(acc.clone());
                return;
            }
            for v in g.neighbors(u) {
                if dist[v].map(|d| d + 1) == dist[u] {
                    acc.push(v);
                    paths(g, dist, v, acc, out);
                    acc.pop();
                }
            }
        }
        let n = g.node_count();
        let mut score = vec![0.0; n];
        for s in 0..n {
            let dist = g.bfs_distances(s);
            for t in s + 1..n {
                let mut all = Vec::new();
                paths(g, &dist, t, &mut vec![t], &mut all);
                for p in &all {
                    for &w in p {
                        if w != s && w != t {
                            score[w] += 1.0 / all.len() as f64;
                        }
                    }
                }
            }
        }
        score
    }

    #[test]
    fn ba_edge_count_and_clique() {
        let g = generate_ba(3, 2, 5).unwrap();
        assert_eq!(g, complete(3).with_delay(DEFAULT_HOP_DELAY));
        let g = generate_ba(100, 2, 5).unwrap();
        assert_eq!(g.node_count(), 100);
        assert_eq!(g.edge_count(), 197);
        assert!(g.is_connected());
        let degree_sum: usize = (0..100).map(|u| g.degree(u)).sum();
        assert_eq!(degree_sum, 2 * g.edge_count());
        assert!(generate_ba(2, 2, 0).is_err());
        assert!(generate_ba(5, 0, 0).is_err());
    }

    #[test]
    fn ba_is_heavy_tailed() {
        let g = generate_ba(1000, 2, 3).unwrap();
        let max = (0..1000).map(|u| g.degree(u)).max().unwrap();
        // Mean degree is about 4; preferential attachment grows hubs.
        assert!(max >= 30, "max degree {max}");
    }

    #[test]
    fn ba_deterministic_per_seed() {
        assert_eq!(
            generate_ba(50, 2, 9).unwrap(),
            generate_ba(50, 2, 9).unwrap()
        );
        assert_ne!(
            generate_ba(50, 2, 9).unwrap(),
            generate_ba(50, 2, 10).unwrap()
        );
    }

    #[test]
    fn betweenness_examples() {
        assert_eq!(betweenness(&path_graph(3)).unwrap(), vec![0.0, 1.0, 0.0]);
        let s = betweenness(&star(5)).unwrap();
        assert_eq!(s[0], 10.0);
        assert!(s[1..].iter().all(|&x| x == 0.0));
        assert!(betweenness(&complete(6)).unwrap().iter().all(|&x| x == 0.0));
        assert!(betweenness(&Graph::new(2)).is_err());
    }

    #[test]
    fn betweenness_matches_enumeration() {
        for seed in 0..5 {
            let g = generate_ba(25, 2, seed).unwrap();
            let fast = betweenness(&g).unwrap();
            let slow = brute_betweenness(&g);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn publishers_on_top_nodes() {
        let g = star(4);
        let scores = betweenness(&g).unwrap();
        let p = place_publishers(&g, &scores, 1, 10).unwrap();
        assert_eq!(p[0].attachment, 0);
        // Leaves tie at zero; lowest ids win.
        let p = place_publishers(&g, &scores, 3, 10).unwrap();
        assert_eq!(
            p.iter().map(|p| p.attachment).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert!(place_publishers(&g, &scores, 6, 10).is_err());
    }

    #[test]
    fn contiguous_ranks() {
        assert_eq!(contiguous_owner(1, 10_000), 1);
        assert_eq!(contiguous_owner(10_000, 10_000), 1);
        assert_eq!(contiguous_owner(10_001, 10_000), 2);
        let params = TopologyParams {
            nodes: 100,
            publishers: 5,
            items_per_publisher: 10_000,
            ..TopologyParams::default()
        };
        let t = Topology::build(&params).unwrap();
        assert_eq!(t.catalog_size(), 50_000);
        assert_eq!(t.owner(10_001).unwrap(), 2);
        assert!(t.owner(50_001).is_err());
        assert!(t.owner(0).is_err());
    }

    #[test]
    fn permuted_mapping_keeps_block_sizes() {
        let params = TopologyParams {
            mapping: ContentMapping::Permuted { seed: 4 },
            items_per_publisher: 100,
            ..TopologyParams::default()
        };
        let t = Topology::build(&params).unwrap();
        let mut counts = [0; 5];
        for r in 1..=500 {
            counts[t.owner(r).unwrap() - 1] += 1;
        }
        assert_eq!(counts, [100; 5]);
        assert_ne!(
            (1..=100)
                .map(|r| t.owner(r).unwrap())
                .collect::<BTreeSet<_>>()
                .len(),
            1
        );
    }

    #[test]
    fn routing_on_path() {
        let g = path_graph(3);
        let pubs = vec![Publisher {
            id: 1,
            attachment: 2,
            items: 1,
        }];
        let r = build_routing(&g, &pubs).unwrap();
        assert_eq!(r.next_hop(0, 1), Some(1));
        assert_eq!(r.next_hop(1, 1), Some(2));
        assert_eq!(r.next_hop(2, 1), None);
    }

    #[test]
    fn routing_prefers_lowest_id() {
        // Square 0-1-3-2-0: node 0 reaches 3 via 1 or 2.
        let mut g = Graph::new(4);
        for (u, v) in [(0, 1), (1, 3), (3, 2), (2, 0)] {
            g.add_edge(u, v, 1.0).unwrap();
        }
        let pubs = vec![Publisher {
            id: 1,
            attachment: 3,
            items: 1,
        }];
        assert_eq!(build_routing(&g, &pubs).unwrap().next_hop(0, 1), Some(1));
    }

    #[test]
    fn edge_list_round_trip() {
        let mut g = generate_ba(12, 2, 1).unwrap();
        g.set_edge_delay(0, 1, 0.25).unwrap();
        let text = g.to_edge_list();
        assert_eq!(Graph::from_edge_list(&text).unwrap(), g);
        assert!(Graph::from_edge_list("0 1").is_err());
        assert!(Graph::from_edge_list("# comment\n\n0 1 0.5\n")
            .unwrap()
            .has_edge(1, 0));
    }

    #[test]
    fn edge_delay_overrides() {
        let mut params = TopologyParams::default();
        let g = generate_ba(params.nodes, params.attach, params.seed).unwrap();
        let e = g.edges()[3];
        params.edge_delays = vec![Edge { delay: 0.5, ..e }];
        let t = Topology::build(&params).unwrap();
        assert_eq!(t.graph().edge_delay(e.v, e.u), Some(0.5));
        params.edge_delays = vec![Edge {
            u: 0,
            v: 0,
            delay: 0.5,
        }];
        assert!(Topology::build(&params).is_err());
    }

    #[test]
    fn tiny_networks_are_complete() {
        let one = TopologyParams {
            nodes: 1,
            publishers: 1,
            items_per_publisher: 10,
            ..TopologyParams::default()
        };
        let t = Topology::build(&one).unwrap();
        assert_eq!(t.node_count(), 1);
        assert_eq!(t.path(0, 7).unwrap(), vec![0]);
        let two = TopologyParams {
            nodes: 2,
            ..one.clone()
        };
        assert!(Topology::build(&two).unwrap().graph().has_edge(0, 1));
        assert!(Topology::build(&TopologyParams { nodes: 0, ..one }).is_err());
    }

    impl Graph {
        fn with_delay(mut self, d: f64) -> Self {
            for l in &mut self.adjacency {
                for e in l {
                    e.1 = d;
                }
            }
            self
        }
    }

    proptest! {
        #[test]
        fn routes_are_shortest_and_loop_free(seed in 0u64..500, p in 1usize..4) {
            let params = TopologyParams { publishers: p, items_per_publisher: 3, seed, ..TopologyParams::default() };
            let t = Topology::build(&params).unwrap();
            for pubr in t.publishers() {
                let oracle = t.graph().bfs_distances(pubr.attachment);
                let rank = ((pubr.id - 1) * 3 + 1) as ContentId;
                for u in 0..t.node_count() {
                    let path = t.path(u, rank).unwrap();
                    prop_assert_eq!(Some(path.len() - 1), oracle[u]);
                    prop_assert_eq!(*path.last().unwrap(), pubr.attachment);
                    let distinct: BTreeSet<_> = path.iter().collect();
                    prop_assert_eq!(distinct.len(), path.len());
                    for w in path.windows(2) {
                        prop_assert!(t.graph().has_edge(w[0], w[1]));
                    }
                }
            }
        }

        #[test]
        fn publishers_are_top_betweenness(seed in 0u64..200) {
            let params = TopologyParams { seed, ..TopologyParams::default() };
            let t = Topology::build(&params).unwrap();
            let scores = betweenness(t.graph()).unwrap();
            let chosen: Vec<_> = t.publishers().iter().map(|p| p.attachment).collect();
            let min_chosen = chosen.iter().map(|&u| scores[u]).fold(f64::INFINITY, f64::min);
            for u in 0..t.node_count() {
                if !chosen.contains(&u) {
                    prop_assert!(scores[u] <= min_chosen + 1e-9);
                }
            }
        }
    }
}
