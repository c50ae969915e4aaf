//! Weighted graphs, edge-list ingestion, connectivity, cross-validation
//! splits, negative sampling and the crossed k-regular generator.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub type NodeId = u64;

/// An aggregated edge between two dense node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Simple weighted graph. Node ids are kept sorted; edges are aggregated so
/// that each ordered (directed) or unordered (undirected) pair appears once,
/// and self-loops are never stored.
#[derive(Debug, Clone)]
pub struct Graph {
    directed: bool,
    node_ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    edges: Vec<Edge>,
    // For undirected graphs `out_adj` holds every neighbour and `in_adj` is empty.
    out_adj: Vec<Vec<(usize, f64)>>,
    in_adj: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    /// Builds a graph from raw edges. Duplicate pairs have their weights
    /// summed and self-loops are dropped.
    pub fn from_edges<I>(directed: bool, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        Self::from_parts(directed, std::iter::empty(), edges)
    }

    /// Like [`Graph::from_edges`], additionally declaring nodes that may have
    /// no incident edges.
    pub fn from_parts<N, I>(directed: bool, nodes: N, edges: I) -> Result<Self>
    where
        N: IntoIterator<Item = NodeId>,
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        let mut node_set: Vec<NodeId> = nodes.into_iter().collect();
        let mut weights: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
        for (s, t, w) in edges {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "edge ({s}, {t}) has non-positive weight {w}"
                )));
            }
            if s == t {
                continue;
            }
            node_set.push(s);
            node_set.push(t);
            let key = if directed || s < t { (s, t) } else { (t, s) };
            *weights.entry(key).or_insert(0.0) += w;
        }
        node_set.sort_unstable();
        node_set.dedup();
        let index: HashMap<NodeId, usize> =
            node_set.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let n = node_set.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = if directed { vec![Vec::new(); n] } else { Vec::new() };
        let mut edge_list = Vec::with_capacity(weights.len());
        for ((s, t), w) in weights {
            let (si, ti) = (index[&s], index[&t]);
            edge_list.push(Edge { source: si, target: ti, weight: w });
            out_adj[si].push((ti, w));
            if directed {
                in_adj[ti].push((si, w));
            } else {
                out_adj[ti].push((si, w));
            }
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        Ok(Self { directed, node_ids: node_set, index, edges: edge_list, out_adj, in_adj })
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted node ids; position in this slice is the node's dense index.
    pub fn node_ids(&self) -> &[NodeId] {
        &self.node_ids
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn id_of(&self, index: usize) -> NodeId {
        self.node_ids[index]
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    /// Outgoing neighbours (all neighbours for undirected graphs).
    pub fn out_neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.out_adj[u]
    }

    /// Incoming neighbours (all neighbours for undirected graphs).
    pub fn in_neighbors(&self, u: usize) -> &[(usize, f64)] {
        if self.directed {
            &self.in_adj[u]
        } else {
            &self.out_adj[u]
        }
    }

    /// Edge weight between dense indices, respecting direction.
    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let list = &self.out_adj[u];
        list.binary_search_by_key(&v, |&(j, _)| j).ok().map(|pos| list[pos].1)
    }

    /// Whether the pair of node ids is linked. Undirected graphs ignore order.
    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        match (self.index_of(u), self.index_of(v)) {
            (Some(a), Some(b)) => self.weight(a, b).is_some(),
            _ => false,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Edges as (source id, target id, weight).
    pub fn edge_triples(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.edges
            .iter()
            .map(|e| (self.node_ids[e.source], self.node_ids[e.target], e.weight))
    }

    /// Connected components of the undirected projection, each sorted by
    /// dense index and listed in order of their smallest node id.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let mut comp = Vec::new();
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                let nbrs = self.out_neighbors(u).iter().chain(self.in_neighbors(u));
                for &(v, _) in nbrs {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    pub fn is_weakly_connected(&self) -> bool {
        self.node_count() > 0 && self.weak_components().len() == 1
    }

    /// Subgraph induced by the given dense indices; node ids are preserved.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Graph {
        let keep: HashSet<usize> = nodes.iter().copied().collect();
        let ids = nodes.iter().map(|&i| self.node_ids[i]);
        let edges = self
            .edges
            .iter()
            .filter(|e| keep.contains(&e.source) && keep.contains(&e.target))
            .map(|e| (self.node_ids[e.source], self.node_ids[e.target], e.weight));
        Graph::from_parts(self.directed, ids, edges).expect("weights already validated")
    }

    /// Writes the graph as a whitespace-separated edge list.
    pub fn write_edge_list<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        for (s, t, w) in self.edge_triples() {
            writeln!(sink, "{s} {t} {w}")?;
        }
        Ok(())
    }
}

/// Parses "src dst [weight]" lines. '#' and '%' start comment lines.
pub fn parse_edge_list<R: BufRead>(source: R, directed: bool) -> Result<Graph> {
    let mut edges = Vec::new();
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(Error::Parse { line: lineno, message: "expected at least two fields".into() });
        }
        let parse_id = |tok: &str| {
            tok.parse::<NodeId>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid node id {tok:?}"),
            })
        };
        let s = parse_id(fields[0])?;
        let t = parse_id(fields[1])?;
        let w = match fields.get(2) {
            Some(tok) => tok.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid weight {tok:?}"),
            })?,
            None => 1.0,
        };
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::InvalidInput(format!("line {lineno}: non-positive weight {w}")));
        }
        edges.push((s, t, w));
    }
    Graph::from_edges(directed, edges)
}

pub fn parse_edge_list_str(text: &str, directed: bool) -> Result<Graph> {
    parse_edge_list(text.as_bytes(), directed)
}

/// Induced subgraph on the largest weakly connected component. Ties go to
/// the component with the smallest minimum node id.
pub fn largest_weakly_connected_component(g: &Graph) -> Result<Graph> {
    if g.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let components = g.weak_components();
    if components.len() == 1 {
        return Ok(g.clone());
    }
    // components are ordered by their smallest id, so `>` keeps the earliest on ties
    let mut best = &components[0];
    for comp in &components[1..] {
        if comp.len() > best.len() {
            best = comp;
        }
    }
    Ok(g.induced_subgraph(best))
}

/// One cross-validation fold.
#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train: Graph,
    pub test_positive: Vec<(NodeId, NodeId)>,
    pub test_negative: Vec<(NodeId, NodeId)>,
}

/// Splits the aggregated edges into `k` folds of near-equal size. Each fold
/// trains on the largest weakly connected component of the remaining edges.
pub fn kfold_split(g: &Graph, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {k}")));
    }
    let m = g.edge_count();
    if k > m {
        return Err(Error::InvalidInput(format!("{k} folds requested but only {m} edges")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut stream_rng(seed, u64::MAX));

    let mut fold_of = vec![0usize; m];
    for fold in 0..k {
        for &e in &order[fold * m / k..(fold + 1) * m / k] {
            fold_of[e] = fold;
        }
    }

    (0..k)
        .map(|fold| {
            let train_edges = g
                .edges()
                .iter()
                .zip(&fold_of)
                .filter(|(_, &f)| f != fold)
                .map(|(e, _)| (g.id_of(e.source), g.id_of(e.target), e.weight));
            let full_train = Graph::from_parts(g.is_directed(), g.node_ids().iter().copied(), train_edges)?;
            let train = largest_weakly_connected_component(&full_train)?;
            if train.edge_count() == 0 {
                return Err(Error::InvalidInput(format!("fold {fold} has an empty training component")));
            }
            let test_positive: Vec<(NodeId, NodeId)> = order[fold * m / k..(fold + 1) * m / k]
                .iter()
                .map(|&e| (g.id_of(g.edges()[e].source), g.id_of(g.edges()[e].target)))
                .filter(|&(s, t)| train.contains(s) && train.contains(t))
                .collect();
            let count = if g.is_directed() { test_positive.len() } else { 2 * test_positive.len() };
            let test_negative = sample_negative_links(
                g,
                train.node_ids(),
                count,
                crate::rng::derive_seed(seed, fold as u64),
            )?;
            Ok(FoldSplit { fold_index: fold, train, test_positive, test_negative })
        })
        .collect()
}

/// Samples `count` distinct node pairs over `universe` that are not linked
/// in `g` and are not self-loops. Pairs are ordered for directed graphs and
/// unordered for undirected ones; an undirected pair keeps the orientation in
/// which it was drawn.
pub fn sample_negative_links(
    g: &Graph,
    universe: &[NodeId],
    count: usize,
    seed: u64,
) -> Result<Vec<(NodeId, NodeId)>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let mut nodes: Vec<NodeId> = universe.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    let n = nodes.len() as u128;
    let total_pairs = if g.is_directed() { n * n.saturating_sub(1) } else { n * n.saturating_sub(1) / 2 };
    let members: HashSet<NodeId> = nodes.iter().copied().collect();
    let present = g
        .edge_triples()
        .filter(|(s, t, _)| members.contains(s) && members.contains(t))
        .count() as u128;
    let absent = total_pairs - present;
    if (count as u128) > absent {
        return Err(Error::InvalidInput(format!(
            "cannot sample {count} negative links, only {absent} absent pairs"
        )));
    }

    let key = |u: NodeId, v: NodeId| if g.is_directed() || u < v { (u, v) } else { (v, u) };
    let mut rng = stream_rng(seed, 0);

    if 2 * (count as u128) > absent {
        // dense regime: enumerate the absent pairs and draw without replacement
        let mut pool = Vec::with_capacity(absent as usize);
        for (i, &u) in nodes.iter().enumerate() {
            for (j, &v) in nodes.iter().enumerate() {
                if i == j || (!g.is_directed() && j < i) {
                    continue;
                }
                if !g.has_edge(u, v) {
                    pool.push((u, v));
                }
            }
        }
        let (chosen, _) = pool.partial_shuffle(&mut rng, count);
        return Ok(chosen
            .iter()
            .map(|&(u, v)| if !g.is_directed() && rng.gen_bool(0.5) { (v, u) } else { (u, v) })
            .collect());
    }

    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = nodes[rng.gen_range(0..nodes.len())];
        let v = nodes[rng.gen_range(0..nodes.len())];
        if u == v || g.has_edge(u, v) || !seen.insert(key(u, v)) {
            continue;
        }
        out.push((u, v));
    }
    Ok(out)
}

/// Random `k`-regular simple graph on nodes `0..n` (pairing with restarts
/// when the stub matching gets stuck).
fn random_regular_edges<R: Rng>(n: usize, k: usize, rng: &mut R) -> Option<HashSet<(usize, usize)>> {
    let mut edges: HashSet<(usize, usize)> = HashSet::with_capacity(n * k / 2);
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(k)).collect();
    while !stubs.is_empty() {
        let mut leftover: BTreeMap<usize, usize> = BTreeMap::new();
        stubs.shuffle(rng);
        for pair in stubs.chunks_exact(2) {
            let (a, b) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if a != b && !edges.contains(&(a, b)) {
                edges.insert((a, b));
            } else {
                *leftover.entry(a).or_default() += 1;
                *leftover.entry(b).or_default() += 1;
            }
        }
        let open: Vec<usize> = leftover.keys().copied().collect();
        let suitable = open.is_empty()
            || open.iter().enumerate().any(|(i, &a)| {
                open[i + 1..].iter().any(|&b| !edges.contains(&(a, b)))
            });
        if !suitable {
            return None;
        }
        stubs = leftover.iter().flat_map(|(&v, &c)| std::iter::repeat(v).take(c)).collect();
    }
    Some(edges)
}

/// Two independent `k`-regular random graphs on `n/2` nodes each, joined by
/// swapping the endpoints of one edge from each half. Nodes `0..n/2` form the
/// first half. Every node keeps degree `k` and the result is connected.
pub fn generate_crossed_k_regular(n: usize, k: usize, seed: u64) -> Result<Graph> {
    if n % 2 != 0 || n < 4 {
        return Err(Error::InvalidInput(format!("node count must be even and at least 4, got {n}")));
    }
    let half = n / 2;
    if k == 0 || k >= half || (k * half) % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "no {k}-regular graph on {half} nodes (need 0 < k < n/2 and k*n/2 even)"
        )));
    }
    const MAX_ATTEMPTS: u64 = 1000;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = stream_rng(seed, attempt);
        let (Some(first), Some(second)) = (
            random_regular_edges(half, k, &mut rng),
            random_regular_edges(half, k, &mut rng),
        ) else {
            continue;
        };
        let mut first: Vec<(usize, usize)> = first.into_iter().collect();
        let mut second: Vec<(usize, usize)> = second.into_iter().collect();
        first.sort_unstable();
        second.sort_unstable();
        let (a, b) = first.swap_remove(rng.gen_range(0..first.len()));
        let (c, d) = second.swap_remove(rng.gen_range(0..second.len()));
        let (c, d) = (c + half, d + half);

        let edges = first
            .iter()
            .copied()
            .chain(second.iter().map(|&(x, y)| (x + half, y + half)))
            .chain([(a, c), (b, d)])
            .map(|(x, y)| (x as NodeId, y as NodeId, 1.0));
        let g = Graph::from_edges(false, edges)?;
        if g.node_count() == n && g.edge_count() == n * k / 2 && g.is_weakly_connected() {
            return Ok(g);
        }
    }
    Err(Error::InvalidInput(format!(
        "could not generate a connected crossed {k}-regular graph on {n} nodes"
    )))
}
