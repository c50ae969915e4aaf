//! Random-walk flow model: stationary visit rates and per-link flow.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    pub teleport_probability: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { teleport_probability: 0.15, tolerance: 1e-12, max_iterations: 1000 }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let tau = self.teleport_probability;
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidInput(format!("teleport probability must be in (0, 1), got {tau}")));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

/// Directed flow along one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkFlow {
    pub source: usize,
    pub target: usize,
    pub flow: f64,
}

/// Visit rates per node and flow per directed link, both normalized to sum 1.
/// Undirected networks carry both orientations of each edge. Node indices
/// match the dense indices of the graph the flow was computed from.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    directed: bool,
    node_ids: Vec<NodeId>,
    node_flow: Vec<f64>,
    links: Vec<LinkFlow>,
    out_links: Vec<Vec<(usize, f64)>>,
    in_links: Vec<Vec<(usize, f64)>>,
}

impl FlowNetwork {
    /// Assembles a flow network from precomputed rates. Links are taken as
    /// directed; callers supply both orientations for undirected networks.
    pub fn from_parts(directed: bool, node_ids: Vec<NodeId>, node_flow: Vec<f64>, links: Vec<LinkFlow>) -> Result<Self> {
        let n = node_ids.len();
        if node_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("node ids must be strictly increasing".into()));
        }
        if node_flow.len() != n {
            return Err(Error::InvalidInput("node flow length differs from node count".into()));
        }
        if node_flow.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidInput("node flow must be non-negative".into()));
        }
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for l in &links {
            if l.source >= n || l.target >= n || !(l.flow >= 0.0 && l.flow.is_finite()) {
                return Err(Error::InvalidInput(format!("invalid link {l:?}")));
            }
            out_links[l.source].push((l.target, l.flow));
            in_links[l.target].push((l.source, l.flow));
        }
        for list in out_links.iter_mut().chain(in_links.iter_mut()) {
            list.sort_unstable_by_key(|&(j, _)| j);
        }
        Ok(Self { directed, node_ids, node_flow, links, out_links, in_links })
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.node_ids
    }

    /// Visit rate of every node, by dense index.
    pub fn node_flow(&self) -> &[f64] {
        &self.node_flow
    }

    pub fn links(&self) -> &[LinkFlow] {
        &self.links
    }

    pub fn out_links(&self, u: usize) -> &[(usize, f64)] {
        &self.out_links[u]
    }

    pub fn in_links(&self, u: usize) -> &[(usize, f64)] {
        &self.in_links[u]
    }

    pub fn link_flow(&self, u: usize, v: usize) -> f64 {
        let list = &self.out_links[u];
        list.binary_search_by_key(&v, |&(j, _)| j).map_or(0.0, |pos| list[pos].1)
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.node_ids.binary_search(&id).ok()
    }
}

/// Closed-form flow for undirected graphs: visit rates proportional to node
/// strength and each orientation of an edge carrying `w / 2W`.
pub fn visit_rates_undirected(g: &Graph) -> Result<FlowNetwork> {
    if g.is_directed() {
        return Err(Error::InvalidInput("expected an undirected graph".into()));
    }
    check_connected(g)?;
    let total = g.total_weight();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("total edge weight is zero".into()));
    }
    let denom = 2.0 * total;
    let node_flow = (0..g.node_count())
        .map(|u| g.out_neighbors(u).iter().map(|&(_, w)| w).sum::<f64>() / denom)
        .collect();
    let links = g
        .edges()
        .iter()
        .flat_map(|e| {
            let flow = e.weight / denom;
            [
                LinkFlow { source: e.source, target: e.target, flow },
                LinkFlow { source: e.target, target: e.source, flow },
            ]
        })
        .collect();
    FlowNetwork::from_parts(false, g.node_ids().to_vec(), node_flow, links)
}

/// PageRank-style power iteration with uniform teleportation. Teleport steps
/// shape the stationary distribution but are not coded: link flow is
/// `pi_u (1 - tau) w_uv / out_u` and a node's coded visit rate is its
/// in-flow, both renormalized.
pub fn visit_rates_directed(g: &Graph, cfg: &FlowConfig) -> Result<FlowNetwork> {
    if !g.is_directed() {
        return Err(Error::InvalidInput("expected a directed graph".into()));
    }
    cfg.validate()?;
    check_connected(g)?;
    if g.edge_count() == 0 {
        return Err(Error::InvalidInput("graph has no edges".into()));
    }
    let n = g.node_count();
    let tau = cfg.teleport_probability;
    let out_strength: Vec<f64> =
        (0..n).map(|u| g.out_neighbors(u).iter().map(|&(_, w)| w).sum()).collect();

    let uniform = 1.0 / n as f64;
    let mut rank = vec![uniform; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for _ in 0..cfg.max_iterations {
        let dangling: f64 = (0..n).filter(|&u| out_strength[u] == 0.0).map(|u| rank[u]).sum();
        let base = (tau + (1.0 - tau) * dangling) * uniform;
        next.iter_mut().for_each(|x| *x = base);
        for e in g.edges() {
            next[e.target] += (1.0 - tau) * rank[e.source] * e.weight / out_strength[e.source];
        }
        let sum: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= sum);
        residual = rank.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if residual < cfg.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged { iterations: cfg.max_iterations, residual });
    }

    let mut links: Vec<LinkFlow> = g
        .edges()
        .iter()
        .map(|e| LinkFlow {
            source: e.source,
            target: e.target,
            flow: rank[e.source] * (1.0 - tau) * e.weight / out_strength[e.source],
        })
        .collect();
    let link_sum: f64 = links.iter().map(|l| l.flow).sum();
    links.iter_mut().for_each(|l| l.flow /= link_sum);
    let mut node_flow = vec![0.0; n];
    for l in &links {
        node_flow[l.target] += l.flow;
    }
    let node_sum: f64 = node_flow.iter().sum();
    node_flow.iter_mut().for_each(|p| *p /= node_sum);
    FlowNetwork::from_parts(true, g.node_ids().to_vec(), node_flow, links)
}

/// Dispatches on the graph's directedness.
pub fn visit_rates(g: &Graph, cfg: &FlowConfig) -> Result<FlowNetwork> {
    if g.is_directed() {
        visit_rates_directed(g, cfg)
    } else {
        visit_rates_undirected(g)
    }
}

fn check_connected(g: &Graph) -> Result<()> {
    if g.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let components = g.weak_components().len();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_edge_list_str;

    const EPS: f64 = 1e-12;

    #[test]
    fn triangle() {
        let g = parse_edge_list_str("1 2\n2 3\n3 1\n", false).unwrap();
        let f = visit_rates_undirected(&g).unwrap();
        for &p in f.node_flow() {
            assert!((p - 1.0 / 3.0).abs() < EPS);
        }
        assert_eq!(f.links().len(), 6);
        for l in f.links() {
            assert!((l.flow - 1.0 / 6.0).abs() < EPS);
        }
    }

    #[test]
    fn path() {
        let g = parse_edge_list_str("1 2\n2 3\n", false).unwrap();
        let f = visit_rates_undirected(&g).unwrap();
        let expected = [0.25, 0.5, 0.25];
        for (p, e) in f.node_flow().iter().zip(expected) {
            assert!((p - e).abs() < EPS);
        }
    }

    #[test]
    fn undirected_rejects_disconnected() {
        let g = parse_edge_list_str("1 2\n3 4\n", false).unwrap();
        assert!(matches!(visit_rates_undirected(&g), Err(Error::Disconnected { components: 2 })));
    }

    #[test]
    fn two_cycle_is_uniform() {
        let g = parse_edge_list_str("1 2\n2 1\n", true).unwrap();
        for tau in [0.01, 0.15, 0.9] {
            let cfg = FlowConfig { teleport_probability: tau, ..Default::default() };
            let f = visit_rates_directed(&g, &cfg).unwrap();
            assert!((f.node_flow()[0] - 0.5).abs() < 1e-9);
            assert!((f.node_flow()[1] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn complete_digraph_is_uniform() {
        let mut text = String::new();
        for u in 1..=4 {
            for v in 1..=4 {
                if u != v {
                    text.push_str(&format!("{u} {v}\n"));
                }
            }
        }
        let g = parse_edge_list_str(&text, true).unwrap();
        let f = visit_rates_directed(&g, &FlowConfig::default()).unwrap();
        for &p in f.node_flow() {
            assert!((p - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn node_flow_equals_inflow() {
        let g = parse_edge_list_str("1 2\n2 3\n3 1\n1 3\n4 1\n", true).unwrap();
        let f = visit_rates_directed(&g, &FlowConfig::default()).unwrap();
        assert_eq!(f.node_flow()[3], 0.0);
        for v in 0..f.node_count() {
            let inflow: f64 = f.in_links(v).iter().map(|&(_, x)| x).sum();
            assert!((inflow - f.node_flow()[v]).abs() < 1e-9);
        }
    }

    #[test]
    fn non_convergence_reports_residual() {
        let g = parse_edge_list_str("1 2\n2 3\n3 1\n1 3\n", true).unwrap();
        let cfg = FlowConfig { max_iterations: 2, ..Default::default() };
        match visit_rates_directed(&g, &cfg) {
            Err(Error::NotConverged { iterations: 2, residual }) => assert!(residual > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = FlowConfig { teleport_probability: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = FlowConfig { tolerance: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
