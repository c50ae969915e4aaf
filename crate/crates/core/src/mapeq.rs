//! Entropy and map equation codelength for flat, two-level and nested
//! partitions.
//!
//! A module's codebook holds one codeword per direct sub-module (used at the
//! sub-module's enter rate), one per direct member node (used at the node's
//! visit rate) and, below the root, one exit codeword. The codelength is the
//! usage-weighted entropy of every codebook in the tree.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;

/// `p * log2(p)` with `0 log 0 = 0`.
#[inline]
pub fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Shannon entropy in bits of the distribution proportional to `p`.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidInput(format!("entropy of invalid weight {x}")));
    }
    let s: f64 = p.iter().sum();
    if !(s > 0.0) {
        return Err(Error::InvalidInput("entropy of an all-zero vector".into()));
    }
    Ok(-p.iter().map(|&x| plogp(x / s)).sum::<f64>())
}

/// Assignment of every node to a path in a module tree. A path lists module
/// identifiers from the top level down and ends with the node's slot within
/// its innermost module, so `[3]` is a node directly under the root and
/// `[2, 5]` is slot 5 of top-level module 2. Identifiers only need to be
/// distinct among siblings; siblings are ordered by identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    paths: Vec<Vec<usize>>,
}

impl Partition {
    /// `paths[i]` is the path of dense node index `i`.
    pub fn new(paths: Vec<Vec<usize>>) -> Result<Self> {
        if let Some(i) = paths.iter().position(|p| p.is_empty()) {
            return Err(Error::InvalidPartition(format!("node {i} has an empty path")));
        }
        let part = Self { paths };
        Hierarchy::build(&part)?;
        Ok(part)
    }

    /// Every node directly under the root.
    pub fn one_module(n: usize) -> Self {
        Self { paths: (1..=n).map(|slot| vec![slot]).collect() }
    }

    /// Two-level partition from a flat module label per node. Slots follow
    /// node order within each module.
    pub fn from_modules(modules: &[usize]) -> Self {
        let mut next_slot: BTreeMap<usize, usize> = BTreeMap::new();
        let paths = modules
            .iter()
            .map(|&m| {
                let slot = next_slot.entry(m).or_insert(0);
                *slot += 1;
                vec![m + 1, *slot]
            })
            .collect();
        Self { paths }
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn node_count(&self) -> usize {
        self.paths.len()
    }

    /// Length of the longest path.
    pub fn depth(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of top-level modules; a partition with every node at the root
    /// counts as a single module.
    pub fn top_level_module_count(&self) -> usize {
        let mut tops: Vec<usize> = self.paths.iter().filter(|p| p.len() > 1).map(|p| p[0]).collect();
        tops.sort_unstable();
        tops.dedup();
        let root_leaves = self.paths.iter().any(|p| p.len() == 1);
        tops.len() + usize::from(root_leaves && tops.is_empty())
    }
}

/// Module tree resolved from a partition. Index 0 is the root.
#[derive(Debug, Clone)]
pub(crate) struct Hierarchy {
    pub nodes: Vec<HierarchyNode>,
    /// Tree position of each graph node's leaf.
    pub leaf_of: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct HierarchyNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
    /// Graph node index for leaves.
    pub leaf: Option<usize>,
}

impl Hierarchy {
    pub fn build(part: &Partition) -> Result<Self> {
        struct Draft {
            parent: Option<usize>,
            children: BTreeMap<usize, usize>,
            depth: usize,
            leaf: Option<usize>,
        }
        let mut drafts = vec![Draft { parent: None, children: BTreeMap::new(), depth: 0, leaf: None }];
        let mut leaf_of = Vec::with_capacity(part.paths.len());
        for (node, path) in part.paths.iter().enumerate() {
            let mut at = 0;
            for (level, &key) in path.iter().enumerate() {
                let is_last = level + 1 == path.len();
                if drafts[at].leaf.is_some() {
                    return Err(Error::InvalidPartition(format!(
                        "path {path:?} of node {node} passes through a leaf"
                    )));
                }
                at = match drafts[at].children.get(&key) {
                    Some(&child) => {
                        if is_last {
                            return Err(Error::InvalidPartition(format!(
                                "path {path:?} of node {node} is already in use"
                            )));
                        }
                        child
                    }
                    None => {
                        let child = drafts.len();
                        let depth = drafts[at].depth + 1;
                        drafts[at].children.insert(key, child);
                        drafts.push(Draft { parent: Some(at), children: BTreeMap::new(), depth, leaf: None });
                        child
                    }
                };
            }
            if !drafts[at].children.is_empty() {
                return Err(Error::InvalidPartition(format!(
                    "path {path:?} of node {node} names a module, not a leaf slot"
                )));
            }
            drafts[at].leaf = Some(node);
            leaf_of.push(at);
        }
        let nodes = drafts
            .into_iter()
            .map(|d| HierarchyNode {
                parent: d.parent,
                children: d.children.into_values().collect(),
                depth: d.depth,
                leaf: d.leaf,
            })
            .collect();
        Ok(Self { nodes, leaf_of })
    }

    pub fn is_leaf(&self, i: usize) -> bool {
        self.nodes[i].leaf.is_some()
    }

    /// Enter, exit and total visit flow for every tree position.
    pub fn rates(&self, flow: &FlowNetwork) -> Vec<TreeRates> {
        let mut rates = vec![TreeRates::default(); self.nodes.len()];
        for (node, &leaf) in self.leaf_of.iter().enumerate() {
            let p = flow.node_flow()[node];
            let mut at = Some(leaf);
            while let Some(i) = at {
                rates[i].flow += p;
                at = self.nodes[i].parent;
            }
        }
        for link in flow.links() {
            let mut a = self.leaf_of[link.source];
            let mut b = self.leaf_of[link.target];
            while self.nodes[a].depth > self.nodes[b].depth {
                rates[a].exit += link.flow;
                a = self.nodes[a].parent.expect("non-root has a parent");
            }
            while self.nodes[b].depth > self.nodes[a].depth {
                rates[b].enter += link.flow;
                b = self.nodes[b].parent.expect("non-root has a parent");
            }
            while a != b {
                rates[a].exit += link.flow;
                rates[b].enter += link.flow;
                a = self.nodes[a].parent.expect("non-root has a parent");
                b = self.nodes[b].parent.expect("non-root has a parent");
            }
        }
        rates[0].enter = 0.0;
        rates[0].exit = 0.0;
        rates
    }

    /// Codebook usage of a module: its exit rate plus every codeword it holds.
    pub fn usage(&self, i: usize, rates: &[TreeRates]) -> f64 {
        let node = &self.nodes[i];
        let words: f64 = node.children.iter().map(|&c| self.codeword_rate(c, rates)).sum();
        words + if node.parent.is_some() { rates[i].exit } else { 0.0 }
    }

    /// Rate at which position `i`'s codeword is used in its parent's codebook.
    pub fn codeword_rate(&self, i: usize, rates: &[TreeRates]) -> f64 {
        if self.is_leaf(i) {
            rates[i].flow
        } else {
            rates[i].enter
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct TreeRates {
    pub enter: f64,
    pub exit: f64,
    pub flow: f64,
}

/// Codebook rates of one module (or of the root, with an empty path).
#[derive(Debug, Clone, PartialEq)]
pub struct ModuleRate {
    /// Module identifiers from the top level down; empty for the root.
    pub path: Vec<usize>,
    /// Flow entering the module from outside.
    pub enter: f64,
    /// Flow leaving the module.
    pub exit: f64,
    /// Total visit rate of all nodes inside the module.
    pub flow: f64,
    /// Codebook usage: exit rate plus all codeword rates.
    pub usage: f64,
    /// Visit rates of nodes placed directly in this module.
    pub member_flows: Vec<f64>,
    /// Enter rates of direct sub-modules.
    pub child_enters: Vec<f64>,
}

impl ModuleRate {
    /// `usage * H(codebook)` in bits.
    pub fn weighted_entropy(&self) -> f64 {
        let words: f64 = self.member_flows.iter().chain(&self.child_enters).map(|&x| plogp(x)).sum();
        let exit = if self.path.is_empty() { 0.0 } else { plogp(self.exit) };
        plogp(self.usage) - words - exit
    }

    /// Codeword probabilities (members, sub-modules, exit) summed.
    pub fn codebook_sum(&self) -> f64 {
        if self.usage == 0.0 {
            return 1.0;
        }
        let words: f64 = self.member_flows.iter().chain(&self.child_enters).sum();
        let exit = if self.path.is_empty() { 0.0 } else { self.exit };
        (words + exit) / self.usage
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleRates {
    /// Root first, then every module in depth-first order.
    pub modules: Vec<ModuleRate>,
    /// Index codebook usage: total enter rate of the top-level modules.
    pub index_rate: f64,
}

impl ModuleRates {
    pub fn root(&self) -> &ModuleRate {
        &self.modules[0]
    }

    pub fn get(&self, path: &[usize]) -> Option<&ModuleRate> {
        self.modules.iter().find(|m| m.path == path)
    }
}

/// Enter, exit and usage rates for the root and every module of `part`.
pub fn module_rates(flow: &FlowNetwork, part: &Partition) -> Result<ModuleRates> {
    check_cover(flow, part)?;
    let hier = Hierarchy::build(part)?;
    let rates = hier.rates(flow);

    // identifier path of each tree position, recovered from any leaf below it
    let mut key_path: Vec<Vec<usize>> = vec![Vec::new(); hier.nodes.len()];
    for (node, path) in part.paths.iter().enumerate() {
        let mut at = hier.leaf_of[node];
        for depth in (0..path.len()).rev() {
            key_path[at] = path[..=depth].to_vec();
            at = hier.nodes[at].parent.expect("path depth matches tree depth");
        }
    }

    let mut modules = Vec::new();
    let mut stack = vec![0usize];
    while let Some(i) = stack.pop() {
        let node = &hier.nodes[i];
        let mut member_flows = Vec::new();
        let mut child_enters = Vec::new();
        for &c in &node.children {
            if hier.is_leaf(c) {
                member_flows.push(rates[c].flow);
            } else {
                child_enters.push(rates[c].enter);
            }
        }
        modules.push(ModuleRate {
            path: key_path[i].clone(),
            enter: rates[i].enter,
            exit: rates[i].exit,
            flow: rates[i].flow,
            usage: hier.usage(i, &rates),
            member_flows,
            child_enters,
        });
        stack.extend(node.children.iter().rev().filter(|&&c| !hier.is_leaf(c)));
    }
    let index_rate = modules[0].child_enters.iter().sum();
    Ok(ModuleRates { modules, index_rate })
}

/// Map equation codelength in bits per step.
pub fn codelength(flow: &FlowNetwork, part: &Partition) -> Result<f64> {
    Ok(codelength_from_rates(&module_rates(flow, part)?))
}

pub fn codelength_from_rates(rates: &ModuleRates) -> f64 {
    rates.modules.iter().map(ModuleRate::weighted_entropy).sum()
}

fn check_cover(flow: &FlowNetwork, part: &Partition) -> Result<()> {
    if part.node_count() != flow.node_count() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} nodes but the network has {}",
            part.node_count(),
            flow.node_count()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::visit_rates_undirected;
    use crate::graph::parse_edge_list_str;

    fn flow(text: &str) -> FlowNetwork {
        visit_rates_undirected(&parse_edge_list_str(text, false).unwrap()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy(&[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(entropy(&[1.0]).unwrap(), 0.0);
        assert!((entropy(&[0.25; 4]).unwrap() - 2.0).abs() < 1e-15);
        assert!((entropy(&[2.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((entropy(&[1.0, 0.0]).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn entropy_errors() {
        assert!(entropy(&[0.5, -0.1]).is_err());
        assert!(entropy(&[0.0, 0.0]).is_err());
        assert!(entropy(&[]).is_err());
    }

    #[test]
    fn one_module_rates() {
        let f = flow("1 2\n2 3\n3 1\n3 4\n");
        let r = module_rates(&f, &Partition::one_module(4)).unwrap();
        assert_eq!(r.modules.len(), 1);
        assert_eq!(r.index_rate, 0.0);
        assert_eq!(r.root().exit, 0.0);
        assert!((r.root().usage - 1.0).abs() < 1e-15);
        let l = codelength(&f, &Partition::one_module(4)).unwrap();
        assert!((l - entropy(f.node_flow()).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn single_crossing_edge() {
        // two triangles joined by 3-4; W = 7
        let f = flow("1 2\n2 3\n3 1\n4 5\n5 6\n6 4\n3 4\n");
        let part = Partition::from_modules(&[0, 0, 0, 1, 1, 1]);
        let r = module_rates(&f, &part).unwrap();
        for m in &r.modules[1..] {
            assert!((m.enter - 1.0 / 14.0).abs() < 1e-15);
            assert!((m.exit - 1.0 / 14.0).abs() < 1e-15);
        }
        assert!((r.index_rate - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn two_triangles_codelength_by_hand() {
        let f = flow("1 2\n2 3\n3 1\n4 5\n5 6\n6 4\n3 4\n");
        let part = Partition::from_modules(&[0, 0, 0, 1, 1, 1]);
        // degrees 2,2,3 | 3,2,2 over 2W = 14
        let q = 1.0 / 14.0;
        let index = -2.0 * (0.5f64 * 0.5f64.log2());
        let members = [q, 2.0 / 14.0, 2.0 / 14.0, 3.0 / 14.0];
        let pm: f64 = members.iter().sum();
        let module_h = -members.iter().map(|&x| (x / pm) * (x / pm).log2()).sum::<f64>();
        let expected = 2.0 * q * index + 2.0 * pm * module_h;
        let got = codelength(&f, &part).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn singletons_cost_more_than_one_module_on_triangle() {
        let f = flow("1 2\n2 3\n3 1\n");
        let one = codelength(&f, &Partition::one_module(3)).unwrap();
        let singles = codelength(&f, &Partition::from_modules(&[0, 1, 2])).unwrap();
        assert!(singles > one);
    }

    #[test]
    fn hierarchical_codebooks_normalize() {
        let f = flow("1 2\n2 3\n3 1\n4 5\n5 6\n6 4\n3 4\n1 7\n7 8\n8 1\n");
        let part = Partition::new(vec![
            vec![1, 1, 1],
            vec![1, 1, 2],
            vec![1, 1, 3],
            vec![1, 2, 1],
            vec![1, 2, 2],
            vec![1, 3],
            vec![2, 1],
            vec![2, 2],
        ])
        .unwrap();
        let r = module_rates(&f, &part).unwrap();
        assert_eq!(r.modules.len(), 5);
        for m in &r.modules {
            assert!((m.codebook_sum() - 1.0).abs() < 1e-12, "{m:?}");
        }
        assert!(codelength(&f, &part).unwrap() > 0.0);
    }

    #[test]
    fn invalid_partitions() {
        assert!(Partition::new(vec![vec![1], vec![1]]).is_err());
        assert!(Partition::new(vec![vec![1], vec![1, 2]]).is_err());
        assert!(Partition::new(vec![vec![1, 2], vec![1]]).is_err());
        assert!(Partition::new(vec![vec![]]).is_err());
        let f = flow("1 2\n");
        assert!(codelength(&f, &Partition::one_module(3)).is_err());
    }

    #[test]
    fn top_level_counts() {
        assert_eq!(Partition::one_module(4).top_level_module_count(), 1);
        assert_eq!(Partition::from_modules(&[3, 1, 3]).top_level_module_count(), 2);
    }
}
