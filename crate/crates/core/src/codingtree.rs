//! The coding tree: rate-annotated codebooks addressed by 1-based child
//! indices, and the similarity of node pairs derived from it.
//!
//! The similarity of `v` to `u` is the rate of the coding-tree path from `u`
//! to `v` through their smallest common module `S`: the exit codewords of
//! every module between `u` and `S` (the last hop out of `u` itself is free,
//! since the coder does not remember the previous node), then the enter
//! codewords from `S` down to `v`'s module and finally `v`'s own codeword.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::graph::NodeId;
use crate::mapeq::{plogp, Hierarchy, Partition};

/// Products with more factors than this are accumulated in log space.
const LOG_SPACE_FACTORS: usize = 8;

/// Sequence of 1-based child indices. Paths from the root to a leaf are
/// non-empty; prefixes may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Address(Vec<usize>);

impl Address {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The address with `prefix` removed, if it starts with `prefix`.
    pub fn strip_prefix(&self, prefix: &Address) -> Option<Address> {
        self.0.strip_prefix(prefix.as_slice()).map(|rest| Address(rest.to_vec()))
    }
}

impl From<Vec<usize>> for Address {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(":")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

/// Longest shared leading sequence of two leaf addresses. Leaves never own
/// sub-trees, so the prefix always stops at a module.
pub fn longest_common_prefix(a: &Address, b: &Address) -> Result<Address> {
    if a == b {
        return Err(Error::InvalidAddress(a.0.clone()));
    }
    let shared = a.0.iter().zip(&b.0).take_while(|(x, y)| x == y).count();
    let shared = shared.min(a.len().saturating_sub(1)).min(b.len().saturating_sub(1));
    Ok(Address(a.0[..shared].to_vec()))
}

/// Handle to a node of a [`CodingTree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeNodeId(usize);

#[derive(Debug, Clone)]
struct TreeNode {
    parent: Option<usize>,
    children: Vec<usize>,
    /// 1-based index among the parent's children.
    position: usize,
    node_id: Option<NodeId>,
    flow: f64,
    enter: f64,
    exit: f64,
    usage: f64,
}

/// Codeword probabilities of one module.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    /// Probability of each child's codeword (enter for modules, visit for
    /// leaves), in child order.
    pub codewords: Vec<f64>,
    /// Exit codeword probability; zero at the root.
    pub exit: f64,
}

impl Codebook {
    pub fn sum(&self) -> f64 {
        self.codewords.iter().sum::<f64>() + self.exit
    }
}

/// Hierarchical codebooks annotated with enter, exit and visit rates.
#[derive(Debug, Clone)]
pub struct CodingTree {
    nodes: Vec<TreeNode>,
    leaves: HashMap<NodeId, usize>,
}

impl CodingTree {
    /// Tree mirroring `part`, with rates taken from `flow`.
    pub fn build(flow: &FlowNetwork, part: &Partition) -> Result<Self> {
        if part.node_count() != flow.node_count() {
            return Err(Error::InvalidPartition(format!(
                "partition covers {} nodes but the network has {}",
                part.node_count(),
                flow.node_count()
            )));
        }
        let hier = Hierarchy::build(part)?;
        let rates = hier.rates(flow);
        let mut nodes: Vec<TreeNode> = hier
            .nodes
            .iter()
            .enumerate()
            .map(|(i, h)| TreeNode {
                parent: h.parent,
                children: h.children.clone(),
                position: 0,
                node_id: h.leaf.map(|u| flow.node_ids()[u]),
                flow: rates[i].flow,
                enter: rates[i].enter,
                exit: rates[i].exit,
                usage: if h.leaf.is_some() { 0.0 } else { hier.usage(i, &rates) },
            })
            .collect();
        for i in 0..nodes.len() {
            for (k, &c) in nodes[i].children.clone().iter().enumerate() {
                nodes[c].position = k + 1;
            }
        }
        let leaves = nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.node_id.map(|id| (id, i)))
            .collect();
        Ok(Self { nodes, leaves })
    }

    /// Degenerate tree with every node directly under the root.
    pub fn one_module(flow: &FlowNetwork) -> Result<Self> {
        Self::build(flow, &Partition::one_module(flow.node_count()))
    }

    pub fn builder() -> CodingTreeBuilder {
        CodingTreeBuilder::new()
    }

    pub fn root(&self) -> TreeNodeId {
        TreeNodeId(0)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.leaves.contains_key(&node)
    }

    /// Number of modules directly below the root; 1 for a flat tree.
    pub fn top_level_module_count(&self) -> usize {
        let modules = self.nodes[0].children.iter().filter(|&&c| self.nodes[c].node_id.is_none()).count();
        modules.max(1)
    }

    /// Length of the longest leaf address.
    pub fn depth(&self) -> usize {
        self.leaves.values().map(|&l| self.depth_of(l)).max().unwrap_or(0)
    }

    fn depth_of(&self, mut i: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[i].parent {
            d += 1;
            i = p;
        }
        d
    }

    fn leaf(&self, node: NodeId) -> Result<usize> {
        self.leaves.get(&node).copied().ok_or(Error::UnknownNode(node))
    }

    fn address_of(&self, mut i: usize) -> Address {
        let mut addr = Vec::new();
        while let Some(p) = self.nodes[i].parent {
            addr.push(self.nodes[i].position);
            i = p;
        }
        addr.reverse();
        Address(addr)
    }

    /// Address of `node`'s leaf, from the root.
    pub fn addr(&self, node: NodeId) -> Result<Address> {
        Ok(self.address_of(self.leaf(node)?))
    }

    /// Address of `node` relative to `subtree`.
    pub fn addr_within(&self, subtree: TreeNodeId, node: NodeId) -> Result<Address> {
        let full = self.addr(node)?;
        let prefix = self.address_of(subtree.0);
        full.strip_prefix(&prefix).ok_or_else(|| Error::InvalidAddress(full.0))
    }

    /// Tree node reached by following `a` from `from`.
    pub fn resolve(&self, from: TreeNodeId, a: &Address) -> Result<TreeNodeId> {
        let mut at = from.0;
        for &x in a.as_slice() {
            at = *x
                .checked_sub(1)
                .and_then(|k| self.nodes[at].children.get(k))
                .ok_or_else(|| Error::InvalidAddress(a.0.clone()))?;
        }
        Ok(TreeNodeId(at))
    }

    /// Module at `prefix` from the root.
    pub fn subtree(&self, prefix: &Address) -> Result<TreeNodeId> {
        let t = self.resolve(self.root(), prefix)?;
        if self.nodes[t.0].node_id.is_some() {
            return Err(Error::InvalidAddress(prefix.0.clone()));
        }
        Ok(t)
    }

    /// Probability of child `c`'s codeword in its parent's codebook.
    fn codeword_probability(&self, c: usize) -> f64 {
        let node = &self.nodes[c];
        let parent = &self.nodes[node.parent.expect("codewords belong to non-root nodes")];
        let rate = if node.node_id.is_some() { node.flow } else { node.enter };
        ratio(rate, parent.usage)
    }

    fn exit_probability(&self, m: usize) -> f64 {
        let node = &self.nodes[m];
        if node.parent.is_none() {
            0.0
        } else {
            ratio(node.exit, node.usage)
        }
    }

    pub fn codebook(&self, module: TreeNodeId) -> Result<Codebook> {
        let node = &self.nodes[module.0];
        if node.node_id.is_some() {
            return Err(Error::InvalidAddress(self.address_of(module.0).0));
        }
        Ok(Codebook {
            codewords: node.children.iter().map(|&c| self.codeword_probability(c)).collect(),
            exit: self.exit_probability(module.0),
        })
    }

    /// Every module's codebook, root first.
    pub fn codebooks(&self) -> Vec<(Address, Codebook)> {
        self.module_indices()
            .into_iter()
            .map(|i| (self.address_of(i), self.codebook(TreeNodeId(i)).expect("module")))
            .collect()
    }

    fn module_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            out.push(i);
            stack.extend(self.nodes[i].children.iter().rev().filter(|&&c| self.nodes[c].node_id.is_none()));
        }
        out
    }

    /// Largest deviation of any codebook sum from 1 (modules with zero
    /// usage have no codebook and are skipped).
    pub fn max_normalization_error(&self) -> f64 {
        self.module_indices()
            .into_iter()
            .filter(|&i| self.nodes[i].usage > 0.0)
            .map(|i| (self.codebook(TreeNodeId(i)).expect("module").sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Map equation codelength of the partition this tree encodes.
    pub fn codelength(&self) -> f64 {
        self.module_indices()
            .into_iter()
            .map(|i| {
                let node = &self.nodes[i];
                let words: f64 = node
                    .children
                    .iter()
                    .map(|&c| {
                        let child = &self.nodes[c];
                        plogp(if child.node_id.is_some() { child.flow } else { child.enter })
                    })
                    .sum();
                let exit = if node.parent.is_some() { plogp(node.exit) } else { 0.0 };
                plogp(node.usage) - words - exit
            })
            .sum()
    }

    /// Reverse rate of `a` within `subtree`: the exit probabilities of every
    /// module on the path except the final hop, which costs nothing.
    pub fn rev_rate(&self, subtree: TreeNodeId, a: &Address) -> Result<f64> {
        Ok(self.rev_log2(subtree, a)?.exp2())
    }

    /// Forward rate of `a` within `subtree`: enter probabilities down the
    /// path, then the target's visit probability in its module.
    pub fn forw_rate(&self, subtree: TreeNodeId, a: &Address) -> Result<f64> {
        Ok(self.forw_log2(subtree, a)?.exp2())
    }

    fn path(&self, subtree: TreeNodeId, a: &Address) -> Result<Vec<usize>> {
        if a.is_empty() {
            return Err(Error::InvalidAddress(Vec::new()));
        }
        let mut at = subtree.0;
        let mut visited = Vec::with_capacity(a.len());
        for &x in a.as_slice() {
            at = *x
                .checked_sub(1)
                .and_then(|k| self.nodes[at].children.get(k))
                .ok_or_else(|| Error::InvalidAddress(a.0.clone()))?;
            visited.push(at);
        }
        if self.nodes[at].node_id.is_none() {
            return Err(Error::InvalidAddress(a.0.clone()));
        }
        Ok(visited)
    }

    fn rev_log2(&self, subtree: TreeNodeId, a: &Address) -> Result<f64> {
        let visited = self.path(subtree, a)?;
        let factors = visited[..visited.len() - 1].iter().map(|&m| self.exit_probability(m));
        Ok(log2_product(factors, visited.len() - 1))
    }

    fn forw_log2(&self, subtree: TreeNodeId, a: &Address) -> Result<f64> {
        let visited = self.path(subtree, a)?;
        let factors = visited.iter().map(|&c| self.codeword_probability(c));
        Ok(log2_product(factors, visited.len()))
    }

    fn similarity_log2(&self, u: NodeId, v: NodeId) -> Result<f64> {
        if u == v {
            return Err(Error::SelfPair(u));
        }
        let (au, av) = (self.addr(u)?, self.addr(v)?);
        let prefix = longest_common_prefix(&au, &av)?;
        let sub = self.subtree(&prefix)?;
        let ru = au.strip_prefix(&prefix).expect("prefix of u");
        let rv = av.strip_prefix(&prefix).expect("prefix of v");
        Ok(self.rev_log2(sub, &ru)? + self.forw_log2(sub, &rv)?)
    }

    /// Rate of the coding-tree path from `u` to `v`, in [0, 1].
    pub fn mapsim(&self, u: NodeId, v: NodeId) -> Result<f64> {
        Ok(self.similarity_log2(u, v)?.exp2())
    }

    /// `-log2(mapsim(u, v))` in bits; infinite when the path has rate zero.
    pub fn description_length(&self, u: NodeId, v: NodeId) -> Result<f64> {
        let bits = -self.similarity_log2(u, v)?;
        Ok(if bits == 0.0 { 0.0 } else { bits })
    }

    /// Leaves in depth-first order with their addresses and visit rates.
    pub fn leaves(&self) -> Vec<(NodeId, Address, f64)> {
        let mut out = Vec::with_capacity(self.leaves.len());
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if let Some(id) = node.node_id {
                out.push((id, self.address_of(i), node.flow));
            }
            stack.extend(node.children.iter().rev());
        }
        out
    }

    /// Writes `path flow "name" node_id` lines in depth-first order.
    pub fn write_tree<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "# codelength {:.6} bits", self.codelength())?;
        writeln!(sink, "# path flow name node_id")?;
        for (id, addr, flow) in self.leaves() {
            writeln!(sink, "{addr} {flow} \"{id}\" {id}")?;
        }
        Ok(())
    }

    /// Reads a tree file and rebuilds every rate from `flow`; the flow
    /// column is informational only.
    pub fn parse_tree<R: BufRead>(source: R, flow: &FlowNetwork) -> Result<Self> {
        let mut paths: Vec<Option<Vec<usize>>> = vec![None; flow.node_count()];
        let mut full_paths: HashSet<Vec<usize>> = HashSet::new();
        let mut prefixes: HashSet<Vec<usize>> = HashSet::new();
        for (lineno, line) in source.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (path, node_id) = parse_tree_line(trimmed, lineno)?;
            let bad = |message: String| Error::Parse { line: lineno, message };
            if full_paths.contains(&path) || prefixes.contains(&path) {
                return Err(bad(format!("path {} is already in use", Address(path))));
            }
            for depth in 1..path.len() {
                if full_paths.contains(&path[..depth]) {
                    return Err(bad(format!("path {} passes through a leaf", Address(path))));
                }
                prefixes.insert(path[..depth].to_vec());
            }
            let index = flow.index_of(node_id).ok_or_else(|| bad(format!("node {node_id} is not in the network")))?;
            if paths[index].is_some() {
                return Err(bad(format!("duplicate node {node_id}")));
            }
            full_paths.insert(path.clone());
            paths[index] = Some(path);
        }
        let paths = paths
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                p.ok_or_else(|| Error::InvalidPartition(format!("node {} is missing from the tree", flow.node_ids()[i])))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::build(flow, &Partition::new(paths)?)
    }
}

fn parse_tree_line(line: &str, lineno: usize) -> Result<(Vec<usize>, NodeId)> {
    let bad = |message: &str| Error::Parse { line: lineno, message: message.to_string() };
    let (path_tok, rest) = line.split_once(char::is_whitespace).ok_or_else(|| bad("expected path, flow, name and node id"))?;
    let path = path_tok
        .split(':')
        .map(|x| x.parse::<usize>().ok().filter(|&i| i >= 1))
        .collect::<Option<Vec<usize>>>()
        .ok_or_else(|| bad("path must be colon-separated positive integers"))?;
    let rest = rest.trim_start();
    let (flow_tok, rest) = rest.split_once(char::is_whitespace).ok_or_else(|| bad("missing name and node id"))?;
    flow_tok.parse::<f64>().map_err(|_| bad("invalid flow value"))?;
    let rest = rest.trim_start().strip_prefix('"').ok_or_else(|| bad("name must be double-quoted"))?;
    let (_, rest) = rest.split_once('"').ok_or_else(|| bad("unterminated name"))?;
    let mut tail = rest.split_whitespace();
    let node_id = tail
        .next()
        .and_then(|t| t.parse::<NodeId>().ok())
        .ok_or_else(|| bad("invalid node id"))?;
    if tail.next().is_some() {
        return Err(bad("trailing fields"));
    }
    Ok((path, node_id))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn log2_product<I: Iterator<Item = f64>>(factors: I, count: usize) -> f64 {
    if count > LOG_SPACE_FACTORS {
        factors.map(f64::log2).sum()
    } else {
        factors.product::<f64>().log2()
    }
}

/// Assembles a coding tree from explicit rates. A module's codebook usage is
/// its exit rate plus the rates of all codewords it holds.
#[derive(Debug)]
pub struct CodingTreeBuilder {
    nodes: Vec<TreeNode>,
}

impl Default for CodingTreeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl CodingTreeBuilder {
    pub fn new() -> Self {
        let root = TreeNode {
            parent: None,
            children: Vec::new(),
            position: 0,
            node_id: None,
            flow: 0.0,
            enter: 0.0,
            exit: 0.0,
            usage: 0.0,
        };
        Self { nodes: vec![root] }
    }

    pub fn root(&self) -> TreeNodeId {
        TreeNodeId(0)
    }

    fn attach(&mut self, parent: TreeNodeId, node: TreeNode) -> Result<TreeNodeId> {
        let p = self.nodes.get(parent.0).ok_or(Error::InvalidAddress(Vec::new()))?;
        if p.node_id.is_some() {
            return Err(Error::InvalidPartition("leaves cannot have children".into()));
        }
        let id = self.nodes.len();
        let position = p.children.len() + 1;
        self.nodes.push(TreeNode { parent: Some(parent.0), position, ..node });
        self.nodes[parent.0].children.push(id);
        Ok(TreeNodeId(id))
    }

    pub fn add_module(&mut self, parent: TreeNodeId, enter: f64, exit: f64) -> Result<TreeNodeId> {
        if !(enter >= 0.0 && exit >= 0.0) {
            return Err(Error::InvalidInput("rates must be non-negative".into()));
        }
        let node = TreeNode { parent: None, children: Vec::new(), position: 0, node_id: None, flow: 0.0, enter, exit, usage: 0.0 };
        self.attach(parent, node)
    }

    pub fn add_leaf(&mut self, parent: TreeNodeId, node_id: NodeId, flow: f64) -> Result<TreeNodeId> {
        if !(flow >= 0.0) {
            return Err(Error::InvalidInput("rates must be non-negative".into()));
        }
        let node = TreeNode { parent: None, children: Vec::new(), position: 0, node_id: Some(node_id), flow, enter: 0.0, exit: 0.0, usage: 0.0 };
        self.attach(parent, node)
    }

    pub fn build(mut self) -> Result<CodingTree> {
        let mut leaves = HashMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(id) = n.node_id {
                if leaves.insert(id, i).is_some() {
                    return Err(Error::InvalidPartition(format!("duplicate node {id}")));
                }
            } else if n.children.is_empty() {
                return Err(Error::InvalidPartition("empty module".into()));
            }
        }
        // children always come after their parent, so a reverse pass sees them first
        for i in (0..self.nodes.len()).rev() {
            if self.nodes[i].node_id.is_some() {
                continue;
            }
            let (mut flow, mut words) = (0.0, 0.0);
            for &c in &self.nodes[i].children {
                let child = &self.nodes[c];
                flow += child.flow;
                words += if child.node_id.is_some() { child.flow } else { child.enter };
            }
            let node = &mut self.nodes[i];
            node.flow = flow;
            if node.parent.is_none() {
                node.exit = 0.0;
                node.enter = 0.0;
            }
            node.usage = words + node.exit;
        }
        Ok(CodingTree { nodes: self.nodes, leaves })
    }
}
