//! Two-level map equation minimization: greedy local moving with
//! incremental codelength updates, repeated on aggregated networks, over
//! independent seeded trials.
//!
//! For a two-level partition the map equation expands to
//!
//! ```text
//! L = plogp(Σ enter_m) − Σ plogp(enter_m) − Σ plogp(exit_m)
//!     + Σ plogp(exit_m + flow_m) − Σ_u plogp(p_u)
//! ```
//!
//! so a node move only touches the two affected modules and the total
//! enter rate.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::FlowNetwork;
use crate::mapeq::{plogp, Partition};
use crate::rng::stream_rng;

/// Smallest codelength reduction that counts as an improving move.
const MIN_IMPROVEMENT: f64 = 1e-12;
/// Safety cap on sweeps per aggregation level.
const MAX_SWEEPS: usize = 500;

/// Flow network at one aggregation level. Intra-node links of aggregated
/// nodes are dropped since they never cross a module boundary.
#[derive(Debug, Clone)]
struct LevelNetwork {
    flow: Vec<f64>,
    out: Vec<Vec<(usize, f64)>>,
    inc: Vec<Vec<(usize, f64)>>,
    out_total: Vec<f64>,
    in_total: Vec<f64>,
    member_plogp: Vec<f64>,
}

impl LevelNetwork {
    fn from_flow(flow: &FlowNetwork) -> Self {
        let n = flow.node_count();
        let out: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|u| flow.out_links(u).iter().copied().filter(|&(v, _)| v != u).collect())
            .collect();
        let inc: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|u| flow.in_links(u).iter().copied().filter(|&(v, _)| v != u).collect())
            .collect();
        Self::assemble(flow.node_flow().to_vec(), out, inc, flow.node_flow().iter().map(|&p| plogp(p)).collect())
    }

    fn assemble(flow: Vec<f64>, out: Vec<Vec<(usize, f64)>>, inc: Vec<Vec<(usize, f64)>>, member_plogp: Vec<f64>) -> Self {
        let out_total = out.iter().map(|l| l.iter().map(|&(_, f)| f).sum()).collect();
        let in_total = inc.iter().map(|l| l.iter().map(|&(_, f)| f).sum()).collect();
        Self { flow, out, inc, out_total, in_total, member_plogp }
    }

    fn len(&self) -> usize {
        self.flow.len()
    }

    /// Collapses each module of `module_of` (labels `0..k`) into one node.
    fn aggregate(&self, module_of: &[usize], k: usize) -> Self {
        let mut flow = vec![0.0; k];
        let mut member_plogp = vec![0.0; k];
        let mut links: Vec<(usize, usize, f64)> = Vec::new();
        for u in 0..self.len() {
            let mu = module_of[u];
            flow[mu] += self.flow[u];
            member_plogp[mu] += self.member_plogp[u];
            for &(v, f) in &self.out[u] {
                let mv = module_of[v];
                if mu != mv {
                    links.push((mu, mv, f));
                }
            }
        }
        links.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out = vec![Vec::new(); k];
        let mut inc = vec![Vec::new(); k];
        let mut i = 0;
        while i < links.len() {
            let (s, t, mut f) = links[i];
            i += 1;
            while i < links.len() && links[i].0 == s && links[i].1 == t {
                f += links[i].2;
                i += 1;
            }
            out[s].push((t, f));
            inc[t].push((s, f));
        }
        Self::assemble(flow, out, inc, member_plogp)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModuleStats {
    pub flow: f64,
    pub enter: f64,
    pub exit: f64,
    pub members: usize,
    /// Σ p_u log2 p_u over the leaf nodes inside the module.
    pub member_plogp: f64,
}

impl ModuleStats {
    /// `p_m = exit + Σ p_u`.
    pub fn usage(&self) -> f64 {
        self.exit + self.flow
    }
}

/// Destination of a node move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveTarget {
    Module(usize),
    NewModule,
}

/// Module assignment with per-module aggregates and the cached codelength.
#[derive(Debug, Clone)]
pub struct SearchState {
    net: LevelNetwork,
    module_of: Vec<usize>,
    modules: Vec<ModuleStats>,
    free: Vec<usize>,
    node_plogp: f64,
    sum_enter: f64,
    sum_plogp_enter: f64,
    sum_plogp_exit: f64,
    sum_plogp_usage: f64,
    codelength: f64,
    // per-module scratch for neighbour flow accumulation
    out_to: Vec<f64>,
    in_from: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl SearchState {
    /// State for `flow` with node `u` in module `assignment[u]`. Labels must
    /// be below the node count.
    pub fn new(flow: &FlowNetwork, assignment: &[usize]) -> Result<Self> {
        if assignment.len() != flow.node_count() {
            return Err(Error::InvalidPartition(format!(
                "assignment covers {} nodes but the network has {}",
                assignment.len(),
                flow.node_count()
            )));
        }
        if let Some(&m) = assignment.iter().find(|&&m| m >= assignment.len()) {
            return Err(Error::InvalidPartition(format!("module label {m} out of range")));
        }
        let net = LevelNetwork::from_flow(flow);
        let node_plogp = net.member_plogp.iter().sum();
        Ok(Self::with_network(net, assignment.to_vec(), node_plogp))
    }

    /// Every node in its own module.
    pub fn singletons(flow: &FlowNetwork) -> Self {
        let assignment: Vec<usize> = (0..flow.node_count()).collect();
        Self::new(flow, &assignment).expect("singleton labels are in range")
    }

    fn with_network(net: LevelNetwork, module_of: Vec<usize>, node_plogp: f64) -> Self {
        let n = net.len();
        let mut state = Self {
            net,
            module_of,
            modules: vec![ModuleStats::default(); n],
            free: Vec::new(),
            node_plogp,
            sum_enter: 0.0,
            sum_plogp_enter: 0.0,
            sum_plogp_exit: 0.0,
            sum_plogp_usage: 0.0,
            codelength: 0.0,
            out_to: vec![0.0; n],
            in_from: vec![0.0; n],
            seen: vec![false; n],
            touched: Vec::new(),
        };
        state.modules = state.aggregates_from_scratch();
        state.free = (0..n).rev().filter(|&m| state.modules[m].members == 0).collect();
        state.refresh_sums();
        state
    }

    pub fn codelength(&self) -> f64 {
        self.codelength
    }

    pub fn assignment(&self) -> &[usize] {
        &self.module_of
    }

    pub fn module_stats(&self, module: usize) -> Option<&ModuleStats> {
        self.modules.get(module).filter(|m| m.members > 0)
    }

    pub fn module_count(&self) -> usize {
        self.modules.iter().filter(|m| m.members > 0).count()
    }

    pub fn node_count(&self) -> usize {
        self.net.len()
    }

    /// Module aggregates recomputed from the assignment.
    pub fn aggregates_from_scratch(&self) -> Vec<ModuleStats> {
        let mut modules = vec![ModuleStats::default(); self.net.len()];
        for u in 0..self.net.len() {
            let m = &mut modules[self.module_of[u]];
            m.flow += self.net.flow[u];
            m.members += 1;
            m.member_plogp += self.net.member_plogp[u];
            for &(v, f) in &self.net.out[u] {
                if self.module_of[v] != self.module_of[u] {
                    modules[self.module_of[u]].exit += f;
                    modules[self.module_of[v]].enter += f;
                }
            }
        }
        modules
    }

    /// Codelength recomputed from freshly aggregated module statistics.
    pub fn codelength_from_scratch(&self) -> f64 {
        let modules = self.aggregates_from_scratch();
        let live = modules.iter().filter(|m| m.members > 0);
        let sum_enter: f64 = live.clone().map(|m| m.enter).sum();
        plogp(sum_enter)
            - live.clone().map(|m| plogp(m.enter) + plogp(m.exit) - plogp(m.usage())).sum::<f64>()
            - self.node_plogp
    }

    fn refresh_sums(&mut self) {
        let live = self.modules.iter().filter(|m| m.members > 0);
        self.sum_enter = live.clone().map(|m| m.enter).sum();
        self.sum_plogp_enter = live.clone().map(|m| plogp(m.enter)).sum();
        self.sum_plogp_exit = live.clone().map(|m| plogp(m.exit)).sum();
        self.sum_plogp_usage = live.map(|m| plogp(m.usage())).sum();
        self.update_codelength();
    }

    fn update_codelength(&mut self) {
        self.codelength = plogp(self.sum_enter) - self.sum_plogp_enter - self.sum_plogp_exit
            + self.sum_plogp_usage
            - self.node_plogp;
    }

    /// Flow from `u` to members of `module` and from them to `u`, excluding `u`.
    fn flows_between(&self, u: usize, module: usize) -> (f64, f64) {
        let out = self.net.out[u].iter().filter(|&&(v, _)| v != u && self.module_of[v] == module).map(|&(_, f)| f).sum();
        let inc = self.net.inc[u].iter().filter(|&&(v, _)| v != u && self.module_of[v] == module).map(|&(_, f)| f).sum();
        (out, inc)
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.net.len() {
            return Err(Error::InvalidInput(format!("node index {node} out of range")));
        }
        Ok(())
    }

    /// Resolves a target to an existing module (`Some`) or a fresh one
    /// (`None`). Moving a node that is alone into a fresh module resolves to
    /// its own module since that is only a relabelling.
    fn resolve_target(&self, node: usize, target: MoveTarget) -> Result<Option<usize>> {
        match target {
            MoveTarget::NewModule if self.modules[self.module_of[node]].members == 1 => {
                Ok(Some(self.module_of[node]))
            }
            MoveTarget::Module(m) if self.module_stats(m).is_some() => Ok(Some(m)),
            MoveTarget::Module(m) => Err(Error::InvalidInput(format!("module {m} does not exist"))),
            MoveTarget::NewModule => Ok(None),
        }
    }

    /// Codelength change if `node` moved to `target`; the state is unchanged.
    pub fn delta_codelength_move(&self, node: usize, target: MoveTarget) -> Result<f64> {
        self.check_node(node)?;
        let new = self.resolve_target(node, target)?;
        let old = self.module_of[node];
        if new == Some(old) {
            return Ok(0.0);
        }
        let (out_old, in_old) = self.flows_between(node, old);
        let (out_new, in_new) = new.map_or((0.0, 0.0), |m| self.flows_between(node, m));
        Ok(self.planned_move(node, new, out_old, in_old, out_new, in_new).delta)
    }

    /// Applies a move and returns the codelength change.
    pub fn apply_move(&mut self, node: usize, target: MoveTarget) -> Result<f64> {
        self.check_node(node)?;
        let new = self.resolve_target(node, target)?;
        if new == Some(self.module_of[node]) {
            return Ok(0.0);
        }
        let old = self.module_of[node];
        let (out_old, in_old) = self.flows_between(node, old);
        let (out_new, in_new) = new.map_or((0.0, 0.0), |m| self.flows_between(node, m));
        let plan = self.planned_move(node, new, out_old, in_old, out_new, in_new);
        self.commit(node, plan);
        Ok(plan.delta)
    }

    fn planned_move(&self, u: usize, new: Option<usize>, out_old: f64, in_old: f64, out_new: f64, in_new: f64) -> Plan {
        let p = self.net.flow[u];
        let (ou, iu) = (self.net.out_total[u], self.net.in_total[u]);
        let old = self.module_of[u];
        let o = self.modules[old];
        let n = new.map_or(ModuleStats::default(), |m| self.modules[m]);

        let old_after = if o.members == 1 {
            ModuleStats::default()
        } else {
            ModuleStats {
                flow: (o.flow - p).max(0.0),
                enter: (o.enter - (iu - in_old) + out_old).max(0.0),
                exit: (o.exit - (ou - out_old) + in_old).max(0.0),
                members: o.members - 1,
                member_plogp: o.member_plogp - self.net.member_plogp[u],
            }
        };
        let new_after = ModuleStats {
            flow: n.flow + p,
            enter: (n.enter + (iu - in_new) - out_new).max(0.0),
            exit: (n.exit + (ou - out_new) - in_new).max(0.0),
            members: n.members + 1,
            member_plogp: n.member_plogp + self.net.member_plogp[u],
        };
        let sum_enter = self.sum_enter - o.enter - n.enter + old_after.enter + new_after.enter;
        let d_enter = plogp(old_after.enter) + plogp(new_after.enter) - plogp(o.enter) - plogp(n.enter);
        let d_exit = plogp(old_after.exit) + plogp(new_after.exit) - plogp(o.exit) - plogp(n.exit);
        let d_usage = plogp(old_after.usage()) + plogp(new_after.usage()) - plogp(o.usage()) - plogp(n.usage());
        let delta = plogp(sum_enter) - plogp(self.sum_enter) - d_enter - d_exit + d_usage;
        Plan { new, old_after, new_after, sum_enter, d_enter, d_exit, d_usage, delta }
    }

    fn commit(&mut self, u: usize, plan: Plan) {
        let old = self.module_of[u];
        let new = match plan.new {
            Some(m) => m,
            None => self.free.pop().expect("a free module slot exists while some module has two members"),
        };
        self.modules[old] = plan.old_after;
        self.modules[new] = plan.new_after;
        if plan.old_after.members == 0 {
            self.free.push(old);
        }
        self.module_of[u] = new;
        self.sum_enter = plan.sum_enter;
        self.sum_plogp_enter += plan.d_enter;
        self.sum_plogp_exit += plan.d_exit;
        self.sum_plogp_usage += plan.d_usage;
        self.update_codelength();
    }

    /// Sweeps over nodes in random order, moving each to the neighbouring
    /// module with the largest codelength reduction, until a sweep makes no
    /// move. Returns the number of moves. `trace` receives the codelength
    /// after every accepted move.
    fn local_moving<R: Rng>(&mut self, rng: &mut R, mut trace: Option<&mut Vec<f64>>) -> usize {
        let n = self.net.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut total_moves = 0;
        for _ in 0..MAX_SWEEPS {
            order.shuffle(rng);
            let mut moves = 0;
            for &u in &order {
                for &(v, f) in &self.net.out[u] {
                    let m = self.module_of[v];
                    if !self.seen[m] {
                        self.seen[m] = true;
                        self.touched.push(m);
                    }
                    self.out_to[m] += f;
                }
                for &(v, f) in &self.net.inc[u] {
                    let m = self.module_of[v];
                    if !self.seen[m] {
                        self.seen[m] = true;
                        self.touched.push(m);
                    }
                    self.in_from[m] += f;
                }
                let old = self.module_of[u];
                let (out_old, in_old) = (self.out_to[old], self.in_from[old]);
                let mut best: Option<Plan> = None;
                let mut best_module = usize::MAX;
                for &m in &self.touched {
                    if m == old {
                        continue;
                    }
                    let plan = self.planned_move(u, Some(m), out_old, in_old, self.out_to[m], self.in_from[m]);
                    let better = match &best {
                        None => true,
                        Some(b) => plan.delta < b.delta || (plan.delta == b.delta && m < best_module),
                    };
                    if better {
                        best = Some(plan);
                        best_module = m;
                    }
                }
                for &m in &self.touched {
                    self.out_to[m] = 0.0;
                    self.in_from[m] = 0.0;
                    self.seen[m] = false;
                }
                self.touched.clear();
                if let Some(plan) = best.filter(|p| p.delta < -MIN_IMPROVEMENT) {
                    self.commit(u, plan);
                    moves += 1;
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(self.codelength);
                    }
                }
            }
            // drop accumulated rounding from the running sums
            self.refresh_sums();
            total_moves += moves;
            if moves == 0 {
                break;
            }
        }
        total_moves
    }

    /// Relabels live modules to `0..k` in order of first appearance.
    fn compact_labels(&self) -> (Vec<usize>, usize) {
        let mut relabel = vec![usize::MAX; self.net.len()];
        let mut k = 0;
        let labels = self
            .module_of
            .iter()
            .map(|&m| {
                if relabel[m] == usize::MAX {
                    relabel[m] = k;
                    k += 1;
                }
                relabel[m]
            })
            .collect();
        (labels, k)
    }

    /// Two-level partition of the current assignment with modules ordered by
    /// decreasing flow.
    pub fn partition(&self) -> Partition {
        ordered_partition(&self.net.flow, &self.module_of)
    }
}

#[derive(Debug, Clone, Copy)]
struct Plan {
    new: Option<usize>,
    old_after: ModuleStats,
    new_after: ModuleStats,
    sum_enter: f64,
    d_enter: f64,
    d_exit: f64,
    d_usage: f64,
    delta: f64,
}

/// Result of a single trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub modules: Vec<usize>,
    pub module_count: usize,
    pub codelength: f64,
}

/// One trial: local moving from singletons, then repeated aggregation until
/// a level makes no merge.
fn run_trial<R: Rng>(flow: &FlowNetwork, rng: &mut R, mut trace: Option<&mut Vec<f64>>) -> TrialOutcome {
    let mut state = SearchState::singletons(flow);
    if let Some(t) = trace.as_deref_mut() {
        t.push(state.codelength);
    }
    let n = flow.node_count();
    let mut leaf_module: Vec<usize> = (0..n).collect();
    loop {
        state.local_moving(rng, trace.as_deref_mut());
        let (labels, k) = state.compact_labels();
        for m in leaf_module.iter_mut() {
            *m = labels[*m];
        }
        if k == state.node_count() || k == 1 {
            let codelength = state.codelength_from_scratch();
            return TrialOutcome { modules: leaf_module, module_count: k, codelength };
        }
        let net = state.net.aggregate(&labels, k);
        let node_plogp = state.node_plogp;
        state = SearchState::with_network(net, (0..k).collect(), node_plogp);
    }
}

/// Best partition found by the two-level search.
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub partition: Partition,
    pub codelength: f64,
    pub module_count: usize,
    /// Codelength of the one-module partition.
    pub one_level_codelength: f64,
}

/// Runs `trials` independent searches and keeps the shortest codelength
/// (ties by trial index). The one-module partition wins unless a modular
/// solution is strictly shorter.
pub fn optimize_two_level(flow: &FlowNetwork, seed: u64, trials: usize) -> Result<OptimizeResult> {
    if trials == 0 {
        return Err(Error::InvalidInput("at least one trial is required".into()));
    }
    if flow.node_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(flow, &mut stream_rng(seed, t as u64), None))
        .collect();
    let mut best = &outcomes[0];
    for o in &outcomes[1..] {
        if o.codelength < best.codelength {
            best = o;
        }
    }
    let one_level = -flow.node_flow().iter().map(|&p| plogp(p)).sum::<f64>();
    if best.module_count > 1 && best.codelength < one_level - MIN_IMPROVEMENT {
        Ok(OptimizeResult {
            partition: ordered_partition(flow.node_flow(), &best.modules),
            codelength: best.codelength,
            module_count: best.module_count,
            one_level_codelength: one_level,
        })
    } else {
        Ok(OptimizeResult {
            partition: ordered_one_module(flow.node_flow()),
            codelength: one_level,
            module_count: 1,
            one_level_codelength: one_level,
        })
    }
}

fn by_flow_desc(flow: &[f64]) -> impl Fn(&usize, &usize) -> std::cmp::Ordering + '_ {
    move |&a, &b| flow[b].total_cmp(&flow[a]).then(a.cmp(&b))
}

/// Modules by decreasing flow, members by decreasing visit rate.
fn ordered_partition(node_flow: &[f64], modules: &[usize]) -> Partition {
    let k = modules.iter().max().map_or(0, |&m| m + 1);
    let mut module_flow = vec![0.0; k];
    let mut module_first = vec![usize::MAX; k];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (u, &m) in modules.iter().enumerate() {
        module_flow[m] += node_flow[u];
        module_first[m] = module_first[m].min(u);
        members[m].push(u);
    }
    let mut order: Vec<usize> = (0..k).filter(|&m| !members[m].is_empty()).collect();
    order.sort_by(|&a, &b| module_flow[b].total_cmp(&module_flow[a]).then(module_first[a].cmp(&module_first[b])));
    let mut paths = vec![Vec::new(); modules.len()];
    for (rank, &m) in order.iter().enumerate() {
        let mut list = std::mem::take(&mut members[m]);
        list.sort_by(by_flow_desc(node_flow));
        for (slot, &u) in list.iter().enumerate() {
            paths[u] = vec![rank + 1, slot + 1];
        }
    }
    Partition::new(paths).expect("distinct module and slot indices")
}

/// One-module partition with nodes ordered by decreasing visit rate.
pub fn ordered_one_module(node_flow: &[f64]) -> Partition {
    let mut order: Vec<usize> = (0..node_flow.len()).collect();
    order.sort_by(by_flow_desc(node_flow));
    let mut paths = vec![Vec::new(); node_flow.len()];
    for (slot, &u) in order.iter().enumerate() {
        paths[u] = vec![slot + 1];
    }
    Partition::new(paths).expect("distinct slots")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{visit_rates_directed, visit_rates_undirected, FlowConfig};
    use crate::graph::{parse_edge_list_str, Graph};
    use crate::mapeq::codelength;

    fn two_cliques() -> Graph {
        let mut text = String::new();
        for base in [0, 5] {
            for i in 0..5 {
                for j in i + 1..5 {
                    text.push_str(&format!("{} {}\n", base + i, base + j));
                }
            }
        }
        text.push_str("4 5\n");
        parse_edge_list_str(&text, false).unwrap()
    }

    #[test]
    fn stay_is_zero() {
        let f = visit_rates_undirected(&two_cliques()).unwrap();
        let state = SearchState::singletons(&f);
        assert_eq!(state.delta_codelength_move(3, MoveTarget::Module(3)).unwrap(), 0.0);
    }

    #[test]
    fn delta_matches_recompute_on_cliques() {
        let f = visit_rates_undirected(&two_cliques()).unwrap();
        let mut labels: Vec<usize> = vec![0, 0, 0, 0, 9, 5, 5, 5, 5, 5];
        let state = SearchState::new(&f, &labels).unwrap();
        // node 4 alone; move it into the module holding its clique
        let d = state.delta_codelength_move(4, MoveTarget::Module(0)).unwrap();
        let before = codelength(&f, &Partition::from_modules(&labels)).unwrap();
        labels[4] = 0;
        let after = codelength(&f, &Partition::from_modules(&labels)).unwrap();
        assert!((d - (after - before)).abs() < 1e-12);
        assert!(d < 0.0);
    }

    #[test]
    fn cached_codelength_matches_mapeq() {
        let f = visit_rates_undirected(&two_cliques()).unwrap();
        let labels = [0, 0, 1, 1, 1, 2, 2, 2, 2, 0];
        let state = SearchState::new(&f, &labels).unwrap();
        let full = codelength(&f, &Partition::from_modules(&labels)).unwrap();
        assert!((state.codelength() - full).abs() < 1e-12);
    }

    #[test]
    fn new_module_move() {
        let f = visit_rates_undirected(&two_cliques()).unwrap();
        let labels = vec![0; 10];
        let mut state = SearchState::new(&f, &labels).unwrap();
        let d = state.delta_codelength_move(7, MoveTarget::NewModule).unwrap();
        let applied = state.apply_move(7, MoveTarget::NewModule).unwrap();
        assert_eq!(d, applied);
        assert_eq!(state.module_count(), 2);
        let full = codelength(&f, &Partition::from_modules(state.assignment())).unwrap();
        assert!((state.codelength() - full).abs() < 1e-12);
    }

    #[test]
    fn unknown_node_or_module() {
        let f = visit_rates_undirected(&two_cliques()).unwrap();
        let state = SearchState::new(&f, &[0; 10]).unwrap();
        assert!(state.delta_codelength_move(10, MoveTarget::NewModule).is_err());
        assert!(state.delta_codelength_move(1, MoveTarget::Module(4)).is_err());
        assert!(SearchState::new(&f, &[0; 9]).is_err());
        assert!(SearchState::new(&f, &[10; 10]).is_err());
    }

    #[test]
    fn finds_two_cliques() {
        let f = visit_rates_undirected(&two_cliques()).unwrap();
        let res = optimize_two_level(&f, 1, 10).unwrap();
        assert_eq!(res.module_count, 2);
        let top: Vec<usize> = res.partition.paths().iter().map(|p| p[0]).collect();
        assert!(top[..5].iter().all(|&m| m == top[0]));
        assert!(top[5..].iter().all(|&m| m == top[5]));
        assert_ne!(top[0], top[5]);
        let full = codelength(&f, &res.partition).unwrap();
        assert!((full - res.codelength).abs() < 1e-12);
    }

    #[test]
    fn triangle_stays_whole() {
        let f = visit_rates_undirected(&parse_edge_list_str("1 2\n2 3\n3 1\n", false).unwrap()).unwrap();
        let res = optimize_two_level(&f, 0, 5).unwrap();
        assert_eq!(res.module_count, 1);
        assert_eq!(res.partition.depth(), 1);
        assert!((res.codelength - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn trace_is_monotone_and_state_consistent() {
        let g = crate::graph::generate_crossed_k_regular(40, 3, 2).unwrap();
        let f = visit_rates_undirected(&g).unwrap();
        let mut trace = Vec::new();
        let out = run_trial(&f, &mut stream_rng(4, 0), Some(&mut trace));
        assert!(trace.windows(2).all(|w| w[1] < w[0] + 1e-12), "{trace:?}");
        let full = codelength(&f, &Partition::from_modules(&out.modules)).unwrap();
        assert!((out.codelength - full).abs() < 1e-9);
    }

    #[test]
    fn deterministic_and_bounded() {
        let g = parse_edge_list_str("1 2\n2 3\n3 1\n3 4\n4 5\n5 6\n6 4\n6 7\n7 1\n", true).unwrap();
        let f = visit_rates_directed(&g, &FlowConfig::default()).unwrap();
        let a = optimize_two_level(&f, 9, 8).unwrap();
        let b = optimize_two_level(&f, 9, 8).unwrap();
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.codelength, b.codelength);
        let singles: Vec<usize> = (0..f.node_count()).collect();
        let l_singles = codelength(&f, &Partition::from_modules(&singles)).unwrap();
        assert!(a.codelength <= a.one_level_codelength + 1e-12);
        assert!(a.codelength <= l_singles + 1e-12);
    }

    #[test]
    fn zero_trials_rejected() {
        let f = visit_rates_undirected(&two_cliques()).unwrap();
        assert!(optimize_two_level(&f, 0, 0).is_err());
    }
}
