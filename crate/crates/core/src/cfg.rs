//! Control-flow graphs over MiniC statement lists.
//!
//! Construction is structured: every `if` gets an explicit (possibly empty)
//! join node, every `while` a header whose true edge enters the body and
//! whose false edge leaves the loop. Node 0 is always `Entry`, node 1 `Exit`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use thiserror::Error;

use crate::frontend::{Expr, LoopId, Program, Stmt};

pub type NodeId = usize;

const UNSET: NodeId = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Entry,
    Exit,
    Basic(Vec<Stmt>),
    Branch(Expr),
    LoopHeader { cond: Expr, loop_id: LoopId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfgNode {
    pub id: NodeId,
    pub kind: NodeKind,
    /// For `Branch` and `LoopHeader`: `[true_succ, false_succ]`.
    pub successors: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopRegion {
    pub header: NodeId,
    pub body_entry: NodeId,
    /// Source of the back edge into `header`.
    pub body_exit: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub nodes: Vec<CfgNode>,
    pub entry: NodeId,
    pub exit: NodeId,
    pub loop_regions: BTreeMap<LoopId, LoopRegion>,
    /// Branch node → the join node both arms flow into.
    pub joins: BTreeMap<NodeId, NodeId>,
    /// Node id in the graph this one was extracted from, transitively back to
    /// the graph returned by [`build_cfg`]. `None` for synthetic Entry/Exit.
    pub origin: Vec<Option<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CfgError {
    #[error("node {0} is not a loop header")]
    NotALoopHeader(NodeId),
    #[error("node {0} is not a branch")]
    NotABranch(NodeId),
}

type Edge = (NodeId, usize);

struct Builder {
    nodes: Vec<CfgNode>,
    loop_regions: BTreeMap<LoopId, LoopRegion>,
    joins: BTreeMap<NodeId, NodeId>,
}

impl Builder {
    fn add(&mut self, kind: NodeKind, out_degree: usize) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(CfgNode { id, kind, successors: vec![UNSET; out_degree] });
        id
    }

    fn connect(&mut self, dangling: &[Edge], to: NodeId) {
        for &(from, slot) in dangling {
            self.nodes[from].successors[slot] = to;
        }
    }

    /// Lays out `stmts` after the `dangling` edges. `open` is a Basic node
    /// that straight-line statements may still be appended to.
    fn seq(&mut self, stmts: &[Stmt], mut dangling: Vec<Edge>, mut open: Option<NodeId>) -> Vec<Edge> {
        for s in stmts {
            match s {
                Stmt::If { cond, then_branch, else_branch } => {
                    let br = self.add(NodeKind::Branch(cond.clone()), 2);
                    self.connect(&dangling, br);
                    let mut arms = self.seq(then_branch, vec![(br, 0)], None);
                    arms.extend(self.seq(else_branch, vec![(br, 1)], None));
                    let join = self.add(NodeKind::Basic(Vec::new()), 1);
                    self.connect(&arms, join);
                    self.joins.insert(br, join);
                    dangling = vec![(join, 0)];
                    open = Some(join);
                }
                Stmt::While { cond, body, loop_id } => {
                    let header = self.add(NodeKind::LoopHeader { cond: cond.clone(), loop_id: *loop_id }, 2);
                    self.connect(&dangling, header);
                    let mut back = self.seq(body, vec![(header, 0)], None);
                    if back == [(header, 0)] {
                        let latch = self.add(NodeKind::Basic(Vec::new()), 1);
                        self.connect(&back, latch);
                        back = vec![(latch, 0)];
                    }
                    debug_assert_eq!(back.len(), 1);
                    let body_exit = back[0].0;
                    self.connect(&back, header);
                    let body_entry = self.nodes[header].successors[0];
                    self.loop_regions.insert(*loop_id, LoopRegion { header, body_entry, body_exit });
                    dangling = vec![(header, 1)];
                    open = None;
                }
                simple => {
                    if let Some(NodeKind::Basic(run)) = open.map(|b| &mut self.nodes[b].kind) {
                        run.push(simple.clone());
                    } else {
                        let b = self.add(NodeKind::Basic(vec![simple.clone()]), 1);
                        self.connect(&dangling, b);
                        dangling = vec![(b, 0)];
                        open = Some(b);
                    }
                }
            }
        }
        dangling
    }
}

/// Build the CFG of a whole program.
pub fn build_cfg(p: &Program) -> Cfg {
    build_cfg_from_stmts(&p.body)
}

/// Build the CFG of a statement list treated as a standalone program.
pub fn build_cfg_from_stmts(stmts: &[Stmt]) -> Cfg {
    let mut b = Builder { nodes: Vec::new(), loop_regions: BTreeMap::new(), joins: BTreeMap::new() };
    let entry = b.add(NodeKind::Entry, 1);
    let exit = b.add(NodeKind::Exit, 0);
    let dangling = b.seq(stmts, vec![(entry, 0)], None);
    b.connect(&dangling, exit);
    let origin = (0..b.nodes.len()).map(Some).collect();
    Cfg { nodes: b.nodes, entry, exit, loop_regions: b.loop_regions, joins: b.joins, origin }
}

impl Cfg {
    pub fn node(&self, id: NodeId) -> &CfgNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Id of `id` in the outermost graph.
    pub fn original_id(&self, id: NodeId) -> Option<NodeId> {
        self.origin[id]
    }

    pub fn count_kind(&self, pred: impl Fn(&NodeKind) -> bool) -> usize {
        self.nodes.iter().filter(|n| pred(&n.kind)).count()
    }

    /// Subgraph reachable from `start` without passing through `stop`;
    /// edges into `stop` are redirected to a fresh Exit.
    fn subgraph(&self, start: NodeId, stop: NodeId) -> Cfg {
        let mut members = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(n) = queue.pop_front() {
            if n == stop || !members.insert(n) {
                continue;
            }
            queue.extend(self.nodes[n].successors.iter().copied());
        }
        // An empty loop body is represented by a lone empty latch.
        if members.len() == 1 {
            let only = self.nodes[start].clone();
            if only.kind == NodeKind::Basic(Vec::new()) && only.successors == [stop] && self.joins.values().all(|&j| j != start) {
                members.clear();
            }
        }

        let mut remap = BTreeMap::new();
        for (i, &old) in members.iter().enumerate() {
            remap.insert(old, i + 2);
        }
        let map = |old: NodeId| if old == stop { 1 } else { remap[&old] };

        let mut nodes = vec![
            CfgNode { id: 0, kind: NodeKind::Entry, successors: vec![if members.is_empty() { 1 } else { map(start) }] },
            CfgNode { id: 1, kind: NodeKind::Exit, successors: Vec::new() },
        ];
        let mut origin = vec![None, None];
        for &old in &members {
            let n = &self.nodes[old];
            nodes.push(CfgNode { id: map(old), kind: n.kind.clone(), successors: n.successors.iter().map(|&s| map(s)).collect() });
            origin.push(self.origin[old]);
        }
        let loop_regions = self
            .loop_regions
            .iter()
            .filter(|(_, r)| members.contains(&r.header))
            .map(|(id, r)| (*id, LoopRegion { header: map(r.header), body_entry: map(r.body_entry), body_exit: map(r.body_exit) }))
            .collect();
        let joins = self
            .joins
            .iter()
            .filter(|(b, _)| members.contains(b))
            .map(|(b, j)| (map(*b), map(*j)))
            .collect();
        Cfg { nodes, entry: 0, exit: 1, loop_regions, joins, origin }
    }

    /// Check the structural invariants: degrees, dense ids, reachability.
    pub fn validate(&self) -> Result<(), String> {
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(format!("node at index {i} has id {}", n.id));
            }
            let want = match n.kind {
                NodeKind::Entry | NodeKind::Basic(_) => 1,
                NodeKind::Exit => 0,
                NodeKind::Branch(_) | NodeKind::LoopHeader { .. } => 2,
            };
            if n.successors.len() != want {
                return Err(format!("node {i} has out-degree {}, expected {want}", n.successors.len()));
            }
            if n.successors.iter().any(|&s| s >= self.nodes.len()) {
                return Err(format!("node {i} has a dangling successor"));
            }
        }
        let forward = reach(self.entry, |n| self.nodes[n].successors.clone());
        if forward.len() != self.nodes.len() {
            return Err("some node is unreachable from entry".into());
        }
        let mut preds: Vec<Vec<NodeId>> = vec![Vec::new(); self.nodes.len()];
        for n in &self.nodes {
            for &s in &n.successors {
                preds[s].push(n.id);
            }
        }
        if reach(self.exit, |n| preds[n].clone()).len() != self.nodes.len() {
            return Err("exit is not reachable from some node".into());
        }
        for (id, r) in &self.loop_regions {
            let hdr = &self.nodes[r.header];
            if !matches!(&hdr.kind, NodeKind::LoopHeader { loop_id, .. } if loop_id == id) {
                return Err(format!("loop region {id} does not point at its header"));
            }
            if hdr.successors[0] != r.body_entry || self.nodes[r.body_exit].successors[0] != r.header {
                return Err(format!("loop region {id} is inconsistent"));
            }
        }
        Ok(())
    }
}

fn reach(start: NodeId, next: impl Fn(NodeId) -> Vec<NodeId>) -> BTreeSet<NodeId> {
    let mut seen = BTreeSet::new();
    let mut stack = vec![start];
    while let Some(n) = stack.pop() {
        if seen.insert(n) {
            stack.extend(next(n));
        }
    }
    seen
}

/// The body of the loop headed by `header`, as a standalone graph whose Exit
/// stands for the back edge.
pub fn extract_loop_cfg(g: &Cfg, header: NodeId) -> Result<Cfg, CfgError> {
    match g.nodes.get(header).map(|n| &n.kind) {
        Some(NodeKind::LoopHeader { .. }) => Ok(g.subgraph(g.nodes[header].successors[0], header)),
        _ => Err(CfgError::NotALoopHeader(header)),
    }
}

/// The true and false arms of `branch`, each cut at the join node.
pub fn branch_sub_cfgs(g: &Cfg, branch: NodeId) -> Result<(Cfg, Cfg), CfgError> {
    match g.nodes.get(branch).map(|n| &n.kind) {
        Some(NodeKind::Branch(_)) => {
            let join = g.joins[&branch];
            let succ = &g.nodes[branch].successors;
            Ok((g.subgraph(succ[0], join), g.subgraph(succ[1], join)))
        }
        _ => Err(CfgError::NotABranch(branch)),
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering, nodes and edges in id order.
pub fn to_dot(g: &Cfg) -> String {
    let mut out = String::from("digraph cfg {\n  node [shape=box, fontname=\"monospace\"];\n");
    for n in &g.nodes {
        let label = match &n.kind {
            NodeKind::Entry => "entry".to_string(),
            NodeKind::Exit => "exit".to_string(),
            NodeKind::Basic(stmts) if stmts.is_empty() => "join".to_string(),
            NodeKind::Basic(stmts) => stmts.iter().map(|s| dot_escape(&s.to_string())).collect::<Vec<_>>().join("\\n"),
            NodeKind::Branch(c) => dot_escape(&format!("if ({c})")),
            NodeKind::LoopHeader { cond, loop_id } => dot_escape(&format!("while#{loop_id} ({cond})")),
        };
        let shape = match n.kind {
            NodeKind::Branch(_) | NodeKind::LoopHeader { .. } => ", shape=diamond",
            NodeKind::Entry | NodeKind::Exit => ", shape=oval",
            NodeKind::Basic(_) => "",
        };
        let _ = writeln!(out, "  n{} [label=\"{label}\"{shape}];", n.id);
    }
    for n in &g.nodes {
        let two_way = matches!(n.kind, NodeKind::Branch(_) | NodeKind::LoopHeader { .. });
        for (slot, s) in n.successors.iter().enumerate() {
            if two_way {
                let label = if slot == 0 { "true" } else { "false" };
                let _ = writeln!(out, "  n{} -> n{} [label=\"{label}\"];", n.id, s);
            } else {
                let _ = writeln!(out, "  n{} -> n{};", n.id, s);
            }
        }
    }
    out.push_str("}\n");
    out
}
