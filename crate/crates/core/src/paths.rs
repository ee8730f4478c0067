//! Region-wise path segments.
//!
//! A walk over a region's CFG collects the straight-line statements that lie
//! on the region's spine into the region's own segment, and recurses into
//! every loop body and branch arm it meets. Branch arms are rejoined at the
//! explicit join node; loops are left through the header's false edge.
//! Nested regions contribute their own segments, so the segment count grows
//! additively: one per loop, two per `if`, plus the top level.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::cfg::{branch_sub_cfgs, extract_loop_cfg, Cfg, NodeId, NodeKind};
use crate::frontend::{Expr, LoopId, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    TopLevel,
    Loop(LoopId),
    /// Branch node id in the program CFG and the arm's polarity.
    BranchArm { branch: NodeId, polarity: bool },
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::TopLevel => f.write_str("top"),
            Region::Loop(id) => write!(f, "loop{id}"),
            Region::BranchArm { branch, polarity } => write!(f, "branch{branch}.{}", if *polarity { "T" } else { "F" }),
        }
    }
}

impl Serialize for Region {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSegment {
    pub region: Region,
    /// Guards of the enclosing loops and branches, outermost first.
    pub assumed: Vec<Expr>,
    pub stmts: Vec<Stmt>,
    pub depth: usize,
    /// Program-CFG id of the header or branch node (0 for the top level);
    /// ids grow with source position.
    pub position: NodeId,
    /// Regions enclosing this one, outermost first.
    pub enclosing: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathSet {
    pub segments: Vec<PathSegment>,
    /// Straight-line statements of the top-level spine.
    pub context: Vec<Stmt>,
}

struct Walk<'a> {
    out: &'a mut Vec<PathSegment>,
}

impl Walk<'_> {
    fn region(&mut self, g: &Cfg, region: Region, position: NodeId, assumed: Vec<Expr>, depth: usize, enclosing: Vec<Region>) -> Vec<Stmt> {
        let slot = self.out.len();
        self.out.push(PathSegment { region, assumed: assumed.clone(), stmts: Vec::new(), depth, position, enclosing: enclosing.clone() });
        let mut inner_enclosing = enclosing;
        inner_enclosing.push(region);

        let mut context = Vec::new();
        let mut node = g.node(g.entry).successors[0];
        loop {
            let n = g.node(node);
            match &n.kind {
                NodeKind::Exit => break,
                NodeKind::Entry => unreachable!("entry has no predecessors"),
                NodeKind::Basic(stmts) => {
                    context.extend(stmts.iter().cloned());
                    node = n.successors[0];
                }
                NodeKind::LoopHeader { cond, loop_id } => {
                    let body = extract_loop_cfg(g, node).expect("node is a loop header");
                    let mut a = assumed.clone();
                    a.push(cond.clone());
                    let orig = g.original_id(node).unwrap_or(node);
                    self.region(&body, Region::Loop(*loop_id), orig, a, depth + 1, inner_enclosing.clone());
                    node = n.successors[1];
                }
                NodeKind::Branch(cond) => {
                    let (t, f) = branch_sub_cfgs(g, node).expect("node is a branch");
                    let orig = g.original_id(node).unwrap_or(node);
                    for (arm, polarity) in [(t, true), (f, false)] {
                        let mut a = assumed.clone();
                        a.push(if polarity { cond.clone() } else { cond.clone().negate() });
                        self.region(&arm, Region::BranchArm { branch: orig, polarity }, orig, a, depth + 1, inner_enclosing.clone());
                    }
                    node = g.joins[&node];
                }
            }
        }
        self.out[slot].stmts = context.clone();
        context
    }
}

/// Enumerate the path segments of every control region of `g`.
pub fn find_all_paths(g: &Cfg) -> PathSet {
    let mut segments = Vec::new();
    let context = Walk { out: &mut segments }.region(g, Region::TopLevel, g.entry, Vec::new(), 0, Vec::new());
    PathSet { segments, context }
}

/// Innermost first, then by source position. Stable.
pub fn order_by_priority(ps: PathSet) -> PathSet {
    let mut segments = ps.segments;
    segments.sort_by(|a, b| b.depth.cmp(&a.depth).then(a.position.cmp(&b.position)));
    PathSet { segments, context: ps.context }
}

impl PathSet {
    pub fn find(&self, region: Region) -> Option<&PathSegment> {
        self.segments.iter().find(|s| s.region == region)
    }
}
