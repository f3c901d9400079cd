//! Bounded canonical reachability: budgets, canonical forms and worklist
//! saturation with a parent map.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::hash::{Hash, Hasher};
use thiserror::Error;

use crate::net::{Configuration, Firing, Net, PlaceIx, StackFrame, Token};
use crate::types::{RegionLabel, SubstRecord, ValueId};
use crate::unify::InstRecord;

/// Per-place token caps and the stack depth cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bounds {
    /// Cap for places without an override.
    pub tokens: usize,
    pub per_place: BTreeMap<PlaceIx, usize>,
    pub depth: usize,
    /// Hard cap on graph nodes; `None` explores everything.
    pub max_states: Option<usize>,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { tokens: 2, per_place: BTreeMap::new(), depth: 4, max_states: Some(200_000) }
    }
}

impl Bounds {
    pub fn new(tokens: usize, depth: usize) -> Self {
        Bounds { tokens, depth, ..Bounds::default() }
    }

    pub fn cap(&self, p: PlaceIx) -> usize {
        self.per_place.get(&p).copied().unwrap_or(self.tokens)
    }
}

pub fn budget_ok(cfg: &Configuration, bounds: &Bounds) -> bool {
    cfg.stack.len() <= bounds.depth && cfg.marking.iter().all(|(p, m)| m.len() <= bounds.cap(*p))
}

/// Maps concrete ids and labels to canonical ones. Labels missing from the
/// map have ended and collapse to [`RegionLabel::ENDED`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Renaming {
    pub values: BTreeMap<ValueId, ValueId>,
    pub labels: BTreeMap<RegionLabel, RegionLabel>,
}

impl Renaming {
    pub fn value(&self, v: ValueId) -> ValueId {
        self.values.get(&v).copied().unwrap_or(v)
    }

    pub fn label(&self, l: RegionLabel) -> RegionLabel {
        self.labels.get(&l).copied().unwrap_or(RegionLabel::ENDED)
    }

    pub fn subst(&self, s: &SubstRecord) -> SubstRecord {
        SubstRecord {
            types: s.types.clone(),
            lifetimes: s.lifetimes.iter().map(|(k, v)| (k.clone(), self.label(*v))).collect(),
        }
    }

    pub fn token(&self, t: &Token) -> Token {
        Token { value: self.value(t.value), ctx: self.subst(&t.ctx) }
    }

    pub fn frame(&self, f: &StackFrame) -> StackFrame {
        match *f {
            StackFrame::Freeze(o) => StackFrame::Freeze(self.value(o)),
            StackFrame::Shr { owner, reference, region } => {
                StackFrame::Shr { owner: self.value(owner), reference: self.value(reference), region: self.label(region) }
            }
            StackFrame::Mut { owner, reference, region } => {
                StackFrame::Mut { owner: self.value(owner), reference: self.value(reference), region: self.label(region) }
            }
        }
    }

    pub fn config(&self, cfg: &Configuration) -> Configuration {
        let mut out = Configuration::empty();
        for (p, t) in cfg.tokens() {
            out.add_token(p, self.token(t));
        }
        out.stack = cfg.stack.iter().map(|f| self.frame(f)).collect();
        out
    }

    /// The firing as seen after renaming its source configuration. Fresh ids
    /// are recomputed by the firing itself and are left alone.
    pub fn firing(&self, f: &Firing) -> Firing {
        Firing {
            transition: f.transition,
            inputs: f.inputs.iter().map(|(p, t)| (*p, self.token(t))).collect(),
            inst: InstRecord { subst: self.subst(&f.inst.subst), ..f.inst.clone() },
        }
    }
}

/// Canonical representative of the configuration's equivalence class.
pub fn canon(cfg: &Configuration) -> Configuration {
    canon_with_renaming(cfg).0
}

/// Regions are numbered in the order they appear scanning the stack from
/// the top; regions no longer on the stack are collapsed. Values named on the
/// stack are numbered in the same scan, the remaining tokens by place and
/// renamed context.
pub fn canon_with_renaming(cfg: &Configuration) -> (Configuration, Renaming) {
    let mut r = Renaming::default();
    for f in &cfg.stack {
        if let Some(l) = f.region() {
            let next = RegionLabel(r.labels.len() as u32);
            r.labels.entry(l).or_insert(next);
        }
    }
    let mut next_value = 0u32;
    let mut assign = |r: &mut Renaming, v: ValueId| {
        if let alloc::collections::btree_map::Entry::Vacant(e) = r.values.entry(v) {
            e.insert(ValueId(next_value));
            next_value += 1;
        }
    };
    for f in &cfg.stack {
        for v in f.values() {
            assign(&mut r, v);
        }
    }
    let mut rest: Vec<(PlaceIx, SubstRecord, ValueId)> = cfg
        .tokens()
        .filter(|(_, t)| !r.values.contains_key(&t.value))
        .map(|(p, t)| (p, r.subst(&t.ctx), t.value))
        .collect();
    rest.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    for (_, _, v) in rest {
        assign(&mut r, v);
    }
    (r.config(cfg), r)
}

pub fn config_hash(cfg: &Configuration) -> u64 {
    let mut h = fnv::FnvHasher::default();
    cfg.hash(&mut h);
    h.finish()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    /// Firing in the coordinates of the canonical source node.
    pub firing: Firing,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error("state cap of {cap} nodes exceeded")]
    BudgetExceeded { cap: usize },
    #[error("node {0} is not in the graph")]
    NodeUnknown(usize),
}

/// Canonical nodes in discovery order, edges, and for each non-root node the
/// edge that first discovered it.
#[derive(Clone, Debug, Default)]
pub struct ReachGraph {
    pub nodes: Vec<Configuration>,
    index: BTreeMap<Configuration, usize>,
    pub edges: Vec<Edge>,
    pub parent: Vec<Option<usize>>,
}

impl ReachGraph {
    pub fn node_of(&self, cfg: &Configuration) -> Option<usize> {
        self.index.get(cfg).copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    fn insert(&mut self, cfg: Configuration, parent: Option<usize>) -> (usize, bool) {
        if let Some(&n) = self.index.get(&cfg) {
            return (n, false);
        }
        let n = self.nodes.len();
        self.index.insert(cfg.clone(), n);
        self.nodes.push(cfg);
        self.parent.push(parent);
        (n, true)
    }

    /// Edges along the parent chain from the root to `node`.
    pub fn backtrack(&self, node: usize) -> Result<Vec<&Edge>, ReachError> {
        if node >= self.nodes.len() {
            return Err(ReachError::NodeUnknown(node));
        }
        let mut out = Vec::new();
        let mut cur = node;
        while let Some(e) = self.parent[cur] {
            out.push(&self.edges[e]);
            cur = self.edges[e].from;
        }
        out.reverse();
        Ok(out)
    }

    pub fn hash(&self, node: usize) -> u64 {
        config_hash(&self.nodes[node])
    }

    /// One line per edge: source hash, transition label, target hash.
    pub fn export(&self, net: &Net) -> String {
        let mut s = String::new();
        for e in &self.edges {
            s.push_str(&format!(
                "{:016x} {} {:016x}\n",
                self.hash(e.from),
                net.transitions[e.firing.transition].label,
                self.hash(e.to)
            ));
        }
        s
    }
}

/// Breadth-first saturation from the empty configuration.
pub fn saturate(net: &Net, bounds: &Bounds) -> Result<ReachGraph, ReachError> {
    let mut g = ReachGraph::default();
    let (root, _) = g.insert(canon(&Configuration::empty()), None);
    let mut queue = VecDeque::from([root]);
    while let Some(n) = queue.pop_front() {
        let src = g.nodes[n].clone();
        for (firing, next) in net.successors(&src, true) {
            if !budget_ok(&next, bounds) {
                continue;
            }
            let edge = g.edges.len();
            let (m, fresh) = g.insert(canon(&next), Some(edge));
            g.edges.push(Edge { from: n, firing, to: m });
            if fresh {
                if bounds.max_states.is_some_and(|cap| g.nodes.len() > cap) {
                    return Err(ReachError::BudgetExceeded { cap: bounds.max_states.unwrap_or(0) });
                }
                queue.push_back(m);
            }
        }
    }
    Ok(g)
}
