//! Goals, witness extraction and stack closure.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

use crate::net::{Capability, Configuration, Firing, Net, PlaceIx};
use crate::reach::{budget_ok, canon, canon_with_renaming, Bounds, ReachGraph};
use crate::types::{parse_type, GroundType, ParseCtx, Ty, TypeParseError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Requirement {
    pub cap: Capability,
    pub ty: GroundType,
    /// `None` for a known type outside the universe, which no configuration
    /// can hold.
    pub place: Option<PlaceIx>,
    pub at_least: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoalSpec {
    pub required: Vec<Requirement>,
    /// Closure is appended to every witness; the flag is kept for reporting.
    pub require_closed_stack: bool,
}

impl fmt::Display for GoalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.required.iter().map(|r| format!("{}:{}>={}", r.cap, r.ty, r.at_least)).collect();
        f.write_str(&parts.join(", "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum GoalError {
    #[error("goal is empty")]
    Empty,
    #[error("`{0}`: expected `<cap>:<type> >= <n>`")]
    Syntax(String),
    #[error("`{0}`: capability must be own, frz or blk")]
    Capability(String),
    #[error("`{part}`: {source}")]
    Type { part: String, source: TypeParseError },
    #[error("`{0}` names an undeclared type")]
    UnknownType(String),
    #[error("`{0}`: count must be a non-negative integer")]
    Count(String),
}

/// Splits on commas outside brackets.
fn split_top_level(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '<' | '(' | '[' => depth += 1,
            '>' if text[i + 1..].starts_with('=') => {}
            '>' | ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&text[start..]);
    out
}

/// Parses `own:u8>=1, frz:R>=1`.
pub fn parse_goal(text: &str, net: &Net) -> Result<GoalSpec, GoalError> {
    let mut required = Vec::new();
    for part in split_top_level(text) {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (cap, rest) = part.split_once(':').ok_or_else(|| GoalError::Syntax(part.into()))?;
        let cap = Capability::parse(cap.trim()).ok_or_else(|| GoalError::Capability(part.into()))?;
        let (ty, n) = rest.rsplit_once(">=").ok_or_else(|| GoalError::Syntax(part.into()))?;
        let at_least: usize = n.trim().parse().map_err(|_| GoalError::Count(part.into()))?;
        let ty = parse_type(ty.trim(), &ParseCtx::ground()).map_err(|source| GoalError::Type { part: part.into(), source })?;
        let ty = GroundType::erased(&ty).ok_or_else(|| GoalError::UnknownType(ty.to_string()))?;
        let place = net.place_of(cap, ty.as_ty());
        if place.is_none() && !nominal_names(ty.as_ty()).is_subset(&net.env.known_names()) {
            return Err(GoalError::UnknownType(ty.to_string()));
        }
        required.push(Requirement { cap, ty, place, at_least });
    }
    if required.is_empty() {
        return Err(GoalError::Empty);
    }
    Ok(GoalSpec { required, require_closed_stack: true })
}

fn nominal_names(ty: &Ty) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut todo = alloc::vec![ty];
    while let Some(t) = todo.pop() {
        match t {
            Ty::Base(n) => {
                out.insert(n.clone());
            }
            Ty::App(n, args) => {
                out.insert(n.clone());
                todo.extend(args);
            }
            Ty::Tuple(items) => todo.extend(items),
            Ty::Slice(t) | Ty::Ref(_, _, t) | Ty::Field(t, _) | Ty::Assoc(t, _, _) => todo.push(t),
            Ty::Var(_) => {}
        }
    }
    out
}

impl GoalSpec {
    pub fn satisfied_by(&self, cfg: &Configuration) -> bool {
        self.required.iter().all(|r| r.place.map_or(0, |p| cfg.count(p)) >= r.at_least)
    }
}

/// A concrete firing sequence from the empty configuration, its closing
/// pops, and where it ends.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub steps: Vec<Firing>,
    pub closing: Vec<Firing>,
    pub final_config: Configuration,
    pub goal_node: usize,
    pub node_hash: u64,
}

impl Witness {
    pub fn firings(&self) -> impl Iterator<Item = &Firing> {
        self.steps.iter().chain(&self.closing)
    }

    pub fn len(&self) -> usize {
        self.steps.len() + self.closing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("node {0} is not in the graph")]
    NodeUnknown(usize),
    #[error("edge into node {0} cannot be replayed")]
    Replay(usize),
    #[error("no pop transition matches the top of the stack")]
    NoPopTransition,
    #[error("{0} pop transitions match the top of the stack")]
    NonUniquePop(usize),
    #[error("closing the stack leaves the bounds")]
    OutOfBounds,
}

/// Fires pops until the stack is empty. The matching pop must be unique.
pub fn close_stack(net: &Net, cfg: &Configuration, bounds: &Bounds) -> Result<(Vec<Firing>, Configuration), SynthError> {
    let mut cur = cfg.clone();
    let mut fired = Vec::new();
    while !cur.stack.is_empty() {
        let mut matches = Vec::new();
        for (t, tr) in net.transitions.iter().enumerate() {
            if !tr.is_pop() {
                continue;
            }
            for (inputs, inst) in net.enabled_instances(&cur, t) {
                matches.push(Firing { transition: t, inputs, inst });
            }
        }
        let firing = match matches.len() {
            0 => return Err(SynthError::NoPopTransition),
            1 => matches.pop().unwrap(),
            n => return Err(SynthError::NonUniquePop(n)),
        };
        cur = net.fire(&cur, &firing).map_err(|_| SynthError::NoPopTransition)?;
        if !budget_ok(&cur, bounds) {
            return Err(SynthError::OutOfBounds);
        }
        fired.push(firing);
    }
    Ok((fired, cur))
}

/// Replays the parent chain of `node` from the empty configuration with
/// concrete ids.
pub fn concrete_path(net: &Net, graph: &ReachGraph, node: usize) -> Result<(Vec<Firing>, Configuration), SynthError> {
    let edges = graph.backtrack(node).map_err(|_| SynthError::NodeUnknown(node))?;
    let mut cur = Configuration::empty();
    let mut out = Vec::new();
    for e in edges {
        let (_, ren) = canon_with_renaming(&cur);
        let target = &graph.nodes[e.to];
        let mut found = None;
        for (inputs, inst) in net.enabled_instances(&cur, e.firing.transition) {
            let f = Firing { transition: e.firing.transition, inputs, inst };
            let seen = ren.firing(&f);
            if seen.inputs != e.firing.inputs || seen.inst.subst != e.firing.inst.subst {
                continue;
            }
            let next = net.fire(&cur, &f).map_err(|_| SynthError::Replay(e.to))?;
            if canon(&next) == *target {
                found = Some((f, next));
                break;
            }
        }
        let (f, next) = found.ok_or(SynthError::Replay(e.to))?;
        out.push(f);
        cur = next;
    }
    Ok((out, cur))
}

pub fn witness_for(net: &Net, graph: &ReachGraph, node: usize, bounds: &Bounds) -> Result<Witness, SynthError> {
    let (steps, reached) = concrete_path(net, graph, node)?;
    let (closing, final_config) = close_stack(net, &reached, bounds)?;
    Ok(Witness { steps, closing, final_config, goal_node: node, node_hash: graph.hash(node) })
}

/// First goal node in discovery order whose witness closes within bounds.
pub fn synthesize(net: &Net, graph: &ReachGraph, goal: &GoalSpec, bounds: &Bounds) -> Option<Witness> {
    graph
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, c)| goal.satisfied_by(c))
        .find_map(|(n, _)| witness_for(net, graph, n, bounds).ok())
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {step} is not enabled")]
    NotEnabled { step: usize },
    #[error("step {step} leaves the bounds")]
    OutOfBounds { step: usize },
}

/// Checks every firing against the enabling judgment and the bounds while
/// replaying from the empty configuration.
pub fn replay<'a>(
    net: &Net,
    firings: impl IntoIterator<Item = &'a Firing>,
    bounds: &Bounds,
) -> Result<Configuration, ReplayError> {
    let mut cur = Configuration::empty();
    for (step, f) in firings.into_iter().enumerate() {
        let enabled = net.enabled_instances(&cur, f.transition).into_iter().any(|(i, inst)| i == f.inputs && inst == f.inst);
        if !enabled {
            return Err(ReplayError::NotEnabled { step });
        }
        cur = net.fire(&cur, f).map_err(|_| ReplayError::NotEnabled { step })?;
        if !budget_ok(&cur, bounds) {
            return Err(ReplayError::OutOfBounds { step });
        }
    }
    Ok(cur)
}
