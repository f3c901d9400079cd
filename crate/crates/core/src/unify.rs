//! Observation, unification against observed tokens, obligation entailment
//! and the guard solver that decides whether a transition may fire.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use thiserror::Error;

use crate::net::{Configuration, Net, OutputSource, PlaceIx, StackFrame, Token, Transition};
use crate::sigenv::{FactTables, Obligation};
use crate::types::{GroundType, Incompatible, Lifetime, RegionLabel, SubstRecord, Ty, ValueId};

/// What a guard may see of a token: the place's type and the token's
/// lifetime valuation restricted to that type's lifetimes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub ty: GroundType,
    pub lifes: BTreeMap<Lifetime, RegionLabel>,
}

pub fn observe(place_ty: &GroundType, token: &Token) -> Observation {
    let fv = place_ty.as_ty().fv_lifetimes();
    let lifes = token.ctx.lifetimes.iter().filter(|(l, _)| fv.contains(l)).map(|(l, r)| (l.clone(), *r)).collect();
    Observation { ty: place_ty.clone(), lifes }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnifyResult {
    pub subst: SubstRecord,
    pub emitted: Vec<Obligation>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum UnifyError {
    #[error("`{expected}` does not match `{found}`")]
    ShapeMismatch { expected: Ty, found: Ty },
    #[error(transparent)]
    JoinConflict(#[from] Incompatible),
    #[error("no region recorded for {0}")]
    MissingRegion(Lifetime),
}

pub fn unify(expected: &Ty, obs: &Observation) -> Result<UnifyResult, UnifyError> {
    let mut out = UnifyResult::default();
    unify_into(expected, obs.ty.as_ty(), &obs.lifes, &mut out)?;
    Ok(out)
}

fn unify_into(
    expected: &Ty,
    found: &Ty,
    lifes: &BTreeMap<Lifetime, RegionLabel>,
    out: &mut UnifyResult,
) -> Result<(), UnifyError> {
    let mismatch = || UnifyError::ShapeMismatch { expected: expected.clone(), found: found.clone() };
    match (expected, found) {
        (Ty::Var(a), _) => {
            let g = GroundType::new(found.clone()).ok_or_else(mismatch)?;
            out.subst = out.subst.join(&SubstRecord::empty().with_type(a, g))?;
        }
        (Ty::Base(a), Ty::Base(b)) if a == b => {}
        (Ty::App(h1, xs), Ty::App(h2, ys)) if h1 == h2 && xs.len() == ys.len() => {
            for (x, y) in xs.iter().zip(ys) {
                unify_into(x, y, lifes, out)?;
            }
        }
        (Ty::Tuple(xs), Ty::Tuple(ys)) if xs.len() == ys.len() => {
            for (x, y) in xs.iter().zip(ys) {
                unify_into(x, y, lifes, out)?;
            }
        }
        (Ty::Slice(x), Ty::Slice(y)) => unify_into(x, y, lifes, out)?,
        (Ty::Ref(q1, l1, x), Ty::Ref(q2, l2, y)) if q1 == q2 => {
            let region = *lifes.get(l2).ok_or_else(|| UnifyError::MissingRegion(l2.clone()))?;
            out.subst = out.subst.join(&SubstRecord::empty().with_lifetime(l1.clone(), region))?;
            unify_into(x, y, lifes, out)?;
        }
        (Ty::Assoc(base, tr, a), _) => {
            out.emitted.push(Obligation::AssocEq {
                ty: (**base).clone(),
                trait_name: tr.clone(),
                assoc: a.clone(),
                expected: found.clone(),
            });
        }
        (Ty::Field(base, f), _) => {
            let g = GroundType::new(found.clone()).ok_or_else(mismatch)?;
            out.emitted.push(Obligation::FieldEq { ty: (**base).clone(), field: f.clone(), expected: g });
        }
        _ => return Err(mismatch()),
    }
    Ok(())
}

/// `l1` outlives `l2` when the labels are equal or `l1` sits strictly deeper
/// in the stack than `l2`. Labels absent from the stack only outlive
/// themselves.
pub fn outlives(stack: &[StackFrame], l1: RegionLabel, l2: RegionLabel) -> bool {
    if l1 == l2 {
        return true;
    }
    let depth = |l: RegionLabel| stack.iter().position(|f| f.region() == Some(l));
    match (depth(l1), depth(l2)) {
        (Some(d1), Some(d2)) => d1 > d2,
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EntailError {
    #[error("obligation `{0}` is not fully resolved")]
    Unresolved(Obligation),
    #[error("obligation `{0}` does not hold")]
    Failed(Obligation),
}

/// Grounds a type under `subst`, resolving projections through the fact
/// tables. `None` when a variable is unbound or a projection has no fact.
pub fn resolve(ty: &Ty, subst: &SubstRecord, facts: &FactTables) -> Option<GroundType> {
    let resolved = resolve_ty(ty, subst, facts)?;
    GroundType::new(resolved)
}

fn resolve_ty(ty: &Ty, subst: &SubstRecord, facts: &FactTables) -> Option<Ty> {
    Some(match ty {
        Ty::Var(a) => subst.types.get(a)?.as_ty().clone(),
        Ty::Base(_) => ty.clone(),
        Ty::App(h, args) => Ty::App(h.clone(), args.iter().map(|a| resolve_ty(a, subst, facts)).collect::<Option<_>>()?),
        Ty::Tuple(args) => Ty::Tuple(args.iter().map(|a| resolve_ty(a, subst, facts)).collect::<Option<_>>()?),
        Ty::Slice(t) => Ty::Slice(alloc::boxed::Box::new(resolve_ty(t, subst, facts)?)),
        Ty::Ref(q, l, t) => Ty::Ref(*q, l.clone(), alloc::boxed::Box::new(resolve_ty(t, subst, facts)?)),
        Ty::Assoc(t, tr, a) => {
            let base = GroundType::new(resolve_ty(t, subst, facts)?)?;
            facts.assoc_ty(&base, tr, a)?.as_ty().clone()
        }
        Ty::Field(t, f) => {
            let base = GroundType::new(resolve_ty(t, subst, facts)?)?;
            facts.field_ty(&base, f)?.as_ty().clone()
        }
    })
}

fn same_erased(a: &GroundType, b: &GroundType) -> bool {
    a.as_ty().erase_lifetimes() == b.as_ty().erase_lifetimes()
}

/// Checks every obligation; the first one that fails is returned.
pub fn entail(
    facts: &FactTables,
    stack: &[StackFrame],
    subst: &SubstRecord,
    obligations: &[Obligation],
) -> Result<(), EntailError> {
    for o in obligations {
        let unresolved = || EntailError::Unresolved(o.clone());
        let holds = match o {
            Obligation::Trait { ty, trait_name } => {
                if !ty.type_vars().iter().all(|v| subst.types.contains_key(v)) {
                    return Err(unresolved());
                }
                resolve(ty, subst, facts).is_some_and(|g| facts.implements(&g, trait_name))
            }
            Obligation::AssocEq { ty, trait_name, assoc, expected } => {
                let base = resolve(ty, subst, facts).ok_or_else(unresolved)?;
                let want = resolve(expected, subst, facts).ok_or_else(unresolved)?;
                facts.assoc_ty(&base, trait_name, assoc).is_some_and(|got| same_erased(got, &want))
            }
            Obligation::Outlives { longer, shorter } => {
                let l1 = *subst.lifetimes.get(longer).ok_or_else(unresolved)?;
                let l2 = *subst.lifetimes.get(shorter).ok_or_else(unresolved)?;
                outlives(stack, l1, l2)
            }
            Obligation::FieldEq { ty, field, expected } => {
                let base = resolve(ty, subst, facts).ok_or_else(unresolved)?;
                facts.field_ty(&base, field).is_some_and(|got| same_erased(got, expected))
            }
        };
        if !holds {
            return Err(EntailError::Failed(o.clone()));
        }
    }
    Ok(())
}

/// A firing's instantiation: the substitution plus fresh value ids and
/// region labels, keyed by output arc index.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstRecord {
    pub subst: SubstRecord,
    pub fresh_values: BTreeMap<usize, ValueId>,
    pub fresh_regions: BTreeMap<usize, RegionLabel>,
}

/// Enumerates, in a fixed order, every instantiation under which `t` may fire
/// at `cfg` consuming `chi` (one token per input port, in port order).
///
/// Beyond matching, completion, freshness and entailment, every region
/// observed on an input must still be open on the stack unless the
/// transition merely discards its input.
pub fn solve_guard(net: &Net, t: &Transition, cfg: &Configuration, chi: &[(PlaceIx, Token)]) -> Vec<InstRecord> {
    let mut forced = SubstRecord::empty();
    let mut emitted = Vec::new();
    let live = cfg.live_labels();
    for (port, (place, token)) in t.inputs.iter().zip(chi) {
        let obs = observe(&net.place(*place).ty, token);
        if !t.allow_ended && obs.lifes.values().any(|l| !live.contains(l)) {
            return Vec::new();
        }
        let Ok(r) = unify(&port.scheme, &obs) else { return Vec::new() };
        match forced.join(&r.subst) {
            Ok(j) => forced = j,
            Err(_) => return Vec::new(),
        }
        emitted.extend(r.emitted);
    }

    let mut completions = alloc::vec![forced];
    for v in &t.type_vars {
        let mut next = Vec::new();
        for s in &completions {
            if s.types.contains_key(v) {
                next.push(s.clone());
                continue;
            }
            for g in net.universe.iter() {
                next.push(s.clone().with_type(v, g.clone()));
            }
        }
        completions = next;
    }
    let stack_labels: Vec<RegionLabel> = {
        let mut seen = BTreeSet::new();
        cfg.stack.iter().filter_map(StackFrame::region).filter(|l| seen.insert(*l)).collect()
    };
    for l in &t.lifetime_vars {
        let mut next = Vec::new();
        for s in &completions {
            if s.lifetimes.contains_key(l) {
                next.push(s.clone());
                continue;
            }
            for label in &stack_labels {
                next.push(s.clone().with_lifetime(l.clone(), *label));
            }
        }
        completions = next;
    }

    let (fresh_values, fresh_regions) = fresh_for(t, cfg);
    let mut obligations = t.obligations.clone();
    obligations.extend(emitted);
    completions
        .into_iter()
        .filter(|s| entail(&net.env.facts, &cfg.stack, s, &obligations).is_ok())
        .map(|subst| InstRecord { subst, fresh_values: fresh_values.clone(), fresh_regions: fresh_regions.clone() })
        .collect()
}

/// Least unused value ids and labels, allocated in output order.
fn fresh_for(t: &Transition, cfg: &Configuration) -> (BTreeMap<usize, ValueId>, BTreeMap<usize, RegionLabel>) {
    let used_ids = cfg.used_values();
    let used_labels = cfg.used_labels();
    let mut next_id = 0u32;
    let mut next_label = 0u32;
    let mut values = BTreeMap::new();
    let mut regions = BTreeMap::new();
    for (i, arc) in t.outputs.iter().enumerate() {
        match arc.source {
            OutputSource::Keep(_) => continue,
            OutputSource::NewVal(_) | OutputSource::NewRef(_) | OutputSource::Fresh { .. } => {
                while used_ids.contains(&ValueId(next_id)) {
                    next_id += 1;
                }
                values.insert(i, ValueId(next_id));
                next_id += 1;
            }
        }
        if let OutputSource::NewRef(_) = arc.source {
            while used_labels.contains(&RegionLabel(next_label)) {
                next_label += 1;
            }
            regions.insert(i, RegionLabel(next_label));
            next_label += 1;
        }
    }
    (values, regions)
}
