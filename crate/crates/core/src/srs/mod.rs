//! Reference interpreter for straight-line statement programs over a
//! signature environment.
//!
//! The interpreter tracks named bindings, their access state and an explicit
//! stack of outstanding borrows. It is written against the statement
//! language only and shares nothing with the net beyond the type and
//! signature layers, so that comparing the two can expose mistakes in either.

mod parse;

pub mod bisim;

pub use parse::{parse_program, parse_stmt, ParseError};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

use crate::sigenv::{Obligation, SigEnv};
use crate::types::{GroundType, Lifetime, Name, Qual, Ty, Universe};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Region(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Access {
    Usable,
    /// Under one or more shared borrows.
    Frozen,
    /// Under an exclusive borrow.
    Blocked,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binding {
    pub ty: GroundType,
    pub access: Access,
    /// Region the value depends on, for values carrying a reference.
    pub region: Option<Region>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BorrowKind {
    /// Shared borrow of a previously usable owner.
    SharedFirst,
    /// Shared borrow of an owner already frozen.
    SharedMore,
    /// `&mut x`.
    Exclusive,
    /// `&mut r.f` through a mutable reference.
    Field { field: Name },
    /// `&mut *r`.
    Reborrow,
    /// `&*r` with `r` mutable.
    ReborrowShared,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BorrowRecord {
    pub kind: BorrowKind,
    pub owner: String,
    pub reference: String,
    pub region: Region,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Call { item: usize, theta: Vec<(Name, GroundType)>, args: Vec<String> },
    Drop(String),
    /// Consumes a non-Copy value.
    Move(String),
    /// Reads a Copy value without effect.
    CopyUse(String),
    Dup(String),
    Clone(String),
    Borrow { mutable: bool, of: String },
    Reborrow { mutable: bool, of: String },
    ProjMove { of: String, field: Name },
    ProjRef { mutable: bool, of: String, field: Name },
    Deref(String),
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Call { item, theta, args } => {
                let th: Vec<String> = theta.iter().map(|(n, t)| format!("{n}={t}")).collect();
                write!(f, "call#{item}[{}]({})", th.join(","), args.join(", "))
            }
            Stmt::Drop(x) => write!(f, "drop({x})"),
            Stmt::Move(x) => write!(f, "move({x})"),
            Stmt::CopyUse(x) => write!(f, "use({x})"),
            Stmt::Dup(x) => write!(f, "{x}"),
            Stmt::Clone(x) => write!(f, "{x}.clone()"),
            Stmt::Borrow { mutable: false, of } => write!(f, "&{of}"),
            Stmt::Borrow { mutable: true, of } => write!(f, "&mut {of}"),
            Stmt::Reborrow { mutable: false, of } => write!(f, "&*{of}"),
            Stmt::Reborrow { mutable: true, of } => write!(f, "&mut *{of}"),
            Stmt::ProjMove { of, field } => write!(f, "{of}.{field}"),
            Stmt::ProjRef { mutable: false, of, field } => write!(f, "&{of}.{field}"),
            Stmt::ProjRef { mutable: true, of, field } => write!(f, "&mut {of}.{field}"),
            Stmt::Deref(r) => write!(f, "*{r}"),
        }
    }
}

/// Which rule justified a step. Structural rules are named by the same
/// short names the net uses for its schemas.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rule {
    Call { item: usize, theta: Vec<(Name, GroundType)> },
    Structural { name: &'static str, subject: GroundType, field: Option<Name>, child: Option<GroundType> },
}

impl Rule {
    fn on(name: &'static str, subject: &GroundType) -> Rule {
        Rule::Structural { name, subject: subject.clone(), field: None, child: None }
    }
}

/// A successful step: the rule, the bindings read or consumed (in rule
/// order), and what was created.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Effect {
    pub rule: Rule,
    pub inputs: Vec<String>,
    pub produced: Option<String>,
    pub fresh_region: Option<Region>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Rejection {
    #[error("`{0}` is not a live binding")]
    NotLive(String),
    #[error("`{0}` is borrowed")]
    Borrowed(String),
    #[error("`{0}` is in use by a borrow that is not the most recent")]
    NotMostRecent(String),
    #[error("the region of `{0}` has ended")]
    RegionEnded(String),
    #[error("`{name}` has type `{ty}`, {expected}")]
    Type { name: String, ty: GroundType, expected: &'static str },
    #[error("`{0}` is outside the type universe")]
    OutsideUniverse(GroundType),
    #[error("no field `{field}` on `{ty}`")]
    NoField { ty: GroundType, field: Name },
    #[error("no call instance {0}")]
    UnknownCall(String),
    #[error("argument count or types do not match `{0}`")]
    Arguments(String),
    #[error("a lifetime bound of `{0}` does not hold")]
    Outlives(String),
    #[error("`{0}` is passed twice")]
    Aliased(String),
    #[error("binding `{0}` is still tracked by a borrow")]
    Shadowing(String),
}

/// A monomorphic call with its parameter types (lifetimes kept).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallInst {
    pub item: usize,
    pub path: String,
    pub theta: Vec<(Name, GroundType)>,
    pub params: Vec<Ty>,
    pub ret: Ty,
    pub result_lifetime: Option<Lifetime>,
    pub outlives: Vec<(Lifetime, Lifetime)>,
    pub lifetimes: Vec<Lifetime>,
}

/// The environment as the interpreter sees it: facts, the closed type
/// universe, and the admissible call instances.
#[derive(Clone, Debug)]
pub struct Srs<'a> {
    pub env: &'a SigEnv,
    pub universe: &'a Universe,
    pub calls: Vec<CallInst>,
}

fn ground(ty: &Ty, theta: &BTreeMap<Name, GroundType>, env: &SigEnv) -> Option<Ty> {
    use alloc::boxed::Box;
    Some(match ty {
        Ty::Var(a) => theta.get(a)?.as_ty().clone(),
        Ty::Base(_) => ty.clone(),
        Ty::App(h, xs) => Ty::App(h.clone(), xs.iter().map(|x| ground(x, theta, env)).collect::<Option<_>>()?),
        Ty::Tuple(xs) => Ty::Tuple(xs.iter().map(|x| ground(x, theta, env)).collect::<Option<_>>()?),
        Ty::Slice(x) => Ty::Slice(Box::new(ground(x, theta, env)?)),
        Ty::Ref(q, l, x) => Ty::Ref(*q, l.clone(), Box::new(ground(x, theta, env)?)),
        Ty::Assoc(x, tr, a) => {
            let base = GroundType::new(ground(x, theta, env)?)?;
            env.facts.assoc_ty(&base, tr, a)?.as_ty().clone()
        }
        Ty::Field(x, f) => {
            let base = GroundType::new(ground(x, theta, env)?)?;
            env.facts.field_ty(&base, f)?.as_ty().clone()
        }
    })
}

fn erase(ty: &Ty) -> Option<GroundType> {
    GroundType::erased(ty)
}

impl<'a> Srs<'a> {
    pub fn new(env: &'a SigEnv, universe: &'a Universe) -> Self {
        let mut calls = Vec::new();
        let pool: Vec<GroundType> = universe.iter().filter(|t| !t.as_ty().contains_ref()).cloned().collect();
        for (ix, item) in env.items.iter().enumerate() {
            let mut thetas: Vec<BTreeMap<Name, GroundType>> = alloc::vec![BTreeMap::new()];
            for g in &item.generics {
                thetas = thetas
                    .into_iter()
                    .flat_map(|th| {
                        pool.iter().map(move |t| {
                            let mut th = th.clone();
                            th.insert(g.clone(), t.clone());
                            th
                        })
                    })
                    .collect();
            }
            'theta: for theta in thetas {
                let mut params = Vec::new();
                for p in &item.params {
                    match ground(p, &theta, env) {
                        Some(t) if erase(&t).is_some_and(|g| universe.contains(&g)) => params.push(t),
                        _ => continue 'theta,
                    }
                }
                let Some(ret) = ground(&item.ret, &theta, env) else { continue };
                if !ret.is_unit() && !erase(&ret).is_some_and(|g| universe.contains(&g)) {
                    continue;
                }
                let mut outlives = Vec::new();
                for o in &item.obligations {
                    match o {
                        Obligation::Trait { ty, trait_name } => {
                            let holds = ground(ty, &theta, env)
                                .and_then(GroundType::new)
                                .is_some_and(|g| env.facts.implements(&g, trait_name));
                            if !holds {
                                continue 'theta;
                            }
                        }
                        Obligation::AssocEq { ty, trait_name, assoc, expected } => {
                            let lhs = ground(ty, &theta, env)
                                .and_then(GroundType::new)
                                .and_then(|g| env.facts.assoc_ty(&g, trait_name, assoc).cloned());
                            let rhs = ground(expected, &theta, env).and_then(GroundType::new);
                            if lhs.is_none() || lhs != rhs {
                                continue 'theta;
                            }
                        }
                        Obligation::Outlives { longer, shorter } => outlives.push((longer.clone(), shorter.clone())),
                        Obligation::FieldEq { .. } => continue 'theta,
                    }
                }
                // Results may borrow from exactly one shared input lifetime.
                let ret_lifes = ret.lifetimes_in_order();
                if ret.contains_mut_ref() || ret_lifes.len() > 1 {
                    continue;
                }
                let result_lifetime = ret_lifes.first().cloned();
                if let Some(l) = &result_lifetime {
                    let mut bound = false;
                    for p in &params {
                        if p.fv_lifetimes().contains(l) {
                            bound = true;
                        }
                        let mut under_mut = false;
                        p.walk(&mut |t| {
                            if let Ty::Ref(Qual::Mut, m, inner) = t {
                                if m == l || inner.fv_lifetimes().contains(l) {
                                    under_mut = true;
                                }
                            }
                        });
                        if under_mut {
                            continue 'theta;
                        }
                    }
                    if !bound {
                        continue;
                    }
                }
                calls.push(CallInst {
                    item: ix,
                    path: item.path(),
                    theta: theta.into_iter().collect(),
                    params,
                    ret,
                    result_lifetime,
                    outlives,
                    lifetimes: item.lifetimes.iter().map(|l| Lifetime::Var(l.clone())).collect(),
                });
            }
        }
        Srs { env, universe, calls }
    }

    fn in_universe(&self, ty: &GroundType) -> Result<(), Rejection> {
        if self.universe.contains(ty) {
            Ok(())
        } else {
            Err(Rejection::OutsideUniverse(ty.clone()))
        }
    }

    pub fn call_for(&self, item: usize, theta: &[(Name, GroundType)]) -> Option<&CallInst> {
        self.calls.iter().find(|c| c.item == item && c.theta == theta)
    }
}

/// Program state: live bindings plus the borrow stack, most recent last.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SrsState {
    pub bindings: BTreeMap<String, Binding>,
    pub borrows: Vec<BorrowRecord>,
    next_name: u32,
    next_region: u32,
}

impl SrsState {
    pub fn new() -> Self {
        Self::default()
    }

    fn fresh_name(&mut self) -> String {
        loop {
            let n = format!("s{}", self.next_name);
            self.next_name += 1;
            if !self.bindings.contains_key(&n) {
                return n;
            }
        }
    }

    fn fresh_region(&mut self) -> Region {
        let r = Region(self.next_region);
        self.next_region += 1;
        r
    }

    pub fn is_closed(&self) -> bool {
        self.borrows.is_empty()
    }

    fn region_open(&self, r: Region) -> bool {
        self.borrows.iter().any(|b| b.region == r)
    }

    fn tracked(&self, name: &str) -> bool {
        self.borrows.iter().any(|b| b.owner == name || b.reference == name)
    }

    fn get(&self, name: &str) -> Result<&Binding, Rejection> {
        self.bindings.get(name).ok_or_else(|| Rejection::NotLive(name.into()))
    }

    /// A usable binding whose region, if any, is still open.
    fn readable(&self, name: &str) -> Result<&Binding, Rejection> {
        let b = self.get(name)?;
        if b.access != Access::Usable {
            return Err(Rejection::Borrowed(name.into()));
        }
        if b.region.is_some_and(|r| !self.region_open(r)) {
            return Err(Rejection::RegionEnded(name.into()));
        }
        Ok(b)
    }

    /// Depth from the most recent borrow; deeper regions live longer.
    fn depth(&self, r: Region) -> Option<usize> {
        self.borrows.iter().rev().position(|b| b.region == r)
    }

    fn outlives(&self, long: Region, short: Region) -> bool {
        long == short || matches!((self.depth(long), self.depth(short)), (Some(a), Some(b)) if a > b)
    }

    fn bind(&mut self, target: Option<String>, b: Binding) -> Result<String, Rejection> {
        let name = match target {
            Some(n) => {
                if self.bindings.contains_key(&n) && self.tracked(&n) {
                    return Err(Rejection::Shadowing(n));
                }
                n
            }
            None => self.fresh_name(),
        };
        self.bindings.insert(name.clone(), b);
        Ok(name)
    }

    /// Executes one statement, optionally binding its result to `target`.
    /// The state is unchanged on rejection.
    pub fn step(&mut self, srs: &Srs<'_>, stmt: &Stmt, target: Option<String>) -> Result<Effect, Rejection> {
        let mut next = self.clone();
        let eff = next.apply(srs, stmt, target)?;
        *self = next;
        Ok(eff)
    }

    fn derived(&self, src: &Binding, ty: GroundType) -> Binding {
        let region = if ty.as_ty().contains_ref() { src.region } else { None };
        Binding { ty, access: Access::Usable, region }
    }

    fn apply(&mut self, srs: &Srs<'_>, stmt: &Stmt, target: Option<String>) -> Result<Effect, Rejection> {
        let facts = &srs.env.facts;
        let eff = |rule, inputs: Vec<&String>, produced, fresh_region| Effect {
            rule,
            inputs: inputs.into_iter().cloned().collect(),
            produced,
            fresh_region,
        };
        match stmt {
            Stmt::Call { item, theta, args } => self.call(srs, *item, theta, args, target),
            Stmt::Drop(x) | Stmt::Move(x) => {
                let b = self.get(x)?.clone();
                if let Stmt::Drop(_) = stmt {
                    if let Some(top) = self.borrows.last() {
                        if top.reference == *x {
                            return self.end_borrow();
                        }
                    }
                }
                if self.tracked(x) {
                    return Err(if b.access == Access::Usable {
                        Rejection::NotMostRecent(x.clone())
                    } else {
                        Rejection::Borrowed(x.clone())
                    });
                }
                let name = match stmt {
                    Stmt::Move(_) if facts.is_copy(&b.ty) => {
                        return Err(Rejection::Type { name: x.clone(), ty: b.ty, expected: "expected a non-Copy type" })
                    }
                    Stmt::Move(_) => "move",
                    _ => "drop",
                };
                self.bindings.remove(x);
                Ok(eff(Rule::on(name, &b.ty), alloc::vec![x], None, None))
            }
            Stmt::CopyUse(x) | Stmt::Dup(x) | Stmt::Clone(x) => {
                let b = self.readable(x)?.clone();
                let ok = match stmt {
                    Stmt::Clone(_) => facts.is_clone(&b.ty),
                    _ => facts.is_copy(&b.ty),
                };
                if !ok {
                    return Err(Rejection::Type { name: x.clone(), ty: b.ty, expected: "expected a duplicable type" });
                }
                let name = match stmt {
                    Stmt::CopyUse(_) => return Ok(eff(Rule::on("copy_use", &b.ty), alloc::vec![x], None, None)),
                    Stmt::Dup(_) => "dup_copy",
                    _ => "dup_clone",
                };
                let y = self.bind(target, self.derived(&b, b.ty.clone()))?;
                Ok(eff(Rule::on(name, &b.ty), alloc::vec![x], Some(y), None))
            }
            Stmt::Borrow { mutable, of } => {
                let b = self.get(of)?.clone();
                if b.region.is_some_and(|r| !self.region_open(r)) {
                    return Err(Rejection::RegionEnded(of.clone()));
                }
                let (kind, access, name, rty) = match (mutable, b.access) {
                    (false, Access::Usable) => (BorrowKind::SharedFirst, Access::Frozen, "borrow_shr_first", b.ty.shr_ref()),
                    (false, Access::Frozen) => (BorrowKind::SharedMore, Access::Frozen, "borrow_shr", b.ty.shr_ref()),
                    (true, Access::Usable) => (BorrowKind::Exclusive, Access::Blocked, "borrow_mut", b.ty.mut_ref()),
                    _ => return Err(Rejection::Borrowed(of.clone())),
                };
                srs.in_universe(&rty)?;
                let region = self.fresh_region();
                self.bindings.get_mut(of).expect("checked above").access = access;
                let r = self.bind(target, Binding { ty: rty, access: Access::Usable, region: Some(region) })?;
                self.borrows.push(BorrowRecord { kind, owner: of.clone(), reference: r.clone(), region });
                Ok(eff(Rule::on(name, &b.ty), alloc::vec![of], Some(r), Some(region)))
            }
            Stmt::Reborrow { mutable, of } => {
                let b = self.readable(of)?.clone();
                let Some((Qual::Mut, inner)) = b.ty.referent() else {
                    return Err(Rejection::Type { name: of.clone(), ty: b.ty, expected: "expected a mutable reference" });
                };
                let (kind, name, rty) = if *mutable {
                    (BorrowKind::Reborrow, "reborrow_mut", inner.mut_ref())
                } else {
                    (BorrowKind::ReborrowShared, "reborrow_shr", inner.shr_ref())
                };
                srs.in_universe(&rty)?;
                let region = self.fresh_region();
                self.bindings.get_mut(of).expect("checked above").access = Access::Blocked;
                let r = self.bind(target, Binding { ty: rty, access: Access::Usable, region: Some(region) })?;
                self.borrows.push(BorrowRecord { kind, owner: of.clone(), reference: r.clone(), region });
                Ok(eff(Rule::on(name, &inner), alloc::vec![of], Some(r), Some(region)))
            }
            Stmt::ProjMove { of, field } => {
                let b = self.readable(of)?.clone();
                let fty = facts
                    .field_ty(&b.ty, field)
                    .cloned()
                    .ok_or_else(|| Rejection::NoField { ty: b.ty.clone(), field: field.clone() })?;
                self.bindings.remove(of);
                let y = self.bind(target, self.derived(&b, fty.clone()))?;
                let rule = Rule::Structural { name: "proj_move", subject: b.ty, field: Some(field.clone()), child: Some(fty) };
                Ok(eff(rule, alloc::vec![of], Some(y), None))
            }
            Stmt::ProjRef { mutable, of, field } => {
                let b = self.readable(of)?.clone();
                let inner = match b.ty.referent() {
                    Some((q, inner)) if (q == Qual::Mut) == *mutable => inner,
                    _ => return Err(Rejection::Type { name: of.clone(), ty: b.ty, expected: "expected a reference of matching mutability" }),
                };
                let fty = facts
                    .field_ty(&inner, field)
                    .cloned()
                    .ok_or_else(|| Rejection::NoField { ty: inner.clone(), field: field.clone() })?;
                let rule =
                    |name| Rule::Structural { name, subject: inner.clone(), field: Some(field.clone()), child: Some(fty.clone()) };
                if *mutable {
                    let rty = fty.mut_ref();
                    srs.in_universe(&rty)?;
                    let region = self.fresh_region();
                    self.bindings.get_mut(of).expect("checked above").access = Access::Blocked;
                    let r = self.bind(target, Binding { ty: rty, access: Access::Usable, region: Some(region) })?;
                    self.borrows.push(BorrowRecord {
                        kind: BorrowKind::Field { field: field.clone() },
                        owner: of.clone(),
                        reference: r.clone(),
                        region,
                    });
                    Ok(eff(rule("proj_mut"), alloc::vec![of], Some(r), Some(region)))
                } else {
                    let rty = fty.shr_ref();
                    srs.in_universe(&rty)?;
                    let r = self.bind(target, Binding { ty: rty, access: Access::Usable, region: b.region })?;
                    Ok(eff(rule("proj_shr"), alloc::vec![of], Some(r), None))
                }
            }
            Stmt::Deref(r) => {
                let b = self.readable(r)?.clone();
                match b.ty.referent() {
                    Some((Qual::Shr, inner)) if facts.is_copy(&inner) => {
                        let y = self.bind(target, self.derived(&b, inner.clone()))?;
                        Ok(eff(Rule::on("deref_copy", &inner), alloc::vec![r], Some(y), None))
                    }
                    _ => Err(Rejection::Type { name: r.clone(), ty: b.ty, expected: "expected a shared reference to a Copy type" }),
                }
            }
        }
    }

    /// Ends the most recent borrow by dropping its reference.
    fn end_borrow(&mut self) -> Result<Effect, Rejection> {
        let rec = self.borrows.pop().expect("caller checked");
        let owner = self.get(&rec.owner)?.clone();
        let reference = self.get(&rec.reference)?.clone();
        self.bindings.remove(&rec.reference);
        let subject = |t: &GroundType| t.referent().map(|(_, i)| i).unwrap_or_else(|| t.clone());
        let rule = match &rec.kind {
            BorrowKind::SharedFirst | BorrowKind::SharedMore => {
                let more = self.borrows.iter().any(|b| {
                    b.owner == rec.owner && matches!(b.kind, BorrowKind::SharedFirst | BorrowKind::SharedMore)
                });
                if !more {
                    self.bindings.get_mut(&rec.owner).expect("owner is live").access = Access::Usable;
                }
                Rule::on(if more { "end_shr" } else { "end_shr_last" }, &owner.ty)
            }
            BorrowKind::Exclusive => {
                self.bindings.get_mut(&rec.owner).expect("owner is live").access = Access::Usable;
                Rule::on("end_mut", &owner.ty)
            }
            BorrowKind::Field { .. } => {
                self.bindings.get_mut(&rec.owner).expect("owner is live").access = Access::Usable;
                Rule::Structural {
                    name: "proj_mut_end",
                    subject: subject(&owner.ty),
                    field: None,
                    child: Some(subject(&reference.ty)),
                }
            }
            BorrowKind::Reborrow | BorrowKind::ReborrowShared => {
                self.bindings.get_mut(&rec.owner).expect("owner is live").access = Access::Usable;
                let name = if rec.kind == BorrowKind::Reborrow { "reborrow_mut_end" } else { "reborrow_shr_end" };
                Rule::on(name, &subject(&owner.ty))
            }
        };
        Ok(Effect { rule, inputs: alloc::vec![rec.owner, rec.reference], produced: None, fresh_region: None })
    }

    fn call(
        &mut self,
        srs: &Srs<'_>,
        item: usize,
        theta: &[(Name, GroundType)],
        args: &[String],
        target: Option<String>,
    ) -> Result<Effect, Rejection> {
        let inst = srs.call_for(item, theta).ok_or_else(|| Rejection::UnknownCall(format!("#{item}")))?;
        self.call_with(srs, inst, args, None, target)
    }

    /// `extra` fixes lifetimes not determined by the arguments.
    fn call_with(
        &mut self,
        srs: &Srs<'_>,
        inst: &CallInst,
        args: &[String],
        extra: Option<&BTreeMap<Lifetime, Region>>,
        target: Option<String>,
    ) -> Result<Effect, Rejection> {
        if args.len() != inst.params.len() {
            return Err(Rejection::Arguments(inst.path.clone()));
        }
        let mut seen = BTreeSet::new();
        let mut lifes: BTreeMap<Lifetime, Region> = BTreeMap::new();
        let mut consumed = Vec::new();
        for (a, p) in args.iter().zip(&inst.params) {
            if !seen.insert(a) {
                return Err(Rejection::Aliased(a.clone()));
            }
            let b = self.readable(a)?;
            if Some(&b.ty) != erase(p).as_ref() {
                return Err(Rejection::Arguments(inst.path.clone()));
            }
            for l in p.fv_lifetimes() {
                let r = b.region.ok_or_else(|| Rejection::Arguments(inst.path.clone()))?;
                if *lifes.entry(l).or_insert(r) != r {
                    return Err(Rejection::Arguments(inst.path.clone()));
                }
            }
            if !p.contains_ref() && !srs.env.facts.is_copy(&b.ty) {
                consumed.push(a.clone());
            }
        }
        for l in &inst.lifetimes {
            if !lifes.contains_key(l) {
                let r = extra.and_then(|m| m.get(l)).copied().ok_or_else(|| Rejection::Arguments(inst.path.clone()))?;
                if !self.region_open(r) {
                    return Err(Rejection::Arguments(inst.path.clone()));
                }
                lifes.insert(l.clone(), r);
            }
        }
        for (long, short) in &inst.outlives {
            let (Some(a), Some(b)) = (lifes.get(long), lifes.get(short)) else {
                return Err(Rejection::Outlives(inst.path.clone()));
            };
            if !self.outlives(*a, *b) {
                return Err(Rejection::Outlives(inst.path.clone()));
            }
        }
        for c in &consumed {
            self.bindings.remove(c);
        }
        let produced = if inst.ret.is_unit() {
            None
        } else {
            let ty = erase(&inst.ret).expect("instances have ground results");
            let region = inst.result_lifetime.as_ref().and_then(|l| lifes.get(l)).copied();
            Some(self.bind(target, Binding { ty, access: Access::Usable, region })?)
        };
        Ok(Effect {
            rule: Rule::Call { item: inst.item, theta: inst.theta.clone() },
            inputs: args.to_vec(),
            produced,
            fresh_region: None,
        })
    }

    /// Every statement accepted in this state, in a fixed order. Calls are
    /// listed once per argument choice.
    pub fn enabled(&self, srs: &Srs<'_>) -> Vec<(Stmt, Effect)> {
        self.successors(srs).into_iter().map(|(s, e, _)| (s, e)).collect()
    }

    /// Like [`SrsState::enabled`], with the state each statement leads to.
    pub fn successors(&self, srs: &Srs<'_>) -> Vec<(Stmt, Effect, SrsState)> {
        let mut out = Vec::new();
        let names: Vec<&String> = self.bindings.keys().collect();
        let mut try_stmt = |stmt: Stmt| {
            let mut s = self.clone();
            if let Ok(e) = s.apply(srs, &stmt, None) {
                out.push((stmt, e, s));
            }
        };
        for x in &names {
            let x = (*x).clone();
            for stmt in [
                Stmt::Drop(x.clone()),
                Stmt::Move(x.clone()),
                Stmt::CopyUse(x.clone()),
                Stmt::Dup(x.clone()),
                Stmt::Clone(x.clone()),
                Stmt::Borrow { mutable: false, of: x.clone() },
                Stmt::Borrow { mutable: true, of: x.clone() },
                Stmt::Reborrow { mutable: false, of: x.clone() },
                Stmt::Reborrow { mutable: true, of: x.clone() },
                Stmt::Deref(x.clone()),
            ] {
                try_stmt(stmt);
            }
            let ty = &self.bindings[&x].ty;
            let (own_fields, ref_fields) = match ty.referent() {
                Some((q, inner)) => (Vec::new(), srs.env.facts.structs.fields_of(&inner).iter().map(|(f, _)| (q, f.clone())).collect()),
                None => (srs.env.facts.structs.fields_of(ty).iter().map(|(f, _)| f.clone()).collect(), Vec::new()),
            };
            for f in own_fields {
                try_stmt(Stmt::ProjMove { of: x.clone(), field: f });
            }
            for (q, f) in ref_fields {
                try_stmt(Stmt::ProjRef { mutable: q == Qual::Mut, of: x.clone(), field: f });
            }
        }
        for inst in &srs.calls {
            let bound: BTreeSet<Lifetime> = inst.params.iter().flat_map(Ty::fv_lifetimes).collect();
            let free: Vec<&Lifetime> = inst.lifetimes.iter().filter(|l| !bound.contains(l)).collect();
            let mut choices = alloc::vec![BTreeMap::new()];
            for l in free {
                choices = choices
                    .into_iter()
                    .flat_map(|m: BTreeMap<Lifetime, Region>| {
                        self.open_regions().into_iter().map(move |r| {
                            let mut m = m.clone();
                            m.insert(l.clone(), r);
                            m
                        })
                    })
                    .collect();
            }
            for args in self.arg_choices(inst) {
                for extra in &choices {
                    let mut s = self.clone();
                    if let Ok(e) = s.call_with(srs, inst, &args, Some(extra), None) {
                        out.push((Stmt::Call { item: inst.item, theta: inst.theta.clone(), args: args.clone() }, e, s));
                    }
                }
            }
        }
        out
    }

    fn arg_choices(&self, inst: &CallInst) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = alloc::vec![Vec::new()];
        for p in &inst.params {
            let want = erase(p);
            let cands: Vec<&String> = self.bindings.iter().filter(|(_, b)| Some(&b.ty) == want.as_ref()).map(|(n, _)| n).collect();
            let mut next = Vec::new();
            for prefix in &out {
                for c in cands.iter().filter(|c| !prefix.contains(c)) {
                    let mut v = prefix.clone();
                    v.push((**c).clone());
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }

    /// Applies a call whose free lifetimes are fixed by `extra`, used when
    /// a lifetime is not determined by any argument.
    pub fn step_call_with(
        &mut self,
        srs: &Srs<'_>,
        inst: &CallInst,
        args: &[String],
        extra: &BTreeMap<Lifetime, Region>,
        target: Option<String>,
    ) -> Result<Effect, Rejection> {
        let mut next = self.clone();
        let eff = next.call_with(srs, inst, args, Some(extra), target)?;
        *self = next;
        Ok(eff)
    }

    /// Open regions, most recent first.
    pub fn open_regions(&self) -> Vec<Region> {
        let mut seen = BTreeSet::new();
        self.borrows.iter().rev().map(|b| b.region).filter(|r| seen.insert(*r)).collect()
    }
}

/// Replays a whole program from the empty state.
pub fn run_program(srs: &Srs<'_>, program: &[(Option<String>, Stmt)]) -> Result<SrsState, (usize, Rejection)> {
    let mut st = SrsState::new();
    for (i, (target, stmt)) in program.iter().enumerate() {
        st.step(srs, stmt, target.clone()).map_err(|e| (i, e))?;
    }
    Ok(st)
}

impl fmt::Display for SrsState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, b) in &self.bindings {
            write!(f, "{n}: {} {:?}", b.ty, b.access)?;
            if let Some(r) = b.region {
                write!(f, " @{}", r.0)?;
            }
            writeln!(f)?;
        }
        let recs: Vec<String> = self.borrows.iter().map(|b| format!("{:?}({} <- {}, @{})", b.kind, b.owner, b.reference, b.region.0)).collect();
        writeln!(f, "borrows: [{}]", recs.join(", "))
    }
}
