//! Construction of the net: monomorphized call transitions and the
//! structural schemas for every type of the ground universe.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

use crate::net::{
    Capability, FrameTemplate, InputPort, Net, OutputArc, OutputSource, PlaceIx, SchemaKind, Slot, StackAction, StackGuard,
    Transition, TransitionLabel,
};
use crate::sigenv::{CallableItem, Obligation, SigEnv};
use crate::types::{build_ground_universe, GroundType, Lifetime, Name, Qual, SubstRecord, Ty, UniverseError};
use crate::unify::{entail, resolve};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BuildOptions {
    /// Maximum reference nesting admitted into the universe.
    pub ref_depth: usize,
    /// Let the reachability search fire the no-op copy use.
    pub copy_use_searchable: bool,
    #[doc(hidden)]
    pub fault: Option<Fault>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { ref_depth: 2, copy_use_searchable: false, fault: None }
    }
}

/// Deliberate schema defects, used to check that the differential tests
/// notice a broken net.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    /// The last shared borrow's end leaves the owner frozen.
    EndShrLastKeepsFrozen,
    /// A mutable borrow pushes no frame.
    BorrowMutWithoutPush,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub universe: usize,
    pub places: usize,
    pub calls: usize,
    pub schemas: BTreeMap<&'static str, usize>,
    pub skipped: BTreeMap<String, usize>,
}

impl fmt::Display for BuildReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "universe types: {}", self.universe)?;
        writeln!(f, "places: {}", self.places)?;
        writeln!(f, "call transitions: {}", self.calls)?;
        for (k, n) in &self.schemas {
            writeln!(f, "schema {k}: {n}")?;
        }
        for (k, n) in &self.skipped {
            writeln!(f, "skipped ({k}): {n}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error(transparent)]
    Universe(#[from] UniverseError),
}

pub fn build_net(env: &SigEnv, opts: &BuildOptions) -> Result<Net, BuildError> {
    let universe = {
        let known = env.known_names();
        let mut seeds = initial_seeds(env);
        let shape_limit = shape_limit(env);
        loop {
            let u = build_ground_universe(&seeds, env.structs(), &known, opts.ref_depth)?;
            let before = seeds.len();
            for item in env.items.iter().filter(|it| !it.generics.is_empty()) {
                for theta in substitutions(item, &u) {
                    for ty in item.params.iter().chain(core::iter::once(&item.ret)) {
                        if let Some(g) = resolve(ty, &theta, &env.facts) {
                            let g = GroundType::erased(g.as_ty()).expect("resolved types are ground");
                            if shape_depth(g.as_ty()) <= shape_limit && !g.as_ty().is_unit() {
                                seeds.insert(g);
                            }
                        }
                    }
                }
            }
            if seeds.len() == before {
                break u;
            }
        }
    };
    let mut net = Net::new(universe, env.clone());
    let mut report = BuildReport { universe: net.universe.len(), places: net.place_count(), ..BuildReport::default() };
    let mut transitions = Vec::new();
    for (ix, item) in env.items.iter().enumerate() {
        for theta in substitutions(item, &net.universe) {
            match call_transition(&net, ix, item, &theta) {
                Ok(t) => {
                    report.calls += 1;
                    transitions.push(t);
                }
                Err(reason) => *report.skipped.entry(reason.into()).or_insert(0) += 1,
            }
        }
    }
    let schemas = SchemaBuilder { net: &net, opts }.build();
    for t in &schemas {
        if let Some(k) = t.label.kind() {
            *report.schemas.entry(k.name()).or_insert(0) += 1;
        }
    }
    transitions.extend(schemas);
    net.transitions = transitions;
    net.report = report;
    Ok(net)
}

fn initial_seeds(env: &SigEnv) -> BTreeSet<GroundType> {
    let mut seeds = BTreeSet::new();
    for (name, params) in &env.opaque {
        if params.is_empty() {
            seeds.insert(GroundType::base(name));
        }
    }
    for (name, _) in env.structs().iter() {
        seeds.insert(GroundType::base(name));
    }
    for item in &env.items {
        for ty in item.params.iter().chain(core::iter::once(&item.ret)) {
            if let Some(g) = resolve(ty, &SubstRecord::empty(), &env.facts) {
                if !g.as_ty().is_unit() {
                    seeds.insert(GroundType::erased(g.as_ty()).expect("resolved types are ground"));
                }
            }
        }
    }
    for ((ty, _, _), value) in env.facts.assoc_facts() {
        seeds.insert(ty.clone());
        seeds.insert(value.clone());
    }
    seeds
}

/// Nesting of tuple, slice and application constructors.
fn shape_depth(ty: &Ty) -> usize {
    let below = ty.children().into_iter().map(shape_depth).max().unwrap_or(0);
    match ty {
        Ty::App(..) | Ty::Tuple(..) | Ty::Slice(..) => below + 1,
        _ => below,
    }
}

/// Instantiated types may not nest constructors deeper than the signature
/// types themselves do.
fn shape_limit(env: &SigEnv) -> usize {
    let mut limit = 0;
    for item in &env.items {
        for ty in item.params.iter().chain(core::iter::once(&item.ret)) {
            limit = limit.max(shape_depth(ty));
        }
    }
    for (_, fields) in env.structs().iter() {
        for (_, t) in fields {
            limit = limit.max(shape_depth(t.as_ty()));
        }
    }
    limit
}

/// Every assignment of reference-free universe types to the item's type
/// parameters, in lexicographic order.
fn substitutions(item: &CallableItem, universe: &crate::types::Universe) -> Vec<SubstRecord> {
    let candidates: Vec<GroundType> = universe.ref_free().cloned().collect();
    let mut out = alloc::vec![SubstRecord::empty()];
    for g in &item.generics {
        let mut next = Vec::new();
        for s in &out {
            for c in &candidates {
                next.push(s.clone().with_type(g, c.clone()));
            }
        }
        out = next;
    }
    out
}

fn lifetimes_under_mut(ty: &Ty, out: &mut BTreeSet<Lifetime>) {
    ty.walk(&mut |t| {
        if let Ty::Ref(Qual::Mut, l, inner) = t {
            out.insert(l.clone());
            out.extend(inner.fv_lifetimes());
        }
    });
}

fn call_transition(net: &Net, ix: usize, item: &CallableItem, theta: &SubstRecord) -> Result<Transition, &'static str> {
    let facts = &net.env.facts;
    let mut params = Vec::new();
    for p in &item.params {
        let g = resolve(p, theta, facts).ok_or("unresolved projection")?;
        if !net.universe.admits(g.as_ty()) {
            return Err("outside universe");
        }
        params.push(g);
    }
    let ret = resolve(&item.ret, theta, facts).ok_or("unresolved projection")?;
    if !ret.as_ty().is_unit() && !net.universe.admits(ret.as_ty()) {
        return Err("outside universe");
    }
    let (statics, runtime): (Vec<Obligation>, Vec<Obligation>) =
        item.obligations.iter().cloned().partition(|o| !matches!(o, Obligation::Outlives { .. }));
    if entail(facts, &[], theta, &statics).is_err() {
        return Err("static obligation");
    }
    let result_lifetimes = ret.as_ty().lifetimes_in_order();
    if ret.as_ty().contains_mut_ref() {
        return Err("mutable reference result");
    }
    if result_lifetimes.len() > 1 {
        return Err("several result lifetimes");
    }
    let mut param_lifetimes = BTreeSet::new();
    let mut mut_lifetimes = BTreeSet::new();
    for p in &params {
        param_lifetimes.extend(p.as_ty().fv_lifetimes());
        lifetimes_under_mut(p.as_ty(), &mut mut_lifetimes);
    }
    if let Some(l) = result_lifetimes.first() {
        if !param_lifetimes.contains(l) {
            return Err("unbound result lifetime");
        }
        if mut_lifetimes.contains(l) {
            return Err("result borrows from a mutable reference");
        }
    }

    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (i, p) in params.iter().enumerate() {
        let place = net.place_of(Capability::Own, p.as_ty()).expect("admitted types have places");
        inputs.push(InputPort { place, scheme: p.as_ty().clone() });
        if p.is_ref() || net.env.is_copy(p) {
            outputs.push(OutputArc { place, source: OutputSource::Keep(i) });
        }
    }
    if !ret.as_ty().is_unit() {
        let place = net.place_of(Capability::Own, ret.as_ty()).expect("admitted types have places");
        outputs.push(OutputArc { place, source: OutputSource::Fresh { region_from: result_lifetimes.first().cloned() } });
    }
    Ok(Transition {
        label: TransitionLabel::Call {
            item: ix,
            path: item.path(),
            theta: theta.types.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        },
        inputs,
        outputs,
        action: StackAction::Eps,
        guards: Vec::new(),
        obligations: runtime,
        type_vars: Vec::new(),
        lifetime_vars: item.lifetimes.iter().map(|l| Lifetime::Var(l.clone())).collect(),
        allow_ended: false,
        searchable: true,
    })
}

struct SchemaBuilder<'a> {
    net: &'a Net,
    opts: &'a BuildOptions,
}

/// Scheme for input port `i`: the place type with its lifetimes renamed to a
/// port-local variable, so that two reference inputs never compete for the
/// hook binding.
fn port_scheme(ty: &GroundType, i: usize) -> Ty {
    ty.as_ty().map_lifetimes(&mut |_| Lifetime::Var(format!("in{i}")))
}

const IN0: Slot = Slot::Input(0);
const IN1: Slot = Slot::Input(1);
const OUT1: Slot = Slot::Output(1);

impl SchemaBuilder<'_> {
    fn place(&self, cap: Capability, ty: &GroundType) -> Option<PlaceIx> {
        self.net.place_of(cap, ty.as_ty())
    }

    fn build(&self) -> Vec<Transition> {
        let mut out = Vec::new();
        let mut proj_ends = BTreeSet::new();
        for ty in self.net.universe.iter() {
            self.ownership(ty, &mut out);
            self.borrows(ty, &mut out);
            for (field, fty) in self.net.env.structs().fields_of(ty) {
                self.projections(ty, field, fty, &mut proj_ends, &mut out);
            }
            self.derefs(ty, &mut out);
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &self,
        out: &mut Vec<Transition>,
        label: TransitionLabel,
        inputs: &[(Capability, &GroundType)],
        outputs: &[(Capability, &GroundType, OutputSource)],
        action: StackAction,
        guards: Vec<StackGuard>,
    ) {
        let mut ins = Vec::new();
        for (i, (cap, ty)) in inputs.iter().enumerate() {
            let Some(place) = self.place(*cap, ty) else { return };
            ins.push(InputPort { place, scheme: port_scheme(ty, i) });
        }
        let mut outs = Vec::new();
        for (cap, ty, source) in outputs {
            let Some(place) = self.place(*cap, ty) else { return };
            outs.push(OutputArc { place, source: source.clone() });
        }
        let kind = label.kind();
        let lifetime_vars = (0..inputs.len())
            .filter(|i| inputs[*i].1.as_ty().contains_ref())
            .map(|i| Lifetime::Var(format!("in{i}")))
            .collect();
        out.push(Transition {
            label,
            inputs: ins,
            outputs: outs,
            action,
            guards,
            obligations: Vec::new(),
            type_vars: Vec::new(),
            lifetime_vars,
            allow_ended: matches!(kind, Some(SchemaKind::Move | SchemaKind::DropOwn)),
            searchable: kind != Some(SchemaKind::CopyUse) || self.opts.copy_use_searchable,
        });
    }

    fn ownership(&self, ty: &GroundType, out: &mut Vec<Transition>) {
        use Capability::Own;
        use OutputSource::*;
        let env = &self.net.env;
        let copy = env.is_copy(ty);
        if copy {
            self.push(out, TransitionLabel::schema(SchemaKind::CopyUse, ty), &[(Own, ty)], &[(Own, ty, Keep(0))], StackAction::Eps, Vec::new());
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::DupCopy, ty),
                &[(Own, ty)],
                &[(Own, ty, Keep(0)), (Own, ty, NewVal(0))],
                StackAction::Eps,
                Vec::new(),
            );
        } else {
            self.push(out, TransitionLabel::schema(SchemaKind::Move, ty), &[(Own, ty)], &[], StackAction::Eps, alloc::vec![StackGuard::NotOnStack(0)]);
        }
        if env.facts.is_clone(ty) {
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::DupClone, ty),
                &[(Own, ty)],
                &[(Own, ty, Keep(0)), (Own, ty, NewVal(0))],
                StackAction::Eps,
                Vec::new(),
            );
        }
        self.push(out, TransitionLabel::schema(SchemaKind::DropOwn, ty), &[(Own, ty)], &[], StackAction::Eps, alloc::vec![StackGuard::NotOnStack(0)]);
    }

    fn borrows(&self, ty: &GroundType, out: &mut Vec<Transition>) {
        use Capability::*;
        use OutputSource::*;
        let shr = ty.shr_ref();
        let mutr = ty.mut_ref();
        let fault = self.opts.fault;
        if self.net.universe.contains(&shr) {
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::BorrowShrFirst, ty),
                &[(Own, ty)],
                &[(Frz, ty, Keep(0)), (Own, &shr, NewRef(0))],
                StackAction::Push(alloc::vec![
                    FrameTemplate::Shr { owner: IN0, reference: OUT1 },
                    FrameTemplate::Freeze { owner: IN0 }
                ]),
                Vec::new(),
            );
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::BorrowShr, ty),
                &[(Frz, ty)],
                &[(Frz, ty, Keep(0)), (Own, &shr, NewRef(0))],
                StackAction::Push(alloc::vec![FrameTemplate::Shr { owner: IN0, reference: OUT1 }]),
                Vec::new(),
            );
        }
        if self.net.universe.contains(&mutr) {
            let action = match fault {
                Some(Fault::BorrowMutWithoutPush) => StackAction::Eps,
                _ => StackAction::Push(alloc::vec![FrameTemplate::Mut { owner: IN0, reference: OUT1 }]),
            };
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::BorrowMut, ty),
                &[(Own, ty)],
                &[(Blk, ty, Keep(0)), (Own, &mutr, NewRef(0))],
                action,
                Vec::new(),
            );
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::EndMut, ty),
                &[(Blk, ty), (Own, &mutr)],
                &[(Own, ty, Keep(0))],
                StackAction::Pop(alloc::vec![FrameTemplate::Mut { owner: IN0, reference: IN1 }]),
                Vec::new(),
            );
        }
        if self.net.universe.contains(&shr) {
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::EndShr, ty),
                &[(Frz, ty), (Own, &shr)],
                &[(Frz, ty, Keep(0))],
                StackAction::Pop(alloc::vec![FrameTemplate::Shr { owner: IN0, reference: IN1 }]),
                alloc::vec![StackGuard::RemainderNotFreeze { owner: IN0 }],
            );
            let back = if fault == Some(Fault::EndShrLastKeepsFrozen) { Frz } else { Own };
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::EndShrLast, ty),
                &[(Frz, ty), (Own, &shr)],
                &[(back, ty, Keep(0))],
                StackAction::Pop(alloc::vec![
                    FrameTemplate::Shr { owner: IN0, reference: IN1 },
                    FrameTemplate::Freeze { owner: IN0 }
                ]),
                Vec::new(),
            );
        }
    }

    fn projections(
        &self,
        ty: &GroundType,
        field: &Name,
        fty: &GroundType,
        ends: &mut BTreeSet<(GroundType, GroundType)>,
        out: &mut Vec<Transition>,
    ) {
        use Capability::*;
        use OutputSource::*;
        let u = &self.net.universe;
        let label = |kind| TransitionLabel::Schema {
            kind,
            subject: ty.clone(),
            field: Some(field.clone()),
            child: Some(fty.clone()),
        };
        self.push(out, label(SchemaKind::ProjMove), &[(Own, ty)], &[(Own, fty, NewVal(0))], StackAction::Eps, Vec::new());
        let (shr, fshr) = (ty.shr_ref(), fty.shr_ref());
        if u.contains(&shr) && u.contains(&fshr) {
            self.push(
                out,
                label(SchemaKind::ProjShr),
                &[(Own, &shr)],
                &[(Own, &shr, Keep(0)), (Own, &fshr, NewVal(0))],
                StackAction::Eps,
                Vec::new(),
            );
        }
        let (mutr, fmut) = (ty.mut_ref(), fty.mut_ref());
        if u.contains(&mutr) && u.contains(&fmut) {
            self.push(
                out,
                label(SchemaKind::ProjMut),
                &[(Own, &mutr)],
                &[(Blk, &mutr, Keep(0)), (Own, &fmut, NewRef(0))],
                StackAction::Push(alloc::vec![FrameTemplate::Mut { owner: IN0, reference: OUT1 }]),
                Vec::new(),
            );
            if ends.insert((ty.clone(), fty.clone())) {
                self.push(
                    out,
                    TransitionLabel::Schema {
                        kind: SchemaKind::ProjMutEnd,
                        subject: ty.clone(),
                        field: None,
                        child: Some(fty.clone()),
                    },
                    &[(Blk, &mutr), (Own, &fmut)],
                    &[(Own, &mutr, Keep(0))],
                    StackAction::Pop(alloc::vec![FrameTemplate::Mut { owner: IN0, reference: IN1 }]),
                    Vec::new(),
                );
            }
        }
    }

    fn derefs(&self, ty: &GroundType, out: &mut Vec<Transition>) {
        use Capability::*;
        use OutputSource::*;
        let u = &self.net.universe;
        let (shr, mutr) = (ty.shr_ref(), ty.mut_ref());
        if self.net.env.is_copy(ty) && u.contains(&shr) {
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::DerefCopy, ty),
                &[(Own, &shr)],
                &[(Own, &shr, Keep(0)), (Own, ty, NewVal(0))],
                StackAction::Eps,
                Vec::new(),
            );
        }
        if !u.contains(&mutr) {
            return;
        }
        let push_mut = || StackAction::Push(alloc::vec![FrameTemplate::Mut { owner: IN0, reference: OUT1 }]);
        let pop_mut = || StackAction::Pop(alloc::vec![FrameTemplate::Mut { owner: IN0, reference: IN1 }]);
        self.push(
            out,
            TransitionLabel::schema(SchemaKind::ReborrowMut, ty),
            &[(Own, &mutr)],
            &[(Blk, &mutr, Keep(0)), (Own, &mutr, NewRef(0))],
            push_mut(),
            Vec::new(),
        );
        self.push(
            out,
            TransitionLabel::schema(SchemaKind::ReborrowMutEnd, ty),
            &[(Blk, &mutr), (Own, &mutr)],
            &[(Own, &mutr, Keep(0))],
            pop_mut(),
            Vec::new(),
        );
        if u.contains(&shr) {
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::ReborrowShr, ty),
                &[(Own, &mutr)],
                &[(Blk, &mutr, Keep(0)), (Own, &shr, NewRef(0))],
                push_mut(),
                Vec::new(),
            );
            self.push(
                out,
                TransitionLabel::schema(SchemaKind::ReborrowShrEnd, ty),
                &[(Blk, &mutr), (Own, &shr)],
                &[(Own, &mutr, Keep(0))],
                pop_mut(),
                Vec::new(),
            );
        }
    }
}

/// Labels of the built transitions, one per line, for determinism checks.
pub fn describe(net: &Net) -> String {
    let mut s = String::new();
    for t in &net.transitions {
        s.push_str(&t.label.to_string());
        s.push('\n');
    }
    s
}
