//! Places, tokens, the borrow stack, transitions and the firing rule.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

use crate::build::BuildReport;
use crate::multiset::Multiset;
use crate::sigenv::{Obligation, SigEnv};
use crate::types::{GroundType, Lifetime, Name, RegionLabel, SubstRecord, Ty, Universe, ValueId};
use crate::unify::{solve_guard, InstRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Capability {
    Own,
    Frz,
    Blk,
}

impl Capability {
    pub const ALL: [Capability; 3] = [Capability::Own, Capability::Frz, Capability::Blk];

    pub fn parse(s: &str) -> Option<Capability> {
        match s {
            "own" => Some(Capability::Own),
            "frz" => Some(Capability::Frz),
            "blk" => Some(Capability::Blk),
            _ => None,
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Capability::Own => "own",
            Capability::Frz => "frz",
            Capability::Blk => "blk",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlaceId {
    pub cap: Capability,
    pub ty: GroundType,
}

impl PlaceId {
    pub fn new(cap: Capability, ty: GroundType) -> Self {
        PlaceId { cap, ty }
    }
}

impl fmt::Display for PlaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cap, self.ty)
    }
}

/// Index of a place in the net's place table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlaceIx(pub u32);

/// A colored token: value id plus its type and lifetime context.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token {
    pub value: ValueId,
    pub ctx: SubstRecord,
}

impl Token {
    pub fn plain(value: ValueId) -> Token {
        Token { value, ctx: SubstRecord::empty() }
    }

    pub fn with_region(value: ValueId, region: RegionLabel) -> Token {
        Token { value, ctx: SubstRecord::empty().with_lifetime(Lifetime::Hook, region) }
    }

    /// The label bound to the hook, for reference tokens.
    pub fn region(&self) -> Option<RegionLabel> {
        self.ctx.lifetimes.get(&Lifetime::Hook).copied()
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)?;
        if let Some(r) = self.region() {
            write!(f, "@{r}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StackFrame {
    Freeze(ValueId),
    Shr { owner: ValueId, reference: ValueId, region: RegionLabel },
    Mut { owner: ValueId, reference: ValueId, region: RegionLabel },
}

impl StackFrame {
    pub fn region(&self) -> Option<RegionLabel> {
        match self {
            StackFrame::Freeze(_) => None,
            StackFrame::Shr { region, .. } | StackFrame::Mut { region, .. } => Some(*region),
        }
    }

    pub fn values(&self) -> Vec<ValueId> {
        match *self {
            StackFrame::Freeze(o) => alloc::vec![o],
            StackFrame::Shr { owner, reference, .. } | StackFrame::Mut { owner, reference, .. } => {
                alloc::vec![owner, reference]
            }
        }
    }
}

impl fmt::Display for StackFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StackFrame::Freeze(o) => write!(f, "Freeze({o})"),
            StackFrame::Shr { owner, reference, region } => write!(f, "Shr({owner},{reference},{region})"),
            StackFrame::Mut { owner, reference, region } => write!(f, "Mut({owner},{reference},{region})"),
        }
    }
}

/// Marking plus borrow stack; `stack[0]` is the top.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    pub marking: BTreeMap<PlaceIx, Multiset<Token>>,
    pub stack: Vec<StackFrame>,
}

impl Configuration {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn count(&self, place: PlaceIx) -> usize {
        self.marking.get(&place).map_or(0, Multiset::len)
    }

    pub fn add_token(&mut self, place: PlaceIx, token: Token) {
        self.marking.entry(place).or_default().insert(token);
    }

    pub fn remove_token(&mut self, place: PlaceIx, token: &Token) -> bool {
        let Some(m) = self.marking.get_mut(&place) else { return false };
        let removed = m.remove_one(token);
        if m.is_empty() {
            self.marking.remove(&place);
        }
        removed
    }

    /// Every token with its place, places in index order.
    pub fn tokens(&self) -> impl Iterator<Item = (PlaceIx, &Token)> {
        self.marking.iter().flat_map(|(p, m)| m.elements().map(move |t| (*p, t)))
    }

    pub fn token_count(&self) -> usize {
        self.marking.values().map(Multiset::len).sum()
    }

    /// Value ids occurring in the marking or on the stack.
    pub fn used_values(&self) -> BTreeSet<ValueId> {
        let mut out: BTreeSet<ValueId> = self.tokens().map(|(_, t)| t.value).collect();
        for f in &self.stack {
            out.extend(f.values());
        }
        out
    }

    /// Region labels occurring in token contexts or on the stack.
    pub fn used_labels(&self) -> BTreeSet<RegionLabel> {
        let mut out: BTreeSet<RegionLabel> =
            self.tokens().flat_map(|(_, t)| t.ctx.lifetimes.values().copied()).collect();
        out.extend(self.live_labels());
        out
    }

    /// Labels of regions still open on the stack.
    pub fn live_labels(&self) -> BTreeSet<RegionLabel> {
        self.stack.iter().filter_map(StackFrame::region).collect()
    }

    pub fn find_value(&self, v: ValueId) -> Option<(PlaceIx, &Token)> {
        self.tokens().find(|(_, t)| t.value == v)
    }

    /// Line-oriented rendering: one line per non-empty place, then the stack
    /// top first.
    pub fn dump(&self, net: &Net) -> String {
        let mut out = String::new();
        for (p, m) in &self.marking {
            let toks: Vec<String> = m.elements().map(|t| format!("{t}")).collect();
            out.push_str(&format!("{} = [{}]\n", net.place(*p), toks.join(", ")));
        }
        let frames: Vec<String> = self.stack.iter().map(|f| format!("{f}")).collect();
        out.push_str(&format!("stack = [{}]\n", frames.join(" · ")));
        out
    }
}

/// Rows of the structural schema tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SchemaKind {
    Move,
    CopyUse,
    DupCopy,
    DupClone,
    DropOwn,
    BorrowShrFirst,
    BorrowShr,
    BorrowMut,
    EndMut,
    EndShr,
    EndShrLast,
    ProjMove,
    ProjShr,
    ProjMut,
    ProjMutEnd,
    DerefCopy,
    ReborrowMut,
    ReborrowMutEnd,
    ReborrowShr,
    ReborrowShrEnd,
}

impl SchemaKind {
    pub const ALL: [SchemaKind; 20] = [
        SchemaKind::Move,
        SchemaKind::CopyUse,
        SchemaKind::DupCopy,
        SchemaKind::DupClone,
        SchemaKind::DropOwn,
        SchemaKind::BorrowShrFirst,
        SchemaKind::BorrowShr,
        SchemaKind::BorrowMut,
        SchemaKind::EndMut,
        SchemaKind::EndShr,
        SchemaKind::EndShrLast,
        SchemaKind::ProjMove,
        SchemaKind::ProjShr,
        SchemaKind::ProjMut,
        SchemaKind::ProjMutEnd,
        SchemaKind::DerefCopy,
        SchemaKind::ReborrowMut,
        SchemaKind::ReborrowMutEnd,
        SchemaKind::ReborrowShr,
        SchemaKind::ReborrowShrEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchemaKind::Move => "move",
            SchemaKind::CopyUse => "copy_use",
            SchemaKind::DupCopy => "dup_copy",
            SchemaKind::DupClone => "dup_clone",
            SchemaKind::DropOwn => "drop",
            SchemaKind::BorrowShrFirst => "borrow_shr_first",
            SchemaKind::BorrowShr => "borrow_shr",
            SchemaKind::BorrowMut => "borrow_mut",
            SchemaKind::EndMut => "end_mut",
            SchemaKind::EndShr => "end_shr",
            SchemaKind::EndShrLast => "end_shr_last",
            SchemaKind::ProjMove => "proj_move",
            SchemaKind::ProjShr => "proj_shr",
            SchemaKind::ProjMut => "proj_mut",
            SchemaKind::ProjMutEnd => "proj_mut_end",
            SchemaKind::DerefCopy => "deref_copy",
            SchemaKind::ReborrowMut => "reborrow_mut",
            SchemaKind::ReborrowMutEnd => "reborrow_mut_end",
            SchemaKind::ReborrowShr => "reborrow_shr",
            SchemaKind::ReborrowShrEnd => "reborrow_shr_end",
        }
    }

    /// Whether the row ends a region by popping the stack.
    pub fn is_pop(self) -> bool {
        matches!(
            self,
            SchemaKind::EndMut
                | SchemaKind::EndShr
                | SchemaKind::EndShrLast
                | SchemaKind::ProjMutEnd
                | SchemaKind::ReborrowMutEnd
                | SchemaKind::ReborrowShrEnd
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TransitionLabel {
    Call { item: usize, path: String, theta: Vec<(Name, GroundType)> },
    Schema { kind: SchemaKind, subject: GroundType, field: Option<Name>, child: Option<GroundType> },
}

impl TransitionLabel {
    pub fn schema(kind: SchemaKind, subject: &GroundType) -> Self {
        TransitionLabel::Schema { kind, subject: subject.clone(), field: None, child: None }
    }

    pub fn kind(&self) -> Option<SchemaKind> {
        match self {
            TransitionLabel::Schema { kind, .. } => Some(*kind),
            TransitionLabel::Call { .. } => None,
        }
    }
}

impl fmt::Display for TransitionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionLabel::Call { path, theta, .. } => {
                write!(f, "call {path}")?;
                if !theta.is_empty() {
                    let args: Vec<String> = theta.iter().map(|(_, t)| format!("{t}")).collect();
                    write!(f, "::<{}>", args.join(", "))?;
                }
                Ok(())
            }
            TransitionLabel::Schema { kind, subject, field, child } => {
                write!(f, "{} {subject}", kind.name())?;
                if let Some(fl) = field {
                    write!(f, ".{fl}")?;
                }
                if let Some(c) = child {
                    write!(f, " -> {c}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputPort {
    pub place: PlaceIx,
    /// Pattern unified against the observed token.
    pub scheme: Ty,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OutputSource {
    /// The token consumed on input port `i`, unchanged.
    Keep(usize),
    /// A fresh id carrying input `i`'s context.
    NewVal(usize),
    /// A fresh id carrying input `i`'s context with the hook bound to a fresh label.
    NewRef(usize),
    /// A fresh token; a reference result takes its region from the given lifetime.
    Fresh { region_from: Option<Lifetime> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputArc {
    pub place: PlaceIx,
    pub source: OutputSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Input(usize),
    Output(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameTemplate {
    Freeze { owner: Slot },
    Shr { owner: Slot, reference: Slot },
    Mut { owner: Slot, reference: Slot },
}

/// Frames are listed top first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StackAction {
    Eps,
    Push(Vec<FrameTemplate>),
    Pop(Vec<FrameTemplate>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StackGuard {
    /// The token on input `i` does not occur in any frame.
    NotOnStack(usize),
    /// After the pop, the new top is not `Freeze` of this slot's value.
    RemainderNotFreeze { owner: Slot },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub label: TransitionLabel,
    pub inputs: Vec<InputPort>,
    pub outputs: Vec<OutputArc>,
    pub action: StackAction,
    pub guards: Vec<StackGuard>,
    /// Obligations left for the runtime guard.
    pub obligations: Vec<Obligation>,
    pub type_vars: Vec<Name>,
    pub lifetime_vars: Vec<Lifetime>,
    /// Inputs may carry regions that have already ended.
    pub allow_ended: bool,
    /// Considered during reachability search.
    pub searchable: bool,
}

impl Transition {
    pub fn is_pop(&self) -> bool {
        matches!(self.action, StackAction::Pop(_))
    }
}

pub type InputChoice = Vec<(PlaceIx, Token)>;

/// A transition together with its consumed tokens and instantiation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Firing {
    pub transition: usize,
    pub inputs: InputChoice,
    pub inst: InstRecord,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FireError {
    #[error("transition `{0}` is not enabled with the given tokens")]
    NotEnabled(String),
    #[error("transition `{0}` pops frames that are not on top of the stack")]
    PopMismatch(String),
    #[error("instantiation of `{0}` lacks a fresh id or label")]
    MissingFresh(String),
}

/// A built net: place table, transitions and the environment used by guards.
#[derive(Clone, Debug)]
pub struct Net {
    places: Vec<PlaceId>,
    index: BTreeMap<PlaceId, PlaceIx>,
    pub transitions: Vec<Transition>,
    pub universe: Universe,
    pub env: SigEnv,
    pub report: BuildReport,
}

impl Net {
    pub fn new(universe: Universe, env: SigEnv) -> Net {
        let mut places = Vec::new();
        for cap in Capability::ALL {
            for ty in universe.iter() {
                places.push(PlaceId::new(cap, ty.clone()));
            }
        }
        places.sort();
        let index = places.iter().enumerate().map(|(i, p)| (p.clone(), PlaceIx(i as u32))).collect();
        Net { places, index, transitions: Vec::new(), universe, env, report: BuildReport::default() }
    }

    pub fn place(&self, ix: PlaceIx) -> &PlaceId {
        &self.places[ix.0 as usize]
    }

    pub fn place_ix(&self, place: &PlaceId) -> Option<PlaceIx> {
        self.index.get(place).copied()
    }

    /// Place index for a capability and a type, after erasing lifetimes.
    pub fn place_of(&self, cap: Capability, ty: &Ty) -> Option<PlaceIx> {
        self.place_ix(&PlaceId::new(cap, GroundType::erased(ty)?))
    }

    pub fn places(&self) -> impl Iterator<Item = (PlaceIx, &PlaceId)> {
        self.places.iter().enumerate().map(|(i, p)| (PlaceIx(i as u32), p))
    }

    pub fn place_count(&self) -> usize {
        self.places.len()
    }

    /// Every input choice and instantiation under which transition `t` is
    /// enabled at `cfg`.
    pub fn enabled_instances(&self, cfg: &Configuration, t: usize) -> Vec<(InputChoice, InstRecord)> {
        let tr = &self.transitions[t];
        let mut out = Vec::new();
        if tr.inputs.iter().any(|p| cfg.count(p.place) == 0) {
            return out;
        }
        let mut chosen = Vec::new();
        self.choose(cfg, tr, &mut chosen, &mut out);
        out
    }

    fn choose(&self, cfg: &Configuration, tr: &Transition, chosen: &mut InputChoice, out: &mut Vec<(InputChoice, InstRecord)>) {
        let i = chosen.len();
        if i == tr.inputs.len() {
            if self.stack_ok(cfg, tr, chosen) {
                for inst in solve_guard(self, tr, cfg, chosen) {
                    out.push((chosen.clone(), inst));
                }
            }
            return;
        }
        let place = tr.inputs[i].place;
        let Some(m) = cfg.marking.get(&place) else { return };
        for (tok, &n) in m.iter() {
            let taken = chosen.iter().filter(|(p, t)| *p == place && t == tok).count() as u32;
            if taken >= n {
                continue;
            }
            chosen.push((place, tok.clone()));
            self.choose(cfg, tr, chosen, out);
            chosen.pop();
        }
    }

    /// Stack conditions that depend only on the consumed tokens.
    fn stack_ok(&self, cfg: &Configuration, tr: &Transition, chi: &InputChoice) -> bool {
        for g in &tr.guards {
            if let StackGuard::NotOnStack(i) = g {
                let v = chi[*i].1.value;
                if cfg.stack.iter().any(|f| f.values().contains(&v)) {
                    return false;
                }
            }
        }
        if let StackAction::Pop(templates) = &tr.action {
            let Some(frames) = instantiate_frames(templates, chi, &[]) else { return false };
            if cfg.stack.len() < frames.len() || cfg.stack[..frames.len()] != frames[..] {
                return false;
            }
            for g in &tr.guards {
                if let StackGuard::RemainderNotFreeze { owner } = g {
                    let Some(v) = slot_value(*owner, chi, &[]) else { return false };
                    if cfg.stack.get(frames.len()) == Some(&StackFrame::Freeze(v)) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Applies a firing. Only the presence of the consumed tokens and the
    /// stack prefix are rechecked.
    pub fn fire(&self, cfg: &Configuration, firing: &Firing) -> Result<Configuration, FireError> {
        let tr = &self.transitions[firing.transition];
        let name = || format!("{}", tr.label);
        let chi = &firing.inputs;
        if chi.len() != tr.inputs.len() || chi.iter().zip(&tr.inputs).any(|((p, _), port)| *p != port.place) {
            return Err(FireError::NotEnabled(name()));
        }
        let mut next = cfg.clone();
        for (p, tok) in chi {
            if !next.remove_token(*p, tok) {
                return Err(FireError::NotEnabled(name()));
            }
        }
        let produced = self.produce(tr, firing).ok_or_else(|| FireError::MissingFresh(name()))?;
        match &tr.action {
            StackAction::Eps => {}
            StackAction::Push(templates) => {
                let frames = instantiate_frames(templates, chi, &produced).ok_or_else(|| FireError::MissingFresh(name()))?;
                let mut stack = frames;
                stack.extend(next.stack.iter().copied());
                next.stack = stack;
            }
            StackAction::Pop(templates) => {
                let frames = instantiate_frames(templates, chi, &produced).ok_or_else(|| FireError::PopMismatch(name()))?;
                if next.stack.len() < frames.len() || next.stack[..frames.len()] != frames[..] {
                    return Err(FireError::PopMismatch(name()));
                }
                next.stack.drain(..frames.len());
            }
        }
        for (arc, tok) in tr.outputs.iter().zip(produced) {
            next.add_token(arc.place, tok);
        }
        Ok(next)
    }

    fn produce(&self, tr: &Transition, firing: &Firing) -> Option<Vec<Token>> {
        let mut out = Vec::new();
        for (i, arc) in tr.outputs.iter().enumerate() {
            let target = &self.place(arc.place).ty;
            let keeps_region = target.as_ty().contains_ref();
            let restrict = |mut ctx: SubstRecord| {
                if !keeps_region {
                    ctx.lifetimes.clear();
                }
                ctx
            };
            let tok = match &arc.source {
                OutputSource::Keep(j) => firing.inputs[*j].1.clone(),
                OutputSource::NewVal(j) => Token {
                    value: *firing.inst.fresh_values.get(&i)?,
                    ctx: restrict(firing.inputs[*j].1.ctx.clone()),
                },
                OutputSource::NewRef(j) => {
                    let mut ctx = firing.inputs[*j].1.ctx.clone();
                    ctx.lifetimes.insert(Lifetime::Hook, *firing.inst.fresh_regions.get(&i)?);
                    Token { value: *firing.inst.fresh_values.get(&i)?, ctx: restrict(ctx) }
                }
                OutputSource::Fresh { region_from } => {
                    let value = *firing.inst.fresh_values.get(&i)?;
                    match region_from {
                        Some(l) if keeps_region => {
                            Token::with_region(value, *firing.inst.subst.lifetimes.get(l)?)
                        }
                        _ => Token::plain(value),
                    }
                }
            };
            out.push(tok);
        }
        Some(out)
    }

    /// All enabled firings at `cfg` with their successors, in transition
    /// order. With `searchable_only`, transitions excluded from search are
    /// skipped.
    pub fn successors(&self, cfg: &Configuration, searchable_only: bool) -> Vec<(Firing, Configuration)> {
        let mut out = Vec::new();
        for (t, tr) in self.transitions.iter().enumerate() {
            if searchable_only && !tr.searchable {
                continue;
            }
            for (inputs, inst) in self.enabled_instances(cfg, t) {
                let firing = Firing { transition: t, inputs, inst };
                let next = self.fire(cfg, &firing).expect("enabled firing applies");
                out.push((firing, next));
            }
        }
        out
    }

    /// Debug audit: every owner named on the stack sits in a frozen or
    /// blocked place, and every frozen owner has its `Freeze` frame.
    pub fn audit(&self, cfg: &Configuration) -> Result<(), String> {
        let cap_of = |v: ValueId| cfg.find_value(v).map(|(p, _)| self.place(p).cap);
        for f in &cfg.stack {
            match *f {
                StackFrame::Freeze(o) | StackFrame::Shr { owner: o, .. } => {
                    if cap_of(o) != Some(Capability::Frz) {
                        return Err(format!("owner of {f} is not frozen"));
                    }
                }
                StackFrame::Mut { owner, .. } => {
                    if cap_of(owner) != Some(Capability::Blk) {
                        return Err(format!("owner of {f} is not blocked"));
                    }
                }
            }
        }
        Ok(())
    }
}

fn slot_value(slot: Slot, chi: &InputChoice, produced: &[Token]) -> Option<ValueId> {
    match slot {
        Slot::Input(i) => chi.get(i).map(|(_, t)| t.value),
        Slot::Output(i) => produced.get(i).map(|t| t.value),
    }
}

fn slot_region(slot: Slot, chi: &InputChoice, produced: &[Token]) -> Option<RegionLabel> {
    match slot {
        Slot::Input(i) => chi.get(i)?.1.region(),
        Slot::Output(i) => produced.get(i)?.region(),
    }
}

fn instantiate_frames(templates: &[FrameTemplate], chi: &InputChoice, produced: &[Token]) -> Option<Vec<StackFrame>> {
    templates
        .iter()
        .map(|t| {
            Some(match *t {
                FrameTemplate::Freeze { owner } => StackFrame::Freeze(slot_value(owner, chi, produced)?),
                FrameTemplate::Shr { owner, reference } => StackFrame::Shr {
                    owner: slot_value(owner, chi, produced)?,
                    reference: slot_value(reference, chi, produced)?,
                    region: slot_region(reference, chi, produced)?,
                },
                FrameTemplate::Mut { owner, reference } => StackFrame::Mut {
                    owner: slot_value(owner, chi, produced)?,
                    reference: slot_value(reference, chi, produced)?,
                    region: slot_region(reference, chi, produced)?,
                },
            })
        })
        .collect()
}
