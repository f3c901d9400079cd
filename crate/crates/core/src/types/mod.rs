//! Type schemes, ground types and the finite ground universe.
//!
//! Signature types are [`Ty`] values. The subset without type variables and
//! unresolved projections is wrapped as [`GroundType`]; places of the net are
//! indexed by ground types whose reference lifetimes have all been replaced
//! by the runtime hook [`Lifetime::Hook`].

mod parse;
mod subst;
mod universe;

pub use parse::{parse_type, ParseCtx, TypeParseError};
pub use subst::{Incompatible, RegionLabel, SubstRecord, ValueId};
pub use universe::{build_ground_universe, StructTable, Universe, UniverseError};

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Name = String;

/// A lifetime position in a type: a declared lifetime variable or the hook
/// that carries net-generated region labels inside token colors.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lifetime {
    Hook,
    Var(Name),
}

impl fmt::Display for Lifetime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lifetime::Hook => f.write_str("'•"),
            Lifetime::Var(n) => write!(f, "'{n}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Qual {
    Shr,
    Mut,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ty {
    Base(Name),
    Var(Name),
    /// Nominal head applied to arguments.
    App(Name, Vec<Ty>),
    Tuple(Vec<Ty>),
    Slice(Box<Ty>),
    Ref(Qual, Lifetime, Box<Ty>),
    /// `<T as Trait>::Name`
    Assoc(Box<Ty>, Name, Name),
    /// `T.field`
    Field(Box<Ty>, Name),
}

impl Ty {
    pub fn base(name: &str) -> Ty {
        Ty::Base(name.into())
    }

    pub fn var(name: &str) -> Ty {
        Ty::Var(name.into())
    }

    pub fn unit() -> Ty {
        Ty::Tuple(Vec::new())
    }

    pub fn is_unit(&self) -> bool {
        matches!(self, Ty::Tuple(v) if v.is_empty())
    }

    pub fn shr(life: Lifetime, inner: Ty) -> Ty {
        Ty::Ref(Qual::Shr, life, Box::new(inner))
    }

    pub fn mutable(life: Lifetime, inner: Ty) -> Ty {
        Ty::Ref(Qual::Mut, life, Box::new(inner))
    }

    /// Shared reference carrying the runtime hook.
    pub fn hook_shr(inner: Ty) -> Ty {
        Ty::shr(Lifetime::Hook, inner)
    }

    /// Mutable reference carrying the runtime hook.
    pub fn hook_mut(inner: Ty) -> Ty {
        Ty::mutable(Lifetime::Hook, inner)
    }

    /// Immediate structural children, in order.
    pub fn children(&self) -> Vec<&Ty> {
        match self {
            Ty::Base(_) | Ty::Var(_) => Vec::new(),
            Ty::App(_, args) | Ty::Tuple(args) => args.iter().collect(),
            Ty::Slice(t) | Ty::Ref(_, _, t) | Ty::Assoc(t, _, _) | Ty::Field(t, _) => {
                alloc::vec![&**t]
            }
        }
    }

    /// The lifetime labels occurring in the type.
    pub fn fv_lifetimes(&self) -> BTreeSet<Lifetime> {
        let mut out = BTreeSet::new();
        self.collect_lifetimes(&mut out);
        out
    }

    fn collect_lifetimes(&self, out: &mut BTreeSet<Lifetime>) {
        if let Ty::Ref(_, l, _) = self {
            out.insert(l.clone());
        }
        for c in self.children() {
            c.collect_lifetimes(out);
        }
    }

    /// Lifetimes in left-to-right occurrence order, without duplicates.
    pub fn lifetimes_in_order(&self) -> Vec<Lifetime> {
        let mut out = Vec::new();
        self.walk(&mut |t| {
            if let Ty::Ref(_, l, _) = t {
                if !out.contains(l) {
                    out.push(l.clone());
                }
            }
        });
        out
    }

    pub fn type_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.walk(&mut |t| {
            if let Ty::Var(n) = t {
                out.insert(n.clone());
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut impl FnMut(&Ty)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn contains_ref(&self) -> bool {
        let mut found = false;
        self.walk(&mut |t| found |= matches!(t, Ty::Ref(..)));
        found
    }

    pub fn contains_mut_ref(&self) -> bool {
        let mut found = false;
        self.walk(&mut |t| found |= matches!(t, Ty::Ref(Qual::Mut, ..)));
        found
    }

    /// No type variables and no unresolved projections.
    pub fn is_ground(&self) -> bool {
        let mut ok = true;
        self.walk(&mut |t| {
            ok &= !matches!(t, Ty::Var(_) | Ty::Assoc(..) | Ty::Field(..));
        });
        ok
    }

    /// Maximum number of nested reference constructors on any path.
    pub fn ref_depth(&self) -> usize {
        let below = self.children().into_iter().map(Ty::ref_depth).max().unwrap_or(0);
        match self {
            Ty::Ref(..) => below + 1,
            _ => below,
        }
    }

    /// Replaces every reference lifetime by the hook.
    pub fn erase_lifetimes(&self) -> Ty {
        self.map_lifetimes(&mut |_| Lifetime::Hook)
    }

    pub fn map_lifetimes(&self, f: &mut impl FnMut(&Lifetime) -> Lifetime) -> Ty {
        match self {
            Ty::Base(_) | Ty::Var(_) => self.clone(),
            Ty::App(h, args) => Ty::App(h.clone(), args.iter().map(|a| a.map_lifetimes(f)).collect()),
            Ty::Tuple(args) => Ty::Tuple(args.iter().map(|a| a.map_lifetimes(f)).collect()),
            Ty::Slice(t) => Ty::Slice(Box::new(t.map_lifetimes(f))),
            Ty::Ref(q, l, t) => Ty::Ref(*q, f(l), Box::new(t.map_lifetimes(f))),
            Ty::Assoc(t, tr, a) => Ty::Assoc(Box::new(t.map_lifetimes(f)), tr.clone(), a.clone()),
            Ty::Field(t, n) => Ty::Field(Box::new(t.map_lifetimes(f)), n.clone()),
        }
    }

    /// Substitutes type variables; unmapped variables are kept.
    pub fn apply_types(&self, theta: &BTreeMap<Name, GroundType>) -> Ty {
        match self {
            Ty::Var(n) => theta.get(n).map(|g| g.as_ty().clone()).unwrap_or_else(|| self.clone()),
            Ty::Base(_) => self.clone(),
            Ty::App(h, args) => Ty::App(h.clone(), args.iter().map(|a| a.apply_types(theta)).collect()),
            Ty::Tuple(args) => Ty::Tuple(args.iter().map(|a| a.apply_types(theta)).collect()),
            Ty::Slice(t) => Ty::Slice(Box::new(t.apply_types(theta))),
            Ty::Ref(q, l, t) => Ty::Ref(*q, l.clone(), Box::new(t.apply_types(theta))),
            Ty::Assoc(t, tr, a) => Ty::Assoc(Box::new(t.apply_types(theta)), tr.clone(), a.clone()),
            Ty::Field(t, n) => Ty::Field(Box::new(t.apply_types(theta)), n.clone()),
        }
    }

    /// Nominal names used as base types or application heads.
    pub fn nominal_names(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.walk(&mut |t| match t {
            Ty::Base(n) | Ty::App(n, _) => {
                out.insert(n.clone());
            }
            _ => {}
        });
        out
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, items: &[Ty]) -> fmt::Result {
    for (i, t) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{t}")?;
    }
    Ok(())
}

/// Concrete syntax of the signature file. The hook is printed as an elided
/// lifetime, so `&u8` is the place type `Ref^shr_•(u8)`.
impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Base(n) | Ty::Var(n) => f.write_str(n),
            Ty::App(h, args) => {
                write!(f, "{h}<")?;
                write_list(f, args)?;
                f.write_str(">")
            }
            Ty::Tuple(args) => {
                f.write_str("(")?;
                write_list(f, args)?;
                if args.len() == 1 {
                    f.write_str(",")?;
                }
                f.write_str(")")
            }
            Ty::Slice(t) => write!(f, "[{t}]"),
            Ty::Ref(q, l, t) => {
                f.write_str("&")?;
                if let Lifetime::Var(n) = l {
                    write!(f, "'{n} ")?;
                }
                if *q == Qual::Mut {
                    f.write_str("mut ")?;
                }
                write!(f, "{t}")
            }
            Ty::Assoc(t, tr, a) => write!(f, "<{t} as {tr}>::{a}"),
            Ty::Field(t, n) => write!(f, "{t}.{n}"),
        }
    }
}

/// A type with no type variables and no unresolved projections.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundType(Ty);

impl GroundType {
    pub fn new(ty: Ty) -> Option<GroundType> {
        ty.is_ground().then_some(GroundType(ty))
    }

    /// Ground type with every lifetime replaced by the hook.
    pub fn erased(ty: &Ty) -> Option<GroundType> {
        GroundType::new(ty.erase_lifetimes())
    }

    pub fn base(name: &str) -> GroundType {
        GroundType(Ty::base(name))
    }

    pub fn as_ty(&self) -> &Ty {
        &self.0
    }

    pub fn into_ty(self) -> Ty {
        self.0
    }

    pub fn shr_ref(&self) -> GroundType {
        GroundType(Ty::hook_shr(self.0.clone()))
    }

    pub fn mut_ref(&self) -> GroundType {
        GroundType(Ty::hook_mut(self.0.clone()))
    }

    /// For a reference type, its qualifier and referent.
    pub fn referent(&self) -> Option<(Qual, GroundType)> {
        match &self.0 {
            Ty::Ref(q, _, t) => Some((*q, GroundType((**t).clone()))),
            _ => None,
        }
    }

    pub fn is_ref(&self) -> bool {
        matches!(self.0, Ty::Ref(..))
    }

    pub fn base_name(&self) -> Option<&str> {
        match &self.0 {
            Ty::Base(n) => Some(n),
            _ => None,
        }
    }
}

impl fmt::Display for GroundType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> Lifetime {
        Lifetime::Var("a".into())
    }

    #[test]
    fn fv_of_base_is_empty() {
        assert!(Ty::base("u8").fv_lifetimes().is_empty());
    }

    #[test]
    fn fv_of_nested_refs() {
        let t = Ty::shr(a(), Ty::mutable(Lifetime::Var("b".into()), Ty::base("u8")));
        let fv: Vec<_> = t.fv_lifetimes().into_iter().collect();
        assert_eq!(fv, alloc::vec![a(), Lifetime::Var("b".into())]);
    }

    #[test]
    fn fv_of_tuple_without_refs() {
        let t = Ty::Tuple(alloc::vec![Ty::base("u8"), Ty::var("A")]);
        assert!(t.fv_lifetimes().is_empty());
    }

    #[test]
    fn fv_looks_through_projections() {
        let t = Ty::Assoc(Box::new(Ty::shr(a(), Ty::var("T"))), "Tr".into(), "A".into());
        assert_eq!(t.fv_lifetimes().len(), 1);
        let t = Ty::Field(Box::new(Ty::shr(a(), Ty::var("T"))), "f".into());
        assert_eq!(t.fv_lifetimes().len(), 1);
    }

    #[test]
    fn ground_rejects_vars_and_projections() {
        assert!(GroundType::new(Ty::var("T")).is_none());
        assert!(GroundType::new(Ty::Field(Box::new(Ty::base("R")), "f".into())).is_none());
        assert!(GroundType::new(Ty::shr(a(), Ty::base("u8"))).is_some());
    }

    #[test]
    fn ref_depth_counts_nesting() {
        let t = Ty::hook_shr(Ty::Tuple(alloc::vec![Ty::hook_mut(Ty::base("u8")), Ty::base("R")]));
        assert_eq!(t.ref_depth(), 2);
        assert_eq!(Ty::base("u8").ref_depth(), 0);
    }

    #[test]
    fn display_uses_concrete_grammar() {
        use alloc::string::ToString;
        let t = Ty::shr(a(), Ty::App("Vec".into(), alloc::vec![Ty::base("u8")]));
        assert_eq!(t.to_string(), "&'a Vec<u8>");
        assert_eq!(Ty::hook_mut(Ty::base("R")).to_string(), "&mut R");
        let p = Ty::Assoc(Box::new(Ty::var("T")), "Iterator".into(), "Item".into());
        assert_eq!(p.to_string(), "<T as Iterator>::Item");
        assert_eq!(Ty::Tuple(alloc::vec![Ty::base("u8")]).to_string(), "(u8,)");
    }
}
