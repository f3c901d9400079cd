//! The signature environment: callable items, trait and associated-type
//! facts, and struct field tables.
//!
//! [`SigSource`] is the raw, string-typed description read from a signature
//! file; [`SigEnv::from_source`] validates and resolves it.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use thiserror::Error;

use crate::types::{parse_type, GroundType, Lifetime, Name, ParseCtx, StructTable, Ty, TypeParseError};

pub const PRIMITIVES: &[&str] = &[
    "bool", "char", "f32", "f64", "i8", "i16", "i32", "i64", "i128", "isize", "u8", "u16", "u32", "u64", "u128",
    "usize",
];

pub const COPY: &str = "Copy";
pub const CLONE: &str = "Clone";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Obligation {
    Trait { ty: Ty, trait_name: Name },
    AssocEq { ty: Ty, trait_name: Name, assoc: Name, expected: Ty },
    Outlives { longer: Lifetime, shorter: Lifetime },
    /// Produced only by unifying against a field projection.
    FieldEq { ty: Ty, field: Name, expected: GroundType },
}

impl fmt::Display for Obligation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obligation::Trait { ty, trait_name } => write!(f, "{ty}: {trait_name}"),
            Obligation::AssocEq { ty, trait_name, assoc, expected } => {
                write!(f, "<{ty} as {trait_name}>::{assoc} = {expected}")
            }
            Obligation::Outlives { longer, shorter } => write!(f, "{longer}: {shorter}"),
            Obligation::FieldEq { ty, field, expected } => write!(f, "{ty}.{field} = {expected}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallableItem {
    pub name: Name,
    /// Type the item is declared on, for associated functions and methods.
    pub self_ty: Option<Name>,
    pub generics: Vec<Name>,
    pub lifetimes: Vec<Name>,
    pub params: Vec<Ty>,
    pub ret: Ty,
    pub obligations: Vec<Obligation>,
}

impl CallableItem {
    /// Path used at call sites, `f` or `R::f`.
    pub fn path(&self) -> String {
        match &self.self_ty {
            Some(s) => format!("{s}::{}", self.name),
            None => self.name.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FactTables {
    impls: BTreeSet<(GroundType, Name)>,
    assoc: BTreeMap<(GroundType, Name, Name), GroundType>,
    pub structs: StructTable,
}

impl FactTables {
    pub fn implements(&self, ty: &GroundType, trait_name: &str) -> bool {
        let erased = GroundType::erased(ty.as_ty()).unwrap_or_else(|| ty.clone());
        self.impls.contains(&(erased, trait_name.to_string()))
    }

    pub fn is_copy(&self, ty: &GroundType) -> bool {
        self.implements(ty, COPY)
    }

    pub fn is_clone(&self, ty: &GroundType) -> bool {
        self.implements(ty, CLONE)
    }

    pub fn assoc_ty(&self, ty: &GroundType, trait_name: &str, assoc: &str) -> Option<&GroundType> {
        let erased = GroundType::erased(ty.as_ty())?;
        self.assoc.get(&(erased, trait_name.to_string(), assoc.to_string()))
    }

    pub fn field_ty(&self, ty: &GroundType, field: &str) -> Option<&GroundType> {
        self.structs.field_type(ty, field)
    }

    pub fn impl_facts(&self) -> impl Iterator<Item = &(GroundType, Name)> {
        self.impls.iter()
    }

    pub fn assoc_facts(&self) -> impl Iterator<Item = (&(GroundType, Name, Name), &GroundType)> {
        self.assoc.iter()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StructDecl {
    pub name: String,
    pub fields: Vec<(String, String)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ImplDecl {
    pub ty: String,
    pub trait_name: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AssocDecl {
    pub ty: String,
    pub trait_name: String,
    pub name: String,
    pub value: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FnDecl {
    pub name: String,
    pub self_ty: Option<String>,
    pub generics: Vec<String>,
    pub lifetimes: Vec<String>,
    pub params: Vec<String>,
    /// Absent means the unit type.
    pub ret: Option<String>,
    pub bounds: Vec<String>,
}

/// String-level contents of a signature file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SigSource {
    pub types: Vec<String>,
    pub structs: Vec<StructDecl>,
    pub impls: Vec<ImplDecl>,
    pub assoc: Vec<AssocDecl>,
    pub fns: Vec<FnDecl>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SigError {
    #[error("{context}: {source}")]
    Type { context: String, source: TypeParseError },
    #[error("{context}: undeclared type `{name}`")]
    UndeclaredType { context: String, name: Name },
    #[error("{context}: undeclared trait `{name}`")]
    UndeclaredTrait { context: String, name: Name },
    #[error("{context}: `{name}` expects {expected} type argument(s), found {found}")]
    Arity { context: String, name: Name, expected: usize, found: usize },
    #[error("duplicate associated type `<{ty} as {trait_name}>::{name}`")]
    DuplicateAssoc { ty: String, trait_name: Name, name: Name },
    #[error("type `{0}` declared twice")]
    DuplicateType(Name),
    #[error("callable `{0}` declared twice")]
    DuplicateFn(String),
    #[error("{context}: cannot read bound `{text}`")]
    BadBound { context: String, text: String },
    #[error("{context}: `{text}` is not a valid type declaration")]
    BadDecl { context: String, text: String },
    #[error("struct `{owner}`: field `{field}` must be a plain owned type")]
    RefField { owner: Name, field: Name },
    #[error("{context}: field projection needs a concrete base type")]
    FieldProjection { context: String },
    #[error("{context}: `{ty}` has no field `{field}`")]
    UnknownField { context: String, ty: String, field: Name },
    #[error("{context}: `{name}` is a generic type and cannot carry methods")]
    GenericSelf { context: String, name: Name },
}

/// A validated signature environment.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SigEnv {
    /// Declared nominal types that are not structs, with their type
    /// parameter names.
    pub opaque: BTreeMap<Name, Vec<Name>>,
    pub facts: FactTables,
    pub items: Vec<CallableItem>,
    /// User traits and the associated type names they carry.
    pub traits: BTreeMap<Name, BTreeSet<Name>>,
    user_impls: BTreeSet<(GroundType, Name)>,
}

impl SigEnv {
    pub fn empty() -> Self {
        SigEnv::from_source(&SigSource::default()).expect("empty environment is valid")
    }

    pub fn is_copy(&self, ty: &GroundType) -> bool {
        self.facts.is_copy(ty)
    }

    pub fn structs(&self) -> &StructTable {
        &self.facts.structs
    }

    /// Every nominal name that may appear in a type.
    pub fn known_names(&self) -> BTreeSet<Name> {
        let mut out: BTreeSet<Name> = PRIMITIVES.iter().map(|s| s.to_string()).collect();
        out.extend(self.opaque.keys().cloned());
        out.extend(self.facts.structs.iter().map(|(n, _)| n.clone()));
        out
    }

    /// Facts that came from the file, as opposed to the preloaded ones.
    pub fn user_impls(&self) -> impl Iterator<Item = &(GroundType, Name)> {
        self.user_impls.iter()
    }

    pub fn from_source(src: &SigSource) -> Result<SigEnv, SigError> {
        Loader::default().load(src)
    }

    pub fn to_source(&self) -> SigSource {
        let mut types = Vec::new();
        for (name, params) in &self.opaque {
            if params.is_empty() {
                types.push(name.clone());
            } else {
                types.push(format!("{name}<{}>", params.join(", ")));
            }
        }
        let structs = self
            .facts
            .structs
            .iter()
            .map(|(name, fields)| StructDecl {
                name: name.clone(),
                fields: fields.iter().map(|(f, t)| (f.clone(), t.to_string())).collect(),
            })
            .collect();
        let impls = self
            .user_impls
            .iter()
            .map(|(t, tr)| ImplDecl { ty: t.to_string(), trait_name: tr.clone() })
            .collect();
        let assoc = self
            .facts
            .assoc
            .iter()
            .map(|((t, tr, a), v)| AssocDecl {
                ty: t.to_string(),
                trait_name: tr.clone(),
                name: a.clone(),
                value: v.to_string(),
            })
            .collect();
        let fns = self
            .items
            .iter()
            .map(|it| FnDecl {
                name: it.name.clone(),
                self_ty: it.self_ty.clone(),
                generics: it.generics.clone(),
                lifetimes: it.lifetimes.clone(),
                params: it.params.iter().map(|p| p.to_string()).collect(),
                ret: if it.ret.is_unit() { None } else { Some(it.ret.to_string()) },
                bounds: it.obligations.iter().map(|o| o.to_string()).collect(),
            })
            .collect();
        SigSource { types, structs, impls, assoc, fns }
    }
}

#[derive(Default)]
struct Loader {
    env: SigEnv,
    known_traits: BTreeSet<Name>,
    struct_names: BTreeSet<Name>,
}

impl Loader {
    fn load(mut self, src: &SigSource) -> Result<SigEnv, SigError> {
        for p in PRIMITIVES {
            let t = GroundType::base(p);
            self.env.facts.impls.insert((t.clone(), COPY.into()));
            self.env.facts.impls.insert((t, CLONE.into()));
        }
        self.known_traits.insert(COPY.into());
        self.known_traits.insert(CLONE.into());

        self.declare_types(src)?;
        self.known_traits.extend(src.impls.iter().map(|i| i.trait_name.clone()));
        self.known_traits.extend(src.assoc.iter().map(|a| a.trait_name.clone()));
        for t in &self.known_traits {
            if t != COPY && t != CLONE {
                self.env.traits.entry(t.clone()).or_default();
            }
        }
        self.load_structs(src)?;
        self.load_facts(src)?;
        for f in &src.fns {
            let item = self.load_fn(f)?;
            if self.env.items.iter().any(|it| it.path() == item.path()) {
                return Err(SigError::DuplicateFn(item.path()));
            }
            self.env.items.push(item);
        }
        Ok(self.env)
    }

    fn declare_types(&mut self, src: &SigSource) -> Result<(), SigError> {
        let mut seen: BTreeSet<Name> = PRIMITIVES.iter().map(|s| s.to_string()).collect();
        for text in &src.types {
            let ctx = format!("type `{text}`");
            let parsed = parse_type(text, &ParseCtx::default()).map_err(|e| SigError::Type { context: ctx.clone(), source: e })?;
            let (name, params) = match parsed {
                Ty::Base(n) => (n, Vec::new()),
                Ty::App(n, args) => {
                    let mut params = Vec::new();
                    for a in args {
                        match a {
                            Ty::Base(p) => params.push(p),
                            _ => return Err(SigError::BadDecl { context: ctx, text: text.clone() }),
                        }
                    }
                    (n, params)
                }
                _ => return Err(SigError::BadDecl { context: ctx, text: text.clone() }),
            };
            if !seen.insert(name.clone()) {
                return Err(SigError::DuplicateType(name));
            }
            self.env.opaque.insert(name, params);
        }
        for s in &src.structs {
            if !seen.insert(s.name.clone()) {
                return Err(SigError::DuplicateType(s.name.clone()));
            }
            self.struct_names.insert(s.name.clone());
        }
        Ok(())
    }

    fn arity(&self, name: &str) -> Option<usize> {
        if PRIMITIVES.contains(&name) || self.struct_names.contains(name) {
            return Some(0);
        }
        self.env.opaque.get(name).map(Vec::len)
    }

    /// Checks nominal names, arities and trait names of a parsed type.
    fn check_ty(&self, ty: &Ty, context: &str) -> Result<(), SigError> {
        let mut result = Ok(());
        ty.walk(&mut |t| {
            if result.is_err() {
                return;
            }
            match t {
                Ty::Base(n) | Ty::App(n, _) => {
                    let found = if let Ty::App(_, args) = t { args.len() } else { 0 };
                    match self.arity(n) {
                        None => {
                            result = Err(SigError::UndeclaredType { context: context.into(), name: n.clone() });
                        }
                        Some(expected) if expected != found => {
                            result = Err(SigError::Arity { context: context.into(), name: n.clone(), expected, found });
                        }
                        Some(_) => {}
                    }
                }
                Ty::Assoc(_, tr, _) if !self.known_traits.contains(tr) => {
                    result = Err(SigError::UndeclaredTrait { context: context.into(), name: tr.clone() });
                }
                _ => {}
            }
        });
        result
    }

    fn ground(&self, text: &str, context: &str) -> Result<GroundType, SigError> {
        let ctx = ParseCtx { lifetimes: Some(BTreeSet::new()), ..ParseCtx::default() };
        let ty = parse_type(text, &ctx).map_err(|e| SigError::Type { context: context.into(), source: e })?;
        self.check_ty(&ty, context)?;
        GroundType::new(ty).ok_or_else(|| SigError::BadDecl { context: context.into(), text: text.into() })
    }

    fn load_structs(&mut self, src: &SigSource) -> Result<(), SigError> {
        for s in &src.structs {
            let mut fields = Vec::new();
            for (f, text) in &s.fields {
                let context = format!("struct `{}` field `{f}`", s.name);
                let ctx = ParseCtx { allow_elided: true, ..ParseCtx::default() };
                let ty = parse_type(text, &ctx).map_err(|e| SigError::Type { context: context.clone(), source: e })?;
                if ty.contains_ref() {
                    return Err(SigError::RefField { owner: s.name.clone(), field: f.clone() });
                }
                self.check_ty(&ty, &context)?;
                let g = GroundType::new(ty).ok_or_else(|| SigError::BadDecl { context, text: text.clone() })?;
                fields.push((f.clone(), g));
            }
            self.env.facts.structs.insert(&s.name, fields);
        }
        Ok(())
    }

    fn load_facts(&mut self, src: &SigSource) -> Result<(), SigError> {
        for i in &src.impls {
            let context = format!("impl {} for {}", i.trait_name, i.ty);
            let ty = self.ground(&i.ty, &context)?;
            self.add_impl(ty.clone(), &i.trait_name);
            if i.trait_name == COPY {
                self.add_impl(ty, CLONE);
            }
        }
        for a in &src.assoc {
            let context = format!("<{} as {}>::{}", a.ty, a.trait_name, a.name);
            let ty = self.ground(&a.ty, &context)?;
            let value = self.ground(&a.value, &context)?;
            let key = (ty.clone(), a.trait_name.clone(), a.name.clone());
            if self.env.facts.assoc.contains_key(&key) {
                return Err(SigError::DuplicateAssoc { ty: a.ty.clone(), trait_name: a.trait_name.clone(), name: a.name.clone() });
            }
            self.env.facts.assoc.insert(key, value);
            self.env.traits.entry(a.trait_name.clone()).or_default().insert(a.name.clone());
            self.add_impl(ty, &a.trait_name);
        }
        Ok(())
    }

    fn add_impl(&mut self, ty: GroundType, trait_name: &str) {
        let is_preloaded = ty.base_name().is_some_and(|n| PRIMITIVES.contains(&n)) && (trait_name == COPY || trait_name == CLONE);
        if !is_preloaded {
            self.env.user_impls.insert((ty.clone(), trait_name.into()));
        }
        self.env.facts.impls.insert((ty, trait_name.into()));
    }

    fn load_fn(&mut self, f: &FnDecl) -> Result<CallableItem, SigError> {
        let context = match &f.self_ty {
            Some(s) => format!("fn {s}::{}", f.name),
            None => format!("fn {}", f.name),
        };
        let self_ty = match &f.self_ty {
            None => None,
            Some(s) => match self.env.opaque.get(s) {
                Some(params) if !params.is_empty() => {
                    return Err(SigError::GenericSelf { context, name: s.clone() });
                }
                Some(_) => Some(Ty::base(s)),
                None if self.env.facts.structs.is_struct(s) || PRIMITIVES.contains(&s.as_str()) => Some(Ty::base(s)),
                None => return Err(SigError::UndeclaredType { context, name: s.clone() }),
            },
        };
        let ctx = ParseCtx {
            type_vars: f.generics.iter().cloned().collect(),
            lifetimes: Some(f.lifetimes.iter().cloned().collect()),
            allow_elided: false,
            self_ty,
        };
        let parse = |text: &str, what: String| -> Result<Ty, SigError> {
            let context = format!("{context}, {what}");
            let ty = parse_type(text, &ctx).map_err(|e| SigError::Type { context: context.clone(), source: e })?;
            self.check_ty(&ty, &context)?;
            self.check_projections(&ty, &context)?;
            Ok(ty)
        };
        let mut params = Vec::new();
        for (i, p) in f.params.iter().enumerate() {
            params.push(parse(p, format!("param {i}"))?);
        }
        let ret = match &f.ret {
            Some(r) => parse(r, "return type".into())?,
            None => Ty::unit(),
        };
        let mut obligations = Vec::new();
        for b in &f.bounds {
            obligations.extend(self.parse_bound(b, &ctx, &context)?);
        }
        Ok(CallableItem {
            name: f.name.clone(),
            self_ty: f.self_ty.clone(),
            generics: f.generics.clone(),
            lifetimes: f.lifetimes.clone(),
            params,
            ret,
            obligations,
        })
    }

    fn check_projections(&self, ty: &Ty, context: &str) -> Result<(), SigError> {
        let mut result = Ok(());
        ty.walk(&mut |t| {
            if let Ty::Field(base, field) = t {
                if result.is_err() {
                    return;
                }
                match GroundType::new((**base).clone()) {
                    None => result = Err(SigError::FieldProjection { context: context.into() }),
                    Some(g) if self.env.facts.field_ty(&g, field).is_none() => {
                        result = Err(SigError::UnknownField { context: context.into(), ty: g.to_string(), field: field.clone() })
                    }
                    Some(_) => {}
                }
            }
        });
        result
    }

    fn parse_bound(&self, text: &str, ctx: &ParseCtx, context: &str) -> Result<Vec<Obligation>, SigError> {
        let bad = || SigError::BadBound { context: context.into(), text: text.into() };
        let trimmed = text.trim();
        let ty_err = |e| SigError::Type { context: format!("{context}, bound `{text}`"), source: e };
        if let Some(rest) = trimmed.strip_prefix('\'') {
            let (l, r) = rest.split_once(':').ok_or_else(bad)?;
            let r = r.trim().strip_prefix('\'').ok_or_else(bad)?;
            let declared = ctx.lifetimes.as_ref().ok_or_else(bad)?;
            let mut out = Vec::new();
            let longer = l.trim();
            for shorter in r.split('+').map(|s| s.trim().trim_start_matches('\'')) {
                for name in [longer, shorter] {
                    if !declared.contains(name) {
                        return Err(bad());
                    }
                }
                out.push(Obligation::Outlives { longer: Lifetime::Var(longer.into()), shorter: Lifetime::Var(shorter.into()) });
            }
            return Ok(out);
        }
        if let Some((lhs, rhs)) = trimmed.split_once('=') {
            let lhs = parse_type(lhs, ctx).map_err(ty_err)?;
            let expected = parse_type(rhs, ctx).map_err(ty_err)?;
            self.check_ty(&lhs, context)?;
            self.check_ty(&expected, context)?;
            return match lhs {
                Ty::Assoc(ty, trait_name, assoc) => Ok(alloc::vec![Obligation::AssocEq { ty: *ty, trait_name, assoc, expected }]),
                _ => Err(bad()),
            };
        }
        let chars: Vec<char> = trimmed.chars().collect();
        let split = (0..chars.len())
            .find(|&i| {
                chars[i] == ':' && (i == 0 || chars[i - 1] != ':') && chars.get(i + 1) != Some(&':')
            })
            .ok_or_else(bad)?;
        let lhs: String = chars[..split].iter().collect();
        let rhs: String = chars[split + 1..].iter().collect();
        let ty = parse_type(&lhs, ctx).map_err(ty_err)?;
        self.check_ty(&ty, context)?;
        let mut out = Vec::new();
        for tr in rhs.split('+').map(str::trim) {
            if tr.is_empty() {
                return Err(bad());
            }
            if !self.known_traits.contains(tr) {
                return Err(SigError::UndeclaredTrait { context: context.into(), name: tr.into() });
            }
            out.push(Obligation::Trait { ty: ty.clone(), trait_name: tr.into() });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fn_decl(name: &str, params: &[&str], ret: Option<&str>) -> FnDecl {
        FnDecl {
            name: name.into(),
            params: params.iter().map(|s| s.to_string()).collect(),
            ret: ret.map(Into::into),
            ..FnDecl::default()
        }
    }

    #[test]
    fn literal_constructor_is_a_nullary_item() {
        let src = SigSource { fns: alloc::vec![fn_decl("lit_u8", &[], Some("u8"))], ..SigSource::default() };
        let env = SigEnv::from_source(&src).unwrap();
        assert_eq!(env.items.len(), 1);
        assert!(env.items[0].params.is_empty());
        assert_eq!(env.items[0].ret, Ty::base("u8"));
    }

    #[test]
    fn empty_source_is_empty() {
        let env = SigEnv::empty();
        assert!(env.items.is_empty());
        assert!(env.opaque.is_empty());
        assert!(env.facts.structs.is_empty());
        assert_eq!(env.user_impls().count(), 0);
    }

    #[test]
    fn duplicate_assoc_is_rejected() {
        let a = AssocDecl { ty: "R".into(), trait_name: "Iter".into(), name: "Item".into(), value: "u8".into() };
        let src = SigSource { types: alloc::vec!["R".into()], assoc: alloc::vec![a.clone(), a], ..SigSource::default() };
        assert!(matches!(SigEnv::from_source(&src), Err(SigError::DuplicateAssoc { .. })));
    }

    #[test]
    fn copy_facts() {
        let mut src = SigSource { types: alloc::vec!["R".into(), "S".into()], ..SigSource::default() };
        src.impls.push(ImplDecl { ty: "S".into(), trait_name: "Copy".into() });
        let env = SigEnv::from_source(&src).unwrap();
        assert!(env.is_copy(&GroundType::base("u8")));
        assert!(!env.is_copy(&GroundType::base("R")));
        assert!(env.is_copy(&GroundType::base("S")));
        assert!(env.facts.is_clone(&GroundType::base("S")));
    }

    #[test]
    fn every_primitive_is_copy_and_clone() {
        let env = SigEnv::empty();
        for p in PRIMITIVES {
            assert!(env.is_copy(&GroundType::base(p)), "{p}");
            assert!(env.facts.is_clone(&GroundType::base(p)), "{p}");
        }
    }

    #[test]
    fn undeclared_names_are_reported() {
        let src = SigSource { fns: alloc::vec![fn_decl("f", &["Nope"], None)], ..SigSource::default() };
        assert!(matches!(SigEnv::from_source(&src), Err(SigError::UndeclaredType { .. })));
        let src = SigSource { fns: alloc::vec![fn_decl("f", &["&'a u8"], None)], ..SigSource::default() };
        assert!(matches!(SigEnv::from_source(&src), Err(SigError::Type { .. })));
        let mut f = fn_decl("f", &["T"], None);
        f.generics.push("T".into());
        f.bounds.push("T: Frob".into());
        let src = SigSource { fns: alloc::vec![f], ..SigSource::default() };
        assert!(matches!(SigEnv::from_source(&src), Err(SigError::UndeclaredTrait { .. })));
    }

    #[test]
    fn bounds_become_obligations() {
        let mut f = fn_decl("f", &["&'a T", "&'b T"], Some("<T as Iter>::Item"));
        f.generics.push("T".into());
        f.lifetimes.extend(["a".into(), "b".into()]);
        f.bounds.extend(["T: Clone + Iter".into(), "'a: 'b".into(), "<T as Iter>::Item = u8".into()]);
        let src = SigSource {
            types: alloc::vec!["R".into()],
            assoc: alloc::vec![AssocDecl { ty: "R".into(), trait_name: "Iter".into(), name: "Item".into(), value: "u8".into() }],
            fns: alloc::vec![f],
            ..SigSource::default()
        };
        let env = SigEnv::from_source(&src).unwrap();
        assert_eq!(env.items[0].obligations.len(), 4);
        assert!(env.facts.implements(&GroundType::base("R"), "Iter"));
    }

    #[test]
    fn methods_expand_self() {
        let f = FnDecl {
            name: "peek".into(),
            self_ty: Some("R".into()),
            lifetimes: alloc::vec!["a".into()],
            params: alloc::vec!["&'a Self".into()],
            ret: Some("u8".into()),
            ..FnDecl::default()
        };
        let src = SigSource { types: alloc::vec!["R".into()], fns: alloc::vec![f], ..SigSource::default() };
        let env = SigEnv::from_source(&src).unwrap();
        assert_eq!(env.items[0].path(), "R::peek");
        assert_eq!(env.items[0].params[0].to_string(), "&'a R");
    }

    #[test]
    fn reference_fields_are_rejected() {
        let src = SigSource {
            structs: alloc::vec![StructDecl { name: "R".into(), fields: alloc::vec![("f".into(), "&'a u8".into())] }],
            ..SigSource::default()
        };
        assert!(matches!(SigEnv::from_source(&src), Err(SigError::RefField { .. })));
    }

    #[test]
    fn generic_heads_check_arity() {
        let src = SigSource {
            types: alloc::vec!["W<T>".into()],
            fns: alloc::vec![fn_decl("f", &["W<u8, u8>"], None)],
            ..SigSource::default()
        };
        assert!(matches!(SigEnv::from_source(&src), Err(SigError::Arity { .. })));
    }

    #[test]
    fn source_round_trip() {
        let mut f = fn_decl("id", &["T"], Some("T"));
        f.generics.push("T".into());
        f.bounds.push("T: Clone".into());
        let src = SigSource {
            types: alloc::vec!["W<T>".into(), "Q".into()],
            structs: alloc::vec![StructDecl { name: "R".into(), fields: alloc::vec![("f0".into(), "u8".into())] }],
            impls: alloc::vec![ImplDecl { ty: "R".into(), trait_name: "Copy".into() }],
            assoc: alloc::vec![AssocDecl { ty: "Q".into(), trait_name: "Iter".into(), name: "Item".into(), value: "W<u8>".into() }],
            fns: alloc::vec![f, fn_decl("lit", &[], Some("(u8, R)"))],
        };
        let env = SigEnv::from_source(&src).unwrap();
        let again = SigEnv::from_source(&env.to_source()).unwrap();
        assert_eq!(env, again);
    }
}
