use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use thiserror::Error;

use super::{GroundType, Name, Ty};

/// Field layout of the declared structs, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StructTable {
    structs: BTreeMap<Name, Vec<(Name, GroundType)>>,
}

impl StructTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, fields: Vec<(Name, GroundType)>) {
        self.structs.insert(name.into(), fields);
    }

    pub fn fields(&self, name: &str) -> Option<&[(Name, GroundType)]> {
        self.structs.get(name).map(Vec::as_slice)
    }

    /// Fields of a ground type, when it names a declared struct.
    pub fn fields_of(&self, ty: &GroundType) -> &[(Name, GroundType)] {
        ty.base_name().and_then(|n| self.fields(n)).unwrap_or(&[])
    }

    pub fn field_type(&self, ty: &GroundType, field: &str) -> Option<&GroundType> {
        self.fields_of(ty).iter().find(|(f, _)| f == field).map(|(_, t)| t)
    }

    pub fn is_struct(&self, name: &str) -> bool {
        self.structs.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &[(Name, GroundType)])> {
        self.structs.iter().map(|(n, f)| (n, f.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.structs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum UniverseError {
    #[error("struct `{owner}` has field `{field}` of unknown type `{ty}`")]
    UnknownFieldType { owner: Name, field: Name, ty: Name },
    #[error("type `{0}` is not declared")]
    UnknownType(Name),
}

/// The finite set of ground types that index places. Every member has its
/// lifetimes erased to the hook.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Universe {
    members: BTreeSet<GroundType>,
    ref_depth: usize,
}

impl Universe {
    pub fn contains(&self, ty: &GroundType) -> bool {
        self.members.contains(ty)
    }

    /// Membership of an arbitrary type after erasing its lifetimes.
    pub fn admits(&self, ty: &Ty) -> bool {
        GroundType::erased(ty).is_some_and(|g| self.contains(&g))
    }

    pub fn iter(&self) -> impl Iterator<Item = &GroundType> {
        self.members.iter()
    }

    /// Members without any reference constructor.
    pub fn ref_free(&self) -> impl Iterator<Item = &GroundType> {
        self.members.iter().filter(|t| !t.as_ty().contains_ref())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn ref_depth(&self) -> usize {
        self.ref_depth
    }
}

/// Least set containing the seeds that is closed under structural
/// components, declared struct fields, and reference formation while the
/// reference nesting stays within `ref_depth`.
///
/// `known` lists every nominal name that may appear; field types outside it
/// are rejected.
pub fn build_ground_universe<'a>(
    seeds: impl IntoIterator<Item = &'a GroundType>,
    structs: &StructTable,
    known: &BTreeSet<Name>,
    ref_depth: usize,
) -> Result<Universe, UniverseError> {
    for (owner, fields) in structs.iter() {
        for (field, ty) in fields {
            if let Some(bad) = ty.as_ty().nominal_names().into_iter().find(|n| !known.contains(n)) {
                return Err(UniverseError::UnknownFieldType { owner: owner.clone(), field: field.clone(), ty: bad });
            }
        }
    }
    let mut members = BTreeSet::new();
    let mut work: Vec<Ty> = Vec::new();
    for s in seeds {
        if let Some(bad) = s.as_ty().nominal_names().into_iter().find(|n| !known.contains(n)) {
            return Err(UniverseError::UnknownType(bad));
        }
        work.push(s.as_ty().erase_lifetimes());
    }
    while let Some(ty) = work.pop() {
        let Some(g) = GroundType::new(ty.clone()) else { continue };
        if !members.insert(g.clone()) {
            continue;
        }
        for c in ty.children() {
            work.push(c.clone());
        }
        for (_, f) in structs.fields_of(&g) {
            work.push(f.as_ty().clone());
        }
        if ty.ref_depth() < ref_depth {
            work.push(g.shr_ref().into_ty());
            work.push(g.mut_ref().into_ty());
        }
    }
    Ok(Universe { members, ref_depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{parse_type, ParseCtx};
    use alloc::string::{String, ToString};
    use proptest::prelude::*;

    fn g(s: &str) -> GroundType {
        GroundType::new(parse_type(s, &ParseCtx::ground()).unwrap()).unwrap()
    }

    fn known(names: &[&str]) -> BTreeSet<Name> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn fig_structs() -> StructTable {
        let mut st = StructTable::new();
        st.insert("R", alloc::vec![("f0".into(), g("u8"))]);
        st
    }

    /// Closure conditions applied by hand to `{u8, R}` with `R { f0: u8 }`.
    #[test]
    fn two_type_universe_at_depth_one() {
        let seeds = [g("u8"), g("R")];
        let u = build_ground_universe(&seeds, &fig_structs(), &known(&["u8", "R"]), 1).unwrap();
        let got: BTreeSet<String> = u.iter().map(|t| t.to_string()).collect();
        let want: BTreeSet<String> =
            ["u8", "R", "&u8", "&mut u8", "&R", "&mut R"].iter().map(|s| s.to_string()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn empty_seeds_give_empty_universe() {
        let u = build_ground_universe(&[], &StructTable::new(), &known(&[]), 0).unwrap();
        assert!(u.is_empty());
    }

    #[test]
    fn depth_zero_adds_no_refs() {
        let u = build_ground_universe(&[g("u8")], &StructTable::new(), &known(&["u8"]), 0).unwrap();
        assert_eq!(u.len(), 1);
    }

    #[test]
    fn fields_pull_in_their_types() {
        let u = build_ground_universe(&[g("R")], &fig_structs(), &known(&["u8", "R"]), 0).unwrap();
        assert!(u.contains(&g("u8")));
    }

    #[test]
    fn unknown_field_type_is_an_error() {
        let mut st = StructTable::new();
        st.insert("R", alloc::vec![("f".into(), g("Nope"))]);
        let err = build_ground_universe(&[g("R")], &st, &known(&["R"]), 1).unwrap_err();
        assert!(matches!(err, UniverseError::UnknownFieldType { .. }));
    }

    #[test]
    fn depth_two_counts() {
        let u = build_ground_universe(&[g("u8")], &StructTable::new(), &known(&["u8"]), 2).unwrap();
        // u8, two refs of it, and two refs of each of those.
        assert_eq!(u.len(), 7);
    }

    fn seed_strategy() -> impl Strategy<Value = Vec<GroundType>> {
        let names = ["u8", "R", "(u8, R)", "[u8]", "W<u8>", "&(u8, bool)", "(R, [bool])"];
        prop::collection::vec(prop::sample::select(names.to_vec()), 0..4)
            .prop_map(|v| v.into_iter().map(g).collect())
    }

    proptest! {
        #[test]
        fn universe_is_closed(seeds in seed_strategy(), depth in 0usize..3) {
            let k = known(&["u8", "R", "W", "bool"]);
            let u = build_ground_universe(&seeds, &fig_structs(), &k, depth).unwrap();
            for t in u.iter() {
                for c in t.as_ty().children() {
                    prop_assert!(u.admits(c), "{} missing component {}", t, c);
                }
                for (_, f) in fig_structs().fields_of(t) {
                    prop_assert!(u.contains(f));
                }
                if t.as_ty().ref_depth() < depth {
                    prop_assert!(u.contains(&t.shr_ref()) && u.contains(&t.mut_ref()));
                }
            }
            for s in &seeds {
                prop_assert!(u.admits(s.as_ty()));
            }
        }
    }
}
