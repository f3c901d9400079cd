use alloc::collections::BTreeMap;
use core::fmt;
use thiserror::Error;

use super::{GroundType, Lifetime, Name};

/// Value identifier of a token.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ValueId(pub u32);

impl fmt::Display for ValueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Region label drawn from the label pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegionLabel(pub u32);

impl RegionLabel {
    /// Stands for every region that has already ended. Canonical forms use it
    /// for labels that no longer occur on the borrow stack; it is never
    /// allocated as a fresh label.
    pub const ENDED: RegionLabel = RegionLabel(u32::MAX);

    pub fn is_ended(self) -> bool {
        self == RegionLabel::ENDED
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ended() {
            f.write_str("L†")
        } else {
            write!(f, "L{}", self.0)
        }
    }
}

/// A pair of partial maps: type variables to ground types and lifetimes to
/// region labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubstRecord {
    pub types: BTreeMap<Name, GroundType>,
    pub lifetimes: BTreeMap<Lifetime, RegionLabel>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum Incompatible {
    #[error("type variable `{var}` bound to both `{left}` and `{right}`")]
    Type { var: Name, left: GroundType, right: GroundType },
    #[error("lifetime `{lifetime}` bound to both {left} and {right}")]
    Lifetime { lifetime: Lifetime, left: RegionLabel, right: RegionLabel },
}

impl SubstRecord {
    pub fn empty() -> Self {
        SubstRecord::default()
    }

    pub fn with_type(mut self, var: &str, ty: GroundType) -> Self {
        self.types.insert(var.into(), ty);
        self
    }

    pub fn with_lifetime(mut self, l: Lifetime, label: RegionLabel) -> Self {
        self.lifetimes.insert(l, label);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty() && self.lifetimes.is_empty()
    }

    /// Union of two records, defined when overlapping keys agree.
    pub fn join(&self, other: &SubstRecord) -> Result<SubstRecord, Incompatible> {
        let mut out = self.clone();
        for (k, v) in &other.types {
            match out.types.get(k) {
                Some(existing) if existing != v => {
                    return Err(Incompatible::Type { var: k.clone(), left: existing.clone(), right: v.clone() });
                }
                Some(_) => {}
                None => {
                    out.types.insert(k.clone(), v.clone());
                }
            }
        }
        for (k, v) in &other.lifetimes {
            match out.lifetimes.get(k) {
                Some(existing) if existing != v => {
                    return Err(Incompatible::Lifetime { lifetime: k.clone(), left: *existing, right: *v });
                }
                Some(_) => {}
                None => {
                    out.lifetimes.insert(k.clone(), *v);
                }
            }
        }
        Ok(out)
    }

    /// `self` agrees with `other` wherever `other` is defined.
    pub fn extends(&self, other: &SubstRecord) -> bool {
        other.types.iter().all(|(k, v)| self.types.get(k) == Some(v))
            && other.lifetimes.iter().all(|(k, v)| self.lifetimes.get(k) == Some(v))
    }
}
