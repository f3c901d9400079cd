//! Finite multisets with the clamped difference used by the firing rule.

use alloc::collections::btree_map::{self, BTreeMap};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Multiset<T: Ord>(BTreeMap<T, u32>);

impl<T: Ord> Default for Multiset<T> {
    fn default() -> Self {
        Multiset(BTreeMap::new())
    }
}

impl<T: Ord + Clone> Multiset<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(x: T) -> Self {
        let mut m = Self::new();
        m.insert(x);
        m
    }

    pub fn insert(&mut self, x: T) {
        self.insert_n(x, 1);
    }

    pub fn insert_n(&mut self, x: T, n: u32) {
        if n > 0 {
            *self.0.entry(x).or_insert(0) += n;
        }
    }

    /// Removes one occurrence; false if `x` was absent.
    pub fn remove_one(&mut self, x: &T) -> bool {
        match self.0.get_mut(x) {
            Some(c) if *c > 1 => {
                *c -= 1;
                true
            }
            Some(_) => {
                self.0.remove(x);
                true
            }
            None => false,
        }
    }

    pub fn count(&self, x: &T) -> u32 {
        self.0.get(x).copied().unwrap_or(0)
    }

    /// Total number of elements, counting multiplicity.
    pub fn len(&self) -> usize {
        self.0.values().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (x, &n) in &other.0 {
            out.insert_n(x.clone(), n);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = BTreeMap::new();
        for (x, &n) in &self.0 {
            let left = n.saturating_sub(other.count(x));
            if left > 0 {
                out.insert(x.clone(), left);
            }
        }
        Multiset(out)
    }

    pub fn leq(&self, other: &Self) -> bool {
        self.0.iter().all(|(x, &n)| n <= other.count(x))
    }

    /// Distinct elements with their counts, in element order.
    pub fn iter(&self) -> btree_map::Iter<'_, T, u32> {
        self.0.iter()
    }

    /// Every occurrence, in element order.
    pub fn elements(&self) -> impl Iterator<Item = &T> {
        self.0.iter().flat_map(|(x, &n)| core::iter::repeat_n(x, n as usize))
    }
}

impl<T: Ord + Clone> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut m = Multiset::new();
        for x in iter {
            m.insert(x);
        }
        m
    }
}
