//! Reachable state counts by depth-first enumeration over the interpreter,
//! deduplicated by a brute-force minimum over all renamings.

use std::collections::{BTreeMap, HashSet};

use pcpn_core::srs::{Access, BorrowKind, Srs, SrsState, Stmt};
use pcpn_core::Net;

fn frames(st: &SrsState) -> usize {
    st.borrows.iter().map(|b| if b.kind == BorrowKind::SharedFirst { 2 } else { 1 }).sum()
}

fn within(st: &SrsState, tokens: usize, depth: usize) -> bool {
    let mut per: BTreeMap<(String, Access), usize> = BTreeMap::new();
    for b in st.bindings.values() {
        *per.entry((b.ty.to_string(), b.access)).or_default() += 1;
    }
    per.values().all(|&n| n <= tokens) && frames(st) <= depth
}

/// Every permutation of `items`.
fn perms<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let x = rest.remove(i);
        for mut p in perms(&rest) {
            p.insert(0, x.clone());
            out.push(p);
        }
    }
    out
}

/// Minimum rendering over every bijection of binding names (within each
/// type and access class) and of open regions. Ended regions are one.
pub fn key(st: &SrsState) -> String {
    let mut classes: BTreeMap<(String, Access), Vec<String>> = BTreeMap::new();
    for (n, b) in &st.bindings {
        classes.entry((b.ty.to_string(), b.access)).or_default().push(n.clone());
    }
    let mut open: Vec<u32> = st.borrows.iter().map(|b| b.region.0).collect();
    open.sort();
    open.dedup();
    let mut name_maps: Vec<BTreeMap<String, usize>> = vec![BTreeMap::new()];
    let mut next = 0;
    for members in classes.values() {
        let slots: Vec<usize> = (next..next + members.len()).collect();
        next += members.len();
        let mut grown = Vec::new();
        for m in &name_maps {
            for p in perms(&slots) {
                let mut m = m.clone();
                for (n, s) in members.iter().zip(p) {
                    m.insert(n.clone(), s);
                }
                grown.push(m);
            }
        }
        name_maps = grown;
    }
    let region_maps = perms(&(0..open.len()).collect::<Vec<_>>());
    let mut best: Option<String> = None;
    for nm in &name_maps {
        for rp in &region_maps {
            let reg = |r: u32| match open.iter().position(|&o| o == r) {
                Some(i) => format!("r{}", rp[i]),
                None => "ended".to_string(),
            };
            let mut binds: Vec<String> = st
                .bindings
                .iter()
                .map(|(n, b)| format!("{}:{}:{:?}:{}", nm[n], b.ty, b.access, b.region.map_or("-".into(), |r| reg(r.0))))
                .collect();
            binds.sort();
            let recs: Vec<String> = st
                .borrows
                .iter()
                .map(|b| format!("{:?}/{}/{}/{}", b.kind, nm[&b.owner], nm[&b.reference], reg(b.region.0)))
                .collect();
            let s = format!("{}|{}", binds.join(","), recs.join(","));
            if best.as_ref().is_none_or(|b| s < *b) {
                best = Some(s);
            }
        }
    }
    best.unwrap_or_default()
}

/// Depth-first enumeration; returns (nodes, edges).
pub fn brute_force(net: &Net, tokens: usize, depth: usize) -> (usize, usize) {
    let srs = Srs::new(&net.env, &net.universe);
    let mut seen = HashSet::new();
    let root = SrsState::new();
    seen.insert(key(&root));
    let mut stack = vec![root];
    let mut edges = 0;
    while let Some(st) = stack.pop() {
        for (stmt, _, next) in st.successors(&srs) {
            if matches!(stmt, Stmt::CopyUse(_)) || !within(&next, tokens, depth) {
                continue;
            }
            edges += 1;
            if seen.insert(key(&next)) {
                stack.push(next);
            }
        }
    }
    (seen.len(), edges)
}
