//! Differential run of the interpreter against the net: random traces are
//! drawn from the interpreter, and at every prefix the enabled steps and
//! the reached states of both sides are compared.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Access, BorrowKind, Region, Rule, Srs, SrsState, Stmt};
use crate::net::{Capability, Configuration, Firing, Net, SchemaKind, StackFrame, Token, TransitionLabel};
use crate::reach::canon;
use crate::types::{Lifetime, RegionLabel, SubstRecord, ValueId};

/// A step as both sides name it: label plus the ids it reads or consumes.
type Move = (String, Vec<ValueId>);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub trial: usize,
    /// Statements executed before the divergence.
    pub prefix: Vec<String>,
    pub what: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "trial {} after [{}]:", self.trial, self.prefix.join("; "))?;
        f.write_str(&self.what)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BisimReport {
    pub trials: usize,
    pub steps: usize,
    pub divergences: Vec<Divergence>,
}

pub fn rule_label(net: &Net, rule: &Rule) -> String {
    match rule {
        Rule::Call { item, theta } => {
            TransitionLabel::Call { item: *item, path: net.env.items[*item].path(), theta: theta.clone() }.to_string()
        }
        Rule::Structural { name, subject, field, child } => match SchemaKind::ALL.iter().find(|k| k.name() == *name) {
            Some(kind) => {
                TransitionLabel::Schema { kind: *kind, subject: subject.clone(), field: field.clone(), child: child.clone() }
                    .to_string()
            }
            None => format!("?{name}"),
        },
    }
}

struct Trial<'n> {
    net: &'n Net,
    names: BTreeMap<String, ValueId>,
    regions: BTreeMap<Region, RegionLabel>,
}

impl Trial<'_> {
    /// Enabled firings grouped by move, in enumeration order.
    fn net_moves(&self, cfg: &Configuration) -> BTreeMap<Move, Vec<Firing>> {
        let mut out: BTreeMap<Move, Vec<Firing>> = BTreeMap::new();
        for (f, _) in self.net.successors(cfg, false) {
            let key = (self.net.transitions[f.transition].label.to_string(), f.inputs.iter().map(|(_, t)| t.value).collect());
            out.entry(key).or_default().push(f);
        }
        out
    }

    fn srs_key(&self, rule: &Rule, inputs: &[String]) -> Move {
        let ids = inputs.iter().map(|n| self.names.get(n).copied().unwrap_or(ValueId(u32::MAX))).collect();
        (rule_label(self.net, rule), ids)
    }

    fn translate(&self, st: &SrsState) -> Option<Configuration> {
        let mut cfg = Configuration::empty();
        for (name, b) in &st.bindings {
            let cap = match b.access {
                Access::Usable => Capability::Own,
                Access::Frozen => Capability::Frz,
                Access::Blocked => Capability::Blk,
            };
            let place = self.net.place_of(cap, b.ty.as_ty())?;
            let mut ctx = SubstRecord::empty();
            if let (true, Some(r)) = (b.ty.as_ty().contains_ref(), b.region) {
                ctx = ctx.with_lifetime(Lifetime::Hook, *self.regions.get(&r)?);
            }
            cfg.add_token(place, Token { value: *self.names.get(name)?, ctx });
        }
        for rec in st.borrows.iter().rev() {
            let owner = *self.names.get(&rec.owner)?;
            let reference = *self.names.get(&rec.reference)?;
            let region = *self.regions.get(&rec.region)?;
            match rec.kind {
                BorrowKind::SharedFirst => {
                    cfg.stack.push(StackFrame::Shr { owner, reference, region });
                    cfg.stack.push(StackFrame::Freeze(owner));
                }
                BorrowKind::SharedMore => cfg.stack.push(StackFrame::Shr { owner, reference, region }),
                _ => cfg.stack.push(StackFrame::Mut { owner, reference, region }),
            }
        }
        Some(cfg)
    }
}

fn describe(moves: &BTreeMap<Move, usize>) -> String {
    let v: Vec<String> = moves
        .iter()
        .map(|((l, ids), n)| format!("{n}x {l}({})", ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")))
        .collect();
    v.join(", ")
}

/// Moves whose multiplicity in `a` exceeds that in `b`.
fn excess(a: &BTreeMap<Move, usize>, b: &BTreeMap<Move, usize>) -> BTreeMap<Move, usize> {
    a.iter().filter(|(k, n)| b.get(*k).copied().unwrap_or(0) < **n).map(|(k, n)| (k.clone(), *n)).collect()
}

/// Runs `trials` random traces of at most `trace_len` statements.
pub fn bisim_check(net: &Net, trace_len: usize, trials: usize, seed: u64) -> BisimReport {
    let srs = Srs::new(&net.env, &net.universe);
    let mut report = BisimReport { trials, ..BisimReport::default() };
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
        let mut t = Trial { net, names: BTreeMap::new(), regions: BTreeMap::new() };
        let mut st = SrsState::new();
        let mut cfg = Configuration::empty();
        let mut prefix: Vec<String> = Vec::new();
        let diverge = |prefix: &[String], what: String| Divergence { trial, prefix: prefix.to_vec(), what };
        for step in 0..=trace_len {
            let net_moves = t.net_moves(&cfg);
            let srs_succ = st.successors(&srs);
            let mut srs_keys: BTreeMap<Move, usize> = BTreeMap::new();
            for (_, e, _) in &srs_succ {
                *srs_keys.entry(t.srs_key(&e.rule, &e.inputs)).or_default() += 1;
            }
            let net_keys: BTreeMap<Move, usize> = net_moves.iter().map(|(k, v)| (k.clone(), v.len())).collect();
            if srs_keys != net_keys {
                report.divergences.push(diverge(
                    &prefix,
                    format!(
                        "enabled more often in interpreter: [{}]\nenabled more often in net: [{}]",
                        describe(&excess(&srs_keys, &net_keys)),
                        describe(&excess(&net_keys, &srs_keys))
                    ),
                ));
                break;
            }
            match t.translate(&st) {
                Some(c) if canon(&c) == canon(&cfg) => {}
                other => {
                    let shown = other.map_or_else(|| "untranslatable".into(), |c| c.dump(net));
                    report.divergences.push(diverge(
                        &prefix,
                        format!("states differ\ninterpreter:\n{st}as configuration:\n{shown}net:\n{}", cfg.dump(net)),
                    ));
                    break;
                }
            }
            if step == trace_len || srs_succ.is_empty() {
                break;
            }
            let (stmt, eff, next_st) = &srs_succ[rng.random_range(0..srs_succ.len())];
            let key = t.srs_key(&eff.rule, &eff.inputs);
            let mut chosen = None;
            for firing in &net_moves[&key] {
                let next_cfg = net.fire(&cfg, firing).expect("enabled firing applies");
                let mut names = t.names.clone();
                let mut regions = t.regions.clone();
                if let Some(p) = &eff.produced {
                    let fresh: Vec<ValueId> = firing.inst.fresh_values.values().copied().collect();
                    if let [v] = fresh[..] {
                        names.insert(p.clone(), v);
                    }
                }
                if let Some(r) = eff.fresh_region {
                    if let Some(l) = firing.inst.fresh_regions.values().next() {
                        regions.insert(r, *l);
                    }
                }
                names.retain(|n, _| next_st.bindings.contains_key(n));
                let probe = Trial { net, names, regions };
                if probe.translate(next_st).is_some_and(|c| canon(&c) == canon(&next_cfg)) {
                    chosen = Some((probe, next_cfg));
                    break;
                }
            }
            let Some((probe, next_cfg)) = chosen else {
                report.divergences.push(diverge(&prefix, format!("no net firing of {} reaches the state after {stmt}", key.0)));
                break;
            };
            t = probe;
            prefix.push(render(stmt, eff.produced.as_deref()));
            st = next_st.clone();
            cfg = next_cfg;
            report.steps += 1;
        }
    }
    report
}

fn render(stmt: &Stmt, produced: Option<&str>) -> String {
    match produced {
        Some(p) => format!("let {p} = {stmt}"),
        None => stmt.to_string(),
    }
}
