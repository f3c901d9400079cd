//! Rendering of witnesses as statement sequences and of the stub program
//! that makes a snippet compile on its own.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use thiserror::Error;

use crate::net::{Configuration, Firing, Net, SchemaKind, TransitionLabel};
use crate::sigenv::{CallableItem, Obligation, SigEnv, CLONE, COPY};
use crate::types::{GroundType, Ty, ValueId};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("step {step}: no binding for {value}")]
    Unbound { step: usize, value: ValueId },
    #[error("step {step}: `{label}` cannot be rendered")]
    Unrenderable { step: usize, label: String },
}

struct Line {
    /// Declared binding, if the statement introduces one.
    binding: Option<String>,
    rhs: String,
    needs_mut: bool,
}

/// One statement per firing that has a source-level effect.
pub fn render_body<'a>(net: &Net, firings: impl IntoIterator<Item = &'a Firing>) -> Result<Vec<String>, EmitError> {
    let mut cfg = Configuration::empty();
    let mut names: BTreeMap<ValueId, (String, Option<usize>)> = BTreeMap::new();
    let mut lines: Vec<Line> = Vec::new();
    let mut declared = 0;
    for (step, f) in firings.into_iter().enumerate() {
        let tr = &net.transitions[f.transition];
        let unrenderable = || EmitError::Unrenderable { step, label: tr.label.to_string() };
        let input = |i: usize| -> Result<(String, Option<usize>), EmitError> {
            let v = f.inputs.get(i).ok_or_else(unrenderable)?.1.value;
            names.get(&v).cloned().ok_or(EmitError::Unbound { step, value: v })
        };
        // Fresh output value for arc `i`.
        let fresh = |i: usize| f.inst.fresh_values.get(&i).copied().ok_or_else(unrenderable);
        let mut mark_mut = None;
        let (binding, rhs): (Option<(ValueId, &str)>, Option<String>) = match &tr.label {
            TransitionLabel::Call { item, path, theta } => {
                let it = &net.env.items[*item];
                let args: Vec<String> = (0..f.inputs.len()).map(|i| input(i).map(|n| n.0)).collect::<Result<_, _>>()?;
                let call = format!("{}{}({})", path, turbofish(it, theta), args.join(", "));
                if it.ret.is_unit() {
                    (None, Some(call))
                } else {
                    let v = fresh(tr.outputs.len() - 1)?;
                    (Some((v, "x")), Some(call))
                }
            }
            TransitionLabel::Schema { kind, field, .. } => {
                use SchemaKind::*;
                let field = || field.clone().ok_or_else(unrenderable);
                match kind {
                    CopyUse => (None, None),
                    Move | DropOwn => {
                        let tok = &f.inputs[0].1;
                        let dead = tok.ctx.lifetimes.values().any(|l| !cfg.live_labels().contains(l));
                        if dead {
                            (None, None)
                        } else {
                            (None, Some(format!("drop({})", input(0)?.0)))
                        }
                    }
                    DupCopy => {
                        let v = fresh(1)?;
                        (Some((v, "y")), Some(input(0)?.0))
                    }
                    DupClone => {
                        let v = fresh(1)?;
                        (Some((v, "y")), Some(format!("{}.clone()", input(0)?.0)))
                    }
                    BorrowShrFirst | BorrowShr => {
                        let v = fresh(1)?;
                        (Some((v, "r")), Some(format!("&{}", input(0)?.0)))
                    }
                    BorrowMut => {
                        let v = fresh(1)?;
                        let src = input(0)?;
                        mark_mut = src.1;
                        (Some((v, "r")), Some(format!("&mut {}", src.0)))
                    }
                    EndMut | EndShr | EndShrLast | ProjMutEnd | ReborrowMutEnd | ReborrowShrEnd => {
                        (None, Some(format!("drop({})", input(1)?.0)))
                    }
                    ProjMove => {
                        let v = fresh(0)?;
                        (Some((v, "y")), Some(format!("{}.{}", input(0)?.0, field()?)))
                    }
                    ProjShr => {
                        let v = fresh(1)?;
                        (Some((v, "r")), Some(format!("&{}.{}", input(0)?.0, field()?)))
                    }
                    ProjMut => {
                        let v = fresh(1)?;
                        let src = input(0)?;
                        mark_mut = src.1;
                        (Some((v, "r")), Some(format!("&mut {}.{}", src.0, field()?)))
                    }
                    DerefCopy => {
                        let v = fresh(1)?;
                        (Some((v, "y")), Some(format!("*{}", input(0)?.0)))
                    }
                    ReborrowMut => {
                        let v = fresh(1)?;
                        let src = input(0)?;
                        mark_mut = src.1;
                        (Some((v, "r")), Some(format!("&mut *{}", src.0)))
                    }
                    ReborrowShr => {
                        let v = fresh(1)?;
                        let src = input(0)?;
                        mark_mut = src.1;
                        (Some((v, "r")), Some(format!("&*{}", src.0)))
                    }
                }
            }
        };
        if let Some(ix) = mark_mut {
            lines[ix].needs_mut = true;
        }
        if let Some(rhs) = rhs {
            let decl = binding.map(|(v, prefix)| {
                let name = format!("{prefix}{declared}");
                declared += 1;
                names.insert(v, (name.clone(), Some(lines.len())));
                name
            });
            lines.push(Line { binding: decl, rhs, needs_mut: false });
        }
        cfg = net.fire(&cfg, f).map_err(|_| unrenderable())?;
    }
    Ok(lines
        .into_iter()
        .map(|l| match l.binding {
            Some(b) if l.needs_mut => format!("let mut {b} = {};", l.rhs),
            Some(b) => format!("let {b} = {};", l.rhs),
            None => format!("{};", l.rhs),
        })
        .collect())
}

fn turbofish(item: &CallableItem, theta: &[(String, GroundType)]) -> String {
    if item.generics.is_empty() {
        return String::new();
    }
    let args: Vec<String> = item
        .generics
        .iter()
        .map(|g| theta.iter().find(|(n, _)| n == g).map_or_else(|| "_".into(), |(_, t)| t.to_string()))
        .collect();
    format!("::<{}>", args.join(", "))
}

/// Source form of a signature type: field projections are replaced by the
/// field's declared type.
fn rust_ty(ty: &Ty, env: &SigEnv) -> String {
    resolve_fields(ty, env).to_string()
}

fn resolve_fields(ty: &Ty, env: &SigEnv) -> Ty {
    use alloc::boxed::Box;
    match ty {
        Ty::Field(base, f) => {
            let base = resolve_fields(base, env);
            GroundType::new(base.clone())
                .and_then(|g| env.facts.field_ty(&g, f).cloned())
                .map_or(Ty::Field(Box::new(base), f.clone()), GroundType::into_ty)
        }
        Ty::App(h, args) => Ty::App(h.clone(), args.iter().map(|a| resolve_fields(a, env)).collect()),
        Ty::Tuple(args) => Ty::Tuple(args.iter().map(|a| resolve_fields(a, env)).collect()),
        Ty::Slice(t) => Ty::Slice(Box::new(resolve_fields(t, env))),
        Ty::Ref(q, l, t) => Ty::Ref(*q, l.clone(), Box::new(resolve_fields(t, env))),
        Ty::Assoc(t, tr, a) => Ty::Assoc(Box::new(resolve_fields(t, env)), tr.clone(), a.clone()),
        Ty::Base(_) | Ty::Var(_) => ty.clone(),
    }
}

fn is_self_receiver(ty: &Ty, self_name: &str) -> bool {
    match ty {
        Ty::Base(n) => n == self_name,
        Ty::Ref(_, _, inner) => matches!(&**inner, Ty::Base(n) if n == self_name),
        _ => false,
    }
}

fn render_fn(item: &CallableItem, env: &SigEnv, indent: &str) -> String {
    let mut generics: Vec<String> = item.lifetimes.iter().map(|l| format!("'{l}")).collect();
    generics.extend(item.generics.iter().cloned());
    let generics = if generics.is_empty() { String::new() } else { format!("<{}>", generics.join(", ")) };
    let params: Vec<String> = item
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| match &item.self_ty {
            Some(s) if i == 0 && is_self_receiver(p, s) => format!("self: {}", rust_ty(p, env)),
            _ => format!("p{i}: {}", rust_ty(p, env)),
        })
        .collect();
    let ret = if item.ret.is_unit() { String::new() } else { format!(" -> {}", rust_ty(&item.ret, env)) };
    let mut preds = Vec::new();
    for o in &item.obligations {
        preds.push(match o {
            Obligation::Trait { ty, trait_name } => format!("{}: {trait_name}", rust_ty(ty, env)),
            Obligation::AssocEq { ty, trait_name, assoc, expected } => {
                format!("{}: {trait_name}<{assoc} = {}>", rust_ty(ty, env), rust_ty(expected, env))
            }
            Obligation::Outlives { longer, shorter } => format!("{longer}: {shorter}"),
            Obligation::FieldEq { .. } => continue,
        });
    }
    let bounds = if preds.is_empty() { String::new() } else { format!(" where {}", preds.join(", ")) };
    format!("{indent}pub fn {}{generics}({}){ret}{bounds} {{\n{indent}    unimplemented!()\n{indent}}}\n", item.name, params.join(", "))
}

/// Stub definitions for every declared type, impl and callable.
pub fn render_scaffold(env: &SigEnv) -> String {
    let mut out = String::new();
    for (name, params) in &env.opaque {
        if params.is_empty() {
            out.push_str(&format!("pub struct {name};\n"));
        } else {
            let phantom: Vec<String> = params.iter().map(|p| format!("core::marker::PhantomData<{p}>")).collect();
            out.push_str(&format!("pub struct {name}<{}>({});\n", params.join(", "), phantom.join(", ")));
        }
    }
    for (name, fields) in env.structs().iter() {
        let fields: Vec<String> = fields.iter().map(|(f, t)| format!("pub {f}: {t}")).collect();
        out.push_str(&format!("pub struct {name} {{ {} }}\n", fields.join(", ")));
    }
    let nominal: BTreeSet<String> = env.opaque.keys().cloned().chain(env.structs().iter().map(|(n, _)| n.clone())).collect();
    for (ty, tr) in env.user_impls() {
        let local = matches!(ty.as_ty(), Ty::Base(n) | Ty::App(n, _) if nominal.contains(n));
        if tr == CLONE && local {
            out.push_str(&format!("impl Clone for {ty} {{\n    fn clone(&self) -> Self {{\n        unimplemented!()\n    }}\n}}\n"));
        } else if tr == COPY && local {
            out.push_str(&format!("impl Copy for {ty} {{}}\n"));
        }
    }
    for (tr, assocs) in &env.traits {
        if tr == COPY || tr == CLONE {
            continue;
        }
        let items: String = assocs.iter().map(|a| format!(" type {a};")).collect();
        out.push_str(&format!("pub trait {tr} {{{items} }}\n"));
    }
    for (ty, tr) in env.user_impls() {
        let Some(assocs) = env.traits.get(tr) else { continue };
        if tr == COPY || tr == CLONE {
            continue;
        }
        let items: String = assocs
            .iter()
            .map(|a| {
                let value = env.facts.assoc_ty(ty, tr, a).map_or_else(|| "()".to_string(), ToString::to_string);
                format!(" type {a} = {value};")
            })
            .collect();
        out.push_str(&format!("impl {tr} for {ty} {{{items} }}\n"));
    }
    for item in env.items.iter().filter(|i| i.self_ty.is_none()) {
        out.push_str(&render_fn(item, env, ""));
    }
    let mut methods: BTreeMap<&str, Vec<&CallableItem>> = BTreeMap::new();
    for item in &env.items {
        if let Some(s) = &item.self_ty {
            methods.entry(s.as_str()).or_default().push(item);
        }
    }
    for (owner, items) in methods {
        out.push_str(&format!("impl {owner} {{\n"));
        for item in items {
            out.push_str(&render_fn(item, env, "    "));
        }
        out.push_str("}\n");
    }
    out
}

/// A complete source file: header comment lines, stubs, and `main`.
pub fn render_program(env: &SigEnv, header: &[String], body: &[String]) -> String {
    let mut out = String::new();
    for h in header {
        out.push_str(&format!("// {h}\n"));
    }
    out.push_str("#![allow(warnings)]\n\n");
    out.push_str(&render_scaffold(env));
    out.push_str("\nfn main() {\n");
    for line in body {
        out.push_str(&format!("    {line}\n"));
    }
    out.push_str("}\n");
    out
}
