#![allow(dead_code)]

pub mod oracle;

use pcpn_core::sigenv::{FnDecl, ImplDecl, SigSource, StructDecl};
use pcpn_core::{build_net, BuildOptions, Net, SigEnv};

pub fn f(name: &str, lifetimes: &[&str], params: &[&str], ret: Option<&str>) -> FnDecl {
    FnDecl {
        name: name.into(),
        lifetimes: lifetimes.iter().map(|s| s.to_string()).collect(),
        params: params.iter().map(|s| s.to_string()).collect(),
        ret: ret.map(Into::into),
        ..FnDecl::default()
    }
}

pub fn generic(mut d: FnDecl, generics: &[&str], bounds: &[&str]) -> FnDecl {
    d.generics = generics.iter().map(|s| s.to_string()).collect();
    d.bounds = bounds.iter().map(|s| s.to_string()).collect();
    d
}

fn strukt(name: &str, fields: &[(&str, &str)]) -> StructDecl {
    StructDecl { name: name.into(), fields: fields.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect() }
}

/// A single `u8` literal.
pub fn lit_only() -> SigSource {
    SigSource { fns: vec![f("lit_u8", &[], &[], Some("u8"))], ..SigSource::default() }
}

/// Non-Copy `R` built from a `u8`, with a reader through a shared borrow.
pub fn ownership() -> SigSource {
    SigSource {
        structs: vec![strukt("R", &[("f0", "u8")])],
        fns: vec![
            f("new_r", &[], &["u8"], Some("R")),
            f("lit_u32", &[], &[], Some("u32")),
            f("peek", &["a"], &["&'a u32"], Some("u8")),
        ],
        ..SigSource::default()
    }
}

/// Opaque non-Copy handle with a mutator and a borrowing getter.
pub fn handle() -> SigSource {
    SigSource {
        types: vec!["H".into()],
        impls: vec![ImplDecl { ty: "H".into(), trait_name: "Clone".into() }],
        fns: vec![
            f("open", &[], &[], Some("H")),
            f("poke", &["a"], &["&'a mut H"], None),
            f("tag", &["a"], &["&'a H"], Some("&'a bool")),
        ],
        ..SigSource::default()
    }
}

/// Generic wrapper instantiated at the literals' types.
pub fn wrapper() -> SigSource {
    SigSource {
        types: vec!["W<T>".into()],
        fns: vec![
            f("lit_bool", &[], &[], Some("bool")),
            generic(f("wrap", &[], &["T"], Some("W<T>")), &["T"], &["T: Copy"]),
            generic(f("inner", &["a"], &["&'a W<T>"], Some("&'a T")), &["T"], &[]),
        ],
        ..SigSource::default()
    }
}

/// Struct with two fields and a lifetime-constrained chooser.
pub fn cell() -> SigSource {
    SigSource {
        structs: vec![strukt("Cell", &[("v", "u8"), ("w", "u16")])],
        fns: vec![
            f("cell", &[], &["u8", "u16"], Some("Cell")),
            f("lit_u8", &[], &[], Some("u8")),
            f("lit_u16", &[], &[], Some("u16")),
            FnDecl { bounds: vec!["'a: 'b".into()], ..f("pick", &["a", "b"], &["&'a u8", "&'b u8"], Some("&'b u8")) },
            f("touch", &["a"], &["&'a mut Cell"], None),
        ],
        ..SigSource::default()
    }
}

pub fn net_of(src: &SigSource) -> Net {
    let env = SigEnv::from_source(src).expect("environment loads");
    build_net(&env, &BuildOptions::default()).expect("net builds")
}

use pcpn_core::net::Firing;
use pcpn_core::Configuration;

/// Index of the transition whose label renders as `label`.
pub fn transition(net: &Net, label: &str) -> usize {
    net.transitions
        .iter()
        .position(|t| t.label.to_string() == label)
        .unwrap_or_else(|| panic!("no transition `{label}`"))
}

/// Fires the only enabled instance of `label`.
pub fn fire_only(net: &Net, cfg: &Configuration, label: &str) -> (Firing, Configuration) {
    let t = transition(net, label);
    let mut inst = net.enabled_instances(cfg, t);
    assert_eq!(inst.len(), 1, "`{label}` should have one instance, has {}", inst.len());
    let (inputs, inst) = inst.pop().unwrap();
    let firing = Firing { transition: t, inputs, inst };
    let next = net.fire(cfg, &firing).expect("enabled firing applies");
    (firing, next)
}

use pcpn_core::srs::{parse_program, run_program, Srs, SrsState};

/// Replays rendered statements through the interpreter.
pub fn interpret(net: &Net, body: &[String]) -> Result<SrsState, String> {
    let srs = Srs::new(&net.env, &net.universe);
    let program = parse_program(&body.join("\n"), &srs).map_err(|e| e.to_string())?;
    run_program(&srs, &program).map_err(|(i, r)| format!("statement {} `{}`: {r}", i + 1, body[i]))
}
