//! One PASS/FAIL line per acceptance criterion. The run fails if any
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::oracle::brute_force;
use common::{fire_only, interpret, transition};
use pcpn_cli::sigfile::load_sig;
use pcpn_cli::{compile_check, compiler, run, Outcome, RunConfig};
use pcpn_core::build::Fault;
use pcpn_core::reach::Renaming;
use pcpn_core::sigenv::SigSource;
use pcpn_core::srs::bisim::bisim_check;
use pcpn_core::synth::{parse_goal, replay};
use pcpn_core::types::RegionLabel;
use pcpn_core::{build_net, canon, saturate, synthesize, BuildOptions, Bounds, Configuration, Net, SigEnv, ValueId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS: [&str; 6] = ["ownership", "handle", "buffers", "generics", "traits", "lifetimes"];
const CORPUS_BOUNDS: (usize, usize) = (1, 2);

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(format!("{name}.json"))
}

fn source(name: &str) -> SigSource {
    load_sig(&fixture(name)).expect("fixture loads")
}

fn net(name: &str, opts: &BuildOptions) -> Net {
    let env = SigEnv::from_source(&source(name)).expect("fixture is well formed");
    build_net(&env, opts).expect("net builds")
}

/// One `>= 1` goal per place of the net.
fn all_goals(net: &Net) -> Vec<String> {
    net.places().map(|(_, p)| format!("{}:{}>=1", p.cap, p.ty)).collect()
}

fn config(name: &str, goals: Vec<String>, out: &Path, emit_graph: bool) -> RunConfig {
    RunConfig {
        sig: fixture(name),
        goal: goals,
        bound_tokens: CORPUS_BOUNDS.0,
        bound_depth: CORPUS_BOUNDS.1,
        ref_depth: 2,
        max_states: 200_000,
        out: out.to_path_buf(),
        check: false,
        emit_graph,
        seed: 7,
    }
}

/// Statements of the `main` body of a written snippet.
fn body_of(file: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(file).unwrap();
    let main = text.split("fn main() {\n").nth(1).expect("snippet has a main");
    main.lines().take_while(|l| *l != "}").map(|l| l.trim().to_string()).collect()
}

fn declared(line: &str) -> Option<&str> {
    let rest = line.strip_prefix("let ")?;
    let rest = rest.strip_prefix("mut ").unwrap_or(rest);
    rest.split_once(" = ").map(|(n, _)| n)
}

fn uses(line: &str, name: &str) -> bool {
    line.split(|c: char| !(c.is_alphanumeric() || c == '_')).any(|w| w == name)
}

/// A text-level scan of a body: no name is mentioned after its `drop`, and
/// `&mut x` only appears while no `&x` is outstanding.
fn scan(body: &[String]) -> Result<(), String> {
    let mut dropped: BTreeSet<String> = BTreeSet::new();
    let mut shared: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for line in body {
        if let Some(d) = dropped.iter().find(|d| uses(line, d)) {
            return Err(format!("`{line}` mentions `{d}` after it was dropped"));
        }
        let rhs = line.split_once(" = ").map(|(_, r)| r.trim_end_matches(';'));
        if let (Some(r), Some(rhs)) = (declared(line), rhs) {
            if let Some(x) = rhs.strip_prefix("&mut ") {
                if shared.get(x).is_some_and(|s| !s.is_empty()) {
                    return Err(format!("`{line}` while `{x}` is shared by {:?}", shared[x]));
                }
            } else if let Some(x) = rhs.strip_prefix('&') {
                shared.entry(x.to_string()).or_default().insert(r.to_string());
            }
        }
        if let Some(x) = line.strip_prefix("drop(").and_then(|l| l.strip_suffix(");")) {
            for refs in shared.values_mut() {
                refs.remove(x);
            }
            dropped.insert(x.to_string());
        }
    }
    Ok(())
}

/// Detail line on success, reason on failure.
type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn criterion1() -> Verdict {
    let net = net("ownership", &BuildOptions::default());
    let mut c = Configuration::empty();
    let mut path = Vec::new();
    let mut fire = |c: &mut Configuration, label: &str| {
        let (f, next) = fire_only(&net, c, label);
        path.push(f);
        *c = next;
    };
    for l in ["call lit_u32", "borrow_shr_first u32", "call peek", "end_shr_last u32", "call new_r"] {
        fire(&mut c, l);
    }
    let moved = {
        let (_, gone) = fire_only(&net, &c, "move R");
        ["borrow_shr_first R", "borrow_mut R", "move R", "drop R"].iter().all(|l| net.enabled_instances(&gone, transition(&net, l)).is_empty())
    };
    if !moved {
        return Err("a moved R is still usable in the net".into());
    }
    fire(&mut c, "borrow_shr_first R");
    if !net.enabled_instances(&c, transition(&net, "borrow_mut R")).is_empty() {
        return Err("`&mut x` enabled while `&x` is live".into());
    }
    fire(&mut c, "end_shr_last R");
    fire(&mut c, "borrow_mut R");
    let body = pcpn_core::emit::render_body(&net, &path).map_err(|e| e.to_string())?;
    let expected = [
        "let x0 = lit_u32();",
        "let r1 = &x0;",
        "let x2 = peek(r1);",
        "drop(r1);",
        "let mut x3 = new_r(x2);",
        "let r4 = &x3;",
        "drop(r4);",
        "let r5 = &mut x3;",
    ];
    if body != expected {
        return Err(format!("legal sequence renders as {body:?}"));
    }
    interpret(&net, &body)?;
    let mut illegal = body[..6].to_vec();
    illegal.push("let r5 = &mut x3;".into());
    if interpret(&net, &illegal).is_ok() {
        return Err("interpreter accepts `&mut x` under a live `&x`".into());
    }
    let mut reuse = body[..5].to_vec();
    reuse.extend(["drop(x3);".to_string(), "let r4 = &x3;".to_string()]);
    if interpret(&net, &reuse).is_ok() {
        return Err("interpreter accepts a use after move".into());
    }

    let dir = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let written = match run(&config("ownership", all_goals(&net), dir.path(), false)).map_err(|e| e.to_string())? {
        Outcome::Written(w) => w,
        Outcome::NoWitness => return Err("no snippet for any ownership goal".into()),
    };
    let elapsed = t.elapsed();
    for file in &written {
        let body = body_of(file);
        scan(&body).map_err(|e| format!("{}: {e}", file.display()))?;
        interpret(&net, &body).map_err(|e| format!("{}: {e}", file.display()))?;
    }
    if elapsed > Duration::from_secs(5) {
        return Err(format!("pipeline took {elapsed:?}"));
    }
    Ok(format!("legal sequence replays, illegal ones rejected; {} snippets scanned; pipeline {elapsed:.2?}", written.len()))
}

fn criterion2() -> Verdict {
    let mut detail = Vec::new();
    for name in ["ownership", "handle"] {
        let r = bisim_check(&net(name, &BuildOptions::default()), 12, 500, 2024);
        if let Some(d) = r.divergences.first() {
            return Err(format!("{name}: {} divergences, first:\n{d}", r.divergences.len()));
        }
        detail.push(format!("{name} {} steps", r.steps));
        for fault in [Fault::EndShrLastKeepsFrozen, Fault::BorrowMutWithoutPush] {
            let bad = net(name, &BuildOptions { fault: Some(fault), ..BuildOptions::default() });
            if bisim_check(&bad, 12, 500, 2024).divergences.is_empty() {
                return Err(format!("{name}: injected {fault:?} not detected"));
            }
        }
    }
    Ok(format!("500 traces x 12 each, 0 divergences ({}); injected faults detected", detail.join(", ")))
}

fn criterion3() -> Verdict {
    let mut detail = Vec::new();
    for (name, tokens, depth) in [("micro", 2, 3), ("ownership", 1, 3), ("handle", 2, 2)] {
        let n = net(name, &BuildOptions::default());
        let g = saturate(&n, &Bounds::new(tokens, depth)).map_err(|e| e.to_string())?;
        let (nodes, edges) = brute_force(&n, tokens, depth);
        if (g.node_count(), g.edge_count()) != (nodes, edges) {
            return Err(format!(
                "{name} B={tokens} D={depth}: worklist {}/{}, enumerator {nodes}/{edges}",
                g.node_count(),
                g.edge_count()
            ));
        }
        detail.push(format!("{name} B={tokens} D={depth} {nodes}/{edges}"));
    }
    Ok(detail.join(", "))
}

fn random_config(nets: &[Net], rng: &mut ChaCha8Rng) -> (usize, Configuration) {
    let which = rng.random_range(0..nets.len());
    let net = &nets[which];
    let mut cfg = Configuration::empty();
    for _ in 0..rng.random_range(0..16) {
        let succ = net.successors(&cfg, false);
        if succ.is_empty() {
            break;
        }
        cfg = succ[rng.random_range(0..succ.len())].1.clone();
    }
    (which, cfg)
}

fn random_renaming(cfg: &Configuration, rng: &mut ChaCha8Rng) -> Renaming {
    let mut ids: Vec<u32> = (0..1000).collect();
    ids.shuffle(rng);
    let mut labels: Vec<u32> = (0..1000).collect();
    labels.shuffle(rng);
    Renaming {
        values: cfg.used_values().into_iter().zip(ids).map(|(v, n)| (v, ValueId(n))).collect(),
        labels: cfg.used_labels().into_iter().zip(labels).map(|(l, n)| (l, RegionLabel(n))).collect(),
    }
}

fn criterion4() -> Verdict {
    let nets: Vec<Net> = ["ownership", "handle", "lifetimes", "generics"].iter().map(|n| net(n, &BuildOptions::default())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut frames = 0;
    for i in 0..1000 {
        let (_, cfg) = random_config(&nets, &mut rng);
        frames += cfg.stack.len();
        let renamed = random_renaming(&cfg, &mut rng).config(&cfg);
        let k = canon(&cfg);
        if canon(&renamed) != k {
            return Err(format!("case {i}: renaming changes the canonical form"));
        }
        if canon(&k) != k {
            return Err(format!("case {i}: canon is not idempotent"));
        }
    }
    Ok(format!("1000 configurations ({frames} stack frames in total), 0 failures"))
}

/// Every goal of every corpus environment, with its witness when one exists.
fn criterion5() -> Verdict {
    let bounds = Bounds::new(CORPUS_BOUNDS.0, CORPUS_BOUNDS.1);
    let mut witnesses = 0;
    for name in CORPUS {
        let n = net(name, &BuildOptions::default());
        let g = saturate(&n, &bounds).map_err(|e| e.to_string())?;
        for text in all_goals(&n) {
            let goal = parse_goal(&text, &n).map_err(|e| e.to_string())?;
            let Some(w) = synthesize(&n, &g, &goal, &bounds) else { continue };
            witnesses += 1;
            if !w.final_config.stack.is_empty() {
                return Err(format!("{name} {text}: stack not empty after closing"));
            }
            match replay(&n, w.firings(), &bounds) {
                Ok(end) if end.stack.is_empty() && end == w.final_config => {}
                Ok(_) => return Err(format!("{name} {text}: replay ends elsewhere")),
                Err(e) => return Err(format!("{name} {text}: {e}")),
            }
        }
    }
    Ok(format!("{witnesses} witnesses closed and replayed within B={} D={}", CORPUS_BOUNDS.0, CORPUS_BOUNDS.1))
}

fn compiler_available() -> Option<String> {
    let c = compiler();
    Command::new(&c).arg("--version").output().ok().filter(|o| o.status.success()).map(|_| c)
}

fn criterion6() -> Verdict {
    let rustc = compiler_available();
    let mut snippets = 0;
    let mut envs = 0;
    for name in CORPUS {
        let n = net(name, &BuildOptions::default());
        let dir = tempfile::tempdir().unwrap();
        let written = match run(&config(name, all_goals(&n), dir.path(), false)).map_err(|e| e.to_string())? {
            Outcome::Written(w) => w,
            Outcome::NoWitness => continue,
        };
        envs += 1;
        for file in &written {
            snippets += 1;
            interpret(&n, &body_of(file)).map_err(|e| format!("{}: interpreter: {e}", file.display()))?;
            if let Some(rustc) = &rustc {
                if let Err(stderr) = compile_check(rustc, file).map_err(|e| e.to_string())? {
                    let text = std::fs::read_to_string(file).unwrap();
                    return Err(format!("{name}: compiler rejects\n{text}\n{stderr}"));
                }
            }
        }
    }
    if snippets < 50 || envs < 5 {
        return Err(format!("corpus too small: {snippets} snippets over {envs} environments"));
    }
    let how = if rustc.is_some() { "compile and replay in the interpreter" } else { "replay in the interpreter (no compiler found)" };
    Ok(format!("{snippets} snippets over {envs} environments all {how}"))
}

fn criterion7() -> Verdict {
    let mut files = 0;
    for name in ["ownership", "buffers", "lifetimes"] {
        let n = net(name, &BuildOptions::default());
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            run(&config(name, all_goals(&n), d.path(), true)).map_err(|e| e.to_string())?;
        }
        let list = |d: &Path| -> BTreeSet<String> {
            std::fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect()
        };
        if list(a.path()) != list(b.path()) {
            return Err(format!("{name}: runs write different file sets"));
        }
        for f in list(a.path()) {
            if std::fs::read(a.path().join(&f)).unwrap() != std::fs::read(b.path().join(&f)).unwrap() {
                return Err(format!("{name}: {f} differs between runs"));
            }
            files += 1;
        }
        if !list(a.path()).contains("graph.txt") {
            return Err(format!("{name}: no graph export"));
        }
    }
    Ok(format!("{files} files byte-identical across two runs"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 7] = [
        ("1 move and borrow legality", criterion1),
        ("2 bisimulation suite", criterion2),
        ("3 reachability exactness", criterion3),
        ("4 canonicalization", criterion4),
        ("5 closure and soundness", criterion5),
        ("6 compile validation", criterion6),
        ("7 determinism", criterion7),
    ];
    let limits: BTreeMap<&str, Duration> = [
        ("2 bisimulation suite", Duration::from_secs(60)),
        ("3 reachability exactness", Duration::from_secs(30)),
    ]
    .into_iter()
    .collect();
    let mut failed = Vec::new();
    for (name, check) in criteria {
        let t = Instant::now();
        let mut result = check();
        let elapsed = t.elapsed();
        if let (Ok(_), Some(limit)) = (&result, limits.get(name)) {
            if elapsed > *limit {
                result = Err(format!("took {elapsed:.2?}, limit {limit:?}"));
            }
        }
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{elapsed:.2?}]"),
            Err(why) => {
                println!("FAIL  {name}: {why} [{elapsed:.2?}]");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
