use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcpn_cli::sigfile::parse_sig;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn pcpn(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcpn")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn has_compiler() -> bool {
    let c = std::env::var("PCPN_RUSTC").unwrap_or_else(|_| "rustc".into());
    Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn empty_environment_has_no_witness() {
    let dir = tempfile::tempdir().unwrap();
    let sig = fixture("empty.json");
    let o = pcpn(&["--sig", sig.to_str().unwrap(), "--goal", "own:u8>=1"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no witness within bounds"));
    let micro = fixture("micro.json");
    let o = pcpn(&["--sig", micro.to_str().unwrap(), "--goal", "own:u8>=3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no witness within bounds"));
}

#[test]
fn micro_snippet_passes_the_compiler() {
    let dir = tempfile::tempdir().unwrap();
    let sig = fixture("micro.json");
    let mut args = vec!["--sig", sig.to_str().unwrap(), "--goal", "own:u8>=1"];
    if has_compiler() {
        args.push("--check");
    }
    let o = pcpn(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("snippet_0.rs")).unwrap();
    assert!(text.contains("let x0 = lit_u8();"));
    assert!(text.contains("// bounds: tokens=2 depth=4 ref-depth=2 max-states=200000"));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("snippet_0.rs\tgoal=own:u8>=1\tlength=1\t"));
}

#[test]
fn missing_compiler_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let sig = fixture("micro.json");
    let o = Command::new(env!("CARGO_BIN_EXE_pcpn"))
        .args(["--sig", sig.to_str().unwrap(), "--goal", "own:u8>=1", "--check", "--out"])
        .arg(dir.path())
        .env("PCPN_RUSTC", "/nonexistent/rustc")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let own = fixture("ownership.json");
    let own = own.to_str().unwrap();
    for args in [
        vec!["--sig", own, "--goal", "own:Unknown>=1"],
        vec!["--sig", own, "--goal", "own R"],
        vec!["--sig", "/nonexistent.json", "--goal", "own:u8>=1"],
    ] {
        let o = pcpn(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    let o = pcpn(&["--sig", own, "--goal", "own:u8>=1", "--bound-tokens", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn state_cap_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let own = fixture("ownership.json");
    let o = pcpn(&["--sig", own.to_str().unwrap(), "--goal", "own:R>=1", "--max-states", "10"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("state cap"));
}

#[test]
fn several_goals_write_several_snippets() {
    let dir = tempfile::tempdir().unwrap();
    let own = fixture("ownership.json");
    let own = own.to_str().unwrap();
    let common = ["--bound-tokens", "1", "--bound-depth", "2", "--emit-graph"];
    let mut args = vec!["--sig", own, "--goal", "own:R>=1", "--goal", "own:R>=2", "--goal", "blk:u32>=1"];
    args.extend(common);
    let o = pcpn(&args, dir.path());
    assert_eq!(o.status.code(), Some(0));
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("snippet_0.rs\t"));
    assert_eq!(lines[1], "-\tgoal=own:R>=2\tno witness");
    assert!(lines[2].starts_with("snippet_2.rs\t"));
    let blk = std::fs::read_to_string(dir.path().join("snippet_2.rs")).unwrap();
    assert!(blk.contains("let r1 = &mut x0;"), "{blk}");
    let graph = std::fs::read_to_string(dir.path().join("graph.txt")).unwrap();
    assert_eq!(graph.lines().count(), 2036);
}

#[test]
fn signature_file_rejects_unknown_keys() {
    assert!(parse_sig(r#"{"fns": [{"name": "f", "retrun": "u8"}]}"#).is_err());
    let src = parse_sig(r#"{"fns": [{"name": "f", "ret": "u8"}]}"#).unwrap();
    assert_eq!(src.fns.len(), 1);
}

#[test]
fn signature_files_round_trip() {
    use pcpn_cli::sigfile::{load_sig, write_sig};
    use pcpn_core::{build_net, BuildOptions, SigEnv};
    for name in ["ownership", "handle", "buffers", "generics", "traits", "lifetimes", "micro", "empty"] {
        let src = load_sig(&fixture(&format!("{name}.json"))).unwrap();
        let again = parse_sig(&write_sig(&src)).unwrap();
        assert_eq!(again, src, "{name}");
        let a = build_net(&SigEnv::from_source(&src).unwrap(), &BuildOptions::default()).unwrap();
        let b = build_net(&SigEnv::from_source(&again).unwrap(), &BuildOptions::default()).unwrap();
        assert_eq!(format!("{:?}", a.transitions), format!("{:?}", b.transitions), "{name}");
    }
}
