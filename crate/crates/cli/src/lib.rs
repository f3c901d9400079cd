//! Driver for the pcpn synthesizer: loads a signature file, builds the net,
//! explores it, and writes snippets.

pub mod sigfile;

use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use pcpn_core::build::{build_net, BuildOptions};
use pcpn_core::emit::{render_body, render_program};
use pcpn_core::reach::{saturate, Bounds, ReachError};
use pcpn_core::sigenv::SigEnv;
use pcpn_core::synth::{parse_goal, synthesize};

pub const COMPILER_ENV: &str = "PCPN_RUSTC";

#[derive(Clone, Debug, Parser)]
#[command(name = "pcpn", about = "Synthesize borrow-correct API call sequences from signatures")]
pub struct RunConfig {
    /// Signature file (JSON).
    #[arg(long)]
    pub sig: PathBuf,
    /// Goal, e.g. `own:u8>=1, frz:R>=1`. Repeat for several snippets.
    #[arg(long, required = true)]
    pub goal: Vec<String>,
    /// Token cap per place.
    #[arg(long, default_value_t = 2)]
    pub bound_tokens: usize,
    /// Borrow stack depth cap.
    #[arg(long, default_value_t = 4)]
    pub bound_depth: usize,
    /// Reference nesting admitted into the type universe.
    #[arg(long, default_value_t = 2)]
    pub ref_depth: usize,
    /// Hard cap on explored states.
    #[arg(long, default_value_t = 200_000)]
    pub max_states: usize,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Compile every snippet with the compiler named by PCPN_RUSTC (default `rustc`).
    #[arg(long)]
    pub check: bool,
    /// Also write the reachability graph as an edge list.
    #[arg(long)]
    pub emit_graph: bool,
    /// Recorded in the output header.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug)]
pub enum Outcome {
    /// Paths of the written snippets; goals without a witness are listed in
    /// the manifest only.
    Written(Vec<PathBuf>),
    NoWitness,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("state cap exceeded: {0}")]
    StateCap(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("compiler rejected {file}:\n{stderr}")]
    Rejected { file: PathBuf, stderr: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::StateCap(_) | CliError::Rejected { .. } => 1,
        }
    }
}

pub fn compiler() -> String {
    std::env::var(COMPILER_ENV).unwrap_or_else(|_| "rustc".into())
}

/// Type-checks a snippet without producing a binary.
pub fn compile_check(compiler: &str, file: &Path) -> Result<Result<(), String>, std::io::Error> {
    let dir = tempfile::tempdir()?;
    let out = Command::new(compiler)
        .args(["--edition=2021", "--emit=metadata", "--crate-type=bin", "--crate-name=snippet", "-o"])
        .arg(dir.path().join("snippet.rmeta"))
        .arg(file)
        .output()?;
    if out.status.success() {
        Ok(Ok(()))
    } else {
        Ok(Err(String::from_utf8_lossy(&out.stderr).into_owned()))
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let input = |e: String| CliError::Input(e);
    let src = sigfile::load_sig(&cfg.sig).map_err(|e| input(e.to_string()))?;
    let env = SigEnv::from_source(&src).map_err(|e| input(format!("{}: {e}", cfg.sig.display())))?;
    let opts = BuildOptions { ref_depth: cfg.ref_depth, ..BuildOptions::default() };
    let net = build_net(&env, &opts).map_err(|e| input(e.to_string()))?;
    let goals = cfg
        .goal
        .iter()
        .map(|g| parse_goal(g, &net).map_err(|e| input(format!("goal `{g}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let compiler = compiler();
    if cfg.check && Command::new(&compiler).arg("--version").output().is_err() {
        return Err(input(format!("compiler `{compiler}` not found")));
    }
    let bounds = Bounds { max_states: Some(cfg.max_states), ..Bounds::new(cfg.bound_tokens, cfg.bound_depth) };
    let graph = saturate(&net, &bounds).map_err(|e| match e {
        ReachError::BudgetExceeded { .. } => CliError::StateCap(e.to_string()),
        other => input(other.to_string()),
    })?;
    std::fs::create_dir_all(&cfg.out)?;
    if cfg.emit_graph {
        std::fs::write(cfg.out.join("graph.txt"), graph.export(&net))?;
    }
    let mut written = Vec::new();
    let mut manifest = String::new();
    for (i, goal) in goals.iter().enumerate() {
        let name = format!("snippet_{i}.rs");
        let Some(w) = synthesize(&net, &graph, goal, &bounds) else {
            manifest.push_str(&format!("-\tgoal={goal}\tno witness\n"));
            continue;
        };
        let body = render_body(&net, w.firings()).map_err(|e| input(format!("internal: {e}")))?;
        let header = vec![
            "generated by pcpn".to_string(),
            format!("goal: {goal}"),
            format!(
                "bounds: tokens={} depth={} ref-depth={} max-states={}",
                cfg.bound_tokens, cfg.bound_depth, cfg.ref_depth, cfg.max_states
            ),
            format!("seed: {}", cfg.seed),
            format!(
                "witness: {} steps ({} closing), node {:016x}, graph {} nodes / {} edges",
                w.len(),
                w.closing.len(),
                w.node_hash,
                graph.node_count(),
                graph.edge_count()
            ),
        ];
        let file = cfg.out.join(&name);
        std::fs::write(&file, render_program(&env, &header, &body))?;
        manifest.push_str(&format!("{name}\tgoal={goal}\tlength={}\tnode={:016x}\n", w.len(), w.node_hash));
        written.push(file);
    }
    std::fs::write(cfg.out.join("manifest.txt"), manifest)?;
    if written.is_empty() {
        return Ok(Outcome::NoWitness);
    }
    if cfg.check {
        for file in &written {
            if let Err(stderr) = compile_check(&compiler, file)? {
                return Err(CliError::Rejected { file: file.clone(), stderr });
            }
        }
    }
    Ok(Outcome::Written(written))
}
