//! Command-line experiment runner.
//!
//! Exit status: 0 when the run completes and every requested check passes,
//! 1 on numerical failure or a failed check, 2 on usage errors.

mod config;
mod experiments;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use dtnlab::probe::{smallness_exponents, ConstantsLedger};

use config::{Kind, Overrides, Resolved};
use experiments::{CheckResult, MeshStats, Outcome};

#[derive(Debug)]
pub enum RunError {
    Usage(String),
    Numerical(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Usage(m) => write!(f, "usage error: {m}"),
            RunError::Numerical(m) => write!(f, "{m}"),
        }
    }
}

impl From<dtnlab::Error> for RunError {
    fn from(e: dtnlab::Error) -> Self {
        RunError::Numerical(e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> RunError {
    RunError::Numerical(format!("cannot write {}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "dtnlab", version, about = "Numerical experiments for the Schrödinger DtN inverse problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rayleigh quotients of the disk DtN matrix on Fourier modes.
    DtnSpectrum(RunArgs),
    /// Volume and boundary sides of the identity for two potentials.
    Alessandrini(RunArgs),
    /// Annulus norms of the singular solution and an interface scan.
    BlowupScan(RunArgs),
    /// Empirical three-circles constant on concentric disks.
    ThreeSpheres(RunArgs),
    /// Recover cell values from synthetic DtN data.
    Reconstruct(RunArgs),
    /// Stability ratios over the lattice class.
    StabilitySweep(RunArgs),
    /// Closed-form lower bound and recursion constants.
    BoundsCalc(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (overrides the config).
    #[arg(long)]
    workers: Option<usize>,
    /// Run seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

impl Command {
    fn split(self) -> (Kind, RunArgs) {
        match self {
            Command::DtnSpectrum(a) => (Kind::DtnSpectrum, a),
            Command::Alessandrini(a) => (Kind::Alessandrini, a),
            Command::BlowupScan(a) => (Kind::BlowupScan, a),
            Command::ThreeSpheres(a) => (Kind::ThreeSpheres, a),
            Command::Reconstruct(a) => (Kind::Reconstruct, a),
            Command::StabilitySweep(a) => (Kind::StabilitySweep, a),
            Command::BoundsCalc(a) => (Kind::BoundsCalc, a),
        }
    }
}

#[derive(Serialize)]
struct TauSample {
    r: f64,
    tau_r: f64,
    slope: f64,
    slope_bound: f64,
}

#[derive(Serialize)]
struct Constants {
    #[serde(flatten)]
    ledger: ConstantsLedger,
    tau_samples: Vec<TauSample>,
}

#[derive(Serialize)]
struct Manifest {
    status: &'static str,
    kind: &'static str,
    code_version: &'static str,
    seed: u64,
    workers: usize,
    config: Value,
    constants: Constants,
    meshes: Vec<MeshStats>,
    results: Value,
    checks_requested: bool,
    checks: Vec<CheckResult>,
    error: Option<String>,
    wall_clock_seconds: f64,
    outputs: Vec<String>,
}

fn constants(r: &Resolved) -> Result<Constants, RunError> {
    let part = experiments::partition(r)?;
    let p = part.params;
    let bound = part.n_cells() as f64 * 1.5;
    let ledger = ConstantsLedger::new(p.r0, p.lipschitz, p.area_bound, bound.max(1.5), part.n_cells(), part.n_cells())?;
    let tau_samples = [0.25, 0.5, 1.0, 1.5]
        .iter()
        .map(|f| {
            let s = smallness_exponents(f * ledger.r1, &ledger)?;
            Ok(TauSample { r: f * ledger.r1, tau_r: s.tau_r, slope: s.slope, slope_bound: s.slope_bound })
        })
        .collect::<Result<_, RunError>>()?;
    Ok(Constants { ledger, tau_samples })
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), RunError> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(m).map_err(|e| RunError::Numerical(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))
}

fn run(kind: Kind, args: RunArgs) -> Result<bool, RunError> {
    let cfg = match &args.config {
        Some(p) => config::load(p)?,
        None => config::ExperimentConfig::default(),
    };
    let over = Overrides { out: args.out, workers: args.workers, seed: args.seed };
    let r = config::resolve(kind, cfg, &over)?;
    if let Some(w) = r.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| RunError::Numerical(format!("thread pool: {e}")))?;
    }
    let t0 = Instant::now();
    let mut manifest = Manifest {
        status: "running",
        kind: kind.name(),
        code_version: env!("CARGO_PKG_VERSION"),
        seed: r.seed,
        workers: rayon::current_num_threads(),
        config: serde_json::to_value(&r).map_err(|e| RunError::Numerical(e.to_string()))?,
        constants: constants(&r)?,
        meshes: Vec::new(),
        results: Value::Null,
        checks_requested: r.checks,
        checks: Vec::new(),
        error: None,
        wall_clock_seconds: 0.0,
        outputs: Vec::new(),
    };
    fs::create_dir_all(&r.output_dir).map_err(|e| io_error(&r.output_dir, e))?;
    write_manifest(&r.output_dir, &manifest)?;

    let outcome = experiments::run(&r);
    manifest.wall_clock_seconds = t0.elapsed().as_secs_f64();
    let Outcome { results, files, meshes, checks } = match outcome {
        Ok(o) => o,
        Err(e) => {
            manifest.status = "failed";
            manifest.error = Some(e.to_string());
            write_manifest(&r.output_dir, &manifest)?;
            return Err(e);
        }
    };
    for (name, contents) in &files {
        let path = r.output_dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        manifest.outputs.push(name.clone());
    }
    manifest.outputs.push("manifest.json".into());
    let pass = checks.iter().all(|c| c.pass);
    for c in &checks {
        eprintln!("{}: {} | {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    manifest.status = "complete";
    manifest.results = json!(results);
    manifest.meshes = meshes;
    manifest.checks = checks;
    write_manifest(&r.output_dir, &manifest)?;
    eprintln!("wrote {} files to {}", manifest.outputs.len(), r.output_dir.display());
    Ok(pass || !r.checks)
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    match run(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("checks failed");
            ExitCode::from(1)
        }
        Err(e @ RunError::Usage(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
