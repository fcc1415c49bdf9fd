//! Experiment configuration: a TOML file with one section per experiment kind.
//!
//! Every field has a default, so an empty file (or no file) runs the
//! reference configuration of the chosen kind.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dtnlab::geometry::DomainSpec;
use dtnlab::inverse::Method;
use dtnlab::probe::NormMode;
use dtnlab::C64;

use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    DtnSpectrum,
    Alessandrini,
    BlowupScan,
    ThreeSpheres,
    Reconstruct,
    StabilitySweep,
    BoundsCalc,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::DtnSpectrum => "dtn_spectrum",
            Kind::Alessandrini => "alessandrini",
            Kind::BlowupScan => "blowup_scan",
            Kind::ThreeSpheres => "three_spheres",
            Kind::Reconstruct => "reconstruct",
            Kind::StabilitySweep => "stability_sweep",
            Kind::BoundsCalc => "bounds_calc",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Disk,
    UnitSquare,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Turn the pass/fail checks of the experiment into the exit status.
    pub checks: bool,
    pub geometry: GeometryConfig,
    pub mesh: MeshConfig,
    pub dtn_spectrum: SpectrumConfig,
    pub alessandrini: IdentityConfig,
    pub blowup_scan: ScanConfig,
    pub three_spheres: SpheresConfig,
    pub reconstruct: ReconstructConfig,
    pub noise: NoiseConfig,
    pub stability_sweep: SweepConfig,
    pub bounds_calc: BoundsConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// `disk` or `unit_square`; the default depends on the kind.
    pub domain: Option<Domain>,
    /// Cells per side of the grid partition.
    pub side_cells: Option<usize>,
    /// Sides of the polygon approximating the disk (multiple of 8).
    pub disk_sides: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Nominal grid spacing; the default depends on the kind.
    pub h: Option<f64>,
    pub refine: Vec<RefineConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefineConfig {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Complex values are written as `[re, im]`.
pub type Values = Vec<[f64; 2]>;

pub fn complex(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|&[re, im]| C64::new(re, im)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Constant potential on the disk.
    pub q: [f64; 2],
    pub modes: usize,
    pub tolerance: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { q: [0.0, 0.0], modes: 8, tolerance: 0.02 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentityConfig {
    pub q1: Values,
    pub q2: Values,
    /// Sources in the extension cell.
    pub y: [f64; 2],
    pub z: [f64; 2],
    /// Number of meshes, each halving the spacing of the previous one.
    pub levels: usize,
    pub max_gap: f64,
    pub min_ratio: f64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        IdentityConfig {
            q1: vec![[1.0, 0.5], [2.0, 0.0], [1.0, 0.0], [1.5, 0.0]],
            q2: vec![[1.5, 0.5], [2.0, 0.0], [1.0, 0.0], [1.5, 0.0]],
            y: [0.45, -0.1],
            z: [0.55, -0.1],
            levels: 2,
            max_gap: 0.05,
            min_ratio: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub q1: Values,
    pub q2: Values,
    /// Last cell of the chain.
    pub target: usize,
    /// Chain position whose entry interface is scanned.
    pub k: usize,
    /// Scan radii `r₁ 2^{-e}`.
    pub scan_exponents: Vec<i32>,
    /// Source of the annulus norms of `G(·, y)` for `q1`.
    pub annulus_source: [f64; 2],
    /// Annulus radii `2^{-e}`.
    pub annulus_exponents: Vec<i32>,
    pub min_r2: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            q1: vec![[1.0, 0.0]; 4],
            q2: vec![[1.0, 0.0], [1.5, 0.0], [1.0, 0.0], [1.0, 0.0]],
            target: 3,
            k: 2,
            scan_exponents: vec![3, 4, 5, 6],
            annulus_source: [0.5, 0.5],
            annulus_exponents: vec![3, 4, 5, 6, 7],
            min_r2: 0.95,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpheresField {
    /// `Re z³` in closed form.
    HarmonicCubic,
    /// Finite element solution of `(-Δ + q) u = 0` with boundary data `Re z³`.
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpheresConfig {
    pub field: SpheresField,
    /// Constant potential for the `dirichlet` field.
    pub q: [f64; 2],
    pub center: [f64; 2],
    pub radii: [f64; 3],
    pub norm: NormMode,
    /// Accepted range of the empirical constant.
    pub q_range: [f64; 2],
}

impl Default for SpheresConfig {
    fn default() -> Self {
        SpheresConfig {
            field: SpheresField::HarmonicCubic,
            q: [0.0, 0.0],
            center: [0.0, 0.0],
            radii: [0.2, 0.4, 0.8],
            norm: NormMode::Linf,
            q_range: [0.98, 1.05],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub truth: Values,
    /// Initial guess; all ones when empty.
    pub initial: Values,
    pub method: Method,
    pub real_only: bool,
    pub max_iterations: usize,
    pub damping: f64,
    /// Accepted error of the noiseless reconstruction.
    pub tolerance: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            truth: vec![[0.8, 0.1], [1.3, -0.2], [0.6, 0.05], [1.1, 0.0]],
            initial: Vec::new(),
            method: Method::GaussNewton,
            real_only: false,
            max_iterations: 50,
            damping: 1e-3,
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Operator-norm noise levels; empty for noiseless runs only.
    pub levels: Vec<f64>,
    pub trials: usize,
    /// Real symmetric noise (complex symmetric otherwise).
    pub real: bool,
    /// Constant `C` of the check `error ≤ C δ + noiseless error`.
    pub bound_constant: Option<f64>,
    /// Fraction of trials that must satisfy the check.
    pub min_fraction: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { levels: Vec::new(), trials: 10, real: true, bound_constant: None, min_fraction: 0.9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingKind {
    Exhaustive,
    Random,
    SingleCell,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sampling: SamplingKind,
    /// Pairs for `random` sampling.
    pub pairs: usize,
    /// Backgrounds for `single_cell` sampling.
    pub backgrounds: usize,
    /// Maximum number of pairs evaluated.
    pub budget: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { sampling: SamplingKind::Exhaustive, pairs: 100, backgrounds: 4, budget: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    /// Space dimension `n`.
    pub dim: usize,
    /// Constant of the ε-net count; not known explicitly, so any value is
    /// illustrative.
    pub k: f64,
    pub n_cells: usize,
    /// Constant `C` of the recursion.
    pub recursion_c: f64,
    /// Largest composition depth `M` tabulated.
    pub recursion_depth: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { dim: 2, k: 1.0, n_cells: 8, recursion_c: 1.0, recursion_depth: 6 }
    }
}

/// Configuration with the kind-dependent defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub kind: Kind,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub workers: Option<usize>,
    pub checks: bool,
    pub domain: Domain,
    pub side_cells: usize,
    pub disk_sides: usize,
    pub h: f64,
    pub config: ExperimentConfig,
}

impl Resolved {
    pub fn domain_spec(&self) -> DomainSpec {
        match self.domain {
            Domain::Disk => DomainSpec::Disk { sides: self.disk_sides },
            Domain::UnitSquare => DomainSpec::UnitSquare,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.side_cells * self.side_cells
    }
}

/// Command-line overrides.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, RunError> {
    toml::from_str(text).map_err(|e| RunError::Usage(format!("config: {e}")))
}

fn usage(field: &str, msg: impl std::fmt::Display) -> RunError {
    RunError::Usage(format!("{field}: {msg}"))
}

fn positive(field: &str, v: f64) -> Result<(), RunError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(usage(field, format!("must be positive, got {v}")))
    }
}

fn finite(field: &str, v: &[[f64; 2]]) -> Result<(), RunError> {
    match v.iter().flatten().find(|x| !x.is_finite()) {
        Some(x) => Err(usage(field, format!("non-finite value {x}"))),
        None => Ok(()),
    }
}

fn cell_values(field: &str, v: &[[f64; 2]], n: usize) -> Result<(), RunError> {
    finite(field, v)?;
    if v.len() != n {
        return Err(usage(field, format!("expected {n} cell values, got {}", v.len())));
    }
    Ok(())
}

/// Applies the kind defaults and command-line overrides, then validates.
pub fn resolve(kind: Kind, config: ExperimentConfig, over: &Overrides) -> Result<Resolved, RunError> {
    if let Some(k) = config.kind {
        if k != kind {
            return Err(usage("kind", format!("config is for {} but {} was requested", k.name(), kind.name())));
        }
    }
    let (domain, side_cells, h) = match kind {
        Kind::DtnSpectrum | Kind::ThreeSpheres => (Domain::Disk, 1, 0.02),
        Kind::Alessandrini => (Domain::UnitSquare, 2, 0.04),
        Kind::BlowupScan => (Domain::UnitSquare, 2, 0.02),
        Kind::Reconstruct | Kind::StabilitySweep | Kind::BoundsCalc => (Domain::Disk, 2, 0.05),
    };
    let g = &config.geometry;
    let r = Resolved {
        kind,
        seed: over.seed.unwrap_or(config.seed),
        output_dir: over
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(kind.name())),
        workers: over.workers.or(config.workers),
        checks: config.checks,
        domain: g.domain.unwrap_or(domain),
        side_cells: g.side_cells.unwrap_or(side_cells),
        disk_sides: g.disk_sides.unwrap_or(128),
        h: config.mesh.h.unwrap_or(h),
        config,
    };
    validate(&r)?;
    Ok(r)
}

fn validate(r: &Resolved) -> Result<(), RunError> {
    let c = &r.config;
    positive("mesh.h", r.h)?;
    if r.side_cells == 0 {
        return Err(usage("geometry.side_cells", "must be at least 1"));
    }
    if r.disk_sides < 8 || r.disk_sides % 8 != 0 {
        return Err(usage("geometry.disk_sides", format!("must be a positive multiple of 8, got {}", r.disk_sides)));
    }
    if r.workers == Some(0) {
        return Err(usage("workers", "must be at least 1"));
    }
    for (i, d) in c.mesh.refine.iter().enumerate() {
        positive(&format!("mesh.refine[{i}].radius"), d.radius)?;
    }
    let n = r.n_cells();
    match r.kind {
        Kind::DtnSpectrum => {
            if r.domain != Domain::Disk {
                return Err(usage("geometry.domain", "the spectrum oracle needs the disk"));
            }
            if c.dtn_spectrum.modes == 0 {
                return Err(usage("dtn_spectrum.modes", "must be at least 1"));
            }
            finite("dtn_spectrum.q", &[c.dtn_spectrum.q])?;
            positive("dtn_spectrum.tolerance", c.dtn_spectrum.tolerance)?;
        }
        Kind::Alessandrini => {
            let a = &c.alessandrini;
            if r.domain != Domain::UnitSquare {
                return Err(usage("geometry.domain", "the identity needs the extension cell of the unit square"));
            }
            cell_values("alessandrini.q1", &a.q1, n)?;
            cell_values("alessandrini.q2", &a.q2, n)?;
            if a.levels == 0 {
                return Err(usage("alessandrini.levels", "must be at least 1"));
            }
            positive("alessandrini.max_gap", a.max_gap)?;
            positive("alessandrini.min_ratio", a.min_ratio)?;
        }
        Kind::BlowupScan => {
            let s = &c.blowup_scan;
            if r.domain != Domain::UnitSquare {
                return Err(usage("geometry.domain", "the scan needs the unit square"));
            }
            cell_values("blowup_scan.q1", &s.q1, n)?;
            cell_values("blowup_scan.q2", &s.q2, n)?;
            if s.target >= n {
                return Err(usage("blowup_scan.target", format!("cell {} out of range 0..{n}", s.target)));
            }
            if s.scan_exponents.len() < 2 || s.annulus_exponents.len() < 2 {
                return Err(usage("blowup_scan", "at least two radii are needed for a fit"));
            }
        }
        Kind::ThreeSpheres => {
            let t = &c.three_spheres;
            for (i, &rho) in t.radii.iter().enumerate() {
                positive(&format!("three_spheres.radii[{i}]"), rho)?;
            }
            if !(t.radii[0] < t.radii[1] && t.radii[1] < t.radii[2]) {
                return Err(usage("three_spheres.radii", "must be increasing"));
            }
            finite("three_spheres.q", &[t.q, t.center])?;
            if !(t.q_range[0] <= t.q_range[1]) {
                return Err(usage("three_spheres.q_range", "lower end exceeds upper end"));
            }
        }
        Kind::Reconstruct => {
            let p = &c.reconstruct;
            if r.domain != Domain::Disk {
                return Err(usage("geometry.domain", "reconstruction runs on the disk"));
            }
            cell_values("reconstruct.truth", &p.truth, n)?;
            if !p.initial.is_empty() {
                cell_values("reconstruct.initial", &p.initial, n)?;
            }
            if p.max_iterations == 0 {
                return Err(usage("reconstruct.max_iterations", "must be at least 1"));
            }
            positive("reconstruct.damping", p.damping)?;
            positive("reconstruct.tolerance", p.tolerance)?;
            for (i, &d) in c.noise.levels.iter().enumerate() {
                positive(&format!("noise.levels[{i}]"), d)?;
            }
            if !c.noise.levels.is_empty() && c.noise.trials == 0 {
                return Err(usage("noise.trials", "must be at least 1"));
            }
            if let Some(b) = c.noise.bound_constant {
                positive("noise.bound_constant", b)?;
            }
            if !(0.0..=1.0).contains(&c.noise.min_fraction) {
                return Err(usage("noise.min_fraction", "must lie in [0, 1]"));
            }
        }
        Kind::StabilitySweep => {
            let s = &c.stability_sweep;
            if r.domain != Domain::Disk {
                return Err(usage("geometry.domain", "the admissible class lives on the disk"));
            }
            if s.budget == 0 {
                return Err(usage("stability_sweep.budget", "must be at least 1"));
            }
            if s.sampling == SamplingKind::Random && s.pairs == 0 {
                return Err(usage("stability_sweep.pairs", "must be at least 1"));
            }
            if s.sampling == SamplingKind::SingleCell && s.backgrounds == 0 {
                return Err(usage("stability_sweep.backgrounds", "must be at least 1"));
            }
        }
        Kind::BoundsCalc => {
            let b = &c.bounds_calc;
            if b.dim < 2 {
                return Err(usage("bounds_calc.dim", "must be at least 2"));
            }
            positive("bounds_calc.k", b.k)?;
            if b.n_cells == 0 {
                return Err(usage("bounds_calc.n_cells", "must be at least 1"));
            }
            positive("bounds_calc.recursion_c", b.recursion_c)?;
            if b.recursion_depth == 0 {
                return Err(usage("bounds_calc.recursion_depth", "must be at least 1"));
            }
        }
    }
    Ok(())
}
