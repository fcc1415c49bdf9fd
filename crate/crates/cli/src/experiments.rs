//! One pipeline per experiment kind. Pipelines compute in memory; the runner
//! writes their files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use dtnlab::dtn::{assemble_dtn, rayleigh_quotient, TraceBasis};
use dtnlab::fem::{make_mesh, solve_dirichlet, Mesh, RefineDisk};
use dtnlab::geometry::{build_grid_partition, chain_to, Partition, Point, Potential};
use dtnlab::greens::special::{bessel_i, bessel_i_prime};
use dtnlab::greens::{annulus_l2_norm, GreensSolver};
use dtnlab::inverse::{
    estimate_lipschitz_constant, operator_noise, reconstruct, rondi_lower_bound, ForwardModel, ReconstructionProblem,
    Sampling, StabilityRecord,
};
use dtnlab::probe::{
    fit_line, interface_refinement, recursion_bound, three_spheres_check, LinearFit, RecursionMode, SingularProbe,
};
use dtnlab::C64;

use crate::config::{complex, Kind, Resolved, SamplingKind, SpheresField};
use crate::RunError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeshStats {
    pub label: String,
    pub h_target: f64,
    pub h_max: f64,
    pub nodes: usize,
    pub triangles: usize,
}

impl MeshStats {
    fn of(label: &str, h_target: f64, mesh: &Mesh) -> Self {
        MeshStats {
            label: label.to_string(),
            h_target,
            h_max: mesh.h,
            nodes: mesh.n_nodes(),
            triangles: mesh.n_triangles(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name: name.to_string(), pass, detail }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Value,
    /// File name and contents.
    pub files: Vec<(String, String)>,
    pub meshes: Vec<MeshStats>,
    pub checks: Vec<CheckResult>,
}

/// Seed of sub-task `stream`: the ChaCha stream `stream` of the run seed.
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

fn e(x: f64) -> String {
    format!("{x:.17e}")
}

fn refine_disks(r: &Resolved) -> Vec<RefineDisk> {
    r.config.mesh.refine.iter().map(|d| RefineDisk::new(Point::new(d.center[0], d.center[1]), d.radius)).collect()
}

pub fn partition(r: &Resolved) -> Result<Partition, RunError> {
    Ok(build_grid_partition(r.side_cells, r.domain_spec())?)
}

fn fit_json(fit: &LinearFit) -> Value {
    json!({ "intercept": fit.intercept, "slope": fit.slope, "r2": fit.r2 })
}

pub fn run(r: &Resolved) -> Result<Outcome, RunError> {
    match r.kind {
        Kind::DtnSpectrum => dtn_spectrum(r),
        Kind::Alessandrini => alessandrini(r),
        Kind::BlowupScan => blowup_scan(r),
        Kind::ThreeSpheres => three_spheres(r),
        Kind::Reconstruct => reconstruction(r),
        Kind::StabilitySweep => stability_sweep(r),
        Kind::BoundsCalc => bounds_calc(r),
    }
}

/// Separation-of-variables value of the Rayleigh quotient of `cos kθ` on the
/// unit disk for a constant real `q ≥ 0`.
fn disk_reference(k: usize, q: C64) -> Option<f64> {
    if q.im != 0.0 || q.re < 0.0 {
        return None;
    }
    if q.re == 0.0 {
        return Some(k as f64);
    }
    let s = q.re.sqrt();
    Some(s * bessel_i_prime(k, s) / bessel_i(k, s))
}

fn dtn_spectrum(r: &Resolved) -> Result<Outcome, RunError> {
    let c = &r.config.dtn_spectrum;
    let part = partition(r)?;
    let mesh = make_mesh(&part, r.h, &refine_disks(r))?;
    let basis = TraceBasis::new(&mesh)?;
    let q = C64::new(c.q[0], c.q[1]);
    let op = assemble_dtn(&mesh, &Potential::constant(part.n_cells(), q), &basis)?;
    let mut csv = String::from("k,rayleigh_quotient,reference,rel_error\n");
    let mut worst: Option<f64> = None;
    let mut rows = Vec::new();
    for k in 1..=c.modes {
        let mode: Vec<C64> =
            basis.positions.iter().map(|p| C64::new((k as f64 * p.y.atan2(p.x)).cos(), 0.0)).collect();
        let rq = rayleigh_quotient(&op, &basis, &mode);
        let reference = disk_reference(k, q);
        let rel = reference.map(|v| (rq - v).norm() / v);
        if let Some(rel) = rel {
            worst = Some(worst.map_or(rel, |w| w.max(rel)));
        }
        let opt = |v: Option<f64>| v.map(e).unwrap_or_default();
        writeln!(csv, "{k},{},{},{}", e(rq.re), opt(reference), opt(rel)).expect("string write");
        rows.push(json!({ "k": k, "rayleigh_quotient": [rq.re, rq.im], "reference": reference, "rel_error": rel }));
    }
    let checks = match worst {
        Some(w) => vec![check(
            "spectrum",
            w <= c.tolerance,
            format!("max relative error {w:.3e}, tolerance {:.1e}", c.tolerance),
        )],
        None => Vec::new(),
    };
    Ok(Outcome {
        results: json!({ "modes": rows, "max_rel_error": worst, "trace_nodes": basis.len() }),
        files: vec![("spectrum.csv".into(), csv)],
        meshes: vec![MeshStats::of("disk", r.h, &mesh)],
        checks,
    })
}

fn alessandrini(r: &Resolved) -> Result<Outcome, RunError> {
    let c = &r.config.alessandrini;
    let part = partition(r)?;
    let q1 = Potential::from_values(complex(&c.q1));
    let q2 = Potential::from_values(complex(&c.q2));
    let (y, z) = (Point::new(c.y[0], c.y[1]), Point::new(c.z[0], c.z[1]));
    let mut csv = String::from("h,volume_re,volume_im,boundary_re,boundary_im,relative_gap\n");
    let (mut gaps, mut meshes) = (Vec::new(), Vec::new());
    for level in 0..c.levels {
        let h = r.h / 2f64.powi(level as i32);
        let probe = SingularProbe::new(&part, &q1, &q2, h, 3, &refine_disks(r))?;
        let g = probe.alessandrini_gap(y, z)?;
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            e(h),
            e(g.volume_side.re),
            e(g.volume_side.im),
            e(g.boundary_side.re),
            e(g.boundary_side.im),
            e(g.relative_gap)
        )
        .expect("string write");
        meshes.push(MeshStats::of(&format!("level {level}"), h, &probe.mesh));
        gaps.push(g.relative_gap);
    }
    let ratios: Vec<f64> = gaps.windows(2).map(|w| w[0] / w[1]).collect();
    let finest = *gaps.last().expect("at least one level");
    let mut checks = vec![check("gap", finest <= c.max_gap, format!("finest gap {finest:.3e}, limit {:.1e}", c.max_gap))];
    if !ratios.is_empty() {
        let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        checks.push(check(
            "convergence",
            worst >= c.min_ratio,
            format!("smallest ratio {worst:.3}, required {:.2}", c.min_ratio),
        ));
    }
    Ok(Outcome {
        results: json!({ "relative_gaps": gaps, "ratios": ratios }),
        files: vec![("identity.csv".into(), csv)],
        meshes,
        checks,
    })
}

fn blowup_scan(r: &Resolved) -> Result<Outcome, RunError> {
    let c = &r.config.blowup_scan;
    let part = partition(r)?;
    let q1 = Potential::from_values(complex(&c.q1));
    let q2 = Potential::from_values(complex(&c.q2));

    // annulus norms of G(·, y) for q1
    let y = Point::new(c.annulus_source[0], c.annulus_source[1]);
    let mut refine = refine_disks(r);
    refine.push(RefineDisk::new(y, 0.15));
    let mesh = Arc::new(make_mesh(&part, r.h, &refine)?);
    let field = GreensSolver::new(Arc::clone(&mesh), &q1)?.field(y, 0.1)?;
    let radii: Vec<f64> = c.annulus_exponents.iter().map(|&k| 2f64.powi(-k)).collect();
    let norms = radii.iter().map(|&rad| annulus_l2_norm(&field, rad)).collect::<Result<Vec<_>, _>>()?;
    let logs: Vec<f64> = radii.iter().map(|x| x.ln().abs()).collect();
    let squares: Vec<f64> = norms.iter().map(|n| n * n).collect();
    let annulus_fit = fit_line(&logs, &squares).ok_or_else(|| RunError::Numerical("degenerate annulus fit".into()))?;
    let mut annulus = String::from("r,norm,norm_squared\n");
    for ((rad, n), s) in radii.iter().zip(&norms).zip(&squares) {
        writeln!(annulus, "{},{},{}", e(*rad), e(*n), e(*s)).expect("string write");
    }

    // interface scan of S_{k-1}(y_r, y_r)
    let chain = chain_to(&part, c.target)?;
    let r1 = part.params.r1();
    let mut refine = refine_disks(r);
    refine.extend(interface_refinement(&part, &chain, 4.0 * r1));
    let probe = SingularProbe::new(&part, &q1, &q2, r.h, c.target, &refine)?;
    let scan_radii: Vec<f64> = c.scan_exponents.iter().map(|&k| r1 * 2f64.powi(-k)).collect();
    let scan = probe.interface_blowup_scan(c.k, &scan_radii)?;

    let mut checks = vec![check(
        "annulus fit",
        annulus_fit.r2 >= c.min_r2 && annulus_fit.slope > 0.0,
        format!("R2 {:.4}, slope {:.4e} (kernel 1/(4pi) = {:.4e})", annulus_fit.r2, annulus_fit.slope, 0.25 / PI),
    )];
    checks.push(match &scan.fit {
        Some(fit) => check(
            "interface scan",
            scan.is_monotone() && fit.slope > 0.0,
            format!("monotone {}, slope {:.4e}, R2 {:.4}", scan.is_monotone(), fit.slope, fit.r2),
        ),
        None => check("interface scan", false, format!("{} radii skipped, no fit", scan.skipped.len())),
    });
    Ok(Outcome {
        results: json!({
            "annulus_fit": fit_json(&annulus_fit),
            "scan": {
                "interface_point": scan.interface_point,
                "normal": scan.normal,
                "jump": scan.jump,
                "fit": scan.fit.as_ref().map(fit_json),
                "monotone": scan.is_monotone(),
                "skipped": scan.skipped,
            },
        }),
        files: vec![("annulus.csv".into(), annulus), ("scan.csv".into(), scan.to_csv())],
        meshes: vec![MeshStats::of("annulus", r.h, &mesh), MeshStats::of("scan", r.h, &probe.mesh)],
        checks,
    })
}

fn cubic(p: &Point) -> C64 {
    C64::new(p.x.powi(3) - 3.0 * p.x * p.y * p.y, 0.0)
}

fn three_spheres(r: &Resolved) -> Result<Outcome, RunError> {
    let c = &r.config.three_spheres;
    let center = Point::new(c.center[0], c.center[1]);
    let [r1, r2, r3] = c.radii;
    let (res, meshes) = match c.field {
        SpheresField::HarmonicCubic => (three_spheres_check(|p: &Point| Some(cubic(p)), center, r1, r2, r3, c.norm)?, vec![]),
        SpheresField::Dirichlet => {
            let part = partition(r)?;
            let mesh = make_mesh(&part, r.h, &refine_disks(r))?;
            let q = Potential::constant(part.n_cells(), C64::new(c.q[0], c.q[1]));
            let u = solve_dirichlet(&mesh, &q, |p| cubic(&p), None::<fn(Point) -> C64>)?;
            let res = three_spheres_check(|p: &Point| u.eval(&mesh, p), center, r1, r2, r3, c.norm)?;
            (res, vec![MeshStats::of("domain", r.h, &mesh)])
        }
    };
    let mut csv = String::from("rho,norm\n");
    for (rho, n) in res.radii.iter().zip(&res.norms) {
        writeln!(csv, "{},{}", e(*rho), e(*n)).expect("string write");
    }
    let [lo, hi] = c.q_range;
    Ok(Outcome {
        results: serde_json::to_value(res).map_err(|e| RunError::Numerical(e.to_string()))?,
        files: vec![("three_spheres.csv".into(), csv)],
        meshes,
        checks: vec![check(
            "constant",
            (lo..=hi).contains(&res.q_alpha),
            format!("Q {:.6} with exponent {:.4}, range [{lo}, {hi}]", res.q_alpha, res.alpha),
        )],
    })
}

fn sup_error(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn reconstruction(r: &Resolved) -> Result<Outcome, RunError> {
    let c = &r.config.reconstruct;
    let noise = &r.config.noise;
    let part = partition(r)?;
    let model = ForwardModel::from_mesh(&part, make_mesh(&part, r.h, &refine_disks(r))?.domain_submesh())?;
    let truth = complex(&c.truth);
    let initial = if c.initial.is_empty() { vec![C64::new(1.0, 0.0); truth.len()] } else { complex(&c.initial) };
    let clean = model.forward_values(&truth)?.matrix.clone();
    let solve = |data| {
        let mut prob = ReconstructionProblem::new(data, initial.clone());
        prob.real_only = c.real_only;
        prob.max_iterations = c.max_iterations;
        prob.damping = c.damping;
        prob.truth = Some(truth.clone());
        reconstruct(&model, &prob, c.method)
    };
    let base = solve(clean.clone())?;
    let floor = sup_error(&base.estimate, &truth);
    let mut files = vec![("trace.csv".to_string(), base.trace_csv())];
    let mut checks = vec![check(
        "noiseless",
        floor <= c.tolerance && base.converged,
        format!("error {floor:.3e} after {} iterations, tolerance {:.1e}", base.iterations, c.tolerance),
    )];
    let mut summary = Vec::new();
    if !noise.levels.is_empty() {
        let mut csv = String::from("delta,trial,seed,iterations,converged,misfit,error\n");
        for (li, &delta) in noise.levels.iter().enumerate() {
            let mut within = 0;
            for trial in 0..noise.trials {
                let seed = split_seed(r.seed, (li * noise.trials + trial) as u64);
                let data = &clean + operator_noise(&model, delta, noise.real, seed)?;
                let rec = solve(data)?;
                let err = sup_error(&rec.estimate, &truth);
                let misfit = rec.trace.last().map_or(f64::NAN, |t| t.misfit);
                writeln!(csv, "{},{trial},{seed},{},{},{},{}", e(delta), rec.iterations, rec.converged, e(misfit), e(err))
                    .expect("string write");
                if let Some(b) = noise.bound_constant {
                    within += usize::from(err <= b * delta + floor);
                }
            }
            if let Some(b) = noise.bound_constant {
                let fraction = within as f64 / noise.trials as f64;
                checks.push(check(
                    &format!("noise {delta:e}"),
                    fraction >= noise.min_fraction,
                    format!("{within}/{} trials within {b} delta + {floor:.1e}", noise.trials),
                ));
                summary.push(json!({ "delta": delta, "within": within, "trials": noise.trials }));
            }
        }
        files.push(("noise.csv".into(), csv));
    }
    Ok(Outcome {
        results: json!({
            "estimate": base.estimate.iter().map(|v| [v.re, v.im]).collect::<Vec<_>>(),
            "iterations": base.iterations,
            "converged": base.converged,
            "noiseless_error": floor,
            "noise": summary,
            "trace_nodes": model.basis.len(),
        }),
        files,
        meshes: vec![MeshStats::of("domain", r.h, &model.mesh)],
        checks,
    })
}

fn stability_sweep(r: &Resolved) -> Result<Outcome, RunError> {
    let c = &r.config.stability_sweep;
    let part = partition(r)?;
    let model = ForwardModel::from_mesh(&part, make_mesh(&part, r.h, &refine_disks(r))?.domain_submesh())?;
    let seed = split_seed(r.seed, 0);
    let (sampling, seed_col) = match c.sampling {
        SamplingKind::Exhaustive => (Sampling::ExhaustiveLattice, None),
        SamplingKind::Random => (Sampling::Random { pairs: c.pairs, seed }, Some(seed)),
        SamplingKind::SingleCell => (Sampling::SingleCell { backgrounds: c.backgrounds, seed }, Some(seed)),
    };
    let est = estimate_lipschitz_constant(&model, sampling, c.budget)?;
    let mut csv = format!("{}\n", StabilityRecord::csv_header());
    for rec in &est.records {
        csv.push_str(&rec.csv_row(r.h, seed_col));
        csv.push('\n');
    }
    Ok(Outcome {
        results: json!({
            "n": est.n,
            "sampling": est.sampling,
            "c_est": est.c_est,
            "half_over_min_norm": est.half_over_min_norm,
            "min_norm": est.min_norm,
            "min_distance": est.min_distance,
            "pairs": est.pairs,
            "argmax": est.argmax,
            "partial": est.partial,
        }),
        files: vec![("records.csv".into(), csv)],
        meshes: vec![MeshStats::of("domain", r.h, &model.mesh)],
        checks: Vec::new(),
    })
}

fn bounds_calc(r: &Resolved) -> Result<Outcome, RunError> {
    let c = &r.config.bounds_calc;
    let rondi = rondi_lower_bound(c.n_cells, c.dim, c.k)?;
    let mode = RecursionMode::new(c.dim)?;
    let mut csv = String::from("M,argument,inverse_log,factor\n");
    let mut rows = Vec::new();
    for m in 1..=c.recursion_depth {
        let b = recursion_bound(m, c.recursion_c, mode)?;
        writeln!(csv, "{m},{},{},{}", e(b.argument), b.inverse_log, b.factor).expect("string write");
        rows.push(json!({ "m": m, "argument": b.argument, "inverse_log": b.inverse_log.to_string(), "factor": b.factor.to_string() }));
    }
    Ok(Outcome {
        results: json!({
            "rondi_lower_bound": rondi,
            "k_is_illustrative": true,
            "recursion_mode": mode,
            "recursion": rows,
        }),
        files: vec![("recursion.csv".into(), csv)],
        meshes: Vec::new(),
        checks: Vec::new(),
    })
}
