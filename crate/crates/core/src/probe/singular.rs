//! Singular functions `S_k(y,z) = ∫_{U_k} (q⁽¹⁾ − q⁽²⁾) G₁(·,y) G₂(·,z)`,
//! the boundary/volume identity and the interface blow-up scan.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, Vector2};
use rayon::prelude::*;
use serde::Serialize;

use crate::dtn::{assemble_dtn, TraceBasis};
use crate::fem::{make_mesh, Mesh, NodeTag, RefineDisk};
use crate::geometry::{chain_to, outward_normal, segment_distance, shared_boundary, Chain, Partition, Point, Polygon, Potential, Region};
use crate::greens::{GreensField, GreensSolver};
use crate::probe::{fit_line, LinearFit};
use crate::quadrature::{integrate_adaptive, triangle_diameter, triangle_distance, Triangle, RULE7};
use crate::{Error, Result, C64};

const MAX_DEPTH: usize = 14;

/// Cells of `W_k`; every other cell belongs to `U_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSet {
    pub k: usize,
    pub in_w: Vec<bool>,
}

impl CellSet {
    pub fn in_u(&self, region: Region) -> bool {
        match region {
            Region::Cell(j) => !self.in_w[j],
            Region::Background => true,
            Region::Extension => false,
        }
    }

    pub fn in_w(&self, region: Region) -> bool {
        matches!(region, Region::Cell(j) if self.in_w[j])
    }
}

/// `∫ diff · G₁ G₂` over the triangles of cells flagged in `in_u`.
///
/// With `uniform_depth = Some(d)` every triangle is split uniformly `d` times;
/// otherwise leaves are refined until they are no larger than their distance
/// to either source.
pub fn singular_integral(
    g1: &GreensField,
    g2: &GreensField,
    diff: &[C64],
    in_u: &[bool],
    uniform_depth: Option<usize>,
) -> Result<C64> {
    if !Arc::ptr_eq(&g1.mesh, &g2.mesh) {
        return Err(Error::InvalidInput("singular fields must share one mesh".into()));
    }
    if diff.len() != in_u.len() {
        return Err(Error::InvalidInput("difference and mask lengths differ".into()));
    }
    let mesh = &g1.mesh;
    let (y, z) = (g1.y, g2.y);
    let parts: Vec<C64> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|ti| {
            let Region::Cell(j) = mesh.regions[ti] else { return C64::new(0.0, 0.0) };
            if j >= diff.len() || !in_u[j] || diff[j] == C64::new(0.0, 0.0) {
                return C64::new(0.0, 0.0);
            }
            let tri = mesh.triangle(ti);
            let split = |t: &Triangle, depth: usize| match uniform_depth {
                Some(d) => depth < d,
                None => {
                    let d = triangle_diameter(t);
                    d > triangle_distance(t, &y) || d > triangle_distance(t, &z)
                }
            };
            let max_depth = uniform_depth.unwrap_or(MAX_DEPTH);
            let sum: C64 = integrate_adaptive(&tri, &RULE7, max_depth, &split, &|_: &Triangle| false, &mut |p: Point| {
                g1.eval_in(ti, &p) * g2.eval_in(ti, &p)
            });
            diff[j] * sum
        })
        .collect();
    Ok(parts.iter().sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlessandriniGap {
    pub volume_side: C64,
    pub boundary_side: C64,
    pub relative_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub r: f64,
    pub s: C64,
    pub s_abs: f64,
    /// `|S| − (a + b|ln r|)` for the companion fit.
    pub fit_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlowupScan {
    pub k: usize,
    pub interface_point: [f64; 2],
    pub normal: [f64; 2],
    pub rows: Vec<ScanRow>,
    /// Fit of `|S|` against `|ln r|`.
    pub fit: Option<LinearFit>,
    /// `|q⁽¹⁾ − q⁽²⁾|` on the cell entered at the interface.
    pub jump: f64,
    pub skipped: Vec<(f64, String)>,
}

impl BlowupScan {
    /// Magnitudes strictly increase as `r` decreases.
    pub fn is_monotone(&self) -> bool {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| b.r.total_cmp(&a.r));
        rows.windows(2).all(|w| w[1].s_abs > w[0].s_abs)
    }

    /// CSV with columns `r, abs_s, fit_residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,abs_s,fit_residual\n");
        for row in &self.rows {
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", row.r, row.s_abs, row.fit_residual));
        }
        out
    }
}

/// Green fields of two potentials on one mesh of `Ω₀`, with the chain
/// `D₀, D_{j₁}, …` that defines `W_k` and `U_k`.
pub struct SingularProbe {
    pub partition: Partition,
    pub mesh: Arc<Mesh>,
    pub q1: Potential,
    pub q2: Potential,
    pub chain: Chain,
    solver1: GreensSolver,
    solver2: GreensSolver,
    dtn: OnceLock<(Mesh, TraceBasis, DMatrix<C64>)>,
}

impl SingularProbe {
    pub fn new(
        partition: &Partition,
        q1: &Potential,
        q2: &Potential,
        h: f64,
        target: usize,
        refine: &[RefineDisk],
    ) -> Result<Self> {
        if q1.len() != partition.n_cells() || q2.len() != partition.n_cells() {
            return Err(Error::InvalidInput("potential length differs from the number of cells".into()));
        }
        let chain = chain_to(partition, target)?;
        let mesh = Arc::new(make_mesh(partition, h, refine)?);
        Self::with_mesh(partition, q1, q2, chain, mesh)
    }

    pub fn with_mesh(partition: &Partition, q1: &Potential, q2: &Potential, chain: Chain, mesh: Arc<Mesh>) -> Result<Self> {
        let solver1 = GreensSolver::new(Arc::clone(&mesh), q1)?;
        let solver2 = GreensSolver::new(Arc::clone(&mesh), q2)?;
        Ok(SingularProbe {
            partition: partition.clone(),
            mesh,
            q1: q1.clone(),
            q2: q2.clone(),
            chain,
            solver1,
            solver2,
            dtn: OnceLock::new(),
        })
    }

    /// Cell-wise `q⁽¹⁾ − q⁽²⁾`.
    pub fn difference(&self) -> Vec<C64> {
        self.q1.values.iter().zip(&self.q2.values).map(|(a, b)| a - b).collect()
    }

    /// `W_k` = first `k` chain cells.
    pub fn cell_set(&self, k: usize) -> Result<CellSet> {
        if k > self.chain.len() {
            return Err(Error::InvalidInput(format!("k = {k} exceeds the chain length {}", self.chain.len())));
        }
        let mut in_w = vec![false; self.partition.n_cells()];
        for &c in &self.chain.indices[..k] {
            in_w[c] = true;
        }
        Ok(CellSet { k, in_w })
    }

    /// Minimum source distance from `∂Ω₀`.
    pub fn min_distance(&self) -> f64 {
        self.partition.params.r1()
    }

    fn region_polygon(&self, region: Region) -> Option<&Polygon> {
        match region {
            Region::Cell(j) => self.partition.cells.get(j),
            Region::Extension => self.partition.extension.as_ref(),
            Region::Background => None,
        }
    }

    /// Distance from `p` to `U_k`; zero when `p` lies in `U_k`.
    fn distance_to_u(&self, set: &CellSet, p: &Point) -> f64 {
        let mut d = f64::INFINITY;
        for (j, cell) in self.partition.cells.iter().enumerate() {
            if !set.in_w[j] {
                d = d.min(if cell.contains(p) { 0.0 } else { cell.distance_to_boundary(p) });
            }
        }
        if let Some(bg) = &self.partition.background {
            let inside = bg.outer.contains(p) && !bg.inner.contains_strictly(p, 0.0);
            d = d.min(if inside { 0.0 } else { bg.inner.distance_to_boundary(p) });
        }
        d
    }

    fn check_source(&self, set: &CellSet, p: &Point) -> Result<()> {
        let d = self.distance_to_u(set, p);
        if d <= 1e-12 {
            return Err(Error::Precondition(format!(
                "source ({}, {}) is not at positive distance from U_{}",
                p.x, p.y, set.k
            )));
        }
        Ok(())
    }

    pub fn fields(&self, y: Point, z: Point) -> Result<(GreensField, GreensField)> {
        let md = self.min_distance();
        Ok((self.solver1.field(y, md)?, self.solver2.field(z, md)?))
    }

    /// `S_k(y, z)`.
    pub fn singular_function(&self, k: usize, y: Point, z: Point) -> Result<C64> {
        self.singular_function_with(k, y, z, None)
    }

    pub fn singular_function_with(&self, k: usize, y: Point, z: Point, uniform_depth: Option<usize>) -> Result<C64> {
        let set = self.cell_set(k)?;
        self.check_source(&set, &y)?;
        self.check_source(&set, &z)?;
        let (g1, g2) = self.fields(y, z)?;
        let in_u: Vec<bool> = set.in_w.iter().map(|w| !w).collect();
        singular_integral(&g1, &g2, &self.difference(), &in_u, uniform_depth)
    }

    /// Whether `y` lies in the corridor `K₀`: inside `D₀` at distance at
    /// least `r₀/3` from `Σ`.
    pub fn in_k0(&self, y: &Point) -> bool {
        let Some(ext) = &self.partition.extension else { return false };
        let ds = self
            .partition
            .sigma
            .iter()
            .map(|s| segment_distance(y, &s[0], &s[1]))
            .fold(f64::INFINITY, f64::min);
        ext.contains_strictly(y, 0.0) && ds >= self.partition.params.r0 / 3.0 - 1e-12
    }

    fn domain_dtn(&self) -> Result<&(Mesh, TraceBasis, DMatrix<C64>)> {
        if let Some(v) = self.dtn.get() {
            return Ok(v);
        }
        let omega = self.mesh.domain_submesh();
        let basis = TraceBasis::new(&omega)?;
        let a1 = assemble_dtn(&omega, &self.q1, &basis)?;
        let a2 = assemble_dtn(&omega, &self.q2, &basis)?;
        let delta = a1.difference(&a2);
        Ok(self.dtn.get_or_init(|| (omega, basis, delta)))
    }

    /// Volume side `∫_Ω (q⁽¹⁾−q⁽²⁾) G₁(·,y) G₂(·,z)` against the boundary side
    /// `⟨(Λ₁−Λ₂) G₁(·,y), Ḡ₂(·,z)⟩` computed from the discrete DtN difference.
    pub fn alessandrini_gap(&self, y: Point, z: Point) -> Result<AlessandriniGap> {
        if self.partition.extension.is_none() {
            return Err(Error::Precondition("the partition has no extension cell".into()));
        }
        for p in [&y, &z] {
            if !self.in_k0(p) {
                return Err(Error::Precondition(format!("source ({}, {}) is not in K₀", p.x, p.y)));
            }
        }
        let (g1, g2) = self.fields(y, z)?;
        let n = self.partition.n_cells();
        let volume = singular_integral(&g1, &g2, &self.difference(), &vec![true; n], None)?;

        let (omega, basis, delta) = self.domain_dtn()?;
        let trace = |g: &GreensField, p: &Point| g.eval(p).ok_or_else(|| Error::Mesh("trace point outside the mesh".into()));
        let t1: Vec<C64> = basis.positions.iter().map(|p| trace(&g1, p)).collect::<Result<_>>()?;
        let t2: Vec<C64> = basis.positions.iter().map(|p| trace(&g2, p)).collect::<Result<_>>()?;

        // traces must vanish on the rest of ∂Ω
        let scale = t1.iter().chain(&t2).map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
        for (i, p) in omega.nodes.iter().enumerate() {
            if omega.tags[i] == NodeTag::Boundary {
                for g in [&g1, &g2] {
                    let v = trace(g, p)?.norm();
                    if v > 1e-8 * scale {
                        return Err(Error::Precondition(format!(
                            "trace {v:.3e} at ({}, {}) outside Σ: not in H^1/2_co",
                            p.x, p.y
                        )));
                    }
                }
            }
        }

        let mut boundary = C64::new(0.0, 0.0);
        for i in 0..t2.len() {
            let row: C64 = (0..t1.len()).map(|j| delta[(i, j)] * t1[j]).sum();
            boundary += t2[i] * row;
        }
        let denom = volume.norm().max(boundary.norm());
        let relative_gap = if denom == 0.0 { 0.0 } else { (volume - boundary).norm() / denom };
        Ok(AlessandriniGap { volume_side: volume, boundary_side: boundary, relative_gap })
    }

    /// Region at chain position `k`: `D₀` at 0, then the chain cells.
    fn chain_region(&self, k: usize) -> Result<Region> {
        if k == 0 {
            if self.partition.extension.is_none() {
                return Err(Error::Precondition("the partition has no extension cell".into()));
            }
            return Ok(Region::Extension);
        }
        self.chain
            .indices
            .get(k - 1)
            .map(|&c| Region::Cell(c))
            .ok_or_else(|| Error::InvalidInput(format!("k = {k} exceeds the chain length {}", self.chain.len())))
    }

    /// `P_k` between chain positions `k−1` and `k`, and the exterior normal of
    /// the former there.
    pub fn interface_frame(&self, k: usize) -> Result<(Point, Vector2<f64>)> {
        interface_frame(&self.partition, &self.chain, k)
    }

    /// `|S_{k−1}(y_r, y_r)|` for `y_r = P_k − rν(P_k)`.
    pub fn interface_blowup_scan(&self, k: usize, radii: &[f64]) -> Result<BlowupScan> {
        if k == 0 {
            return Err(Error::InvalidInput("interface index k starts at 1".into()));
        }
        let (p, nu) = self.interface_frame(k)?;
        let behind = self.chain_region(k - 1)?;
        let ahead = self.chain_region(k)?;
        let poly = self.region_polygon(behind).expect("chain regions have polygons").clone();
        let set = self.cell_set(k - 1)?;
        let r1 = self.partition.params.r1();
        let md = self.min_distance();

        let mut skipped = Vec::new();
        let mut accepted = Vec::new();
        for &r in radii {
            let y = p - nu * r;
            let reason = if !(r > 0.0 && r < 2.0 * r1) {
                Some(format!("radius outside (0, 2r₁) = (0, {})", 2.0 * r1))
            } else if !poly.contains_strictly(&y, 0.0) {
                Some("source leaves W_{k−1}".to_string())
            } else if self.mesh.boundary_distance(&y) < md {
                Some("source too close to ∂Ω₀".to_string())
            } else if self.distance_to_u(&set, &y) <= 1e-12 {
                Some("source touches U_{k−1}".to_string())
            } else {
                None
            };
            match reason {
                Some(msg) => skipped.push((r, msg)),
                None => accepted.push((r, y)),
            }
        }

        let ys: Vec<Point> = accepted.iter().map(|(_, y)| *y).collect();
        let f1 = self.solver1.fields(&ys, md)?;
        let f2 = self.solver2.fields(&ys, md)?;
        let diff = self.difference();
        let in_u: Vec<bool> = set.in_w.iter().map(|w| !w).collect();
        let mut rows = Vec::with_capacity(ys.len());
        for ((r, _), (g1, g2)) in accepted.iter().zip(f1.iter().zip(&f2)) {
            let s = singular_integral(g1, g2, &diff, &in_u, None)?;
            rows.push(ScanRow { r: *r, s, s_abs: s.norm(), fit_residual: 0.0 });
        }
        let xs: Vec<f64> = rows.iter().map(|row| row.r.ln().abs()).collect();
        let vs: Vec<f64> = rows.iter().map(|row| row.s_abs).collect();
        let fit = fit_line(&xs, &vs);
        if let Some(f) = fit {
            for (row, x) in rows.iter_mut().zip(&xs) {
                row.fit_residual = row.s_abs - f.predict(*x);
            }
        }
        let jump = match ahead {
            Region::Cell(c) => diff[c].norm(),
            _ => 0.0,
        };
        Ok(BlowupScan {
            k,
            interface_point: [p.x, p.y],
            normal: [nu.x, nu.y],
            rows,
            fit,
            jump,
            skipped,
        })
    }
}

/// `P_k` and the exterior unit normal of the region at chain position `k−1`
/// (position 0 is `D₀`) on its common boundary with position `k`.
pub fn interface_frame(partition: &Partition, chain: &Chain, k: usize) -> Result<(Point, Vector2<f64>)> {
    let region = |i: usize| -> Result<&Polygon> {
        if i == 0 {
            partition
                .extension
                .as_ref()
                .ok_or_else(|| Error::Precondition("the partition has no extension cell".into()))
        } else {
            chain
                .indices
                .get(i - 1)
                .map(|&c| &partition.cells[c])
                .ok_or_else(|| Error::InvalidInput(format!("k = {k} exceeds the chain length {}", chain.len())))
        }
    };
    if k == 0 {
        return Err(Error::InvalidInput("interface index k starts at 1".into()));
    }
    let (a, b) = (region(k - 1)?, region(k)?);
    let (_, p) = shared_boundary(a, b)
        .ok_or_else(|| Error::Geometry(format!("chain positions {} and {k} share no boundary segment", k - 1)))?;
    let nu = outward_normal(a, &p).ok_or_else(|| Error::Geometry("interface point is not on the cell boundary".into()))?;
    Ok((p, nu))
}

/// Refinement disks of radius `radius` around every interface point of the
/// chain, including the one on `Σ` when it exists.
pub fn interface_refinement(partition: &Partition, chain: &Chain, radius: f64) -> Vec<RefineDisk> {
    (1..=chain.len())
        .filter_map(|k| interface_frame(partition, chain, k).ok())
        .map(|(p, _)| RefineDisk::new(p, radius))
        .collect()
}
