//! Two-dimensional singular solutions on a mesh of `Ω₀`.
//!
//! With `Γ` the dipole kernel, `−ΔΓ = ∂_{x₂}δ_y`, and `G = Γ + ω` vanishes on
//! `∂Ω₀` when `(−Δ + q)ω = −qΓ` in `Ω₀` and `ω = −Γ` on `∂Ω₀`.

use std::ops::{AddAssign, Mul};
use std::sync::Arc;

use rayon::prelude::*;

use crate::fem::{DirichletSolver, Field, Mesh};
use crate::geometry::{Point, Potential};
use crate::greens::kernels::dipole2;
use crate::quadrature::{
    barycentric_coords, crosses_circle, integrate, integrate_adaptive, near_singularity, triangle_contains,
    triangle_diameter, triangle_distance, Triangle, RULE3, RULE7,
};
use crate::{Error, Result, C64};

const MAX_DEPTH: usize = 14;

#[derive(Clone, Copy, Default)]
struct Triple([C64; 3]);

impl AddAssign for Triple {
    fn add_assign(&mut self, o: Triple) {
        for k in 0..3 {
            self.0[k] += o.0[k];
        }
    }
}

impl Mul<f64> for Triple {
    type Output = Triple;
    fn mul(self, s: f64) -> Triple {
        Triple(self.0.map(|v| v * s))
    }
}

/// Load vector `∫ −q Γ(·,y) φ_i`, subdividing triangles close to `y`.
fn remainder_load(mesh: &Mesh, q: &Potential, y: &Point) -> Vec<C64> {
    let split = near_singularity(*y, 1.0);
    let skip = |t: &Triangle| triangle_contains(t, y, 0.0);
    let local: Vec<Triple> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|ti| {
            let tri = mesh.triangle(ti);
            let c = -q.value(mesh.regions[ti]);
            if triangle_distance(&tri, y) < 3.0 * triangle_diameter(&tri) {
                integrate_adaptive(&tri, &RULE7, MAX_DEPTH, &split, &skip, &mut |p: Point| {
                    let l = barycentric_coords(&tri, &p);
                    let g = c * dipole2(&p, y);
                    Triple([g * l[0], g * l[1], g * l[2]])
                })
            } else {
                integrate(&tri, &RULE3, |p, l| {
                    let g = c * dipole2(&p, y);
                    Triple([g * l[0], g * l[1], g * l[2]])
                })
            }
        })
        .collect();
    let mut b = vec![C64::new(0.0, 0.0); mesh.n_nodes()];
    for (t, v) in mesh.triangles.iter().zip(local) {
        for a in 0..3 {
            b[t[a]] += v.0[a];
        }
    }
    b
}

/// Factorized operator on `Ω₀` shared by all sources for one potential.
pub struct GreensSolver {
    pub mesh: Arc<Mesh>,
    pub potential: Potential,
    solver: DirichletSolver,
}

impl GreensSolver {
    pub fn new(mesh: Arc<Mesh>, q: &Potential) -> Result<Self> {
        let solver = DirichletSolver::new(&mesh, q)?;
        solver.guard().into_result()?;
        Ok(GreensSolver { mesh, potential: q.clone(), solver })
    }

    /// `G(·,y)` for a source at distance at least `min_distance` from `∂Ω₀`.
    pub fn field(&self, y: Point, min_distance: f64) -> Result<GreensField> {
        Ok(self.fields(&[y], min_distance)?.pop().unwrap())
    }

    pub fn fields(&self, ys: &[Point], min_distance: f64) -> Result<Vec<GreensField>> {
        let mesh = &self.mesh;
        let mut problems = Vec::with_capacity(ys.len());
        let mut dists = Vec::with_capacity(ys.len());
        for y in ys {
            if mesh.locate(y).is_none() {
                return Err(Error::Precondition(format!("source ({}, {}) lies outside the mesh", y.x, y.y)));
            }
            let d = mesh.boundary_distance(y);
            if d < min_distance {
                return Err(Error::Precondition(format!(
                    "source ({}, {}) is {d:.4} from the boundary, below {min_distance:.4}",
                    y.x, y.y
                )));
            }
            dists.push(d);
            let boundary: Vec<C64> = mesh
                .nodes
                .iter()
                .enumerate()
                .map(|(i, p)| if mesh.is_boundary(i) { C64::new(-dipole2(p, y), 0.0) } else { C64::new(0.0, 0.0) })
                .collect();
            problems.push((boundary, Some(remainder_load(mesh, &self.potential, y))));
        }
        let sols = self.solver.solve_many(&problems)?;
        Ok(ys
            .iter()
            .zip(sols)
            .zip(dists)
            .map(|((y, values), d)| GreensField {
                y: *y,
                omega: Field::new(values),
                mesh: Arc::clone(&self.mesh),
                boundary_distance: d,
            })
            .collect())
    }
}

pub fn greens_field(mesh: Arc<Mesh>, q: &Potential, y: Point, min_distance: f64) -> Result<GreensField> {
    GreensSolver::new(mesh, q)?.field(y, min_distance)
}

#[derive(Clone, Debug)]
pub struct GreensField {
    pub y: Point,
    /// Remainder `ω`, nodal values on `mesh`.
    pub omega: Field,
    pub mesh: Arc<Mesh>,
    pub boundary_distance: f64,
}

impl GreensField {
    pub fn gamma(&self, x: &Point) -> f64 {
        dipole2(x, &self.y)
    }

    /// `G(x, y)`; `None` outside the mesh or at `x = y`.
    pub fn eval(&self, x: &Point) -> Option<C64> {
        if *x == self.y {
            return None;
        }
        Some(self.gamma(x) + self.omega.eval(&self.mesh, x)?)
    }

    /// `G` at `p` inside triangle `t`.
    pub fn eval_in(&self, t: usize, p: &Point) -> C64 {
        let tri = self.mesh.triangles[t];
        let l = barycentric_coords(&self.mesh.triangle(t), p);
        let w: C64 = (0..3).map(|a| self.omega.values[tri[a]] * l[a]).sum();
        self.gamma(p) + w
    }

    /// Node table `x, y, re(ω), im(ω)`.
    pub fn to_table(&self) -> String {
        self.omega.to_table(&self.mesh)
    }
}

/// `‖G(·,y)‖_{L²(Ω₀∖B_r(y))}`.
pub fn annulus_l2_norm(field: &GreensField, r: f64) -> Result<f64> {
    annulus_l2_norm_between(field, r, f64::INFINITY)
}

/// `L²` norm of `G(·,y)` over `{r < |x−y| < big_r} ∩ Ω₀`.
pub fn annulus_l2_norm_between(field: &GreensField, r: f64, big_r: f64) -> Result<f64> {
    if !(r > 0.0) || r > 0.5 * field.boundary_distance {
        return Err(Error::Precondition(format!(
            "annulus radius {r} must lie in (0, {}]",
            0.5 * field.boundary_distance
        )));
    }
    if big_r <= r {
        return Ok(0.0);
    }
    let y = field.y;
    let mesh = &field.mesh;
    let fine = r / 128.0;
    let inside = |t: &Triangle| t.iter().all(|v| (v - y).norm() <= r);
    let outside = |t: &Triangle| triangle_distance(t, &y) >= big_r;
    let split = |t: &Triangle, _: usize| {
        if inside(t) || outside(t) {
            return false;
        }
        let d = triangle_diameter(t);
        let crossing = crosses_circle(t, &y, r) || (big_r.is_finite() && crosses_circle(t, &y, big_r));
        (crossing && d > fine) || d > triangle_distance(t, &y)
    };
    let skip = |t: &Triangle| {
        let c = crate::quadrature::barycentric_point(t, &[1.0 / 3.0; 3]);
        let rho = (c - y).norm();
        rho <= r || rho >= big_r
    };
    let parts: Vec<f64> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|ti| {
            let tri = mesh.triangle(ti);
            integrate_adaptive(&tri, &RULE7, MAX_DEPTH, &split, &skip, &mut |p: Point| {
                field.eval_in(ti, &p).norm_sqr()
            })
        })
        .collect();
    Ok(parts.iter().sum::<f64>().sqrt())
}
