//! P1 finite elements for `(−Δ + q)u = f` with Dirichlet data.

pub mod assembly;
pub mod mesh;
pub mod solver;

pub use assembly::{local_mass, local_stiffness, Pattern, SystemMatrices};
pub use mesh::{make_mesh, Mesh, NodeTag, RefineDisk};
pub use solver::{eigenvalue_guard, load_vector, solve_dirichlet, DirichletSolver, GuardReport, GUARD_THRESHOLD};

use crate::geometry::Point;
use crate::quadrature::{integrate, RULE7};
use crate::C64;

/// Complex nodal values of a P1 function.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub values: Vec<C64>,
}

impl Field {
    pub fn new(values: Vec<C64>) -> Self {
        Field { values }
    }

    pub fn eval(&self, mesh: &Mesh, p: &Point) -> Option<C64> {
        let (t, l) = mesh.locate(p)?;
        let tri = mesh.triangles[t];
        Some((0..3).map(|a| self.values[tri[a]] * l[a]).sum())
    }

    /// Exact `L²` norm of the interpolant.
    pub fn l2_norm(&self, mesh: &Mesh) -> f64 {
        let mut s = 0.0;
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let m = local_mass(&mesh.triangle(ti));
            for a in 0..3 {
                for b in 0..3 {
                    s += m[a][b] * (self.values[t[a]] * self.values[t[b]].conj()).re;
                }
            }
        }
        s.max(0.0).sqrt()
    }

    /// `‖u_h − u‖_{L²}` with the seven-point rule.
    pub fn l2_error<F: Fn(Point) -> C64>(&self, mesh: &Mesh, exact: F) -> f64 {
        let mut s = 0.0;
        for (ti, t) in mesh.triangles.iter().enumerate() {
            s += integrate(&mesh.triangle(ti), &RULE7, |p, l| {
                let uh: C64 = (0..3).map(|a| self.values[t[a]] * l[a]).sum();
                (uh - exact(p)).norm_sqr()
            });
        }
        s.sqrt()
    }

    /// Plain-text node table `x y re im`.
    pub fn to_table(&self, mesh: &Mesh) -> String {
        let mut s = String::from("x,y,re,im\n");
        for (p, v) in mesh.nodes.iter().zip(&self.values) {
            s.push_str(&format!("{:?},{:?},{:?},{:?}\n", p.x, p.y, v.re, v.im));
        }
        s
    }
}
