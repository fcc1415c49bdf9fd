//! P1 stiffness and per-region mass matrices on a shared sparsity pattern.

use std::collections::BTreeMap;

use crate::fem::mesh::Mesh;
use crate::geometry::{Potential, Region};
use crate::quadrature::{triangle_area, Triangle};
use crate::C64;

/// Exact P1 stiffness `∫ ∇φ_a · ∇φ_b` on one triangle.
pub fn local_stiffness(t: &Triangle) -> [[f64; 3]; 3] {
    let area = triangle_area(t);
    // gradient of φ_a is perp(opposite edge) / (2 area)
    let e = [t[2] - t[1], t[0] - t[2], t[1] - t[0]];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = e[a].dot(&e[b]) / (4.0 * area);
        }
    }
    k
}

/// Consistent P1 mass `∫ φ_a φ_b`.
pub fn local_mass(t: &Triangle) -> [[f64; 3]; 3] {
    let a = triangle_area(t) / 12.0;
    [[2.0 * a, a, a], [a, 2.0 * a, a], [a, a, 2.0 * a]]
}

/// Compressed sparse rows with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Pattern {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Pattern {
    pub fn from_mesh(mesh: &Mesh) -> Pattern {
        let n = mesh.n_nodes();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in &mesh.triangles {
            for &a in t {
                for &b in t {
                    rows[a].push(b);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        Pattern { row_ptr, cols }
    }

    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn index(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.cols[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }

    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }
}

/// Stiffness `K` and masses `M_r = ∫_r φ_a φ_b` for every region `r`.
#[derive(Clone, Debug)]
pub struct SystemMatrices {
    pub pattern: Pattern,
    pub stiffness: Vec<f64>,
    pub mass: BTreeMap<Region, Vec<f64>>,
}

impl SystemMatrices {
    pub fn new(mesh: &Mesh) -> SystemMatrices {
        let pattern = Pattern::from_mesh(mesh);
        let mut stiffness = vec![0.0; pattern.nnz()];
        let mut mass: BTreeMap<Region, Vec<f64>> = BTreeMap::new();
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let tri = mesh.triangle(ti);
            let k = local_stiffness(&tri);
            let m = local_mass(&tri);
            let mr = mass.entry(mesh.regions[ti]).or_insert_with(|| vec![0.0; pattern.nnz()]);
            for a in 0..3 {
                for b in 0..3 {
                    let idx = pattern.index(t[a], t[b]).unwrap();
                    stiffness[idx] += k[a][b];
                    mr[idx] += m[a][b];
                }
            }
        }
        SystemMatrices { pattern, stiffness, mass }
    }

    /// Values of `K + Σ_r q(r) M_r` on the pattern.
    pub fn system_values(&self, q: &Potential) -> Vec<C64> {
        let mut v: Vec<C64> = self.stiffness.iter().map(|&k| C64::new(k, 0.0)).collect();
        for (&region, m) in &self.mass {
            let c = q.value(region);
            for (vi, &mi) in v.iter_mut().zip(m) {
                *vi += c * mi;
            }
        }
        v
    }

    /// Total mass matrix values.
    pub fn total_mass(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.pattern.nnz()];
        for m in self.mass.values() {
            for (o, &x) in out.iter_mut().zip(m) {
                *o += x;
            }
        }
        out
    }

    /// Bilinear form `uᵀ M v` with real matrix values on the pattern.
    pub fn bilinear(&self, values: &[f64], u: &[C64], v: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.pattern.n() {
            let mut row = C64::new(0.0, 0.0);
            for k in self.pattern.row(i) {
                row += v[self.pattern.cols[k]] * values[k];
            }
            acc += u[i] * row;
        }
        acc
    }

    /// `y = M x` for real matrix values on the pattern.
    pub fn matvec_real(&self, values: &[f64], x: &[C64]) -> Vec<C64> {
        (0..self.pattern.n())
            .map(|i| self.pattern.row(i).map(|k| x[self.pattern.cols[k]] * values[k]).sum())
            .collect()
    }

    /// `y = A x` for complex values `a` on the pattern.
    pub fn matvec(&self, a: &[C64], x: &[C64]) -> Vec<C64> {
        (0..self.pattern.n())
            .map(|i| self.pattern.row(i).map(|k| a[k] * x[self.pattern.cols[k]]).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let t = [Point::new(0.1, 0.0), Point::new(1.0, 0.3), Point::new(0.2, 0.9)];
        let k = local_stiffness(&t);
        for row in k {
            assert!(row.iter().sum::<f64>().abs() < 1e-14);
        }
        // reference right triangle
        let r = local_stiffness(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]);
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for a in 0..3 {
            for b in 0..3 {
                assert!((r[a][b] - expected[a][b]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn mass_sums_to_area() {
        let t = [Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.0, 1.0)];
        let s: f64 = local_mass(&t).iter().flatten().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }
}
