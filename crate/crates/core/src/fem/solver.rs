//! Dirichlet problems for `(−Δ + q)u = f` by elimination and sparse LU.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};

use crate::fem::assembly::SystemMatrices;
use crate::fem::mesh::Mesh;
use crate::fem::Field;
use crate::geometry::{Point, Potential};
use crate::quadrature::{integrate, RULE3};
use crate::{Error, Result, C64};

pub const GUARD_THRESHOLD: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-10;
const POWER_ITERS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GuardReport {
    pub pass: bool,
    /// `σ_min / ‖A‖` of the interior block.
    pub margin: f64,
    pub threshold: f64,
    pub sigma_min: f64,
    pub norm: f64,
}

impl GuardReport {
    pub fn into_result(self) -> Result<Self> {
        if self.pass {
            Ok(self)
        } else {
            Err(Error::EigenvalueGuard { margin: self.margin, threshold: self.threshold })
        }
    }
}

/// Factorized interior block of `K + Σ q_r M_r` for one mesh and potential.
pub struct DirichletSolver {
    pub matrices: Arc<SystemMatrices>,
    pub values: Vec<C64>,
    free: Vec<usize>,
    /// Position of each node in `free`, or `usize::MAX` for boundary nodes.
    slot: Vec<usize>,
    lu: Option<Lu<usize, C64>>,
    inf_norm: f64,
}

impl DirichletSolver {
    pub fn new(mesh: &Mesh, q: &Potential) -> Result<Self> {
        Self::with_matrices(mesh, Arc::new(SystemMatrices::new(mesh)), q)
    }

    pub fn with_matrices(mesh: &Mesh, matrices: Arc<SystemMatrices>, q: &Potential) -> Result<Self> {
        if matrices.pattern.n() != mesh.n_nodes() {
            return Err(Error::InvalidInput("system matrices belong to a different mesh".into()));
        }
        for r in matrices.mass.keys() {
            if let crate::geometry::Region::Cell(j) = r {
                if *j >= q.len() {
                    return Err(Error::InvalidInput(format!(
                        "potential has {} values but the mesh has cell {j}",
                        q.len()
                    )));
                }
            }
        }
        let values = matrices.system_values(q);
        let free: Vec<usize> = (0..mesh.n_nodes()).filter(|&i| !mesh.is_boundary(i)).collect();
        if free.is_empty() {
            return Err(Error::Mesh("mesh has no interior nodes".into()));
        }
        let mut slot = vec![usize::MAX; mesh.n_nodes()];
        for (k, &i) in free.iter().enumerate() {
            slot[i] = k;
        }
        let p = &matrices.pattern;
        let mut triplets = Vec::new();
        let mut inf_norm: f64 = 0.0;
        for &i in &free {
            let mut row = 0.0;
            for k in p.row(i) {
                let j = p.cols[k];
                if slot[j] != usize::MAX {
                    triplets.push(Triplet::new(slot[i], slot[j], values[k]));
                    row += values[k].norm();
                }
            }
            inf_norm = inf_norm.max(row);
        }
        let nf = free.len();
        let a = SparseColMat::<usize, C64>::try_new_from_triplets(nf, nf, &triplets)
            .map_err(|e| Error::Solver(format!("sparse assembly failed: {e:?}")))?;
        let lu = a.sp_lu().ok();
        Ok(DirichletSolver { matrices, values, free, slot, lu, inf_norm })
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    fn lu(&self) -> Result<&Lu<usize, C64>> {
        self.lu
            .as_ref()
            .ok_or(Error::EigenvalueGuard { margin: 0.0, threshold: GUARD_THRESHOLD })
    }

    /// Interior-block product `A_II x`.
    fn apply_free(&self, x: &[C64]) -> Vec<C64> {
        let p = &self.matrices.pattern;
        self.free
            .iter()
            .map(|&i| {
                p.row(i)
                    .filter(|&k| self.slot[p.cols[k]] != usize::MAX)
                    .map(|k| self.values[k] * x[self.slot[p.cols[k]]])
                    .sum()
            })
            .collect()
    }

    fn lu_solve(&self, lu: &Lu<usize, C64>, cols: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let nf = self.free.len();
        let b = Mat::<C64>::from_fn(nf, cols.len(), |i, j| cols[j][i]);
        let x = lu.solve(&b);
        (0..cols.len()).map(|j| (0..nf).map(|i| x[(i, j)]).collect()).collect()
    }

    /// Solves `A_II x = b` for every column, with one step of iterative
    /// refinement when the relative residual exceeds the tolerance.
    pub fn solve_free(&self, rhs: &[Vec<C64>]) -> Result<Vec<Vec<C64>>> {
        let lu = self.lu()?;
        let mut xs = self.lu_solve(lu, rhs);
        for (j, b) in rhs.iter().enumerate() {
            let mut rel = self.relative_residual(&xs[j], b);
            if rel > RESIDUAL_TOL {
                let r: Vec<C64> = self.apply_free(&xs[j]).iter().zip(b).map(|(ax, bi)| bi - ax).collect();
                let dx = self.lu_solve(lu, std::slice::from_ref(&r)).pop().unwrap();
                for (x, d) in xs[j].iter_mut().zip(dx) {
                    *x += d;
                }
                rel = self.relative_residual(&xs[j], b);
            }
            if !(rel <= RESIDUAL_TOL) {
                return Err(Error::Solver(format!("relative residual {rel:.3e} exceeds {RESIDUAL_TOL:e}")));
            }
        }
        Ok(xs)
    }

    fn relative_residual(&self, x: &[C64], b: &[C64]) -> f64 {
        let ax = self.apply_free(x);
        let r = ax.iter().zip(b).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let bn = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let scale = self.inf_norm * xn + bn;
        if scale == 0.0 {
            0.0
        } else {
            r / scale
        }
    }

    /// Right-hand side `f_I − A_IB g_B` on the free nodes.
    fn reduced_rhs(&self, boundary: &[C64], load: Option<&[C64]>) -> Vec<C64> {
        let p = &self.matrices.pattern;
        self.free
            .iter()
            .map(|&i| {
                let mut v = load.map_or(C64::new(0.0, 0.0), |f| f[i]);
                for k in p.row(i) {
                    let j = p.cols[k];
                    if self.slot[j] == usize::MAX {
                        v -= self.values[k] * boundary[j];
                    }
                }
                v
            })
            .collect()
    }

    fn expand(&self, boundary: &[C64], x: &[C64]) -> Vec<C64> {
        let mut u = boundary.to_vec();
        for (k, &i) in self.free.iter().enumerate() {
            u[i] = x[k];
        }
        u
    }

    /// Full nodal solutions for Dirichlet data `boundary` (values at the free
    /// nodes are ignored) and load vectors `∫ f φ_i`.
    pub fn solve_many(&self, problems: &[(Vec<C64>, Option<Vec<C64>>)]) -> Result<Vec<Vec<C64>>> {
        let rhs: Vec<Vec<C64>> = problems.iter().map(|(g, f)| self.reduced_rhs(g, f.as_deref())).collect();
        let xs = self.solve_free(&rhs)?;
        Ok(problems.iter().zip(xs).map(|((g, _), x)| self.expand(g, &x)).collect())
    }

    pub fn solve(&self, boundary: &[C64], load: Option<&[C64]>) -> Result<Vec<C64>> {
        let rhs = self.reduced_rhs(boundary, load);
        let x = self.solve_free(std::slice::from_ref(&rhs))?.pop().unwrap();
        Ok(self.expand(boundary, &x))
    }

    /// Solutions with the nodal hat function of each listed boundary node as
    /// Dirichlet data, in the order given.
    pub fn solve_hat_data(&self, nodes: &[usize]) -> Result<Vec<Vec<C64>>> {
        const BATCH: usize = 64;
        let n = self.matrices.pattern.n();
        let p = &self.matrices.pattern;
        let mut out = Vec::with_capacity(nodes.len());
        for chunk in nodes.chunks(BATCH) {
            let rhs: Vec<Vec<C64>> = chunk
                .iter()
                .map(|&b| {
                    let mut r = vec![C64::new(0.0, 0.0); self.free.len()];
                    for k in p.row(b) {
                        let j = p.cols[k];
                        if self.slot[j] != usize::MAX {
                            // symmetric pattern: A_jb = A_bj
                            r[self.slot[j]] -= self.values[k];
                        }
                    }
                    r
                })
                .collect();
            let xs = self.solve_free(&rhs)?;
            for (&b, x) in chunk.iter().zip(xs) {
                let mut g = vec![C64::new(0.0, 0.0); n];
                g[b] = C64::new(1.0, 0.0);
                out.push(self.expand(&g, &x));
            }
        }
        Ok(out)
    }

    /// Sesquilinear-form row `Σ_k A_ik u_k` at node `i` (full system).
    pub fn form_row(&self, i: usize, u: &[C64]) -> C64 {
        let p = &self.matrices.pattern;
        p.row(i).map(|k| self.values[k] * u[p.cols[k]]).sum()
    }

    /// `Σ_{kl} conj(v_k) A_kl u_l`, the discrete `∫∇u·∇v̄ + q u v̄`.
    pub fn form(&self, u: &[C64], v: &[C64]) -> C64 {
        let au = self.matrices.matvec(&self.values, u);
        au.iter().zip(v).map(|(a, vi)| a * vi.conj()).sum()
    }

    /// Smallest singular value of the interior block relative to its norm.
    pub fn guard(&self) -> GuardReport {
        let fail = |norm: f64| GuardReport { pass: false, margin: 0.0, threshold: GUARD_THRESHOLD, sigma_min: 0.0, norm };
        let nf = self.free.len();
        let start: Vec<C64> = (0..nf).map(|i| C64::new(1.0 + 0.1 * ((i * 7919) % 13) as f64, 0.0)).collect();
        let unit = |v: Vec<C64>| -> (Vec<C64>, f64) {
            let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            (v.into_iter().map(|x| x / n).collect(), n)
        };
        // ‖A‖₂ by power iteration on AᴴA; Aᴴ = conj(A) since A is complex symmetric
        let (mut x, _) = unit(start.clone());
        let mut norm = 0.0;
        for _ in 0..POWER_ITERS {
            let ax = self.apply_free(&x);
            let conj_ax: Vec<C64> = ax.iter().map(|v| v.conj()).collect();
            let aha: Vec<C64> = self.apply_free(&conj_ax).iter().map(|v| v.conj()).collect();
            let (nx, n) = unit(aha);
            norm = n.sqrt();
            x = nx;
        }
        let Some(lu) = self.lu.as_ref() else { return fail(norm) };
        let (mut x, _) = unit(start);
        let mut inv = 0.0;
        for _ in 0..POWER_ITERS {
            // x ← A⁻¹ A⁻ᴴ x, with A⁻ᴴ y = conj(A⁻¹ conj(y))
            let cx: Vec<C64> = x.iter().map(|v| v.conj()).collect();
            let y: Vec<C64> = self.lu_solve(lu, &[cx]).pop().unwrap().into_iter().map(|v| v.conj()).collect();
            let z = self.lu_solve(lu, &[y]).pop().unwrap();
            if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return fail(norm);
            }
            let (nz, n) = unit(z);
            inv = n;
            x = nz;
        }
        if !(inv > 0.0) || !inv.is_finite() {
            return fail(norm);
        }
        let sigma_min = 1.0 / inv.sqrt();
        let margin = sigma_min / norm;
        GuardReport { pass: margin >= GUARD_THRESHOLD, margin, threshold: GUARD_THRESHOLD, sigma_min, norm }
    }
}

/// Load vector `∫ f φ_i` with the three-point rule.
pub fn load_vector<F: Fn(Point) -> C64>(mesh: &Mesh, f: F) -> Vec<C64> {
    let mut b = vec![C64::new(0.0, 0.0); mesh.n_nodes()];
    for (ti, t) in mesh.triangles.iter().enumerate() {
        for (a, &node) in t.iter().enumerate() {
            b[node] += integrate(&mesh.triangle(ti), &RULE3, |p, l| f(p) * l[a]);
        }
    }
    b
}

pub fn eigenvalue_guard(mesh: &Mesh, q: &Potential) -> Result<GuardReport> {
    Ok(DirichletSolver::new(mesh, q)?.guard())
}

/// Solves `(−Δ + q)u = f` in `Ω`, `u = g` on `∂Ω`, after the eigenvalue guard.
pub fn solve_dirichlet<G, F>(mesh: &Mesh, q: &Potential, g: G, f: Option<F>) -> Result<Field>
where
    G: Fn(Point) -> C64,
    F: Fn(Point) -> C64,
{
    let solver = DirichletSolver::new(mesh, q)?;
    solver.guard().into_result()?;
    let boundary: Vec<C64> = mesh
        .nodes
        .iter()
        .enumerate()
        .map(|(i, p)| if mesh.is_boundary(i) { g(*p) } else { C64::new(0.0, 0.0) })
        .collect();
    let load = f.map(|f| load_vector(mesh, f));
    let values = solver.solve(&boundary, load.as_deref())?;
    Ok(Field { values })
}
