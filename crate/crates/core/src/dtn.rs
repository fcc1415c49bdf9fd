//! Local Dirichlet-to-Neumann matrices on `Σ` and their trace-space norm.
//!
//! For boundary hat functions `φ_i` at the nodes interior to `Σ`,
//! `A[i][j] = ⟨Λ φ_j, φ_i⟩ = ∫ ∇u_j·∇v̄ + q u_j v̄` where `u_j` is the discrete
//! solution with data `φ_j` and `v` is any lift of `φ_i`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::fem::{DirichletSolver, Mesh, NodeTag, SystemMatrices};
use crate::geometry::{Point, Potential};
use crate::{Error, Result, C64};

/// Nodal hat functions on `Σ` with the boundary Laplace–Beltrami eigenpairs.
#[derive(Clone, Debug)]
pub struct TraceBasis {
    /// Mesh nodes carrying a basis function, ordered along `Σ`.
    pub nodes: Vec<usize>,
    pub positions: Vec<Point>,
    /// `Σ` is a closed curve (periodic) rather than an arc with fixed ends.
    pub closed: bool,
    /// Eigenvalues `λ_i ≥ 0`, ascending.
    pub eigenvalues: Vec<f64>,
    /// Columns `ψ_i` in nodal values, orthonormal in the boundary mass.
    pub eigenvectors: DMatrix<f64>,
    /// Boundary mass matrix `∫_Σ φ_i φ_j`.
    pub mass: DMatrix<f64>,
}

impl TraceBasis {
    pub fn new(mesh: &Mesh) -> Result<TraceBasis> {
        let edges = mesh.sigma_edges();
        if edges.is_empty() {
            return Err(Error::Mesh("mesh has no edges on Σ".into()));
        }
        let mut nbrs: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for &(a, b) in &edges {
            nbrs.entry(a).or_default().push(b);
            nbrs.entry(b).or_default().push(a);
        }
        if nbrs.values().any(|v| v.len() > 2) {
            return Err(Error::Mesh("Σ edges do not form a simple curve".into()));
        }
        let ends: Vec<usize> = nbrs.iter().filter(|(_, v)| v.len() == 1).map(|(&k, _)| k).collect();
        let closed = ends.is_empty();
        if !closed && ends.len() != 2 {
            return Err(Error::Mesh(format!("Σ must be one connected curve, found {} ends", ends.len())));
        }
        let start = if closed { *nbrs.keys().next().unwrap() } else { ends[0] };
        let mut walk = vec![start];
        let mut prev = usize::MAX;
        let mut cur = start;
        loop {
            let next = nbrs[&cur].iter().copied().filter(|&n| n != prev).min();
            match next {
                Some(n) if n != start => {
                    walk.push(n);
                    prev = cur;
                    cur = n;
                }
                _ => break,
            }
        }
        if walk.len() != nbrs.len() {
            return Err(Error::Mesh("Σ must be one connected curve".into()));
        }
        // edge lengths along the walk; a closed walk wraps around
        let n_walk = walk.len();
        let n_edges = if closed { n_walk } else { n_walk - 1 };
        let len: Vec<f64> =
            (0..n_edges).map(|e| (mesh.nodes[walk[(e + 1) % n_walk]] - mesh.nodes[walk[e]]).norm()).collect();
        let nodes: Vec<usize> = if closed { walk.clone() } else { walk[1..n_walk - 1].to_vec() };
        if nodes.is_empty() {
            return Err(Error::Mesh("Σ has no interior nodes".into()));
        }
        if nodes.iter().any(|&i| mesh.tags[i] != NodeTag::Sigma) {
            return Err(Error::Mesh("basis node not tagged as interior to Σ".into()));
        }
        let m = nodes.len();
        // walk index → basis index
        let idx = |w: usize| -> Option<usize> {
            if closed {
                Some(w % n_walk)
            } else if w == 0 || w == n_walk - 1 {
                None
            } else {
                Some(w - 1)
            }
        };
        let mut k1 = DMatrix::<f64>::zeros(m, m);
        let mut m1 = DMatrix::<f64>::zeros(m, m);
        for (e, &l) in len.iter().enumerate() {
            let ends = [idx(e), idx(e + 1)];
            let kl = [[1.0 / l, -1.0 / l], [-1.0 / l, 1.0 / l]];
            let ml = [[l / 3.0, l / 6.0], [l / 6.0, l / 3.0]];
            for a in 0..2 {
                for b in 0..2 {
                    if let (Some(i), Some(j)) = (ends[a], ends[b]) {
                        k1[(i, j)] += kl[a][b];
                        m1[(i, j)] += ml[a][b];
                    }
                }
            }
        }
        let chol = m1
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solver("boundary mass matrix is not positive definite".into()))?;
        let l = chol.l();
        let linv = l.clone().try_inverse().ok_or_else(|| Error::Solver("singular boundary mass".into()))?;
        let c = &linv * &k1 * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = c.symmetric_eigen();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
        let y = DMatrix::from_fn(m, m, |i, j| eig.eigenvectors[(i, order[j])]);
        let eigenvectors = linv.transpose() * y;
        let positions = nodes.iter().map(|&i| mesh.nodes[i]).collect();
        Ok(TraceBasis { nodes, positions, closed, eigenvalues, eigenvectors, mass: m1 })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `(1+λ_i)^{1/4}`.
    pub fn weights(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| (1.0 + l).powf(0.25)).collect()
    }

    /// Spectral `H^{1/2}` norm of a nodal trace.
    pub fn h_half_norm(&self, g: &[C64]) -> f64 {
        let coeff = self.coefficients(g);
        coeff.iter().zip(self.weights()).map(|(c, w)| w * w * c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Coefficients `ĝ = Ψᵀ M g`.
    pub fn coefficients(&self, g: &[C64]) -> Vec<C64> {
        let gv = DVector::from_iterator(g.len(), g.iter().copied());
        let mg = self.mass.map(|x| C64::new(x, 0.0)) * gv;
        let psi = self.eigenvectors.map(|x| C64::new(x, 0.0));
        (psi.transpose() * mg).iter().copied().collect()
    }
}

#[derive(Clone, Debug)]
pub struct DtnOperator {
    pub matrix: DMatrix<C64>,
    /// Hash of the potential values the matrix was assembled for.
    pub fingerprint: u64,
    pub basis_nodes: Vec<usize>,
}

pub fn potential_fingerprint(q: &Potential) -> u64 {
    let mut h = DefaultHasher::new();
    for v in q.values.iter().chain(std::iter::once(&q.fill)) {
        v.re.to_bits().hash(&mut h);
        v.im.to_bits().hash(&mut h);
    }
    h.finish()
}

impl DtnOperator {
    pub fn difference(&self, other: &DtnOperator) -> DMatrix<C64> {
        &self.matrix - &other.matrix
    }

    /// Export with the basis node coordinates.
    pub fn to_json(&self, basis: &TraceBasis) -> String {
        #[derive(Serialize)]
        struct Export<'a> {
            fingerprint: u64,
            nodes: Vec<[f64; 2]>,
            eigenvalues: &'a [f64],
            re: Vec<Vec<f64>>,
            im: Vec<Vec<f64>>,
        }
        let n = self.matrix.nrows();
        let e = Export {
            fingerprint: self.fingerprint,
            nodes: basis.positions.iter().map(|p| [p.x, p.y]).collect(),
            eigenvalues: &basis.eigenvalues,
            re: (0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)].im).collect()).collect(),
        };
        serde_json::to_string(&e).expect("serializable")
    }
}

/// DtN matrix with the discrete solutions `u_j` (full nodal vectors, one per
/// basis function) from which it was computed.
pub struct DtnAssembly {
    pub operator: DtnOperator,
    pub solutions: Vec<Vec<C64>>,
    pub solver: DirichletSolver,
}

pub fn assemble_dtn(mesh: &Mesh, q: &Potential, basis: &TraceBasis) -> Result<DtnOperator> {
    Ok(assemble_dtn_full(mesh, Arc::new(SystemMatrices::new(mesh)), q, basis)?.operator)
}

pub fn assemble_dtn_full(
    mesh: &Mesh,
    matrices: Arc<SystemMatrices>,
    q: &Potential,
    basis: &TraceBasis,
) -> Result<DtnAssembly> {
    if mesh.has_extension() {
        return Err(Error::InvalidInput("DtN assembly needs the mesh of Ω without the extension cell".into()));
    }
    let solver = DirichletSolver::with_matrices(mesh, matrices, q)?;
    solver.guard().into_result()?;
    let solutions = solver.solve_hat_data(&basis.nodes)?;
    let m = basis.len();
    // hat lift of φ_i: A[i][j] = row of the full system at node i applied to u_j
    let matrix = DMatrix::from_fn(m, m, |i, j| solver.form_row(basis.nodes[i], &solutions[j]));
    let operator = DtnOperator { matrix, fingerprint: potential_fingerprint(q), basis_nodes: basis.nodes.clone() };
    Ok(DtnAssembly { operator, solutions, solver })
}

/// `W⁻¹ Ψᵀ A Ψ W⁻¹` with `W = diag((1+λ_i)^{1/4})`.
pub fn scaled_matrix(delta: &DMatrix<C64>, basis: &TraceBasis) -> DMatrix<C64> {
    let psi = basis.eigenvectors.map(|x| C64::new(x, 0.0));
    let t = psi.transpose() * delta * &psi;
    let w = basis.weights();
    DMatrix::from_fn(t.nrows(), t.ncols(), |i, j| t[(i, j)] / (w[i] * w[j]))
}

/// Discrete `𝓛(H^{1/2}_co(Σ), H^{-1/2}_co(Σ))` norm.
pub fn operator_norm(delta: &DMatrix<C64>, basis: &TraceBasis) -> f64 {
    assert_eq!(delta.nrows(), basis.len(), "matrix and basis sizes differ");
    let s = scaled_matrix(delta, basis);
    if s.iter().all(|v| v.im == 0.0) {
        let r = s.map(|v| v.re);
        let r = (&r + r.transpose()) * 0.5;
        if (0..r.nrows()).all(|i| (0..r.ncols()).all(|j| s[(i, j)].re == s[(j, i)].re)) {
            return r.symmetric_eigenvalues().iter().fold(0.0, |m, v| m.max(v.abs()));
        }
    }
    spectral_norm(&s)
}

pub fn spectral_norm(a: &DMatrix<C64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().fold(0.0, |m, v| m.max(*v))
}

/// `⟨A g, g⟩ / ‖g‖²_{L²(Σ)}` for a nodal trace `g`.
pub fn rayleigh_quotient(op: &DtnOperator, basis: &TraceBasis, g: &[C64]) -> C64 {
    let gv = DVector::from_iterator(g.len(), g.iter().copied());
    let num = gv.map(|v| v.conj()).transpose() * &op.matrix * &gv;
    let den = gv.map(|v| v.conj()).transpose() * basis.mass.map(|x| C64::new(x, 0.0)) * &gv;
    num[(0, 0)] / den[(0, 0)].re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::make_mesh;
    use crate::geometry::{build_grid_partition, DomainSpec};

    #[test]
    fn synthetic_two_by_two_norm() {
        // λ = (0, 3) with the identity eigenbasis
        let basis = TraceBasis {
            nodes: vec![0, 1],
            positions: vec![Point::origin(); 2],
            closed: false,
            eigenvalues: vec![0.0, 3.0],
            eigenvectors: DMatrix::identity(2, 2),
            mass: DMatrix::identity(2, 2),
        };
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.0, 2.0), C64::new(0.5, 0.0), C64::new(-1.0, 0.3), C64::new(2.0, -1.0)],
        );
        let s = 2f64.powf(-0.5);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(s, 0.0)]));
        let expected = spectral_norm(&(&d * &a * &d));
        assert!((operator_norm(&a, &basis) - expected).abs() < 1e-14);
        assert_eq!(operator_norm(&DMatrix::zeros(2, 2), &basis), 0.0);
        let c = C64::new(-0.3, 2.0);
        assert!((operator_norm(&(&a * c), &basis) - c.norm() * expected).abs() < 1e-12);
    }

    #[test]
    fn arc_basis_on_square() {
        let p = build_grid_partition(1, DomainSpec::UnitSquare).unwrap();
        let m = make_mesh(&p, 0.1, &[]).unwrap().domain_submesh();
        let b = TraceBasis::new(&m).unwrap();
        assert!(!b.closed);
        assert!(b.positions.windows(2).all(|w| w[1].x > w[0].x));
        // first Dirichlet eigenvalue of -d²/ds² on (0,1) is π²
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((b.eigenvalues[0] - pi2).abs() / pi2 < 0.02);
        let ortho = b.eigenvectors.transpose() * &b.mass * &b.eigenvectors;
        assert!((ortho - DMatrix::identity(b.len(), b.len())).norm() < 1e-10);
    }

    #[test]
    fn closed_basis_on_disk() {
        let p = build_grid_partition(1, DomainSpec::disk()).unwrap();
        let m = make_mesh(&p, 0.1, &[]).unwrap();
        let b = TraceBasis::new(&m).unwrap();
        assert!(b.closed);
        assert!(b.eigenvalues[0].abs() < 1e-10);
        // periodic: eigenvalues 1, 1, 4, 4 for a circle-like curve of length ≈ 2π
        assert!((b.eigenvalues[1] - 1.0).abs() < 0.01 && (b.eigenvalues[2] - 1.0).abs() < 0.01);
    }
}
