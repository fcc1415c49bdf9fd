//! Forward map `q ↦ Λ_q` on a fixed mesh of `Ω` and its derivative.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;

use crate::dtn::{assemble_dtn_full, potential_fingerprint, scaled_matrix, DtnOperator, TraceBasis};
use crate::fem::{make_mesh, Mesh, SystemMatrices};
use crate::geometry::{Partition, Potential, Region};
use crate::{Error, Result, C64};

const CACHE_LIMIT: usize = 256;

/// Mesh, trace basis and assembled matrices shared by every evaluation of
/// the forward map for one partition.
pub struct ForwardModel {
    pub partition: Partition,
    pub mesh: Arc<Mesh>,
    pub basis: TraceBasis,
    pub matrices: Arc<SystemMatrices>,
    /// Value taken outside the cells.
    pub fill: C64,
    cache: Mutex<HashMap<Vec<[u64; 2]>, Arc<DtnOperator>>>,
}

fn cache_key(q: &Potential) -> Vec<[u64; 2]> {
    q.values.iter().chain(std::iter::once(&q.fill)).map(|v| [v.re.to_bits(), v.im.to_bits()]).collect()
}

impl ForwardModel {
    /// Meshes `Ω` with nominal spacing `h`.
    pub fn new(partition: &Partition, h: f64) -> Result<Self> {
        let mesh = make_mesh(partition, h, &[])?.domain_submesh();
        Self::from_mesh(partition, mesh)
    }

    pub fn from_mesh(partition: &Partition, mesh: Mesh) -> Result<Self> {
        if mesh.has_extension() {
            return Err(Error::InvalidInput("forward model needs the mesh of Ω without the extension cell".into()));
        }
        let basis = TraceBasis::new(&mesh)?;
        let matrices = Arc::new(SystemMatrices::new(&mesh));
        Ok(ForwardModel {
            partition: partition.clone(),
            mesh: Arc::new(mesh),
            basis,
            matrices,
            fill: C64::new(1.0, 0.0),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn n_cells(&self) -> usize {
        self.partition.n_cells()
    }

    /// Potential with the model's fill from cell values.
    pub fn potential(&self, values: &[C64]) -> Result<Potential> {
        if values.len() != self.n_cells() {
            return Err(Error::InvalidInput(format!(
                "expected {} cell values, got {}",
                self.n_cells(),
                values.len()
            )));
        }
        let bound = values.iter().map(|v| v.norm()).fold(self.fill.norm(), f64::max);
        Potential::with_fill(values.to_vec(), self.fill, bound)
    }

    /// `F(q) = Λ_q`, cached by the exact potential values.
    pub fn forward(&self, q: &Potential) -> Result<Arc<DtnOperator>> {
        let key = cache_key(q);
        if let Some(op) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(Arc::clone(op));
        }
        let op = Arc::new(assemble_dtn_full(&self.mesh, Arc::clone(&self.matrices), q, &self.basis)?.operator);
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, Arc::clone(&op));
        Ok(op)
    }

    pub fn forward_values(&self, values: &[C64]) -> Result<Arc<DtnOperator>> {
        self.forward(&self.potential(values)?)
    }

    /// `Λ_q` and `∂Λ/∂q_c` for every cell, from
    /// `∂A_{il}/∂q_c = ∫_{D_c} u_i u_l` with the discrete solutions `u`.
    pub fn jacobian(&self, q: &Potential) -> Result<(DtnOperator, Vec<DMatrix<C64>>)> {
        let asm = assemble_dtn_full(&self.mesh, Arc::clone(&self.matrices), q, &self.basis)?;
        let n = self.mesh.n_nodes();
        let m = asm.solutions.len();
        let u = DMatrix::from_fn(n, m, |i, j| asm.solutions[j][i]);
        let ut = u.transpose();
        let mut derivs = Vec::with_capacity(self.n_cells());
        for c in 0..self.n_cells() {
            let Some(mass) = self.matrices.mass.get(&Region::Cell(c)) else {
                derivs.push(DMatrix::zeros(m, m));
                continue;
            };
            let mut mu = DMatrix::zeros(n, m);
            for (j, sol) in asm.solutions.iter().enumerate() {
                let col = self.matrices.matvec_real(mass, sol);
                mu.set_column(j, &nalgebra::DVector::from_vec(col));
            }
            derivs.push(&ut * mu);
        }
        Ok((asm.operator, derivs))
    }

    /// `‖Λ₁ − Λ₂‖` in the discrete `𝓛(H^{1/2}_co, H^{-1/2}_co)` norm.
    pub fn operator_distance(&self, a: &DtnOperator, b: &DtnOperator) -> f64 {
        crate::dtn::operator_norm(&a.difference(b), &self.basis)
    }

    /// `H^{1/2}`-scaled matrix of an operator.
    pub fn scaled(&self, a: &DMatrix<C64>) -> DMatrix<C64> {
        scaled_matrix(a, &self.basis)
    }

    /// Inverse of [`ForwardModel::scaled`]: `A = MΨ W S W Ψᵀ M`.
    pub fn unscaled(&self, s: &DMatrix<C64>) -> DMatrix<C64> {
        let b = &self.basis;
        let w = b.weights();
        let ws = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] * (w[i] * w[j]));
        let mpsi = (&b.mass * &b.eigenvectors).map(|x| C64::new(x, 0.0));
        &mpsi * ws * mpsi.transpose()
    }

    pub fn fingerprint(q: &Potential) -> u64 {
        potential_fingerprint(q)
    }
}
