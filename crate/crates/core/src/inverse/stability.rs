//! Empirical Lipschitz constants over admissible classes and the
//! exponential lower bound for the lattice construction.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtn::operator_norm;
use crate::geometry::Potential;
use crate::inverse::forward::ForwardModel;
use crate::{Error, Result, C64};

/// Values of the lattice class.
pub const LATTICE_VALUES: [f64; 3] = [0.5, 1.0, 1.5];
/// Bounds of the box class.
pub const BOX: (f64, f64) = (0.5, 1.5);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AdmissibleClass {
    /// `1/2 ≤ q ≤ 3/2`, `q = 1` outside the cube.
    Box,
    /// Piecewise constant on the `N` grid cells, values in the box.
    Grid { n: usize },
    /// Piecewise constant with values in `{1/2, 1, 3/2}`.
    Lattice { n: usize },
}

impl AdmissibleClass {
    pub fn contains(&self, q: &Potential) -> bool {
        let in_box = |v: &C64| v.im == 0.0 && v.re >= BOX.0 && v.re <= BOX.1;
        let fill_ok = q.fill == C64::new(1.0, 0.0);
        match *self {
            AdmissibleClass::Box => fill_ok && q.values.iter().all(in_box),
            AdmissibleClass::Grid { n } => fill_ok && q.len() == n && q.values.iter().all(in_box),
            AdmissibleClass::Lattice { n } => {
                fill_ok
                    && q.len() == n
                    && q.values.iter().all(|v| v.im == 0.0 && LATTICE_VALUES.contains(&v.re))
            }
        }
    }
}

/// The `k`-th lattice member in base-3 digit order, first cell fastest.
pub fn lattice_member(n: usize, mut k: u64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let d = (k % 3) as usize;
            k /= 3;
            LATTICE_VALUES[d]
        })
        .collect()
}

/// All `3^N` lattice members.
pub fn lattice_members(n: usize) -> Result<Vec<Vec<f64>>> {
    let count = 3u64
        .checked_pow(n as u32)
        .filter(|&c| c <= 1 << 24)
        .ok_or_else(|| Error::InvalidInput(format!("3^{n} lattice members are too many to enumerate")))?;
    Ok((0..count).map(|k| lattice_member(n, k)).collect())
}

pub fn real_values(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityRecord {
    pub n: usize,
    pub q1: Vec<C64>,
    pub q2: Vec<C64>,
    pub distance: f64,
    pub dtn_norm: f64,
    pub ratio: f64,
}

impl StabilityRecord {
    pub fn csv_header() -> &'static str {
        "N,distance,dtn_norm,ratio,mesh_h,seed"
    }

    pub fn csv_row(&self, mesh_h: f64, seed: Option<u64>) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            self.n,
            self.distance,
            self.dtn_norm,
            self.ratio,
            mesh_h,
            seed.map(|s| s.to_string()).unwrap_or_default()
        )
    }
}

fn sup_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `‖q⁽¹⁾ − q⁽²⁾‖_∞ / ‖Λ₁ − Λ₂‖`.
pub fn stability_ratio(model: &ForwardModel, q1: &[C64], q2: &[C64]) -> Result<StabilityRecord> {
    let distance = sup_distance(q1, q2);
    if distance == 0.0 {
        return Err(Error::InvalidInput("identical potentials: the stability ratio is undefined".into()));
    }
    let a1 = model.forward_values(q1)?;
    let a2 = model.forward_values(q2)?;
    let dtn_norm = model.operator_distance(&a1, &a2);
    Ok(StabilityRecord { n: q1.len(), q1: q1.to_vec(), q2: q2.to_vec(), distance, dtn_norm, ratio: distance / dtn_norm })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// Every pair of distinct lattice members.
    ExhaustiveLattice,
    /// Independent uniformly drawn pairs of distinct lattice members.
    Random { pairs: usize, seed: u64 },
    /// Pairs differing on one cell only, for every cell and value pair, on
    /// `backgrounds` random lattice backgrounds.
    SingleCell { backgrounds: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    pub n: usize,
    pub sampling: Sampling,
    /// Maximum stability ratio over the evaluated pairs.
    pub c_est: f64,
    /// `(1/2) / min ‖Λ₁ − Λ₂‖`.
    pub half_over_min_norm: f64,
    pub min_norm: f64,
    /// Minimum sup-norm distance among the evaluated pairs.
    pub min_distance: f64,
    pub pairs: usize,
    pub argmax: (Vec<f64>, Vec<f64>),
    /// The budget stopped the evaluation early: `c_est` is a lower bound of
    /// the value for the requested sampling.
    pub partial: bool,
    pub records: Vec<StabilityRecord>,
}

fn sampled_pairs(n: usize, sampling: Sampling) -> Result<Vec<(u64, u64)>> {
    let total = 3u64
        .checked_pow(n as u32)
        .ok_or_else(|| Error::InvalidInput(format!("3^{n} overflows")))?;
    match sampling {
        Sampling::ExhaustiveLattice => {
            if total > 1 << 12 {
                return Err(Error::InvalidInput(format!(
                    "exhaustive evaluation of 3^{n} members is not supported; use sampling"
                )));
            }
            Ok((0..total).flat_map(|a| (a + 1..total).map(move |b| (a, b))).collect())
        }
        Sampling::Random { pairs, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(pairs);
            while out.len() < pairs {
                let (a, b) = (rng.gen_range(0..total), rng.gen_range(0..total));
                if a != b {
                    out.push((a.min(b), a.max(b)));
                }
            }
            Ok(out)
        }
        Sampling::SingleCell { backgrounds, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::new();
            for _ in 0..backgrounds {
                let bg = rng.gen_range(0..total);
                for c in 0..n {
                    let p = 3u64.pow(c as u32);
                    let base = bg - ((bg / p) % 3) * p;
                    for (da, db) in [(0, 1), (1, 2), (0, 2)] {
                        out.push((base + da * p, base + db * p));
                    }
                }
            }
            out.sort_unstable();
            out.dedup();
            Ok(out)
        }
    }
}

/// Largest stability ratio over lattice pairs, evaluating at most `budget`
/// pairs.
pub fn estimate_lipschitz_constant(model: &ForwardModel, sampling: Sampling, budget: usize) -> Result<LipschitzEstimate> {
    let n = model.n_cells();
    let mut pairs = sampled_pairs(n, sampling)?;
    let partial = pairs.len() > budget;
    pairs.truncate(budget);
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no lattice pairs to evaluate".into()));
    }
    let mut members: Vec<u64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    members.sort_unstable();
    members.dedup();

    // scaled, symmetrized matrices: the DtN map of a real potential is
    // symmetric, so this only removes solver round-off
    let scaled: Vec<DMatrix<f64>> = members
        .iter()
        .map(|&k| {
            let op = model.forward_values(&real_values(&lattice_member(n, k)))?;
            let s = model.scaled(&op.matrix).map(|v| v.re);
            Ok((&s + s.transpose()) * 0.5)
        })
        .collect::<Result<_>>()?;
    let index = |k: u64| members.binary_search(&k).expect("member listed");

    let records: Vec<StabilityRecord> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let (qa, qb) = (lattice_member(n, a), lattice_member(n, b));
            let d = &scaled[index(a)] - &scaled[index(b)];
            let norm = d.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let distance = qa.iter().zip(&qb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            StabilityRecord {
                n,
                q1: real_values(&qa),
                q2: real_values(&qb),
                distance,
                dtn_norm: norm,
                ratio: distance / norm,
            }
        })
        .collect();

    let best = records.iter().max_by(|x, y| x.ratio.total_cmp(&y.ratio)).expect("nonempty");
    let min_norm = records.iter().map(|r| r.dtn_norm).fold(f64::INFINITY, f64::min);
    let min_distance = records.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min);
    Ok(LipschitzEstimate {
        n,
        sampling,
        c_est: best.ratio,
        half_over_min_norm: 0.5 / min_norm,
        min_norm,
        min_distance,
        pairs: records.len(),
        argmax: (best.q1.iter().map(|v| v.re).collect(), best.q2.iter().map(|v| v.re).collect()),
        partial,
        records,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RondiBound {
    /// `K₁ = (K⁻¹ ln 3)^{1/(2n−1)}`.
    pub k1: f64,
    /// `(1/4) exp(K₁ N^{1/(2n−1)})`.
    pub bound: f64,
    /// `ε₀ = exp(−K₁ N^{1/(2n−1)})`.
    pub eps0: f64,
    /// `ln Q(ε₀, N) = K (−ln ε₀)^{2n−1}`, equal to `N ln 3`.
    pub ln_net_count: f64,
}

/// Lower bound for the Lipschitz constant from the lattice `1/2`-net and an
/// `ε`-net count `Q(ε) = exp(K (−ln ε)^{2n−1})`; meaningful for large `N`.
pub fn rondi_lower_bound(n_cells: usize, dim: usize, k: f64) -> Result<RondiBound> {
    if n_cells == 0 || dim == 0 || !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidInput(format!("need N ≥ 1, n ≥ 1 and K > 0, got N = {n_cells}, n = {dim}, K = {k}")));
    }
    let p = 2.0 * dim as f64 - 1.0;
    let k1 = (3f64.ln() / k).powf(1.0 / p);
    let e = k1 * (n_cells as f64).powf(1.0 / p);
    Ok(RondiBound { k1, bound: 0.25 * e.exp(), eps0: (-e).exp(), ln_net_count: k * e.powf(p) })
}

/// Random perturbation `E` of the DtN matrix with `‖E‖ = δ` in the discrete
/// `𝓛(H^{1/2}_co, H^{-1/2}_co)` norm; symmetric, real when `real` is set,
/// complex symmetric otherwise.
pub fn operator_noise(model: &ForwardModel, delta: f64, real: bool, seed: u64) -> Result<DMatrix<C64>> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidInput(format!("noise level must be nonnegative, got {delta}")));
    }
    let m = model.basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DMatrix::from_fn(m, m, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = if real { 0.0 } else { rng.sample(StandardNormal) };
        C64::new(re, im)
    });
    g = &g + g.transpose();
    let s = crate::dtn::spectral_norm(&g);
    if s == 0.0 || delta == 0.0 {
        return Ok(DMatrix::zeros(m, m));
    }
    let e = model.unscaled(&(g * C64::new(delta / s, 0.0)));
    // the unscaling is exact up to round-off; renormalize in the same norm
    let actual = operator_norm(&e, &model.basis);
    Ok(e * C64::new(delta / actual, 0.0))
}

/// Frobenius norm of a perturbation in scaled coordinates.
pub fn scaled_frobenius(model: &ForwardModel, e: &DMatrix<C64>) -> f64 {
    model.scaled(e).norm()
}
