//! Least-squares recovery of the cell values from DtN data.
//!
//! The misfit is `½‖S(Λ_q − Λ_meas)‖²_F` with `S` the `H^{1/2}` scaling of the
//! trace basis. `Λ_q` is holomorphic in `q`, so a complex Gauss–Newton step
//! coincides with the real step in the `2N` real parameters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dtn::DtnOperator;
use crate::inverse::forward::ForwardModel;
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    GaussNewton,
    Landweber,
}

#[derive(Clone, Debug)]
pub struct ReconstructionProblem {
    /// Measured operator on the model's trace basis.
    pub measured: DMatrix<C64>,
    pub initial: Vec<C64>,
    /// Initial Levenberg–Marquardt damping, relative to the largest diagonal
    /// entry of the Gauss–Newton matrix.
    pub damping: f64,
    pub max_iterations: usize,
    /// Stop when the largest update component falls below this.
    pub step_tolerance: f64,
    /// Stop once `‖S(Λ_q − Λ_meas)‖_F ≤ τ·noise` (discrepancy principle).
    pub noise_frobenius: Option<f64>,
    pub discrepancy_tau: f64,
    /// Keep the iterates real.
    pub real_only: bool,
    /// Clamp real parts to `[lo, hi]`.
    pub real_box: Option<(f64, f64)>,
    /// Truth for error reporting in the trace.
    pub truth: Option<Vec<C64>>,
}

impl ReconstructionProblem {
    pub fn new(measured: DMatrix<C64>, initial: Vec<C64>) -> Self {
        ReconstructionProblem {
            measured,
            initial,
            damping: 1e-3,
            max_iterations: 50,
            step_tolerance: 1e-13,
            noise_frobenius: None,
            discrepancy_tau: 1.0,
            real_only: false,
            real_box: None,
            truth: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub misfit: f64,
    pub step: f64,
    pub error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reconstruction {
    pub estimate: Vec<C64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl Reconstruction {
    /// CSV with columns `iter, misfit, step, error`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,misfit,step,error\n");
        for r in &self.trace {
            let err = r.error.map(|e| format!("{e:.17e}")).unwrap_or_default();
            out.push_str(&format!("{},{:.17e},{:.17e},{}\n", r.iteration, r.misfit, r.step, err));
        }
        out
    }
}

fn sup_error(q: &[C64], truth: Option<&Vec<C64>>) -> Option<f64> {
    truth.map(|t| q.iter().zip(t).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

struct Linearization {
    residual: DVector<C64>,
    jac: DMatrix<C64>,
    misfit: f64,
}

fn vectorize(m: &DMatrix<C64>) -> DVector<C64> {
    DVector::from_iterator(m.len(), m.iter().copied())
}

fn project(problem: &ReconstructionProblem, q: &mut [C64]) {
    for v in q.iter_mut() {
        if problem.real_only {
            v.im = 0.0;
        }
        if let Some((lo, hi)) = problem.real_box {
            v.re = v.re.clamp(lo, hi);
        }
    }
}

fn misfit_of(model: &ForwardModel, meas_scaled: &DMatrix<C64>, op: &DtnOperator) -> f64 {
    0.5 * (model.scaled(&op.matrix) - meas_scaled).norm_squared()
}

fn linearize(model: &ForwardModel, meas_scaled: &DMatrix<C64>, q: &[C64]) -> Result<Linearization> {
    let pot = model.potential(q)?;
    let (op, derivs) = model.jacobian(&pot)?;
    let r = model.scaled(&op.matrix) - meas_scaled;
    let misfit = 0.5 * r.norm_squared();
    let mut jac = DMatrix::zeros(r.len(), derivs.len());
    for (c, d) in derivs.iter().enumerate() {
        jac.set_column(c, &vectorize(&model.scaled(d)));
    }
    Ok(Linearization { residual: vectorize(&r), jac, misfit })
}

fn discrepancy_reached(problem: &ReconstructionProblem, misfit: f64) -> bool {
    problem.noise_frobenius.is_some_and(|noise| (2.0 * misfit).sqrt() <= problem.discrepancy_tau * noise)
}

pub fn reconstruct(model: &ForwardModel, problem: &ReconstructionProblem, method: Method) -> Result<Reconstruction> {
    let n = model.n_cells();
    if problem.initial.len() != n {
        return Err(Error::InvalidInput(format!("initial guess has {} values for {n} cells", problem.initial.len())));
    }
    let m = model.basis.len();
    if problem.measured.shape() != (m, m) {
        return Err(Error::InvalidInput(format!("measured operator must be {m}×{m}")));
    }
    let meas_scaled = model.scaled(&problem.measured);
    match method {
        Method::GaussNewton => gauss_newton(model, problem, &meas_scaled),
        Method::Landweber => landweber(model, problem, &meas_scaled),
    }
}

fn gauss_newton(model: &ForwardModel, problem: &ReconstructionProblem, meas: &DMatrix<C64>) -> Result<Reconstruction> {
    let n = model.n_cells();
    let mut q = problem.initial.clone();
    project(problem, &mut q);
    let mut trace = Vec::new();
    let mut lin = linearize(model, meas, &q)?;
    trace.push(TraceRow { iteration: 0, misfit: lin.misfit, step: 0.0, error: sup_error(&q, problem.truth.as_ref()) });
    if lin.misfit == 0.0 || discrepancy_reached(problem, lin.misfit) {
        return Ok(Reconstruction { estimate: q, iterations: 0, converged: true, trace });
    }
    let mut lambda = problem.damping;
    for it in 1..=problem.max_iterations {
        let jh = lin.jac.adjoint();
        let h = &jh * &lin.jac;
        let g = &jh * &lin.residual;
        let scale = (0..n).map(|i| h[(i, i)].re).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut accepted = None;
        for _ in 0..40 {
            let mut a = h.clone();
            for i in 0..n {
                a[(i, i)] += lambda * scale;
            }
            let dq = a.lu().solve(&(-&g)).ok_or_else(|| Error::Solver("singular Gauss–Newton matrix".into()))?;
            let mut trial: Vec<C64> = q.iter().zip(dq.iter()).map(|(a, b)| a + b).collect();
            project(problem, &mut trial);
            match model.potential(&trial).and_then(|p| model.forward(&p)) {
                Ok(op) => {
                    let f = misfit_of(model, meas, &op);
                    if f < lin.misfit {
                        accepted = Some((trial, f));
                        lambda = (lambda / 3.0).max(1e-16);
                        break;
                    }
                    lambda *= 4.0;
                }
                // guard failure: reject and shorten the step
                Err(Error::EigenvalueGuard { .. }) => lambda *= 2.0,
                Err(e) => return Err(e),
            }
        }
        let Some((trial, _)) = accepted else {
            // no decrease possible: stationary to working precision
            return Ok(Reconstruction { estimate: q, iterations: it - 1, converged: true, trace });
        };
        let step = q.iter().zip(&trial).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        q = trial;
        lin = linearize(model, meas, &q)?;
        trace.push(TraceRow { iteration: it, misfit: lin.misfit, step, error: sup_error(&q, problem.truth.as_ref()) });
        if step <= problem.step_tolerance || lin.misfit == 0.0 || discrepancy_reached(problem, lin.misfit) {
            return Ok(Reconstruction { estimate: q, iterations: it, converged: true, trace });
        }
    }
    Ok(Reconstruction { estimate: q, iterations: problem.max_iterations, converged: false, trace })
}

fn landweber(model: &ForwardModel, problem: &ReconstructionProblem, meas: &DMatrix<C64>) -> Result<Reconstruction> {
    let mut q = problem.initial.clone();
    project(problem, &mut q);
    let mut lin = linearize(model, meas, &q)?;
    let mut trace =
        vec![TraceRow { iteration: 0, misfit: lin.misfit, step: 0.0, error: sup_error(&q, problem.truth.as_ref()) }];
    if lin.misfit == 0.0 || discrepancy_reached(problem, lin.misfit) {
        return Ok(Reconstruction { estimate: q, iterations: 0, converged: true, trace });
    }
    // fixed step 1/‖DF‖² from the initial linearization
    let h = lin.jac.adjoint() * &lin.jac;
    let norm2 = h.singular_values().max();
    let mu = 1.0 / norm2;
    let mut increases = 0;
    for it in 1..=problem.max_iterations {
        let g = lin.jac.adjoint() * &lin.residual;
        let mut trial: Vec<C64> = q.iter().zip(g.iter()).map(|(a, b)| a - b * mu).collect();
        project(problem, &mut trial);
        let step = q.iter().zip(&trial).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let prev = lin.misfit;
        q = trial;
        lin = linearize(model, meas, &q)?;
        trace.push(TraceRow { iteration: it, misfit: lin.misfit, step, error: sup_error(&q, problem.truth.as_ref()) });
        increases = if lin.misfit > prev { increases + 1 } else { 0 };
        if increases >= 5 {
            return Err(Error::Divergence { iterations: it, misfit: lin.misfit });
        }
        if step <= problem.step_tolerance || discrepancy_reached(problem, lin.misfit) {
            return Ok(Reconstruction { estimate: q, iterations: it, converged: true, trace });
        }
    }
    Ok(Reconstruction { estimate: q, iterations: problem.max_iterations, converged: false, trace })
}
