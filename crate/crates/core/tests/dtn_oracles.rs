use std::sync::Arc;
use std::time::Instant;

use dtnlab::dtn::{assemble_dtn, assemble_dtn_full, operator_norm, rayleigh_quotient, scaled_matrix, TraceBasis};
use dtnlab::fem::{make_mesh, DirichletSolver, Mesh, SystemMatrices};
use dtnlab::geometry::{build_grid_partition, DomainSpec, Potential};
use dtnlab::greens::special::{bessel_i, bessel_i_prime};
use dtnlab::C64;

fn disk(h: f64) -> Mesh {
    let p = build_grid_partition(1, DomainSpec::disk()).unwrap();
    make_mesh(&p, h, &[]).unwrap()
}

fn mode(basis: &TraceBasis, k: usize) -> Vec<C64> {
    basis.positions.iter().map(|p| C64::new((k as f64 * p.y.atan2(p.x)).cos(), 0.0)).collect()
}

#[test]
fn disk_spectrum_matches_separation_of_variables() {
    let t0 = Instant::now();
    let m = disk(0.02);
    let basis = TraceBasis::new(&m).unwrap();
    let zero = assemble_dtn(&m, &Potential::constant(1, C64::new(0.0, 0.0)), &basis).unwrap();
    let one = assemble_dtn(&m, &Potential::constant(1, C64::new(1.0, 0.0)), &basis).unwrap();
    for k in 1..=8usize {
        let rq0 = rayleigh_quotient(&zero, &basis, &mode(&basis, k)).re;
        let rq1 = rayleigh_quotient(&one, &basis, &mode(&basis, k)).re;
        let bessel = bessel_i_prime(k, 1.0) / bessel_i(k, 1.0);
        let (e0, e1) = ((rq0 - k as f64).abs() / k as f64, (rq1 - bessel).abs() / bessel);
        println!("k={k} q=0: {rq0:.5} (rel {e0:.2e})  q=1: {rq1:.5} vs {bessel:.5} (rel {e1:.2e})");
        assert!(e0 <= 0.02 && e1 <= 0.02);
    }
    println!("nodes {} sigma {} elapsed {:?}", m.n_nodes(), basis.len(), t0.elapsed());
}

#[test]
fn identical_potentials_give_zero_difference() {
    let m = disk(0.1);
    let basis = TraceBasis::new(&m).unwrap();
    let q = Potential::constant(1, C64::new(0.7, 0.2));
    let a = assemble_dtn(&m, &q, &basis).unwrap();
    let b = assemble_dtn(&m, &q, &basis).unwrap();
    assert!(operator_norm(&a.difference(&b), &basis) <= 1e-12);
}

#[test]
fn entries_do_not_depend_on_the_lift() {
    let p = build_grid_partition(2, DomainSpec::UnitSquare).unwrap();
    let m = make_mesh(&p, 0.1, &[]).unwrap().domain_submesh();
    let basis = TraceBasis::new(&m).unwrap();
    let q = Potential::from_values(vec![C64::new(1.0, 0.5), C64::new(1.5, 0.0), C64::new(0.5, -0.2), C64::new(1.0, 0.0)]);
    let asm = assemble_dtn_full(&m, Arc::new(SystemMatrices::new(&m)), &q, &basis).unwrap();
    // Laplace-harmonic lift of every basis function
    let laplace = DirichletSolver::new(&m, &Potential::constant(4, C64::new(0.0, 0.0))).unwrap();
    let lifts = laplace.solve_hat_data(&basis.nodes).unwrap();
    let scale = asm.operator.matrix.iter().fold(0.0f64, |s, v| s.max(v.norm()));
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            let alt = asm.solver.form(&asm.solutions[j], &lifts[i]);
            assert!((alt - asm.operator.matrix[(i, j)]).norm() <= 1e-8 * scale);
        }
    }
}

#[test]
fn real_potential_gives_symmetric_scaled_matrix() {
    let p = build_grid_partition(2, DomainSpec::UnitSquare).unwrap();
    let m = make_mesh(&p, 0.1, &[]).unwrap().domain_submesh();
    let basis = TraceBasis::new(&m).unwrap();
    let q1 = Potential::from_values(vec![C64::new(1.0, 0.0); 4]);
    let q2 = Potential::from_values(vec![C64::new(1.5, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.5, 0.0)]);
    let d = assemble_dtn(&m, &q1, &basis).unwrap().difference(&assemble_dtn(&m, &q2, &basis).unwrap());
    let s = scaled_matrix(&d, &basis);
    let asym = (&s - s.transpose()).norm() / s.norm();
    assert!(asym < 1e-10);
    let eig = s.map(|v| v.re).symmetric_eigenvalues().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let sv = dtnlab::dtn::spectral_norm(&s);
    assert!((eig - sv).abs() <= 1e-10 * sv);
    assert!((operator_norm(&d, &basis) - sv).abs() <= 1e-10 * sv);
}

#[test]
fn operator_norm_settles_under_refinement() {
    let p = build_grid_partition(2, DomainSpec::UnitSquare).unwrap();
    let q1 = Potential::from_values(vec![C64::new(1.0, 0.0); 4]);
    let q2 = Potential::from_values(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.5, 0.0)]);
    let norms: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&h| {
            let m = make_mesh(&p, h, &[]).unwrap().domain_submesh();
            let b = TraceBasis::new(&m).unwrap();
            let d = assemble_dtn(&m, &q1, &b).unwrap().difference(&assemble_dtn(&m, &q2, &b).unwrap());
            operator_norm(&d, &b)
        })
        .collect();
    println!("norms {norms:?}");
    assert!((norms[1] - norms[2]).abs() < (norms[0] - norms[1]).abs());
}
