//! Oracles for singular functions, the boundary/volume identity, interface
//! scans and the three-spheres check.

use std::f64::consts::PI;
use std::sync::Arc;

use dtnlab::fem::{make_mesh, solve_dirichlet};
use dtnlab::geometry::{build_grid_partition, chain_to, DomainSpec, Partition, Point, Potential};
use dtnlab::probe::{interface_refinement, singular_integral, three_spheres_check, NormMode, SingularProbe};
use dtnlab::{Error, C64};

fn square() -> Partition {
    build_grid_partition(2, DomainSpec::UnitSquare).unwrap()
}

fn base() -> Potential {
    Potential::from_values(vec![C64::new(1.0, 0.5), C64::new(2.0, 0.0), C64::new(1.0, 0.0), C64::new(1.5, 0.0)])
}

fn perturbed(q: &Potential, cell: usize, by: C64) -> Potential {
    let mut v = q.values.clone();
    v[cell] += by;
    Potential::from_values(v)
}

const Y: (f64, f64) = (0.45, -0.1);
const Z: (f64, f64) = (0.55, -0.1);

fn y() -> Point {
    Point::new(Y.0, Y.1)
}

fn z() -> Point {
    Point::new(Z.0, Z.1)
}

#[test]
fn equal_potentials_give_zero() {
    let q = base();
    let probe = SingularProbe::new(&square(), &q, &q, 0.05, 3, &[]).unwrap();
    assert_eq!(probe.singular_function(0, y(), z()).unwrap(), C64::new(0.0, 0.0));
    let gap = probe.alessandrini_gap(y(), z()).unwrap();
    assert_eq!(gap.volume_side, C64::new(0.0, 0.0));
    assert!(gap.boundary_side.norm() < 1e-14, "{}", gap.boundary_side);
}

#[test]
fn swapping_roles_negates() {
    let part = square();
    let (q1, q2) = (base(), perturbed(&base(), 0, C64::new(0.5, 0.0)));
    let a = SingularProbe::new(&part, &q1, &q2, 0.05, 3, &[]).unwrap();
    let b = SingularProbe::new(&part, &q2, &q1, 0.05, 3, &[]).unwrap();
    let sa = a.singular_function(0, y(), z()).unwrap();
    let sb = b.singular_function(0, z(), y()).unwrap();
    assert!((sa + sb).norm() < 1e-12 * sa.norm(), "{sa} vs {sb}");
}

#[test]
fn adaptive_quadrature_matches_dense_quadrature() {
    let part = square();
    let (q1, q2) = (base(), perturbed(&base(), 0, C64::new(0.5, 0.0)));
    let probe = SingularProbe::new(&part, &q1, &q2, 0.05, 3, &[]).unwrap();
    let adaptive = probe.singular_function(0, y(), z()).unwrap();
    // four uniform splits: 16× finer in each direction
    let dense = probe.singular_function_with(0, y(), z(), Some(4)).unwrap();
    assert!((adaptive - dense).norm() < 0.01 * dense.norm(), "{adaptive} vs {dense}");
}

#[test]
fn singular_function_is_linear_in_the_difference() {
    let part = square();
    let (q1, q2) = (base(), perturbed(&base(), 1, C64::new(0.3, -0.2)));
    let probe = SingularProbe::new(&part, &q1, &q2, 0.05, 3, &[]).unwrap();
    let (g1, g2) = probe.fields(y(), z()).unwrap();
    let diff = probe.difference();
    let twice: Vec<C64> = diff.iter().map(|d| d * 2.0).collect();
    let mask = vec![true; 4];
    let s1 = singular_integral(&g1, &g2, &diff, &mask, None).unwrap();
    let s2 = singular_integral(&g1, &g2, &twice, &mask, None).unwrap();
    assert!((s2 - 2.0 * s1).norm() <= 1e-10 * s2.norm());
}

#[test]
fn sources_inside_u_k_are_rejected() {
    let (q1, q2) = (base(), perturbed(&base(), 0, C64::new(0.5, 0.0)));
    let probe = SingularProbe::new(&square(), &q1, &q2, 0.05, 3, &[]).unwrap();
    // W_1 = first chain cell [0, 1/2]²; [0, 1/2] × [1/2, 1] is in U_1
    assert!(matches!(probe.singular_function(1, Point::new(0.25, 0.75), z()), Err(Error::Precondition(_))));
    assert!(matches!(probe.singular_function(0, Point::new(0.25, 0.25), z()), Err(Error::Precondition(_))));
    assert!(probe.singular_function(1, Point::new(0.25, 0.25), z()).is_ok());
    // on the interface: zero distance from U_1
    assert!(matches!(probe.singular_function(1, Point::new(0.25, 0.5), z()), Err(Error::Precondition(_))));
}

#[test]
fn masks_partition_the_cells() {
    let probe = SingularProbe::new(&square(), &base(), &base(), 0.1, 3, &[]).unwrap();
    for k in 0..=probe.chain.len() {
        let set = probe.cell_set(k).unwrap();
        for t in 0..probe.mesh.n_triangles() {
            let r = probe.mesh.regions[t];
            if let dtnlab::geometry::Region::Cell(_) = r {
                assert!(set.in_u(r) != set.in_w(r));
            }
        }
    }
    assert!(probe.cell_set(probe.chain.len() + 1).is_err());
}

#[test]
fn identity_sources_must_lie_in_k0() {
    let (q1, q2) = (base(), perturbed(&base(), 0, C64::new(0.5, 0.0)));
    let probe = SingularProbe::new(&square(), &q1, &q2, 0.05, 3, &[]).unwrap();
    // too close to Σ
    assert!(matches!(probe.alessandrini_gap(Point::new(0.5, -0.02), z()), Err(Error::Precondition(_))));
    // inside Ω
    assert!(matches!(probe.alessandrini_gap(Point::new(0.5, 0.3), z()), Err(Error::Precondition(_))));
}

#[test]
fn identity_gap_converges() {
    let part = square();
    let (q1, q2) = (base(), perturbed(&base(), 0, C64::new(0.5, 0.0)));
    let gap = |h: f64| {
        SingularProbe::new(&part, &q1, &q2, h, 3, &[]).unwrap().alessandrini_gap(y(), z()).unwrap()
    };
    let (coarse, fine) = (gap(0.04), gap(0.02));
    assert!(fine.relative_gap <= 0.05, "{fine:?}");
    assert!(coarse.relative_gap >= 2.0 * fine.relative_gap, "{} vs {}", coarse.relative_gap, fine.relative_gap);
}

#[test]
fn interface_scan_blows_up_logarithmically() {
    let part = square();
    let q1 = Potential::constant(4, C64::new(1.0, 0.0));
    let q2 = perturbed(&q1, 1, C64::new(0.5, 0.0));
    let chain = chain_to(&part, 3).unwrap();
    assert_eq!(chain.indices, vec![0, 1, 3]);
    let r1 = part.params.r1();
    let refine = interface_refinement(&part, &chain, 4.0 * r1);
    let probe = SingularProbe::new(&part, &q1, &q2, 0.02, 3, &refine).unwrap();
    let radii: Vec<f64> = (3..=6).map(|e| r1 * 2f64.powi(-e)).collect();
    let scan = probe.interface_blowup_scan(2, &radii).unwrap();
    assert_eq!(scan.interface_point, [0.25, 0.5]);
    assert_eq!(scan.normal, [0.0, 1.0]);
    assert!(scan.skipped.is_empty());
    assert!(scan.is_monotone());
    let fit = scan.fit.unwrap();
    assert!(fit.slope > 0.0 && fit.r2 >= 0.95);
    // half-plane integral of Γ²: |Δq| |ln r| / (8π)
    let expected = scan.jump / (8.0 * PI);
    assert!(fit.slope > expected / 3.0 && fit.slope < 3.0 * expected, "{} vs {expected}", fit.slope);

    let same = SingularProbe::new(&part, &q1, &q1, 0.05, 3, &[]).unwrap();
    let zero = same.interface_blowup_scan(2, &radii[..2]).unwrap();
    assert!(zero.rows.iter().all(|r| r.s_abs == 0.0));
}

#[test]
fn scan_skips_radii_outside_the_range() {
    let part = square();
    let q1 = Potential::constant(4, C64::new(1.0, 0.0));
    let probe = SingularProbe::new(&part, &q1, &q1, 0.05, 3, &[]).unwrap();
    let r1 = part.params.r1();
    let scan = probe.interface_blowup_scan(2, &[0.5 * r1, 3.0 * r1]).unwrap();
    assert_eq!(scan.rows.len(), 1);
    assert_eq!(scan.skipped.len(), 1);
    assert!(scan.to_csv().starts_with("r,abs_s,fit_residual\n"));
}

#[test]
fn three_spheres_constant_is_stable_for_a_complex_potential() {
    let part = build_grid_partition(2, DomainSpec::disk()).unwrap();
    let q = Potential::constant(4, C64::new(1.0, 1.0));
    let mut qs = Vec::new();
    for h in [0.05, 0.025] {
        let mesh = make_mesh(&part, h, &[]).unwrap();
        let u = solve_dirichlet(&mesh, &q, |p| C64::new((2.0 * p.x).cos(), p.y), None::<fn(Point) -> C64>).unwrap();
        let mesh = Arc::new(mesh);
        let res = three_spheres_check(|p: &Point| u.eval(&mesh, p), Point::origin(), 0.1, 0.3, 0.6, NormMode::L2).unwrap();
        assert!(res.q_alpha.is_finite() && res.q_alpha > 0.0);
        qs.push(res.q_alpha);
    }
    assert!(qs[0] / qs[1] < 2.0 && qs[1] / qs[0] < 2.0, "{qs:?}");
}
