use std::f64::consts::TAU;

use dynamics_catalog::*;
use quasiconj_solver::*;
use torus_geometry::{TorusPoint, Vector};

fn cat() -> MapSpec {
    make_linear_ph(IntMatrix::cat()).unwrap()
}

fn perturbed_cat(a: f64) -> MapSpec {
    make_perturbed(cat(), VectorField::cat_shear(), a).unwrap()
}

fn cat_times_id() -> MapSpec {
    make_linear_ph(IntMatrix::cat().direct_sum_identity(1)).unwrap()
}

fn skew(shift: FiberShift) -> MapSpec {
    make_skew_product(IntMatrix::cat(), shift).unwrap()
}

fn params(res: &[usize]) -> SolverParams {
    SolverParams { resolution: Some(res.to_vec()), ..SolverParams::default() }
}

fn assert_passed(q: &QuasiConjugacy) {
    let v = &q.verification;
    assert!(v.passed, "{v:?}");
    assert!(v.residual_ok && v.displacement_ok && v.center_ok && v.ball_ok && v.surjectivity_ok);
}

#[test]
fn identical_maps_give_the_identity() {
    for (f, res) in [(cat(), vec![64, 64]), (cat_times_id(), vec![16, 16, 16])] {
        let q = solve_theorem_A(&f, &f, &params(&res)).unwrap();
        assert_eq!(q.iterations, 1);
        assert_eq!(q.u.sup_norm(), 0.0);
        assert_eq!(q.v.sup_norm(), 0.0);
        assert_eq!(q.verification.raw.sup, 0.0);
        assert_passed(&q);
    }
}

#[test]
fn skew_rotation_is_absorbed_by_a_center_translation() {
    let f = cat_times_id();
    let g = skew(FiberShift::Constant { value: 0.02 });
    let q = solve_theorem_A(&f, &g, &params(&[64, 64, 64])).unwrap();
    let target = Vector::from_slice(&[0.0, 0.0, 0.02]);
    for u in q.u.values() {
        assert!((*u - target).norm() < 1e-6);
    }
    assert!(q.v.sup_norm() < 1e-6);
    assert!(q.residual().0 < 1e-8);
    assert_passed(&q);
    let guard = q.guard.as_ref().unwrap();
    assert!(guard.measured_ok && guard.c_eps == 0.0 && guard.k_h == 0.0);
}

#[test]
fn anosov_perturbation_is_conjugate_and_unique() {
    let f = cat();
    let g = perturbed_cat(0.01);
    let p = params(&[256, 256]);
    let q = solve_theorem_A(&f, &g, &p).unwrap();
    assert_passed(&q);
    assert!(q.residual().0 < 1e-6);
    assert!(q.verification.raw.sup < p.interpolation_tol);
    assert_eq!(q.u.sup_norm(), 0.0);

    let phi = q.omega();
    let start = random_section(q.grid(), 17).scale(0.3);
    let other = solve_theorem_A_from(&f, &g, &p, Some(&start)).unwrap();
    assert!(other.omega().sup_distance(&phi) < 2e-10);
    assert!(other.iterations >= 2);
}

#[test]
fn contraction_trace_decays() {
    let f = perturbed_cat(0.01);
    let g = perturbed_cat(0.012);
    let p = SolverParams { epsilon: 0.05, ..params(&[64, 64]) };
    let start = random_section(&p.grid(2).unwrap(), 5).scale(0.02);
    let q = solve_theorem_A_from(&f, &g, &p, Some(&start)).unwrap();
    let t = &q.contraction_trace;
    assert!(t.len() >= 3);
    for w in t.windows(2) {
        assert!(w[1] <= 0.5 * w[0] + 1e-15, "{t:?}");
    }
    assert!(*t.last().unwrap() < p.fixpoint_tol);

    let split = q.splitting.clone();
    let ops = Operators::new(&f, &Composite::new(&g, &f), &split, q.grid(), p.neumann_depth, p.neumann_tol).unwrap();
    let omega = q.omega();
    let image = ops.Phi(&omega).unwrap();
    assert!(ops.norm1(&(&image - &omega)) < p.fixpoint_tol);
}

#[test]
fn nonlinear_reference_map() {
    let f = perturbed_cat(0.01);
    let g = perturbed_cat(0.012);
    let p = SolverParams { epsilon: 0.05, ..params(&[128, 128]) };
    let q = solve_theorem_A(&f, &g, &p).unwrap();
    assert_passed(&q);
    assert!(q.guard.as_ref().unwrap().c_eps > 0.0);
    assert!(q.v.sup_norm() < 0.05);
}

#[test]
fn guard_refuses_large_ball_for_nonlinear_reference() {
    let f = perturbed_cat(0.01);
    let g = perturbed_cat(0.012);
    let p = SolverParams { epsilon: 0.1, ..params(&[64, 64]) };
    assert!(matches!(solve_theorem_A(&f, &g, &p), Err(SolverError::Guard(_))));
    let q = solve_theorem_A(&f, &g, &SolverParams { enforce_guard: false, ..p }).unwrap();
    assert!(!q.guard.unwrap().measured_ok);
}

#[test]
fn bprime_identical_maps() {
    let f = cat_times_id();
    let q = solve_theorem_Bprime(&f, &f, &FlowSpec::vertical(3), &params(&[16, 16, 16])).unwrap();
    assert!(q.tau_tilde.as_ref().unwrap().iter().all(|&t| t == 0.0));
    assert_eq!(q.v.sup_norm(), 0.0);
    assert_passed(&q);
}

#[test]
fn bprime_suspension_time_shift() {
    let flow = suspension_flow(IntMatrix::cat(), Roof::Constant { value: 1.0 }).unwrap();
    let f = make_flow_time(flow.clone(), 1.0);
    let g = make_flow_time(flow.clone(), 1.02);
    let q = solve_theorem_Bprime(&f, &g, &flow, &params(&[32, 32, 32])).unwrap();
    for &t in q.tau_tilde.as_ref().unwrap() {
        assert!((t - 0.02).abs() < 1e-6, "τ̃ = {t}");
    }
    assert!(q.v.sup_norm() < 1e-6);
    assert_passed(&q);
}

#[test]
fn bprime_variable_fiber_shift() {
    let f = cat_times_id();
    let g = skew(FiberShift::CosWave { amplitude: 0.02, axis: 0 });
    let q = solve_theorem_Bprime(&f, &g, &FlowSpec::vertical(3), &params(&[512, 512, 2])).unwrap();
    assert_passed(&q);
    assert!(q.residual().0 < 1e-6);
    let a_inv = IntMatrix::cat().inverse().unwrap();
    let tau = q.tau_tilde.as_ref().unwrap();
    let grid = q.grid();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &t) in tau.iter().enumerate() {
        let z = grid.node(i);
        let base = TorusPoint::wrapped(Vector::from_slice(&[z.coords()[0], z.coords()[1]]));
        let expected = 0.02 * (TAU * a_inv.act(&base).coords()[0]).cos();
        assert!((t - expected).abs() < 1e-12, "node {i}: {t} vs {expected}");
        lo = lo.min(t);
        hi = hi.max(t);
    }
    assert!(hi - lo > 0.03);
}

#[test]
fn transversal_variant_on_skew_products() {
    let f = cat_times_id();
    for g in [skew(FiberShift::Constant { value: 0.02 }), skew(FiberShift::CosWave { amplitude: 0.02, axis: 0 })] {
        let q = solve_theorem_B_transversal(&f, &g, &params(&[32, 32, 8])).unwrap();
        assert_eq!(q.variant, Variant::B);
        assert!(q.v.sup_norm() < 1e-12);
        assert!((q.k1.unwrap() - 1.0).abs() < 1e-10);
        assert!(q.guard.is_none());
        assert_passed(&q);
    }
    assert!(matches!(
        solve_theorem_B_transversal(&cat(), &cat(), &params(&[16, 16])),
        Err(SolverError::Unsupported(_))
    ));
}

#[test]
fn corrupted_solution_fails_verification() {
    let f = cat();
    let g = perturbed_cat(0.01);
    let q = solve_theorem_A(&f, &g, &params(&[64, 64])).unwrap();
    assert!(q.verification.residual_ok);
    let mut bad = q.clone();
    bad.v.values_mut()[123][0] += 0.05;
    let report = verify_quasi_conjugacy(&bad, &f, &g).unwrap();
    assert!(!report.residual_ok && !report.passed);
    assert!(report.raw.sup > 0.01);
}

#[test]
fn leaf_conjugacy_for_linear_center() {
    let f = cat_times_id();
    let g = skew(FiberShift::Constant { value: 0.02 });
    let q = solve_theorem_A(&f, &g, &params(&[32, 32, 32])).unwrap();
    let leaf = verify_leaf_conjugacy(&q, &f, &g, 200).unwrap();
    assert!(leaf.max_leaf_deviation < 1e-12);
    assert!(leaf.injectivity_proxy > 0.99);
}

#[test]
fn leaf_conjugacy_for_tilted_center() {
    let f = cat_times_id();
    let g = make_perturbed(f.clone(), VectorField::skew_tilt(), 0.01).unwrap();
    let q = solve_theorem_A(&f, &g, &params(&[64, 64, 64])).unwrap();
    assert!(q.verification.displacement_ok && q.verification.center_ok);
    let leaf = verify_leaf_conjugacy(&q, &f, &g, 100).unwrap();
    assert!(leaf.max_leaf_deviation < 1e-5, "{leaf:?}");
    assert!(leaf.injectivity_proxy > 0.0);
}

#[test]
fn empirical_contraction_for_nearby_maps() {
    let f = perturbed_cat(0.01);
    let g = perturbed_cat(0.012);
    let p = SolverParams { epsilon: 0.1, ..params(&[64, 64]) };
    let grid = p.grid(2).unwrap();
    let s = splitting::estimate_splitting(&f, 40, &grid).unwrap();
    let r = empirical_contraction(&f, &Composite::new(&g, &f), &s, &p, 20).unwrap();
    assert!(r.contracts() && r.maps_into_ball(), "{r:?}");
}

#[test]
fn report_round_trips_through_json() {
    let f = cat();
    let g = perturbed_cat(0.01);
    let q = solve_theorem_A(&f, &g, &params(&[32, 32])).unwrap();
    let report = q.report();
    let text = serde_json::to_string(&report).unwrap();
    let back: SolutionReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.verification, report.verification);
    assert_eq!(back.params, report.params);
    assert_eq!(back.contraction_trace, report.contraction_trace);
}

#[test]
fn parameter_validation() {
    let f = cat();
    for p in [
        SolverParams { epsilon: 0.6, ..SolverParams::default() },
        SolverParams { epsilon: 0.0, ..SolverParams::default() },
        SolverParams { fixpoint_tol: -1.0, ..SolverParams::default() },
        SolverParams { resolution: Some(vec![32, 32, 32]), ..SolverParams::default() },
    ] {
        assert!(matches!(solve_theorem_A(&f, &f, &p), Err(SolverError::Params(_))));
    }
    let three = cat_times_id();
    assert!(matches!(solve_theorem_A(&f, &three, &SolverParams::default()), Err(SolverError::Params(_))));
}
