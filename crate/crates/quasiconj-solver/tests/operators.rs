use std::f64::consts::TAU;

use dynamics_catalog::*;
use proptest::prelude::*;
use quasiconj_solver::*;
use section_space::{sample_section, Section};
use splitting::{estimate_splitting, exact_splitting, Splitting, Which};
use torus_geometry::{Grid, TorusPoint, Vector};

fn cat() -> MapSpec {
    make_linear_ph(IntMatrix::cat()).unwrap()
}

fn perturbed_cat(a: f64) -> MapSpec {
    make_perturbed(cat(), VectorField::cat_shear(), a).unwrap()
}

fn skew(c: f64) -> MapSpec {
    make_skew_product(IntMatrix::cat(), FiberShift::Constant { value: c }).unwrap()
}

fn exact(f: &MapSpec) -> Splitting {
    exact_splitting(f, (1.0, 1.0)).unwrap()
}

fn vertical_shift(c: f64) -> Translation {
    Translation { shift: Vector::from_slice(&[0.0, 0.0, c]) }
}

fn ops<'a>(f: &'a MapSpec, h: &dyn PointMap, s: &'a Splitting, grid: &Grid) -> Operators<'a> {
    Operators::new(f, h, s, grid, NeumannDepth::Auto, 1e-12).unwrap()
}

#[test]
fn beta_of_zero_is_zero() {
    let grid = Grid::uniform(2, 32).unwrap();
    let z = Section::zeros(&grid);
    for f in [cat(), perturbed_cat(0.01)] {
        assert_eq!(op_beta(&f, &z).unwrap().sup_norm(), 0.0);
    }
}

#[test]
fn beta_of_linear_map_is_matrix_action() {
    let grid = Grid::uniform(2, 32).unwrap();
    let w = sample_section(&grid, |_| Vector::from_slice(&[0.1, 0.0])).unwrap();
    let b = op_beta(&cat(), &w).unwrap();
    for v in b.values() {
        assert_eq!(v.as_slice(), &[0.2, 0.1]);
    }
    let w = random_section(&grid, 3).scale(0.2);
    let b = op_beta(&cat(), &w).unwrap();
    let a = IntMatrix::cat();
    for i in 0..grid.len() {
        let x = grid.node(i);
        assert_eq!(b.values()[i], a.apply(&w.eval_vector(&cat().inverse(&x))));
    }
    assert_eq!(op_F(&cat(), &w).unwrap(), b);
}

#[test]
fn beta_rejects_large_sections() {
    let grid = Grid::uniform(2, 8).unwrap();
    let w = Section::constant(&grid, Vector::from_slice(&[0.4, 0.4])).unwrap();
    assert!(matches!(op_beta(&perturbed_cat(0.01), &w), Err(SolverError::Injectivity(_))));
}

#[test]
fn f_operator_examples() {
    let grid = Grid::uniform(3, 8).unwrap();
    assert_eq!(op_F(&skew(0.0), &Section::zeros(&grid)).unwrap().sup_norm(), 0.0);
    let c = Vector::from_slice(&[0.0, 0.0, 0.3]);
    let w = Section::constant(&grid, c).unwrap();
    for v in op_F(&skew(0.0), &w).unwrap().values() {
        assert_eq!(*v, c);
    }
}

#[test]
fn eta_vanishes_exactly_for_linear_maps() {
    let grid = Grid::uniform(2, 32).unwrap();
    let w = random_section(&grid, 11).scale(0.3);
    assert_eq!(op_eta(&cat(), &w).unwrap(), Section::zeros(&grid));
    let grid3 = Grid::uniform(3, 8).unwrap();
    let w3 = random_section(&grid3, 12).scale(0.3);
    assert_eq!(op_eta(&skew(0.02), &w3).unwrap(), Section::zeros(&grid3));
    let f = perturbed_cat(0.01);
    assert_eq!(op_eta(&f, &Section::zeros(&grid)).unwrap().sup_norm(), 0.0);
}

#[test]
fn eta_lipschitz_constant_shrinks_with_radius() {
    let f = perturbed_cat(0.01);
    let grid = Grid::uniform(2, 32).unwrap();
    let mut last = f64::INFINITY;
    for eps in [0.1, 0.05, 0.025] {
        let c = measure_c_eps(&f, eps, 10_000, 1);
        assert!(c < last, "C({eps}) = {c} not below {last}");
        last = c;
        for seed in 0..5 {
            let w = random_section(&grid, seed).scale(eps);
            let w2 = random_section(&grid, seed + 100).scale(eps);
            let lhs = (&op_eta(&f, &w).unwrap() - &op_eta(&f, &w2).unwrap()).sup_norm();
            assert!(lhs <= c * (&w - &w2).sup_norm(), "ε={eps}: {lhs}");
        }
    }
    assert_eq!(measure_c_eps(&cat(), 0.1, 100, 1), 0.0);
}

#[test]
fn j_of_identity_is_identity() {
    let grid = Grid::uniform(2, 32).unwrap();
    let f = perturbed_cat(0.01);
    let s = estimate_splitting(&f, 40, &grid).unwrap();
    let w = random_section(&grid, 4);
    let id = Translation::identity(2);
    assert!(op_Jh(&id, &s, &w).unwrap().sup_distance(&w) < 1e-12);
    let o = ops(&f, &id, &s, &grid);
    assert!(o.J(&w).unwrap().sup_distance(&w) < 1e-12);
    assert!((o.rates().j_norm - 1.0).abs() < 1e-9);
}

#[test]
fn j_is_composition_for_constant_splittings() {
    let f = skew(0.0);
    let s = exact(&f);
    let grid = Grid::new(&[8, 8, 50]).unwrap();
    let w = sample_section(&grid, |x| Vector::from_slice(&[(TAU * x[2]).sin(), 0.0, 0.0])).unwrap();
    let h = vertical_shift(0.02);
    let expected = sample_section(&grid, |x| Vector::from_slice(&[(TAU * (x[2] + 0.02)).sin(), 0.0, 0.0])).unwrap();
    assert!(op_Jh(&h, &s, &w).unwrap().sup_distance(&expected) < 1e-12);
    let o = ops(&f, &h, &s, &grid);
    assert!(o.J(&w).unwrap().sup_distance(&expected) < 1e-12);
    let r = o.rates();
    let lambda = s.constants().lambda;
    assert!((r.j_norm - 1.0).abs() < 1e-12 && (r.j_inv_norm - 1.0).abs() < 1e-12);
    assert!(r.j_norm <= 2f64.min((1.0 + 1.0 / lambda) / 2.0));
    let back = o.J_inverse(&o.J(&w).unwrap()).unwrap();
    assert!(back.sup_distance(&w) < 1e-12);
}

#[test]
fn theta_examples() {
    let f = skew(0.0);
    let s = exact(&f);
    let grid = Grid::uniform(3, 8).unwrap();
    let h = vertical_shift(0.02);
    let target = Vector::from_slice(&[0.0, 0.0, 0.02]);
    for seed in 0..3 {
        let w = random_section(&grid, seed).scale(0.2);
        for v in op_thetah(&h, &s, &w).unwrap().values() {
            assert!((*v - target).norm() < 1e-14);
        }
        let o = ops(&f, &h, &s, &grid);
        for v in o.theta(&w).unwrap().values() {
            assert!((*v - target).norm() < 1e-14);
        }
    }
    let id = Translation::identity(3);
    let w = random_section(&grid, 5).scale(0.2);
    assert!(op_thetah(&id, &s, &w).unwrap().sup_norm() < 1e-15);
    assert_eq!(measure_k_h(&id, &s, 100, 0), 0.0);
}

#[test]
fn theta_of_zero_is_displacement_of_h() {
    let f = perturbed_cat(0.01);
    let g = perturbed_cat(0.02);
    let grid = Grid::uniform(2, 32).unwrap();
    let s = estimate_splitting(&f, 40, &grid).unwrap();
    let h = Composite::new(&g, &f);
    let theta = op_thetah(&h, &s, &Section::zeros(&grid)).unwrap();
    for i in 0..grid.len() {
        let x = grid.node(i);
        assert!((theta.values()[i] - x.displacement_to(&h.forward(&x))).norm() < 1e-15);
    }
}

#[test]
fn k_h_shrinks_with_perturbation() {
    let f = perturbed_cat(0.01);
    let grid = Grid::uniform(2, 128).unwrap();
    let s = estimate_splitting(&f, 40, &grid).unwrap();
    let mut last = f64::INFINITY;
    for a in [0.004, 0.002, 0.001] {
        let g = make_perturbed(f.clone(), VectorField::cat_shear(), a).unwrap();
        let k = measure_k_h(&Composite::new(&g, &f), &s, 10_000, 3);
        assert!(k > 0.0 && k < last, "K = {k} at amplitude {a}");
        last = k;
    }
}

#[test]
fn precomputed_operators_match_direct_evaluation() {
    let f = perturbed_cat(0.01);
    let g = perturbed_cat(0.015);
    let grid = Grid::uniform(2, 32).unwrap();
    let s = estimate_splitting(&f, 40, &grid).unwrap();
    let h = Composite::new(&g, &f);
    let o = ops(&f, &h, &s, &grid);
    let w = random_section(&grid, 8).scale(0.1);
    assert!(o.beta(&w).unwrap().sup_distance(&op_beta(&f, &w).unwrap()) < 1e-12);
    assert!(o.F(&w).unwrap().sup_distance(&op_F(&f, &w).unwrap()) < 1e-12);
    assert!(o.eta(&w).unwrap().sup_distance(&op_eta(&f, &w).unwrap()) < 1e-12);
    assert!(o.J(&w).unwrap().sup_distance(&op_Jh(&h, &s, &w).unwrap()) < 1e-12);
    assert!(o.J_inverse(&w).unwrap().sup_distance(&op_Jh_inverse(&h, &s, &w).unwrap()) < 1e-12);
    assert!(o.theta(&w).unwrap().sup_distance(&op_thetah(&h, &s, &w).unwrap()) < 1e-12);
    assert!(o.P(&w).unwrap().sup_distance(&op_Ph(&f, &h, &s, &w).unwrap()) < 1e-12);
    assert!(o.Phi(&w).unwrap().sup_distance(&op_Phi(&f, &h, &s, &w).unwrap()) < 1e-12);
}

#[test]
fn p_inverse_inverts_p() {
    let f = cat();
    let s = exact(&f);
    let grid = Grid::uniform(2, 64).unwrap();
    let shift = Translation { shift: Vector::from_slice(&[1.0 / 64.0, 0.0]) };
    for h in [&Translation::identity(2) as &dyn PointMap, &shift] {
        let o = ops(&f, h, &s, &grid);
        for seed in 0..20 {
            let w = random_section(&grid, seed);
            let back = o.P(&o.P_inverse(&w).unwrap()).unwrap();
            assert!(back.sup_distance(&w) < 1e-10, "seed {seed}: {}", back.sup_distance(&w));
        }
    }
    let f = skew(0.0);
    let s = exact(&f);
    let grid = Grid::uniform(3, 8).unwrap();
    let o = ops(&f, &vertical_shift(0.0), &s, &grid);
    for seed in 0..5 {
        let w = random_section(&grid, seed);
        assert!(o.P(&o.P_inverse(&w).unwrap()).unwrap().sup_distance(&w) < 1e-10);
    }
}

#[test]
fn p_inverse_on_center_sections_is_minus_identity() {
    let f = skew(0.0);
    let s = exact(&f);
    let grid = Grid::uniform(3, 8).unwrap();
    let w = sample_section(&grid, |x| Vector::from_slice(&[0.0, 0.0, (TAU * x[0]).cos()])).unwrap();
    let r = op_Ph_inverse(&f, &Translation::identity(3), &s, &w, NeumannDepth::Auto).unwrap();
    assert!((&r + &w).sup_norm() < 1e-15);
}

#[test]
fn p_inverse_norm_respects_block_bound() {
    let f = cat();
    let s = exact(&f);
    let lambda = s.constants().lambda;
    let bound = 2.0 / (1.0 - lambda);
    assert!((bound - 3.236).abs() < 1e-3);
    let grid = Grid::uniform(2, 64).unwrap();
    let o = ops(&f, &Translation::identity(2), &s, &grid);
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let w = random_section(&grid, seed);
        let w = w.scale(1.0 / o.norm1(&w));
        worst = worst.max(o.norm1(&o.P_inverse(&w).unwrap()));
    }
    assert!(worst <= bound, "measured {worst}");
    assert!(o.rates().p_inverse_bound() <= bound + 1e-12);
}

#[test]
fn p_inverse_of_constant_sections() {
    let f = cat();
    let s = exact(&f);
    let grid = Grid::uniform(2, 16).unwrap();
    let frame = s.frame_at(&TorusPoint::origin(2));
    let es = Vector::from_slice(frame.basis_s.column(0).as_slice());
    let eu = Vector::from_slice(frame.basis_u.column(0).as_slice());
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let w = Section::constant(&grid, es + eu).unwrap();
    let r = op_Ph_inverse(&f, &Translation::identity(2), &s, &w, NeumannDepth::Auto).unwrap();
    let expected = es * phi - eu * (phi - 1.0);
    for v in r.values() {
        assert!((*v - expected).norm() < 1e-11);
    }
    let short = op_Ph_inverse(&f, &Translation::identity(2), &s, &w, NeumannDepth::Fixed(1)).unwrap();
    let lambda = 1.0 / (phi * phi);
    let expected = es * (1.0 + lambda) - eu * lambda;
    for v in short.values() {
        assert!((*v - expected).norm() < 1e-12);
    }
}

#[test]
fn operators_refuse_h_far_from_identity() {
    let f = cat();
    let s = exact(&f);
    let grid = Grid::uniform(2, 16).unwrap();
    struct Stretch;
    impl PointMap for Stretch {
        fn dim(&self) -> usize {
            2
        }
        fn forward(&self, x: &TorusPoint) -> TorusPoint {
            IntMatrix::cat().act(x)
        }
        fn inverse(&self, y: &TorusPoint) -> TorusPoint {
            IntMatrix::cat().inverse().unwrap().act(y)
        }
    }
    let err = Operators::new(&f, &Stretch, &s, &grid, NeumannDepth::Auto, 1e-12).err().unwrap();
    assert!(matches!(err, SolverError::Injectivity(_)));
}

#[test]
fn phi_examples() {
    let grid = Grid::uniform(2, 16).unwrap();
    let f = cat();
    let s = exact(&f);
    let w = random_section(&grid, 2).scale(0.1);
    assert_eq!(op_Phi(&f, &Translation::identity(2), &s, &w).unwrap().sup_norm(), 0.0);

    let f = skew(0.0);
    let s = exact(&f);
    let grid = Grid::uniform(3, 8).unwrap();
    let h = vertical_shift(0.02);
    let phi0 = op_Phi(&f, &h, &s, &Section::zeros(&grid)).unwrap();
    let target = Vector::from_slice(&[0.0, 0.0, 0.02]);
    for v in phi0.values() {
        assert!((*v - target).norm() < 1e-15);
    }
    let again = op_Phi(&f, &h, &s, &phi0).unwrap();
    assert!(again.sup_distance(&phi0) < 1e-15);
    let parts = phi0.split(&s);
    assert!(parts.v_part.sup_norm() < 1e-15);
    assert!(parts.u_part.project(&section_space::NodeProjectors::new(&s, &grid), Which::C).sup_distance(&phi0) < 1e-15);
}

#[test]
fn contraction_on_linear_models_is_tiny() {
    let f = skew(0.0);
    let g = skew(0.02);
    let s = exact(&f);
    let params = SolverParams { epsilon: 0.1, resolution: Some(vec![8, 8, 8]), ..Default::default() };
    let r = empirical_contraction(&f, &Composite::new(&g, &f), &s, &params, 50).unwrap();
    assert!(r.max_ratio < 1e-12, "{r:?}");
    assert!(r.maps_into_ball());
}

#[test]
fn contraction_on_perturbed_cat() {
    let f = perturbed_cat(0.01);
    let g = perturbed_cat(0.012);
    let params = SolverParams { epsilon: 0.1, resolution: Some(vec![64, 64]), ..Default::default() };
    let grid = params.grid(2).unwrap();
    let s = estimate_splitting(&f, 40, &grid).unwrap();
    let r = empirical_contraction(&f, &Composite::new(&g, &f), &s, &params, 200).unwrap();
    assert!(r.contracts() && r.maps_into_ball(), "{r:?}");
    assert!(r.max_ratio > 0.0);
}

fn linear_setup() -> (MapSpec, Splitting, Grid) {
    let f = perturbed_cat(0.01);
    let grid = Grid::uniform(2, 16).unwrap();
    let s = estimate_splitting(&f, 40, &grid).unwrap();
    (f, s, grid)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_are_linear(seed in any::<u64>(), a in -2.0f64..2.0) {
        let (f, s, grid) = linear_setup();
        let g = perturbed_cat(0.013);
        let h = Composite::new(&g, &f);
        let o = ops(&f, &h, &s, &grid);
        let x = random_section(&grid, seed);
        let y = random_section(&grid, seed ^ 0xff);
        let sum = &x + &y;
        type Op<'b> = Box<dyn Fn(&Section) -> Section + 'b>;
        let list: Vec<Op> = vec![
            Box::new(|w| o.F(w).unwrap()),
            Box::new(|w| o.J(w).unwrap()),
            Box::new(|w| o.J_inverse(w).unwrap()),
            Box::new(|w| o.P(w).unwrap()),
            Box::new(|w| o.P_inverse(w).unwrap()),
        ];
        for op in &list {
            let additive = op(&sum).sup_distance(&(&op(&x) + &op(&y)));
            let homogeneous = op(&x.scale(a)).sup_distance(&op(&x).scale(a));
            prop_assert!(additive < 1e-10 && homogeneous < 1e-10);
        }
    }
}
