use dynamics_catalog::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_geometry::{dist, wrap, TorusPoint, Vector};

fn random_points(dim: usize, n: usize, seed: u64) -> Vec<TorusPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let c: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            wrap(&c).unwrap()
        })
        .collect()
}

fn cat() -> MapSpec {
    make_linear_ph(IntMatrix::cat()).unwrap()
}

fn a_times_id() -> MapSpec {
    make_skew_product(IntMatrix::cat(), FiberShift::Constant { value: 0.0 }).unwrap()
}

fn catalog() -> Vec<(&'static str, MapSpec)> {
    let unit = suspension_flow(IntMatrix::cat(), Roof::Constant { value: 1.0 }).unwrap();
    let wavy = suspension_flow(IntMatrix::cat(), Roof::CosWave { mean: 1.0, amplitude: 0.2, axis: 0 }).unwrap();
    vec![
        ("cat", cat()),
        ("cat_perturbed", make_perturbed(cat(), VectorField::cat_shear(), 0.01).unwrap()),
        ("a_times_id", a_times_id()),
        ("a_times_rotation", make_skew_product(IntMatrix::cat(), FiberShift::Constant { value: 0.02 }).unwrap()),
        ("skew_cos", make_skew_product(IntMatrix::cat(), FiberShift::CosWave { amplitude: 0.02, axis: 0 }).unwrap()),
        ("skew_perturbed", make_perturbed(a_times_id(), VectorField::skew_mix(), 0.01).unwrap()),
        ("suspension_time1", make_flow_time(unit.clone(), 1.0)),
        ("suspension_time1.02", make_flow_time(unit, 1.02)),
        ("suspension_wavy", make_flow_time(wavy, 0.7)),
        ("a_plus_id2", make_linear_ph(IntMatrix::cat().direct_sum_identity(2)).unwrap()),
    ]
}

#[test]
fn inverse_round_trips() {
    for (name, f) in catalog() {
        let geom = f.geometry();
        for x in random_points(f.dim(), 1000, 7) {
            let back = f.inverse(&f.forward(&x));
            assert!(geom.dist(&back, &x) < 1e-10, "{name}: {x:?} -> {back:?}");
        }
    }
}

#[test]
fn differentials_nonsingular() {
    for (name, f) in catalog() {
        for x in random_points(f.dim(), 200, 8) {
            let det = f.differential(&x).determinant();
            assert!(det.abs() > 1e-6, "{name}: det {det}");
        }
    }
}

#[test]
fn differentials_match_differences() {
    for (name, f) in catalog() {
        let geom = f.geometry();
        for x in random_points(f.dim(), 50, 9) {
            let d = f.differential(&x);
            let fx = f.forward(&x);
            let h = 1e-6;
            for j in 0..f.dim() {
                let e = Vector::axis(f.dim(), j) * h;
                let plus = geom.displacement(&fx, &f.forward(&x.translate(&e)));
                let minus = geom.displacement(&fx, &f.forward(&x.translate(&-e)));
                for i in 0..f.dim() {
                    let fd = (plus[i] - minus[i]) / (2.0 * h);
                    assert!((fd - d[(i, j)]).abs() < 1e-5, "{name} ({i},{j}): {fd} vs {}", d[(i, j)]);
                }
            }
        }
    }
}

#[test]
fn linear_differential_is_the_matrix() {
    let f = cat();
    for x in random_points(2, 20, 3) {
        assert_eq!(f.differential(&x), IntMatrix::cat().to_float());
    }
}

#[test]
fn cat_eigenvalues() {
    let ev = IntMatrix::cat().to_float().symmetric_eigenvalues();
    let mut ev: Vec<f64> = ev.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    assert!((ev[0] - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
    assert!((ev[1] - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
    assert!((ev[0] * ev[1] - 1.0).abs() < 1e-12);
}

#[test]
fn distance_examples() {
    let f = a_times_id();
    let g = make_skew_product(IntMatrix::cat(), FiberShift::Constant { value: 0.02 }).unwrap();
    assert_eq!(c0_distance(&f, &f), 0.0);
    assert!((c0_distance(&f, &g) - 0.02).abs() < 1e-12);
    assert_eq!(c0_distance(&f, &g), c0_distance(&g, &f));
    assert!(c1_distance(&f, &g) - 0.02 < 1e-12);
}

#[test]
fn perturbation_distances_bounded_by_amplitude() {
    let field = VectorField::cat_shear();
    for a in [0.001, 0.01, 0.05] {
        let g = make_perturbed(cat(), field.clone(), a).unwrap();
        let c0 = c0_distance(&cat(), &g);
        assert!(c0 <= a * field.sup_bound() + 1e-15, "{c0}");
        // ‖Dg − Df‖ = a‖Dfield∘f · A‖ ≤ a · 2π · ‖A‖
        let c1 = c1_distance(&cat(), &g);
        let bound = a * (field.sup_bound() + std::f64::consts::TAU * operator_norm(&IntMatrix::cat().to_float()));
        assert!(c1 <= bound + 1e-12, "{c1} > {bound}");
    }
}

#[test]
fn suspension_examples() {
    let phi = suspension_flow(IntMatrix::cat(), Roof::Constant { value: 1.0 }).unwrap();
    let p = wrap(&[0.2, 0.7, 0.4]).unwrap();
    let q = phi.time_map(&p, 1.0);
    let a = IntMatrix::cat().act(&wrap(&[0.2, 0.7]).unwrap());
    assert!(dist(&q, &wrap(&[a[0], a[1], 0.4]).unwrap()) < 1e-12);
    assert_eq!(phi.time_map(&p, 0.0), p);
    let q = phi.time_map(&p, 0.25);
    assert!(dist(&q, &wrap(&[0.2, 0.7, 0.65]).unwrap()) < 1e-15);
    let geom = phi.geometry();
    let lhs = phi.time_map(&phi.time_map(&p, 0.6), 0.7);
    assert!(geom.dist(&lhs, &phi.time_map(&p, 1.3)) < 1e-8);
    assert!(suspension_flow(IntMatrix::cat(), Roof::Constant { value: 0.0 }).is_err());
    assert!(suspension_flow(IntMatrix::identity(2), Roof::Constant { value: 1.0 }).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn flow_group_law(
        c in prop::array::uniform3(0.0f64..1.0),
        s in -2.0f64..2.0,
        t in -2.0f64..2.0,
        wavy in any::<bool>(),
    ) {
        let roof = if wavy {
            Roof::CosWave { mean: 1.0, amplitude: 0.3, axis: 1 }
        } else {
            Roof::Constant { value: 1.0 }
        };
        for phi in [suspension_flow(IntMatrix::cat(), roof).unwrap(), FlowSpec::vertical(3)] {
            let p = wrap(&c).unwrap();
            let geom = phi.geometry();
            let lhs = phi.time_map(&phi.time_map(&p, s), t);
            let rhs = phi.time_map(&p, s + t);
            prop_assert!(geom.dist(&lhs, &rhs) < 1e-8);
        }
    }
}
