use dynamics_catalog::*;
use entropy_foliation::*;
use proptest::prelude::*;
use splitting::exact_splitting;
use torus_geometry::{TorusPoint, Vector};

fn log_mu() -> f64 {
    ((3.0 + 5f64.sqrt()) / 2.0).ln()
}

fn cat() -> MapSpec {
    make_linear_ph(IntMatrix::cat()).unwrap()
}

fn cat_times_id() -> MapSpec {
    make_linear_ph(IntMatrix::cat().direct_sum_identity(1)).unwrap()
}

fn point(c: &[f64]) -> TorusPoint {
    TorusPoint::new(c).unwrap()
}

#[test]
fn cat_disk_grows_at_log_mu() {
    let f = cat();
    let s = exact_splitting(&f, (0.5, 1.5)).unwrap();
    let g = iterate_unstable_disk(&f, &s, &point(&[0.3, 0.8]), 0.1, 15, SEGMENT_CAP).unwrap();
    assert_eq!(g.dim_u, 1);
    assert!(!g.truncated);
    assert!((g.volumes[0] - 0.2).abs() < 1e-12);
    assert!((g.slope - log_mu()).abs() < 0.01, "{}", g.slope);
}

#[test]
fn disk_under_the_identity_keeps_its_length() {
    let id = make_linear_ph(IntMatrix::identity(2)).unwrap();
    let s = exact_splitting(&cat(), (0.5, 1.5)).unwrap();
    let g = iterate_unstable_disk(&id, &s, &point(&[0.1, 0.2]), 0.1, 6, SEGMENT_CAP).unwrap();
    for v in &g.volumes {
        assert!((v - 0.2).abs() < 1e-12);
    }
    assert!(g.slope.abs() < 1e-12);
}

#[test]
fn fiber_rotation_does_not_change_disk_growth() {
    let f = cat_times_id();
    let g = make_skew_product(IntMatrix::cat(), FiberShift::Constant { value: 0.02 }).unwrap();
    let x = point(&[0.4, 0.1, 0.7]);
    let a = iterate_unstable_disk(&f, &splitting_for(&f).unwrap(), &x, 0.1, 10, SEGMENT_CAP).unwrap();
    let b = iterate_unstable_disk(&g, &splitting_for(&g).unwrap(), &x, 0.1, 10, SEGMENT_CAP).unwrap();
    assert!((a.slope - b.slope).abs() < 0.005);
}

#[test]
fn two_dimensional_disks_grow_at_the_area_rate() {
    // inverse companion matrix of x³ − x − 1: a complex unstable pair
    let m = IntMatrix::from_rows(&[vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 0]]).unwrap().inverse().unwrap();
    let f = make_linear_ph(m).unwrap();
    let s = exact_splitting(&f, (0.999, 1.001)).unwrap();
    assert_eq!(s.dims(), (1, 0, 2));
    let g = iterate_unstable_disk(&f, &s, &point(&[0.2, 0.5, 0.9]), 0.1, 10, SEGMENT_CAP).unwrap();
    assert_eq!(g.dim_u, 2);
    let plastic: f64 = 1.324_717_957_244_746;
    assert!((g.slope - plastic.ln()).abs() < 0.01, "{}", g.slope);
}

#[test]
fn disks_need_one_or_two_unstable_directions() {
    // companion matrix of x⁴ − x − 1: three expanding directions
    let m = IntMatrix::from_rows(&[vec![0, 1, 0, 0], vec![0, 0, 1, 0], vec![0, 0, 0, 1], vec![1, 1, 0, 0]]).unwrap();
    let f = make_linear_ph(m).unwrap();
    let s = exact_splitting(&f, (0.9, 1.0)).unwrap();
    assert_eq!(s.dims(), (1, 0, 3));
    assert!(matches!(
        iterate_unstable_disk(&f, &s, &point(&[0.1, 0.2, 0.3, 0.4]), 0.1, 4, SEGMENT_CAP),
        Err(EntropyError::Unsupported(_))
    ));
    let cat_s = exact_splitting(&cat(), (0.5, 1.5)).unwrap();
    assert!(iterate_unstable_disk(&cat(), &cat_s, &point(&[0.1, 0.2]), 0.3, 4, SEGMENT_CAP).is_err());
}

#[test]
fn chi_u_does_not_depend_on_the_radius() {
    let f = cat();
    let s = exact_splitting(&f, (0.5, 1.5)).unwrap();
    let points = [point(&[0.1, 0.2]), point(&[0.7, 0.45])];
    let c = chi_u(&f, &s, &points, 0.1, 12).unwrap();
    assert!(c.spread < 0.005, "{c:?}");
    assert!((c.value - log_mu()).abs() < 0.01, "{c:?}");
}

#[test]
fn identity_has_no_separated_growth() {
    let id = make_linear_ph(IntMatrix::identity(2)).unwrap();
    let b = bowen_entropy(&id, 6, &[0.1], 1 << 12).unwrap();
    let counts = &b.series[0].counts;
    assert!(counts.iter().all(|&c| c == counts[0]));
    assert_eq!(b.estimate, 0.0);
}

#[test]
fn cat_separated_sets_grow_at_log_mu() {
    let b = bowen_entropy(&cat(), 12, &[0.1], 1 << 18).unwrap();
    assert!(!b.flagged);
    assert!(b.estimate <= log_mu() + 0.01);
    assert!((b.estimate - log_mu()).abs() < 0.05, "{b:?}");
}

#[test]
fn separated_counts_are_reproducible() {
    let a = bowen_entropy_seeded(&cat(), 6, &[0.2], 1 << 12, 7).unwrap();
    let b = bowen_entropy_seeded(&cat(), 6, &[0.2], 1 << 12, 7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bowen_rejects_bad_input() {
    assert!(bowen_entropy(&cat(), 1, &[0.1], 1 << 10).is_err());
    assert!(bowen_entropy(&cat(), 5, &[], 1 << 10).is_err());
    assert!(bowen_entropy(&cat(), 5, &[0.6], 1 << 10).is_err());
    assert!(bowen_entropy(&cat(), 5, &[0.1], 2).is_err());
}

#[test]
fn thomas_bracket_examples() {
    let h = log_mu();
    let b = thomas_bracket(h, &[0.0; 5]).unwrap();
    assert_eq!((b.low, b.high, b.low_single, b.high_single), (h, h, h, h));

    let b = thomas_bracket(h, &[0.02; 5]).unwrap();
    assert!((b.low - 1.0013).abs() < 5e-5 && (b.high - 1.0013).abs() < 5e-5);
    assert!((b.low_single - 0.9817).abs() < 5e-5 && (b.high_single - 0.9817).abs() < 5e-5);

    let b = thomas_bracket(h, &[-0.02, 0.0, 0.02]).unwrap();
    assert!((b.low - 0.9243).abs() < 5e-5 && (b.high - 1.0013).abs() < 5e-5);
    assert!(b.squared_contains(h, 0.0) && b.single_contains(h, 0.0));
    assert!(!b.squared_contains(1.01, 1e-3));
}

#[test]
fn thomas_bracket_rejects_bad_input() {
    assert!(thomas_bracket(0.9, &[]).is_err());
    assert!(thomas_bracket(0.9, &[f64::NAN]).is_err());
    assert!(thomas_bracket(0.9, &[-1.0]).is_err());
}

#[test]
fn constancy_experiment_on_a_perturbed_cat() {
    let g = make_perturbed(cat(), VectorField::cat_shear(), 0.01).unwrap();
    let params = EntropyParams { n_max: 10, chi_points: 1, bowen_budget: 1 << 16, ..EntropyParams::default() };
    let r = entropy_local_constancy_experiment(&cat(), &[("cat+0.01".into(), g)], &params).unwrap();
    assert_eq!(r.perturbed.len(), 1);
    assert!(r.max_chi_deviation < 0.005, "{r:?}");
    assert!(r.max_bowen_deviation < 0.05, "{r:?}");
    assert!((r.reference.chi.value - log_mu()).abs() < 0.01);
    let text = serde_json::to_string(&r).unwrap();
    let back: ConstancyReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}

#[test]
fn entropy_params_validation() {
    assert!(EntropyParams::default().validate().is_ok());
    for bad in [
        EntropyParams { r: 0.3, ..EntropyParams::default() },
        EntropyParams { n_max: 1, ..EntropyParams::default() },
        EntropyParams { chi_points: 0, ..EntropyParams::default() },
        EntropyParams { epsilon_list: vec![], ..EntropyParams::default() },
        EntropyParams { epsilon_list: vec![0.5], ..EntropyParams::default() },
    ] {
        assert!(bad.validate().is_err(), "{bad:?}");
    }
    let parsed: Result<EntropyParams, _> = serde_json::from_str(r#"{"radius": 0.1}"#);
    assert!(parsed.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thomas_bracket_is_ordered(h in 0.0..2.0f64, taus in prop::collection::vec(-0.5..0.5f64, 1..20)) {
        let b = thomas_bracket(h, &taus).unwrap();
        prop_assert!(b.low <= b.high);
        prop_assert!(b.low_single <= b.high_single);
        let (a, c) = (1.0 + b.tau_min, 1.0 + b.tau_max);
        prop_assert!((b.low - a * b.low_single).abs() <= 1e-12 * (1.0 + h));
        prop_assert!((b.high - c * b.high_single).abs() <= 1e-12 * (1.0 + h));
    }

    #[test]
    fn vertical_holonomies_invert(x in 0.0..1.0f64, y in 0.0..1.0f64, z0 in 0.0..1.0f64, dz in -0.45..0.45f64) {
        let up = Vector::axis(3, 2);
        let a = Transversal::new(point(&[0.5, 0.5, z0]), up).unwrap();
        let b = Transversal::new(point(&[0.1, 0.9, (z0 + dz).rem_euclid(1.0)]), up).unwrap();
        let there = HolonomySpec { source: a, target: b, leaf: CenterField::Constant(up) };
        let back = HolonomySpec { source: b, target: a, leaf: CenterField::Constant(up) };
        let p = point(&[x, y, z0]);
        let q = holonomy_map(&there, &p).unwrap();
        prop_assert!(b.height(&q).abs() < 1e-12);
        let r = holonomy_map(&back, &q).unwrap();
        prop_assert!(r.displacement_to(&p).norm() < 1e-12);
    }

    #[test]
    fn polyline_pieces_partition_the_volume(
        pts in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 2..12),
        size in 0.005..0.2f64,
    ) {
        let w = Manifold::Polyline(pts.iter().map(|&(a, b)| point(&[a, b])).collect());
        let total: f64 = w.pieces(size).iter().map(|p| p.1).sum();
        prop_assert!((total - w.volume()).abs() < 1e-12);
        for (c, _) in w.pieces(size) {
            prop_assert!(w.distance_to(&c) < 1e-12);
        }
    }
}
