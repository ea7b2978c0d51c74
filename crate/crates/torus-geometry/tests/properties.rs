use proptest::prelude::*;
use torus_geometry::{dist, exp_inv, exp_map, wrap, TangentVector, TorusPoint, Vector};

fn point(dim: usize) -> impl Strategy<Value = TorusPoint> {
    prop::collection::vec(-3.0f64..3.0, dim).prop_map(|c| wrap(&c).unwrap())
}

fn small_vector(dim: usize, r: f64) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-1.0f64..1.0, dim).prop_map(move |c| {
        let v = Vector::from_slice(&c);
        let n = v.norm();
        if n > r {
            v * (r / n)
        } else {
            v
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exp_round_trip((x, v) in (2usize..=3).prop_flat_map(|d| (point(d), small_vector(d, 0.4)))) {
        let tv = TangentVector::new(x, v).unwrap();
        let y = exp_map(&x, &tv).unwrap();
        let back = exp_inv(&x, &y).unwrap();
        prop_assert!((back.components - v).norm() <= 1e-12);
        prop_assert!((dist(&x, &y) - v.norm()).abs() <= 1e-12);
    }

    #[test]
    fn coordinates_in_unit_interval(c in prop::collection::vec(-1e6f64..1e6, 1..=4)) {
        let p = wrap(&c).unwrap();
        prop_assert!(p.coords().iter().all(|&t| (0.0..1.0).contains(&t)));
    }

    #[test]
    fn metric_axioms((p, q, r) in (2usize..=3).prop_flat_map(|d| (point(d), point(d), point(d)))) {
        let d = p.dim() as f64;
        prop_assert!(dist(&p, &q) <= d.sqrt() / 2.0 + 1e-15);
        prop_assert!((dist(&p, &q) - dist(&q, &p)).abs() <= 1e-15);
        prop_assert!(dist(&p, &r) <= dist(&p, &q) + dist(&q, &r) + 1e-12);
    }
}

#[test]
fn chart_change_derivative_is_identity() {
    // d/dw of exp_x^{-1}(exp_{x'}(w)) at w = 0, by central differences
    let x = wrap(&[0.2, 0.9, 0.5]).unwrap();
    let xp = wrap(&[0.25, 0.95, 0.48]).unwrap();
    let h = 1e-6;
    for j in 0..3 {
        let e = Vector::axis(3, j) * h;
        let plus = exp_inv(&x, &exp_map(&xp, &TangentVector::new(xp, e).unwrap()).unwrap()).unwrap();
        let minus = exp_inv(&x, &exp_map(&xp, &TangentVector::new(xp, -e).unwrap()).unwrap()).unwrap();
        let col = (plus.components - minus.components) * (1.0 / (2.0 * h));
        for i in 0..3 {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((col[i] - expect).abs() < 1e-8);
        }
    }
}
