use mflab::measures::{w1_distance, w2_distance};
use mflab::EmpiricalMeasure;
use proptest::prelude::*;

fn measure() -> impl Strategy<Value = EmpiricalMeasure> {
    prop::collection::vec((-5.0f64..5.0, 0.05f64..1.0), 1..12).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let (xs, ws): (Vec<f64>, Vec<f64>) = atoms.into_iter().map(|(x, w)| (x, w / total)).unzip();
        EmpiricalMeasure::from_points(xs, ws).unwrap()
    })
}

proptest! {
    #[test]
    fn w1_below_w2(a in measure(), b in measure()) {
        let w1 = w1_distance(&a, &b).unwrap();
        let w2 = w2_distance(&a, &b).unwrap();
        prop_assert!(w1 <= w2 + 1e-12, "{} > {}", w1, w2);
    }

    #[test]
    fn triangle_and_symmetry(a in measure(), b in measure(), c in measure()) {
        for d in [w1_distance, w2_distance] {
            let ab = d(&a, &b).unwrap();
            prop_assert!((ab - d(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!(ab <= d(&a, &c).unwrap() + d(&c, &b).unwrap() + 1e-12);
            prop_assert!(d(&a, &a).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn translation_moves_by_the_shift(a in measure(), s in -3.0f64..3.0) {
        let b = a.push_forward(|x| vec![x[0] + s]).unwrap();
        prop_assert!((w1_distance(&a, &b).unwrap() - s.abs()).abs() < 1e-9);
        prop_assert!((w2_distance(&a, &b).unwrap() - s.abs()).abs() < 1e-9);
    }

    #[test]
    fn csv_and_json_round_trip(a in measure()) {
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        prop_assert_eq!(EmpiricalMeasure::read_csv(&buf[..]).unwrap(), a.clone());
        prop_assert_eq!(EmpiricalMeasure::from_json(&a.to_json().unwrap()).unwrap(), a);
    }
}
