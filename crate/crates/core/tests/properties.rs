use std::f64::consts::PI;

use proptest::prelude::*;

use ricci_lab::certificate::{constant_c, integrated_rhs, predicted_extinction};
use ricci_lab::conformal::{apply_dilation, balance, icosphere, ConformalDilation, WeightedMeasure};
use ricci_lab::fixtures::random_profiles;
use ricci_lab::geometry::min_scalar;
use ricci_lab::width::symmetric_width;

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn direction() -> impl Strategy<Value = [f64; 3]> {
    [-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64]
        .prop_filter("away from the origin", |v| v.iter().map(|x| x * x).sum::<f64>() > 0.01)
        .prop_map(unit)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn dilations_with_one_center_compose_by_scale(
        x in direction(), p in direction(), t1 in 0.0..0.95f64, t2 in 0.0..0.95f64,
    ) {
        let d1 = ConformalDilation::new(x, t1).unwrap();
        let d2 = ConformalDilation::new(x, t2).unwrap();
        let d12 = ConformalDilation::new(x, 1.0 - (1.0 - t1) * (1.0 - t2)).unwrap();
        let a = apply_dilation(apply_dilation(p, &d1), &d2);
        let b = apply_dilation(p, &d12);
        for k in 0..3 {
            prop_assert!((a[k] - b[k]).abs() <= 1e-10, "{:?} vs {:?}", a, b);
        }
    }

    #[test]
    fn dilated_points_stay_on_the_sphere(x in direction(), p in direction(), t in 0.0..0.999f64) {
        let q = apply_dilation(p, &ConformalDilation::new(x, t).unwrap());
        let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
        prop_assert!((n - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn dilation_fixes_its_poles(x in direction(), t in 0.0..0.999f64) {
        let d = ConformalDilation::new(x, t).unwrap();
        let q = apply_dilation(x, &d);
        let m = apply_dilation([-x[0], -x[1], -x[2]], &d);
        for k in 0..3 {
            prop_assert!((q[k] - x[k]).abs() <= 1e-12);
            prop_assert!((m[k] + x[k]).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn perturbed_measures_balance(
        weights in prop::collection::vec(0.5..1.5f64, 162),
        x in direction(),
        t in 0.0..0.8f64,
    ) {
        let nodes = icosphere(2).vertices;
        let m = WeightedMeasure::new(nodes, weights).unwrap();
        let m = m.dilated(&ConformalDilation::new(x, t).unwrap());
        let report = balance(&m, 1e-10).unwrap();
        // Independent evaluation of the balanced centre of mass.
        let d = report.dilation();
        let mut com = [0.0; 3];
        for (p, w) in m.nodes().iter().zip(m.weights()) {
            let q = apply_dilation(*p, &d);
            for k in 0..3 {
                com[k] += w * q[k];
            }
        }
        let total: f64 = m.weights().iter().sum();
        for c in com {
            prop_assert!((c / total).abs() <= 1e-10 + 1e-13, "{:?}", com);
        }
    }

    #[test]
    fn measure_csv_is_lossless(weights in prop::collection::vec(1e-3..10.0f64, 42)) {
        let m = WeightedMeasure::new(icosphere(1).vertices, weights).unwrap();
        let back = WeightedMeasure::parse_csv(&m.csv_string()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn curvature_and_width_scale_covariantly(seed in 0u64..1000, c in 0.3..4.0f64) {
        let g = random_profiles(seed, 1)[0].grid(64).unwrap();
        let s = g.scaled(c).unwrap();
        let r = min_scalar(&g).unwrap();
        let rs = min_scalar(&s).unwrap();
        prop_assert!((rs * c * c - r).abs() <= 1e-10 * (1.0 + r.abs()));
        let (w, x) = symmetric_width(&g);
        let (ws, xs) = symmetric_width(&s);
        prop_assert!((ws - c * c * w).abs() <= 1e-10 * w);
        prop_assert!((xs - x).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn extinction_bound_calculus(w0 in 1e-3..500.0f64, c in 1e-3..100.0f64, f in 1.01..3.0f64) {
        let t = |w0: f64, c: f64| predicted_extinction(w0, &constant_c(-1.5 / c));
        prop_assert!(t(f * w0, c) > t(w0, c));
        prop_assert!(t(w0, f * c) < t(w0, c));
        prop_assert!(t(w0, c) > w0 / (4.0 * PI));
        prop_assert!(integrated_rhs(w0, c, t(w0, c)).abs() <= 1e-10 * w0 * c.powf(-0.75));
    }
}
