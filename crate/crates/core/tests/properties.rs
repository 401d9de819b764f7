use num_complex::Complex64 as C;
use proptest::prelude::*;

use pap_core::field::{
    decreasing_rearrangement, distribution_function, lorentz_norm, weak_holder_check, Field,
    GridSpec, LorentzExponents,
};
use pap_core::interp::git_bound_check;
use pap_core::io::{read_field, read_trajectory, write_field, write_trajectory};
use pap_core::pap::{
    ap_test, mean_value_curve, translation_defect, SpaceNorm, TimeGrid, Trajectory,
};

fn grid() -> GridSpec {
    GridSpec::new(1, 16, 2.0).unwrap()
}

fn values() -> impl Strategy<Value = Vec<C>> {
    prop::collection::vec(
        (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b)| C::new(a, b)),
        16,
    )
}

fn field(v: Vec<C>) -> Field {
    Field::from_values(grid(), v).unwrap()
}

fn exps() -> impl Strategy<Value = LorentzExponents> {
    (1.05..8.0f64, prop_oneof![Just(f64::INFINITY), 1.0..6.0f64])
        .prop_map(|(p, q)| LorentzExponents::new(p, q).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn norm_ignores_rearrangement(v in values(), e in exps(), seed in 0usize..16) {
        let mut w = v.clone();
        w.rotate_left(seed);
        w.reverse();
        let a = lorentz_norm(&field(v), e);
        let b = lorentz_norm(&field(w), e);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn norm_is_homogeneous(v in values(), e in exps(), re in -3.0..3.0f64, im in -3.0..3.0f64) {
        let c = C::new(re, im);
        let u = field(v);
        let a = lorentz_norm(&u.scaled(c), e);
        let b = c.norm() * lorentz_norm(&u, e);
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn weak_norm_is_dominated(v in values(), p in 1.05..8.0f64, q in 1.0..6.0f64) {
        let u = field(v);
        let weak = lorentz_norm(&u, LorentzExponents::weak(p).unwrap());
        let strong = lorentz_norm(&u, LorentzExponents::new(p, q).unwrap());
        prop_assert!(weak <= (q / p).powf(1.0 / q) * strong * (1.0 + 1e-12));
    }

    #[test]
    fn weak_quasi_triangle(v in values(), w in values(), p in 1.05..8.0f64) {
        let e = LorentzExponents::weak(p).unwrap();
        let (u, v) = (field(v), field(w));
        let lhs = lorentz_norm(&u.add(&v).unwrap(), e);
        let rhs = 2f64.powf(1.0 / p) * (lorentz_norm(&u, e) + lorentz_norm(&v, e));
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn weak_holder_holds(v in values(), w in values(), p1 in 2.1..8.0f64, p2 in 2.1..8.0f64) {
        let r = weak_holder_check(&field(v), &field(w), p1, p2).unwrap();
        prop_assert!(r.ok);
    }

    #[test]
    fn distribution_is_non_increasing(v in values(), s in 0.0..8.0f64, ds in 0.0..4.0f64) {
        let u = field(v);
        prop_assert!(distribution_function(&u, s + ds) <= distribution_function(&u, s));
        let r = decreasing_rearrangement(&u);
        prop_assert!(r.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn git_bound_monotone(m0 in 0.0..10.0f64, m1 in 0.0..10.0f64, dm in 0.0..5.0f64, th in 0.0..1.0f64) {
        let a = git_bound_check(m0, m1, 1.0, th, 0.0).unwrap().bound;
        let b = git_bound_check(m0 + dm, m1, 1.0, th, 0.0).unwrap().bound;
        let c = git_bound_check(m0, m1 + dm, 1.0, th, 0.0).unwrap().bound;
        prop_assert!(b >= a * (1.0 - 1e-12) && c >= a * (1.0 - 1e-12));
    }
}

fn signal(time: TimeGrid, w1: f64, w2: f64) -> Trajectory {
    Trajectory::scalar_fn(time, |t| C::new((w1 * t).sin() + 0.5 * (w2 * t).cos(), 0.0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn defect_is_shift_stationary(w1 in 0.2..2.0f64, w2 in 0.2..2.0f64, k in 1usize..40, shift in -50i32..50) {
        let a = TimeGrid::with_step(-20.0, 0.1, 400).unwrap();
        let b = TimeGrid::with_step(-20.0 + shift as f64 * 0.1, 0.1, 400).unwrap();
        // same samples on a shifted grid
        let fa = signal(a, w1, w2);
        let fb = Trajectory::scalar(b, fa.data().to_vec()).unwrap();
        let t = k as f64 * 0.1;
        let da = translation_defect(&fa, t).unwrap();
        let db = translation_defect(&fb, t).unwrap();
        prop_assert_eq!(da, db);
        prop_assert_eq!(da, translation_defect(&fa, -t).unwrap());
    }

    #[test]
    fn almost_periods_grow_with_epsilon(w1 in 0.2..2.0f64, w2 in 0.2..2.0f64, eps in 0.05..0.5f64) {
        let time = TimeGrid::with_step(-20.0, 0.1, 400).unwrap();
        let f = signal(time, w1, w2);
        let small = ap_test(&f, eps, 20.0).unwrap();
        let large = ap_test(&f, 2.0 * eps, 20.0).unwrap();
        prop_assert!(small.almost_periods.iter().all(|t| large.almost_periods.contains(t)));
        if let (Some(a), Some(b)) = (small.inclusion_length, large.inclusion_length) {
            prop_assert!(b <= a + 1e-12);
        }
    }

    #[test]
    fn mean_value_scales(w1 in 0.2..2.0f64, c in 0.1..10.0f64) {
        let time = TimeGrid::with_step(-20.0, 0.1, 400).unwrap();
        let f = signal(time, w1, 1.0);
        let lens = [2.5, 5.0, 10.0, 20.0];
        let a = mean_value_curve(&f, &lens).unwrap();
        let b = mean_value_curve(&f.scaled(C::new(0.0, c)), &lens).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((c * x - y).abs() <= 1e-12 * y.max(1.0));
        }
    }

    #[test]
    fn parsers_never_panic(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let text = String::from_utf8_lossy(&bytes);
        let _ = read_field(&text);
        let _ = read_trajectory(&text);
        let with_header = format!("PAPTRAJ 1 4 1 0 1 8\n{text}");
        let _ = read_trajectory(&with_header);
        let with_header = format!("PAPFIELD 1 4 1\n{text}");
        let _ = read_field(&with_header);
    }

    #[test]
    fn field_files_round_trip(v in values()) {
        let u = field(v);
        prop_assert_eq!(read_field(&write_field(&u)).unwrap(), u);
    }

    #[test]
    fn trajectory_files_round_trip(w1 in 0.2..2.0f64, t0 in -10.0..10.0f64) {
        let time = TimeGrid::with_step(t0, 0.1, 16).unwrap();
        let f = Trajectory::separable(time, |t| C::new((w1 * t).sin(), t), &field(vec![C::new(1.0, -0.5); 16]), SpaceNorm::Modulus);
        prop_assert_eq!(read_trajectory(&write_trajectory(&f)).unwrap(), f);
    }
}
