mod common;

use mimic_core::spline::CubicSpline;
use mimic_core::MimicError;
use proptest::prelude::*;

/// Strictly increasing knot times with gaps in [0.05, 2], values in ±3.
fn knots(min: usize, max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.05f64..2.0, -3.0f64..3.0), min..=max).prop_map(|raw| {
        let mut t = 0.0;
        raw.into_iter()
            .enumerate()
            .map(|(i, (gap, v))| {
                if i > 0 {
                    t += gap;
                }
                (t, v)
            })
            .collect()
    })
}

fn seg_second_derivative(s: &CubicSpline, i: usize, dt: f64) -> f64 {
    let g = s.segments()[i];
    2.0 * g.c + 6.0 * g.d * dt
}

fn seg_first_derivative(s: &CubicSpline, i: usize, dt: f64) -> f64 {
    let g = s.segments()[i];
    g.b + 2.0 * g.c * dt + 3.0 * g.d * dt * dt
}

fn seg_value(s: &CubicSpline, i: usize, dt: f64) -> f64 {
    let g = s.segments()[i];
    g.a + g.b * dt + g.c * dt * dt + g.d * dt * dt * dt
}

proptest! {
    #[test]
    fn passes_through_every_knot(k in knots(2, 12)) {
        let s = CubicSpline::new(&k).unwrap();
        for &(t, v) in &k {
            prop_assert!((s.eval(t).unwrap() - v).abs() < 1e-10);
        }
    }

    #[test]
    fn smooth_across_interior_knots(k in knots(3, 12)) {
        let s = CubicSpline::new(&k).unwrap();
        let times = s.knot_times();
        for i in 1..times.len() - 1 {
            let h = times[i] - times[i - 1];
            let (left, right) = (i - 1, i);
            prop_assert!((seg_value(&s, left, h) - seg_value(&s, right, 0.0)).abs() < 1e-10);
            prop_assert!((seg_first_derivative(&s, left, h) - seg_first_derivative(&s, right, 0.0)).abs() < 1e-8);
            prop_assert!((seg_second_derivative(&s, left, h) - seg_second_derivative(&s, right, 0.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn ends_have_zero_acceleration(k in knots(2, 12)) {
        let s = CubicSpline::new(&k).unwrap();
        let (_, a0) = s.eval_derivatives(s.start()).unwrap();
        let (_, a1) = s.eval_derivatives(s.end()).unwrap();
        prop_assert!(a0.abs() < 1e-10);
        prop_assert!(a1.abs() < 1e-10);
    }

    #[test]
    fn reproduces_lines(
        times in knots(2, 10),
        slope in -5.0f64..5.0,
        intercept in -5.0f64..5.0,
        probes in prop::collection::vec(0.0f64..1.0, 100),
    ) {
        let k: Vec<(f64, f64)> = times.iter().map(|&(t, _)| (t, intercept + slope * t)).collect();
        let s = CubicSpline::new(&k).unwrap();
        let span = s.end() - s.start();
        for u in probes {
            let t = s.start() + u * span;
            prop_assert!((s.eval(t).unwrap() - (intercept + slope * t)).abs() < 1e-10);
        }
    }

    #[test]
    fn coefficients_match_dense_solve(k in knots(2, 8)) {
        let s = CubicSpline::new(&k).unwrap();
        let oracle = common::dense_natural_spline(&k);
        for (seg, o) in s.segments().iter().zip(&oracle) {
            for (got, want) in [seg.a, seg.b, seg.c, seg.d].iter().zip(o) {
                prop_assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "{got} vs {want}");
            }
        }
    }
}

#[test]
fn four_knot_coefficients_match_oracle() {
    let k = [(0.0, 0.0), (1.0, 2.0), (2.0, 1.0), (3.0, 3.0)];
    let s = CubicSpline::new(&k).unwrap();
    let oracle = common::dense_natural_spline(&k);
    assert_eq!(s.segments().len(), 3);
    for (seg, o) in s.segments().iter().zip(&oracle) {
        assert!((seg.a - o[0]).abs() < 1e-12);
        assert!((seg.b - o[1]).abs() < 1e-12);
        assert!((seg.c - o[2]).abs() < 1e-12);
        assert!((seg.d - o[3]).abs() < 1e-12);
    }
    for (i, t) in [0.5, 1.5, 2.5].into_iter().enumerate() {
        let o = oracle[i];
        let want = o[0] + o[1] * 0.5 + o[2] * 0.25 + o[3] * 0.125;
        assert!((s.eval(t).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn two_knots_give_a_line() {
    let s = CubicSpline::new(&[(1.0, -1.0), (3.0, 3.0)]).unwrap();
    let seg = s.segments()[0];
    assert_eq!((seg.c, seg.d), (0.0, 0.0));
    assert!((s.eval(2.0).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn outside_the_knots_is_an_error() {
    let s = CubicSpline::new(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
    assert!(matches!(s.eval(-1e-9), Err(MimicError::OutOfRange { .. })));
    assert!(matches!(
        s.eval(1.0 + 1e-9),
        Err(MimicError::OutOfRange { .. })
    ));
    assert!(s.eval(f64::NAN).is_err());
}
