use kasner_scatter::bessel::{bessel_all, j0, j1, y0, y1};
use proptest::prelude::*;
use std::f64::consts::PI;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

// Integral representations, evaluated independently of the library.
fn reference(x: f64) -> [f64; 4] {
    let n = 40_000;
    let j0 = simpson(|th| (x * th.sin()).cos(), 0.0, PI, n) / PI;
    let j1 = simpson(|th| (th - x * th.sin()).cos(), 0.0, PI, n) / PI;
    let upper = (800.0 / x).asinh();
    let y0 = simpson(|th| (x * th.sin()).sin(), 0.0, PI, n) / PI - 2.0 / PI * simpson(|u| (-x * u.sinh()).exp(), 0.0, upper, n);
    let y1 = simpson(|th| (x * th.sin() - th).sin(), 0.0, PI, n) / PI
        - simpson(|u| (u.exp() - (-u).exp()) * (-x * u.sinh()).exp(), 0.0, upper, n) / PI;
    [j0, j1, y0, y1]
}

#[test]
fn matches_integral_representations() {
    for &x in &[0.05, 0.3, 1.0, 1.5, 2.404825557695773, 5.0, 7.99, 8.01, 12.0, 24.9, 25.1, 40.0, 96.0] {
        let b = bessel_all(x);
        let r = reference(x);
        for (got, want) in [b.j0, b.j1, b.y0, b.y1].iter().zip(r) {
            assert!((got - want).abs() < 1e-11 * (1.0 + want.abs()), "x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn reference_values() {
    assert!((j0(1.5) - 0.511_827_671_735_918_1).abs() < 1e-15);
    assert!(j0(2.404_825_557_695_773).abs() < 1e-14);
    assert!((y0(0.893_576_966_279_167_5)).abs() < 1e-14);
    assert_eq!(j1(-1.5), -j1(1.5));
    assert!(y1(1e-3) < -600.0);
}

proptest! {
    #[test]
    fn wronskian(x in 1e-3f64..200.0) {
        let b = bessel_all(x);
        let w = b.j1 * b.y0 - b.j0 * b.y1;
        prop_assert!((w * PI * x / 2.0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn derivative_relations(x in 0.1f64..150.0) {
        // J0' = -J1 and Y0' = -Y1 by central differences.
        let h = 1e-5;
        let dj = (j0(x + h) - j0(x - h)) / (2.0 * h);
        let dy = (y0(x + h) - y0(x - h)) / (2.0 * h);
        prop_assert!((dj + j1(x)).abs() < 1e-8);
        prop_assert!((dy + y1(x)).abs() < 1e-8 * (1.0 + y1(x).abs()));
    }
}
