//! Bessel functions J0, J1, Y0, Y1 of real positive argument.
//!
//! Power series below 8, Miller backward recurrence with Neumann series for
//! Y up to 25, Hankel asymptotics beyond.

use std::f64::consts::{FRAC_2_PI, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_4;
const SERIES_MAX: f64 = 8.0;
const MILLER_MAX: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselPair {
    pub j0: f64,
    pub j1: f64,
    pub y0: f64,
    pub y1: f64,
}

/// J0, J1, Y0, Y1 at x > 0 (Y terms are -inf at x = 0).
pub fn bessel_all(x: f64) -> BesselPair {
    if x == 0.0 {
        return BesselPair { j0: 1.0, j1: 0.0, y0: f64::NEG_INFINITY, y1: f64::NEG_INFINITY };
    }
    if x < SERIES_MAX {
        series(x)
    } else if x < MILLER_MAX {
        miller(x)
    } else {
        hankel(x)
    }
}

pub fn j0(x: f64) -> f64 {
    bessel_all(x.abs()).j0
}

pub fn j1(x: f64) -> f64 {
    let v = bessel_all(x.abs()).j1;
    if x < 0.0 {
        -v
    } else {
        v
    }
}

pub fn y0(x: f64) -> f64 {
    bessel_all(x).y0
}

pub fn y1(x: f64) -> f64 {
    bessel_all(x).y1
}

fn series(x: f64) -> BesselPair {
    let q = 0.25 * x * x;
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut j0 = 0.0;
    let mut j1 = 0.0;
    let mut y0s = 0.0;
    let mut y1s = 0.0;
    // t0 = (-q)^k/(k!)^2, t1 = (-q)^k/(k!(k+1)!)
    let mut t0 = 1.0;
    let mut t1 = 1.0;
    let mut h = 0.0;
    for k in 0..200 {
        let kf = k as f64;
        if k > 0 {
            h += 1.0 / kf;
            t0 *= -q / (kf * kf);
            t1 *= -q / (kf * (kf + 1.0));
        }
        j0 += t0;
        j1 += t1;
        y0s -= h * t0;
        // psi(k+1) + psi(k+2) = -2 gamma + 2 H_k + 1/(k+1)
        y1s += (2.0 * h + 1.0 / (kf + 1.0)) * t1;
        if k > 4 && t0.abs() < 1e-18 && t1.abs() < 1e-18 {
            break;
        }
    }
    let j1 = 0.5 * x * j1;
    let y0 = FRAC_2_PI * (lg * j0 + y0s);
    // Y1 = (2/pi) ln(x/2) J1 - 2/(pi x) - (1/pi)(x/2) sum (psi(k+1)+psi(k+2)) t1
    let y1 = FRAC_2_PI * (0.5 * x).ln() * j1 - FRAC_2_PI / x - (0.5 * x / PI) * (y1s - 2.0 * EULER_GAMMA * (j1 / (0.5 * x)));
    BesselPair { j0, j1, y0, y1 }
}

fn miller(x: f64) -> BesselPair {
    let mut n = (x + 40.0 + 8.0 * x.cbrt()) as usize;
    if n % 2 == 1 {
        n += 1;
    }
    let mut j = vec![0.0f64; n + 2];
    j[n] = 1e-30;
    for k in (1..=n).rev() {
        j[k - 1] = (2.0 * k as f64 / x) * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            for v in j.iter_mut().skip(k - 1) {
                *v *= 1e-250;
            }
        }
    }
    let mut norm = j[0];
    let mut k = 2;
    while k <= n {
        norm += 2.0 * j[k];
        k += 2;
    }
    for v in j.iter_mut() {
        *v /= norm;
    }
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut k = 1;
    while 2 * k < n + 1 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
        k += 1;
    }
    let y0 = FRAC_2_PI * lg * j[0] - 2.0 * FRAC_2_PI * s0;
    let y1 = -FRAC_2_PI * j[0] / x + FRAC_2_PI * lg * j[1] + FRAC_2_PI * s1;
    BesselPair { j0: j[0], j1: j[1], y0, y1 }
}

fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (kf * 8.0 * x);
        if term.abs() > last {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    (p, q)
}

fn hankel(x: f64) -> BesselPair {
    let amp = (FRAC_2_PI / x).sqrt();
    let (p0, q0) = hankel_pq(0.0, x);
    let (p1, q1) = hankel_pq(1.0, x);
    // chi_nu = x - (nu/2 + 1/4) pi, evaluated through sin/cos of x to avoid
    // forming x - pi/4 in floating point.
    let (s, c) = x.sin_cos();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (c0, s0) = (r * (c + s), r * (s - c));
    let (c1, s1) = (r * (s - c), -r * (c + s));
    BesselPair {
        j0: amp * (p0 * c0 - q0 * s0),
        y0: amp * (p0 * s0 + q0 * c0),
        j1: amp * (p1 * c1 - q1 * s1),
        y1: amp * (p1 * s1 + q1 * c1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_values() {
        let b = bessel_all(1.5);
        assert!((b.j0 - 0.511_827_671_735_918_1).abs() < 1e-15);
        assert!((b.j1 - 0.557_936_507_910_099_6).abs() < 1e-15);
        let b = bessel_all(1.0);
        assert!((b.y0 - 0.088_256_964_215_676_96).abs() < 1e-15);
        assert!((b.y1 + 0.781_212_821_300_288_7).abs() < 1e-15);
    }

    #[test]
    fn branches_agree_at_switch_points() {
        for &x in &[7.9, 8.0, 8.1, 12.0, 24.9, 25.0, 30.0] {
            let m = miller(x);
            let other = if x < 16.0 { series(x) } else { hankel(x) };
            for (a, b) in [(m.j0, other.j0), (m.j1, other.j1), (m.y0, other.y0), (m.y1, other.y1)] {
                assert!((a - b).abs() < 5e-13, "x={x}: {a} vs {b}");
            }
        }
    }
}
