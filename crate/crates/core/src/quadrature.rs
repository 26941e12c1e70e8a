//! Adaptive Gauss-Kronrod (7/15) quadrature for vector-valued integrands.

use crate::error::{Result, ScatterError};
use crate::scalar::Scalar;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig { abs_tol: 1e-14, rel_tol: 1e-12, max_intervals: 2000 }
    }
}

#[derive(Debug, Clone)]
pub struct QuadResult<S> {
    pub value: Vec<S>,
    pub error: S,
    pub intervals: usize,
}

struct Panel<S> {
    a: S,
    b: S,
    value: Vec<S>,
    error: S,
}

fn kronrod_panel<S: Scalar, F: FnMut(S, &mut [S])>(
    f: &mut F,
    a: S,
    b: S,
    dim: usize,
    buf: &mut [S],
) -> Panel<S> {
    let half = (b - a) * S::lit(0.5);
    let mid = (a + b) * S::lit(0.5);
    let mut k = vec![S::zero(); dim];
    let mut g = vec![S::zero(); dim];
    f(mid, buf);
    for c in 0..dim {
        k[c] = buf[c] * S::lit(WGK[7]);
        g[c] = buf[c] * S::lit(WG[3]);
    }
    for j in 0..7 {
        let dx = half * S::lit(XGK[j]);
        for x in [mid - dx, mid + dx] {
            f(x, buf);
            for c in 0..dim {
                k[c] += buf[c] * S::lit(WGK[j]);
                if j % 2 == 1 {
                    g[c] += buf[c] * S::lit(WG[j / 2]);
                }
            }
        }
    }
    let mut err = S::zero();
    for c in 0..dim {
        k[c] *= half;
        g[c] *= half;
        err = err.max((k[c] - g[c]).abs());
    }
    Panel { a, b, value: k, error: err }
}

fn max_norm<S: Scalar>(v: &[S]) -> S {
    v.iter().fold(S::zero(), |m, x| m.max(x.abs()))
}

/// Integrates `f` over `[a, b]`; `f(x, out)` writes `dim` components.
pub fn integrate<S: Scalar, F: FnMut(S, &mut [S])>(
    mut f: F,
    a: S,
    b: S,
    dim: usize,
    cfg: &QuadConfig,
) -> Result<QuadResult<S>> {
    let mut buf = vec![S::zero(); dim];
    if a == b {
        return Ok(QuadResult { value: vec![S::zero(); dim], error: S::zero(), intervals: 0 });
    }
    let mut panels = vec![kronrod_panel(&mut f, a, b, dim, &mut buf)];
    let abs_tol = S::lit(cfg.abs_tol);
    let rel_tol = S::lit(cfg.rel_tol);
    loop {
        let mut total = vec![S::zero(); dim];
        let mut err = S::zero();
        for p in &panels {
            for c in 0..dim {
                total[c] += p.value[c];
            }
            err += p.error;
        }
        let target = abs_tol.max(rel_tol * max_norm(&total));
        if err <= target || panels.len() >= cfg.max_intervals {
            if !err.is_finite() || !max_norm(&total).is_finite() {
                return Err(ScatterError::NonFiniteState { t: a.to_f64_lossy() });
            }
            return Ok(QuadResult { value: total, error: err, intervals: panels.len() });
        }
        let worst = panels
            .iter()
            .enumerate()
            .fold((0, S::neg_infinity()), |(bi, be), (i, p)| if p.error > be { (i, p.error) } else { (bi, be) })
            .0;
        let p = panels.swap_remove(worst);
        let m = (p.a + p.b) * S::lit(0.5);
        if m <= p.a.min(p.b) || m >= p.a.max(p.b) {
            panels.push(p);
            let total_err = panels.iter().fold(S::zero(), |e, q| e + q.error);
            let mut total = vec![S::zero(); dim];
            for q in &panels {
                for c in 0..dim {
                    total[c] += q.value[c];
                }
            }
            return Ok(QuadResult { value: total, error: total_err, intervals: panels.len() });
        }
        panels.push(kronrod_panel(&mut f, p.a, m, dim, &mut buf));
        panels.push(kronrod_panel(&mut f, m, p.b, dim, &mut buf));
    }
}

/// Integrates `f` over `(-inf, b]` by successive panels of doubling width,
/// stopping once a panel contributes less than the absolute tolerance.
pub fn integrate_to_neg_infinity<S: Scalar, F: FnMut(S, &mut [S])>(
    mut f: F,
    b: S,
    width: S,
    dim: usize,
    cfg: &QuadConfig,
) -> Result<QuadResult<S>> {
    let mut total = vec![S::zero(); dim];
    let mut err = S::zero();
    let mut intervals = 0;
    let mut hi = b;
    let mut w = width;
    for _ in 0..64 {
        let lo = hi - w;
        let piece = integrate(&mut f, lo, hi, dim, cfg)?;
        for c in 0..dim {
            total[c] += piece.value[c];
        }
        err += piece.error;
        intervals += piece.intervals;
        let small = max_norm(&piece.value) <= S::lit(cfg.abs_tol).max(S::lit(cfg.rel_tol) * max_norm(&total) * S::lit(1e-3));
        if small {
            return Ok(QuadResult { value: total, error: err, intervals });
        }
        hi = lo;
        w = w + w;
    }
    Ok(QuadResult { value: total, error: err, intervals })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x: f64, o: &mut [f64]| o[0] = x.powi(5) - 3.0 * x, 0.0, 2.0, 1, &QuadConfig::default()).unwrap();
        assert!((r.value[0] - (64.0 / 6.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand() {
        let r = integrate(|x: f64, o: &mut [f64]| o[0] = 1.0 / (1e-4 + x * x), -1.0, 1.0, 1, &QuadConfig::default()).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((r.value[0] - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate_to_neg_infinity(|u: f64, o: &mut [f64]| o[0] = (2.0 * u).exp() * u * u, 0.0, 4.0, 1, &QuadConfig::default()).unwrap();
        assert!((r.value[0] - 0.25).abs() < 1e-12);
    }
}
