//! Adaptive Dormand-Prince 5(4) integration in logarithmic time and the
//! Fuchsian launcher for data prescribed at t = 0.

use serde::Serialize;

use crate::error::{Result, ScatterError};
use crate::quadrature::{self, QuadConfig};
use crate::scalar::Scalar;

/// A linear per-mode system written as t dy/dt = rhs(t, y).
pub trait OdeSystem<S: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn rhs(&self, t: S, y: &[S], dy: &mut [S]);
}

/// Wraps a closure as an [`OdeSystem`].
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<S: Scalar, F: Fn(S, &[S], &mut [S]) + Sync> OdeSystem<S> for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn rhs(&self, t: S, y: &[S], dy: &mut [S]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    #[serde(default)]
    pub trace: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-14, max_steps: 2_000_000, trace: false }
    }
}

impl IntegratorConfig {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        IntegratorConfig { rel_tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x <= 1e-2;
        if ok(self.rel_tol) && ok(self.abs_tol) && self.max_steps > 0 {
            Ok(())
        } else {
            Err(ScatterError::InvalidInput(format!("integrator tolerances out of (0, 1e-2]: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub h: f64,
    pub err: f64,
}

#[derive(Debug, Clone, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    /// One row per accepted step; states are kept separately in `trace_states`.
    pub trace: Vec<TraceRow>,
    pub trace_states: Vec<Vec<f64>>,
}

impl IntegrationStats {
    fn merge(&mut self, o: IntegrationStats) {
        self.accepted += o.accepted;
        self.rejected += o.rejected;
        self.rhs_evals += o.rhs_evals;
        self.trace.extend(o.trace);
        self.trace_states.extend(o.trace_states);
    }

    /// CSV with columns t, y0.., h, err.
    pub fn trace_csv(&self) -> String {
        let mut out = String::new();
        let n = self.trace_states.first().map_or(0, |s| s.len());
        out.push('t');
        for k in 0..n {
            out.push_str(&format!(",y{k}"));
        }
        out.push_str(",h,err\n");
        for (row, st) in self.trace.iter().zip(&self.trace_states) {
            out.push_str(&format!("{:e}", row.t));
            for v in st {
                out.push_str(&format!(",{v:e}"));
            }
            out.push_str(&format!(",{:e},{:e}\n", row.h, row.err));
        }
        out
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

struct Stepper<'a, S: Scalar, Sys: OdeSystem<S>> {
    sys: &'a Sys,
    cfg: IntegratorConfig,
    k: [Vec<S>; 7],
    tmp: Vec<S>,
    ynew: Vec<S>,
    h: Option<S>,
    fsal_valid: bool,
}

impl<'a, S: Scalar, Sys: OdeSystem<S>> Stepper<'a, S, Sys> {
    fn new(sys: &'a Sys, cfg: IntegratorConfig) -> Self {
        let n = sys.dim();
        Stepper {
            sys,
            cfg,
            k: std::array::from_fn(|_| vec![S::zero(); n]),
            tmp: vec![S::zero(); n],
            ynew: vec![S::zero(); n],
            h: None,
            fsal_valid: false,
        }
    }

    fn eval(&mut self, s: S, idx: usize, stats: &mut IntegrationStats) {
        stats.rhs_evals += 1;
        let t = s.exp();
        let (y, out) = (&self.tmp, &mut self.k[idx]);
        self.sys.rhs(t, y, out);
    }

    fn scale(&self, y: &[S], y2: &[S]) -> S {
        let m = y.iter().chain(y2.iter()).fold(S::zero(), |a, x| a.max(x.abs()));
        S::lit(self.cfg.abs_tol) + S::lit(self.cfg.rel_tol) * m
    }

    fn initial_step(&mut self, s: S, y: &[S], span: S, stats: &mut IntegrationStats) -> S {
        self.tmp.copy_from_slice(y);
        self.eval(s, 0, stats);
        self.fsal_valid = true;
        let sc = self.scale(y, y);
        let d0 = y.iter().fold(S::zero(), |a, x| a.max(x.abs())) / sc;
        let d1 = self.k[0].iter().fold(S::zero(), |a, x| a.max(x.abs())) / sc;
        let h = if d0 < S::lit(1e-5) || d1 < S::lit(1e-5) { S::lit(1e-4) } else { S::lit(0.01) * d0 / d1 };
        h.min(span.abs()).min(S::lit(0.5)).max(S::lit(1e-12))
    }

    /// Advances from s0 to s1 exactly.
    fn run(&mut self, y: &mut Vec<S>, s0: S, s1: S, stats: &mut IntegrationStats) -> Result<()> {
        let n = y.len();
        let dir = if s1 >= s0 { S::one() } else { -S::one() };
        let mut s = s0;
        if s0 == s1 {
            return Ok(());
        }
        if !self.fsal_valid {
            self.tmp.copy_from_slice(y);
            self.eval(s, 0, stats);
            self.fsal_valid = true;
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(s, y, s1 - s0, stats),
        };
        let mut steps = 0usize;
        loop {
            let remaining = (s1 - s) * dir;
            if remaining <= S::zero() {
                break;
            }
            let last = h >= remaining;
            let hh = if last { remaining } else { h };
            let hs = hh * dir;
            let st = |x: f64| S::lit(x);
            for i in 0..n {
                self.tmp[i] = y[i] + hs * st(A21) * self.k[0][i];
            }
            self.eval(s + hs * st(C2), 1, stats);
            for i in 0..n {
                self.tmp[i] = y[i] + hs * (st(A31) * self.k[0][i] + st(A32) * self.k[1][i]);
            }
            self.eval(s + hs * st(C3), 2, stats);
            for i in 0..n {
                self.tmp[i] = y[i] + hs * (st(A41) * self.k[0][i] + st(A42) * self.k[1][i] + st(A43) * self.k[2][i]);
            }
            self.eval(s + hs * st(C4), 3, stats);
            for i in 0..n {
                self.tmp[i] = y[i]
                    + hs * (st(A51) * self.k[0][i] + st(A52) * self.k[1][i] + st(A53) * self.k[2][i] + st(A54) * self.k[3][i]);
            }
            self.eval(s + hs * st(C5), 4, stats);
            for i in 0..n {
                self.tmp[i] = y[i]
                    + hs * (st(A61) * self.k[0][i]
                        + st(A62) * self.k[1][i]
                        + st(A63) * self.k[2][i]
                        + st(A64) * self.k[3][i]
                        + st(A65) * self.k[4][i]);
            }
            self.eval(s + hs, 5, stats);
            for i in 0..n {
                self.ynew[i] = y[i]
                    + hs * (st(B1) * self.k[0][i]
                        + st(B3) * self.k[2][i]
                        + st(B4) * self.k[3][i]
                        + st(B5) * self.k[4][i]
                        + st(B6) * self.k[5][i]);
            }
            self.tmp.copy_from_slice(&self.ynew);
            let s_new = if last { s1 } else { s + hs };
            self.eval(s_new, 6, stats);
            let sc = self.scale(y, &self.ynew);
            let mut err = S::zero();
            for i in 0..n {
                let e = hs
                    * (st(E1) * self.k[0][i]
                        + st(E3) * self.k[2][i]
                        + st(E4) * self.k[3][i]
                        + st(E5) * self.k[4][i]
                        + st(E6) * self.k[5][i]
                        + st(E7) * self.k[6][i]);
                let r = e / sc;
                err += r * r;
            }
            err = (err / S::from_int(n.max(1) as i64)).sqrt();
            if !err.is_finite() || self.ynew.iter().any(|x| !x.is_finite()) {
                if hh <= S::lit(1e-14) {
                    return Err(ScatterError::NonFiniteState { t: s.exp().to_f64_lossy() });
                }
                h = hh * S::lit(0.1);
                stats.rejected += 1;
                continue;
            }
            steps += 1;
            if steps > self.cfg.max_steps {
                return Err(ScatterError::StepLimitExceeded { max_steps: self.cfg.max_steps, t: s.exp().to_f64_lossy() });
            }
            let fac = if err == S::zero() { st(5.0) } else { (st(0.9) * err.powf(st(-0.2))).min(st(5.0)).max(st(0.2)) };
            if err <= S::one() {
                stats.accepted += 1;
                y.copy_from_slice(&self.ynew);
                let (k0, rest) = self.k.split_at_mut(1);
                k0[0].copy_from_slice(&rest[5]);
                s = s_new;
                if self.cfg.trace {
                    stats.trace.push(TraceRow { t: s.exp().to_f64_lossy(), h: hh.to_f64_lossy(), err: err.to_f64_lossy() });
                    stats.trace_states.push(y.iter().map(|v| v.to_f64_lossy()).collect());
                }
                if !last || fac < S::one() {
                    h = hh * fac;
                }
                if last {
                    break;
                }
            } else {
                stats.rejected += 1;
                h = hh * fac.min(S::one());
            }
        }
        self.h = Some(h);
        Ok(())
    }
}

/// Integrates from `t_from` to `t_to` (either direction).
pub fn integrate<S: Scalar, Sys: OdeSystem<S>>(
    sys: &Sys,
    state0: &[S],
    t_from: S,
    t_to: S,
    cfg: &IntegratorConfig,
) -> Result<(Vec<S>, IntegrationStats)> {
    let (mut out, stats) = integrate_samples(sys, state0, t_from, &[t_to], cfg)?;
    Ok((out.pop().unwrap(), stats))
}

/// States at each of `samples`, which must be monotone away from `t_from`.
pub fn integrate_samples<S: Scalar, Sys: OdeSystem<S>>(
    sys: &Sys,
    state0: &[S],
    t_from: S,
    samples: &[S],
    cfg: &IntegratorConfig,
) -> Result<(Vec<Vec<S>>, IntegrationStats)> {
    cfg.validate()?;
    if state0.len() != sys.dim() {
        return Err(ScatterError::InvalidInput(format!("state has {} components, system {}", state0.len(), sys.dim())));
    }
    if !(t_from > S::zero()) || samples.iter().any(|&t| !(t > S::zero())) {
        return Err(ScatterError::InvalidInput("times must be positive".into()));
    }
    let mut stepper = Stepper::new(sys, *cfg);
    let mut y = state0.to_vec();
    let mut s = t_from.ln();
    let mut stats = IntegrationStats::default();
    let mut out = Vec::with_capacity(samples.len());
    for &t in samples {
        let s1 = t.ln();
        let mut seg = IntegrationStats::default();
        stepper.run(&mut y, s, s1, &mut seg)?;
        stats.merge(seg);
        s = s1;
        out.push(y.clone());
    }
    Ok((out, stats))
}

/// Start of a solution launched from its limit at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FuchsianLaunch<S: Scalar> {
    pub limit_value: Vec<S>,
    pub epsilon: S,
    pub t0: S,
    pub state: Vec<S>,
    pub tail_at_t0: S,
}

/// Chooses the largest t0 <= t_max with `tail_bound(t0) <= tail_tol` and returns
/// v plus one Picard correction, the integral of rhs(s, v) ds/s over (0, t0).
pub fn fuchsian_launch<S: Scalar, Sys: OdeSystem<S>, B: Fn(S) -> S>(
    sys: &Sys,
    v: &[S],
    epsilon: S,
    tail_bound: B,
    tail_tol: S,
    t_max: S,
    quad: &QuadConfig,
) -> Result<FuchsianLaunch<S>> {
    if !(epsilon > S::zero()) {
        return Err(ScatterError::InvalidInput("Fuchsian weight must be positive".into()));
    }
    let t0 = launch_time(&tail_bound, tail_tol, t_max)?;
    let n = sys.dim();
    let r = quadrature::integrate_to_neg_infinity(
        |u: S, out: &mut [S]| sys.rhs(u.exp(), v, out),
        t0.ln(),
        S::lit(4.0) / epsilon,
        n,
        quad,
    )?;
    let state: Vec<S> = v.iter().zip(&r.value).map(|(&a, &b)| a + b).collect();
    Ok(FuchsianLaunch { limit_value: v.to_vec(), epsilon, t0, state, tail_at_t0: tail_bound(t0) })
}

/// Largest t in (tiny, t_max] with bound(t) <= tol, assuming bound increases in t.
pub fn launch_time<S: Scalar, B: Fn(S) -> S>(bound: &B, tol: S, t_max: S) -> Result<S> {
    if bound(t_max) <= tol {
        return Ok(t_max);
    }
    let tiny = S::lit(1e-300).max(S::min_positive_value() * S::lit(1e6));
    if !(bound(tiny) <= tol) {
        return Err(ScatterError::TailUnreachable { tail_tol: tol.to_f64_lossy() });
    }
    let (mut a, mut b) = (tiny.ln(), t_max.ln());
    for _ in 0..200 {
        let m = (a + b) * S::lit(0.5);
        if bound(m.exp()) <= tol {
            a = m;
        } else {
            b = m;
        }
        if b - a < S::lit(1e-10) {
            break;
        }
    }
    Ok(a.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let sys = FnSystem { dim: 1, f: |_t: f64, y: &[f64], d: &mut [f64]| d[0] = y[0] };
        let (y, st) = integrate(&sys, &[1.0], 1.0, std::f64::consts::E, &IntegratorConfig::default()).unwrap();
        assert!((y[0] - std::f64::consts::E).abs() < 1e-9);
        assert!(st.accepted > 0);
    }

    #[test]
    fn power_source_launch() {
        let eps = 0.5;
        let sys = FnSystem { dim: 1, f: move |t: f64, _y: &[f64], d: &mut [f64]| d[0] = t.powf(eps) };
        let l = fuchsian_launch(&sys, &[0.0], eps, |t: f64| t.powf(eps), 1e-6, 1.0, &QuadConfig::default()).unwrap();
        assert!((l.state[0] - l.t0.powf(eps) / eps).abs() < 1e-14);
    }
}
