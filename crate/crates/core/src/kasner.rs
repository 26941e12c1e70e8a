//! Kasner background geometry and the per-mode scalar functions built on it.

use serde::Serialize;

use crate::error::{Result, ScatterError};
use crate::quadrature::{self, QuadConfig};
use crate::scalar::Scalar;

const TAU_RINGED_GRID: [f64; 6] = [1.0, 1.5, 2.0, 3.0, 4.0, 8.0];
const SUBCRITICAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KasnerBackground<S: Scalar> {
    p: Vec<S>,
    p_phi: S,
    delta: S,
    tau_ringed: Option<S>,
}

/// Validated background. Degenerate and non-subcritical exponents are accepted
/// and flagged; operations that need more check the flags themselves.
pub fn make_background<S: Scalar>(p: Vec<S>, p_phi: S) -> Result<KasnerBackground<S>> {
    if p.len() < 2 {
        return Err(ScatterError::InvalidInput(format!("dimension {} < 2", p.len())));
    }
    if p.iter().any(|x| !x.is_finite()) || !p_phi.is_finite() {
        return Err(ScatterError::InvalidInput("non-finite exponent".into()));
    }
    let sum_p = p.iter().fold(S::zero(), |a, &x| a + x);
    let sum_sq = p.iter().fold(S::zero(), |a, &x| a + x * x) + S::lit(2.0) * p_phi * p_phi;
    let tol = S::lit(1e-10).max(S::lit(64.0) * S::epsilon());
    if (sum_p - S::one()).abs() > tol || (sum_sq - S::one()).abs() > tol {
        return Err(ScatterError::KasnerRelationViolation { sum_p: sum_p.to_f64_lossy(), sum_sq: sum_sq.to_f64_lossy() });
    }
    let delta = margin(&p);
    let mut bg = KasnerBackground { p, p_phi, delta, tau_ringed: None };
    if !bg.is_degenerate() {
        bg.tau_ringed = Some(select_tau_ringed(&bg));
    }
    Ok(bg)
}

fn margin<S: Scalar>(p: &[S]) -> S {
    let d = p.len();
    let mut m = S::infinity();
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                if j != k {
                    m = m.min(S::one() + p[i] - p[j] - p[k]);
                }
            }
        }
    }
    m
}

/// min over i and j != k of 1 + p_i - p_j - p_k.
pub fn subcriticality_margin<S: Scalar>(bg: &KasnerBackground<S>) -> S {
    bg.delta
}

/// Smallest grid value for which every 2x2 block of the high-frequency form
/// is positive definite on sampled zeta.
fn select_tau_ringed<S: Scalar>(bg: &KasnerBackground<S>) -> S {
    let (zmin, zmax) = bg.zeta_bounds();
    let n = 33;
    for &cand in TAU_RINGED_GRID.iter() {
        let tr = S::lit(cand);
        let mut ok = true;
        for k in 0..n {
            let z = zmin + (zmax - zmin) * S::from_int(k) / S::from_int(n - 1);
            for &pi in &bg.p {
                for &pj in &bg.p {
                    let lhs = S::lit(4.0) * (S::lit(0.5) + z * z * tr * tr);
                    let b = S::one() + S::lit(2.0) * (pi - pj) * z;
                    if lhs - b * b <= S::lit(1e-9) * lhs {
                        ok = false;
                    }
                }
            }
        }
        if ok {
            return tr;
        }
    }
    S::lit(*TAU_RINGED_GRID.last().unwrap())
}

impl<S: Scalar> KasnerBackground<S> {
    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn p(&self) -> &[S] {
        &self.p
    }

    pub fn p_phi(&self) -> S {
        self.p_phi
    }

    pub fn delta(&self) -> S {
        self.delta
    }

    pub fn max_p(&self) -> S {
        self.p.iter().fold(S::neg_infinity(), |a, &x| a.max(x))
    }

    pub fn min_p(&self) -> S {
        self.p.iter().fold(S::infinity(), |a, &x| a.min(x))
    }

    pub fn is_degenerate(&self) -> bool {
        self.max_p() >= S::one()
    }

    pub fn is_subcritical(&self) -> bool {
        self.delta > S::lit(SUBCRITICAL_TOL)
    }

    pub fn is_isotropic(&self) -> bool {
        self.p.iter().all(|&x| x == self.p[0])
    }

    /// Regime threshold between mid and high frequencies. `None` when degenerate.
    pub fn tau_ringed(&self) -> Option<S> {
        self.tau_ringed
    }

    pub fn require_non_degenerate(&self) -> Result<()> {
        if self.is_degenerate() {
            Err(ScatterError::DegenerateBackground { max_p: self.max_p().to_f64_lossy() })
        } else {
            Ok(())
        }
    }

    pub fn require_subcritical(&self) -> Result<()> {
        self.require_non_degenerate()?;
        if self.is_subcritical() {
            Ok(())
        } else {
            Err(ScatterError::NotSubcritical { delta: self.delta.to_f64_lossy() })
        }
    }

    /// (min, max) of 1/(1 - p_i).
    pub fn zeta_bounds(&self) -> (S, S) {
        let zmin = S::one() / (S::one() - self.min_p());
        let zmax = S::one() / (S::one() - self.max_p());
        (zmin, zmax)
    }

    pub fn record(&self) -> BackgroundRecord {
        BackgroundRecord {
            dim: self.dim(),
            p: self.p.iter().map(|x| x.to_f64_lossy()).collect(),
            p_phi: self.p_phi.to_f64_lossy(),
        }
    }
}

/// Serializable background description.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct BackgroundRecord {
    pub dim: usize,
    pub p: Vec<f64>,
    pub p_phi: f64,
}

impl BackgroundRecord {
    /// `D = 3; p = [..]; p_phi = ..` with 17 significant digits.
    pub fn to_text(&self) -> String {
        let ps: Vec<String> = self.p.iter().map(|x| format!("{:.16e}", x)).collect();
        format!("D = {}\np = [{}]\np_phi = {:.16e}\n", self.dim, ps.join(", "), self.p_phi)
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let mut dim = None;
        let mut p = None;
        let mut p_phi = None;
        for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| ScatterError::Parse(line.to_string()))?;
            let v = v.trim();
            let num = |x: &str| x.trim().parse::<f64>().map_err(|e| ScatterError::Parse(format!("{x}: {e}")));
            match k.trim() {
                "D" => dim = Some(v.parse::<usize>().map_err(|e| ScatterError::Parse(e.to_string()))?),
                "p" => {
                    let inner = v.strip_prefix('[').and_then(|x| x.strip_suffix(']')).ok_or_else(|| ScatterError::Parse(v.to_string()))?;
                    p = Some(inner.split(',').map(num).collect::<Result<Vec<_>>>()?);
                }
                "p_phi" => p_phi = Some(num(v)?),
                other => return Err(ScatterError::Parse(format!("unknown key {other}"))),
            }
        }
        let rec = BackgroundRecord {
            dim: dim.ok_or_else(|| ScatterError::Parse("missing D".into()))?,
            p: p.ok_or_else(|| ScatterError::Parse("missing p".into()))?,
            p_phi: p_phi.ok_or_else(|| ScatterError::Parse("missing p_phi".into()))?,
        };
        if rec.p.len() != rec.dim {
            return Err(ScatterError::Parse("length of p differs from D".into()));
        }
        Ok(rec)
    }

    pub fn build(&self) -> Result<KasnerBackground<f64>> {
        make_background(self.p.clone(), self.p_phi)
    }
}

/// Point of the D = 3 vacuum Kasner circle,
/// p_i = 1/3 + (2/3) cos(theta + 2 pi i / 3), p_phi = 0.
pub fn vacuum_circle(theta: f64) -> Result<KasnerBackground<f64>> {
    let p = (0..3).map(|i| (1.0 + 2.0 * (theta + 2.0 * std::f64::consts::PI * i as f64 / 3.0).cos()) / 3.0).collect();
    make_background(p, 0.0)
}

/// Random background of dimension `dim` with subcriticality margin at least
/// `min_delta`, by rejection from the Kasner relations: p = 1/D + r u with u a
/// unit vector orthogonal to (1, ..., 1) and r^2 = 1 - 1/D - 2 p_phi^2.
pub fn sample_background(seed: u64, dim: usize, min_delta: f64) -> Result<KasnerBackground<f64>> {
    use rand::{Rng, SeedableRng};
    if dim < 2 || !(min_delta > 0.0) {
        return Err(ScatterError::InvalidInput(format!("dim {dim}, min_delta {min_delta}")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = dim as f64;
    let r2_max = 1.0 - 1.0 / d;
    for _ in 0..100_000 {
        let p_phi = rng.gen_range(0.0..r2_max / 2.0).sqrt();
        let r = (r2_max - 2.0 * p_phi * p_phi).max(0.0).sqrt();
        let mut u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = u.iter().sum::<f64>() / d;
        u.iter_mut().for_each(|x| *x -= mean);
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n < 1e-6 {
            continue;
        }
        let p: Vec<f64> = u.iter().map(|x| 1.0 / d + r * x / n).collect();
        if margin(&p) >= min_delta {
            let bg = make_background(p, p_phi)?;
            if !bg.is_degenerate() {
                return Ok(bg);
            }
        }
    }
    Err(ScatterError::InvalidInput(format!("no background with delta >= {min_delta} in dimension {dim}")))
}

fn lam<S: Scalar>(l: i64) -> S {
    S::from_int(l)
}

pub fn tau_sq<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S) -> S {
    let lt = t.ln();
    bg.p.iter().zip(lambda).fold(S::zero(), |acc, (&p, &l)| {
        if l == 0 {
            acc
        } else {
            let li: S = lam(l);
            acc + ((S::lit(2.0) - S::lit(2.0) * p) * lt).exp() * li * li
        }
    })
}

/// sqrt(sum_i t^(2-2p_i) lambda_i^2).
pub fn tau<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S) -> S {
    tau_sq(bg, lambda, t).sqrt()
}

/// Reciprocal logarithmic derivative of tau.
pub fn zeta<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S) -> Result<S> {
    if is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    let lt = t.ln();
    let mut num = S::zero();
    let mut den = S::zero();
    for (&p, &l) in bg.p.iter().zip(lambda) {
        if l != 0 {
            let li: S = lam(l);
            let a = S::lit(2.0) - S::lit(2.0) * p;
            let w = (a * lt).exp() * li * li;
            num += w;
            den += a * w;
        }
    }
    let z = S::lit(2.0) * num / den;
    // Clamp rounding excursions outside the provable range.
    let (zmin, zmax) = bg.zeta_bounds();
    Ok(z.max(zmin).min(zmax))
}

pub fn is_zero_mode(lambda: &[i64]) -> bool {
    lambda.iter().all(|&l| l == 0)
}

fn log_tau_sq_and_slope<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], s: S) -> (S, S) {
    let mut sum = S::zero();
    let mut dsum = S::zero();
    for (&p, &l) in bg.p.iter().zip(lambda) {
        if l != 0 {
            let li: S = lam(l);
            let a = S::lit(2.0) - S::lit(2.0) * p;
            let w = (a * s).exp() * li * li;
            sum += w;
            dsum += a * w;
        }
    }
    (sum.ln(), dsum / sum)
}

/// Root of tau(t) = 1; equals 1 for the zero mode.
pub fn t_star<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64]) -> Result<S> {
    bg.require_non_degenerate()?;
    if is_zero_mode(lambda) {
        return Ok(S::one());
    }
    let d = S::from_int(bg.dim() as i64);
    // Each active axis gives t* <= |l_i|^(-1/(1-p_i)); the axis carrying at
    // least a 1/D share of tau^2 gives t* >= (D l_i^2)^(-1/(2-2p_i)).
    let mut hi = S::zero();
    let mut lo = S::zero();
    let mut first = true;
    for (&p, &l) in bg.p.iter().zip(lambda) {
        if l != 0 {
            let li: S = lam::<S>(l).abs();
            let a = S::one() - p;
            let up = -li.ln() / a;
            let dn = -(d * li * li).ln() / (S::lit(2.0) * a);
            if first {
                hi = up;
                lo = dn;
                first = false;
            } else {
                hi = hi.min(up);
                lo = lo.min(dn);
            }
        }
    }
    hi = hi.min(S::zero());
    lo = lo.min(hi);
    let (mut a, mut b) = (lo, hi);
    let f = |s: S| log_tau_sq_and_slope(bg, lambda, s).0;
    if f(b) <= S::zero() {
        return Ok(b.exp());
    }
    if f(a) >= S::zero() {
        return Ok(a.exp());
    }
    for _ in 0..200 {
        let m = (a + b) * S::lit(0.5);
        if m <= a || m >= b {
            break;
        }
        if f(m) > S::zero() {
            b = m;
        } else {
            a = m;
        }
        if (b - a) <= S::lit(1e-6) * (S::one() + a.abs()) {
            break;
        }
    }
    let mut s = (a + b) * S::lit(0.5);
    for _ in 0..20 {
        let (v, slope) = log_tau_sq_and_slope(bg, lambda, s);
        let step = v / slope;
        let next = (s - step).max(a).min(b);
        let done = (next - s).abs() <= S::epsilon() * (S::one() + s.abs());
        s = next;
        if done {
            break;
        }
    }
    Ok(s.exp())
}

/// G_ij(t;T) = integral from t to T of s^(2p_i - 2p_j) ds/s, row-major D x D.
pub fn g_tensor<S: Scalar>(bg: &KasnerBackground<S>, t: S, big_t: S) -> Vec<S> {
    let d = bg.dim();
    let mut g = vec![S::zero(); d * d];
    for i in 0..d {
        for j in 0..d {
            g[i * d + j] = g_entry(bg.p[i], bg.p[j], t, big_t);
        }
    }
    g
}

pub fn g_entry<S: Scalar>(pi: S, pj: S, t: S, big_t: S) -> S {
    let lr = (big_t / t).ln();
    if pi == pj {
        return lr;
    }
    let e = S::lit(2.0) * (pi - pj);
    // (T^e - t^e)/e = T^e (1 - (t/T)^e)/e, written via expm1 for small e.
    let tpow = (e * big_t.ln()).exp();
    -tpow * (-e * lr).exp_m1() / e
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSample<S: Scalar> {
    pub t: S,
    pub g_diag: Vec<S>,
    pub g_inv_diag: Vec<S>,
    pub weingarten_diag: Vec<S>,
}

pub fn metric_sample<S: Scalar>(bg: &KasnerBackground<S>, t: S) -> MetricSample<S> {
    let lt = t.ln();
    MetricSample {
        t,
        g_diag: bg.p.iter().map(|&p| (S::lit(2.0) * p * lt).exp()).collect(),
        g_inv_diag: bg.p.iter().map(|&p| (-S::lit(2.0) * p * lt).exp()).collect(),
        weingarten_diag: bg.p.iter().map(|&p| -p).collect(),
    }
}

/// |lambda|_g(t) computed from the inverse metric.
pub fn lambda_gnorm<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S) -> S {
    let m = metric_sample(bg, t);
    m.g_inv_diag
        .iter()
        .zip(lambda)
        .fold(S::zero(), |a, (&gi, &l)| {
            let li: S = lam(l);
            a + gi * li * li
        })
        .sqrt()
}

/// |t k|_g = sqrt(sum p_i^2).
pub fn weingarten_gnorm<S: Scalar>(bg: &KasnerBackground<S>) -> S {
    bg.p.iter().fold(S::zero(), |a, &p| a + p * p).sqrt()
}

/// Mode-dependent data cached for a single Fourier mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeGeometry<S: Scalar> {
    pub lambda: Vec<i64>,
    pub t_star: S,
    pub tau_ringed: S,
}

impl<S: Scalar> ModeGeometry<S> {
    pub fn new(bg: &KasnerBackground<S>, lambda: &[i64]) -> Result<Self> {
        if lambda.len() != bg.dim() {
            return Err(ScatterError::InvalidInput(format!("mode has {} components, D = {}", lambda.len(), bg.dim())));
        }
        let t_star = t_star(bg, lambda)?;
        Ok(ModeGeometry { lambda: lambda.to_vec(), t_star, tau_ringed: bg.tau_ringed().unwrap_or(S::one()) })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub passed: bool,
    /// Smallest (majorant - measured) margin, relative where meaningful.
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub lambda: Vec<i64>,
    pub checks: Vec<BoundCheck>,
}

impl BoundsReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Tracker {
    name: &'static str,
    slack: f64,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Tracker { name, slack: f64::INFINITY }
    }
    fn see(&mut self, s: f64) {
        if s.is_nan() {
            self.slack = f64::NEG_INFINITY;
        } else {
            self.slack = self.slack.min(s);
        }
    }
    fn finish(self, tol: f64) -> BoundCheck {
        BoundCheck { name: self.name.to_string(), passed: self.slack >= -tol, slack: self.slack }
    }
}

/// Evaluates the closed-form bounds on tau, zeta, G and t* numerically.
pub fn check_bounds(bg: &KasnerBackground<f64>, lambda: &[i64], t_grid: &[f64]) -> Result<BoundsReport> {
    if is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    bg.require_non_degenerate()?;
    let mut grid: Vec<f64> = t_grid.iter().copied().filter(|&t| t > 0.0 && t <= 1.0).collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (zmin, zmax) = bg.zeta_bounds();
    let ts = t_star(bg, lambda)?;
    let mut checks = Vec::new();

    let mut range = Tracker::new("zeta_range");
    let mut mono = Tracker::new("zeta_monotone");
    let mut tv = Tracker::new("zeta_total_variation");
    let mut tau_inc = Tracker::new("tau_increasing");
    let mut variation = 0.0;
    let zs: Vec<f64> = grid.iter().map(|&t| zeta(bg, lambda, t)).collect::<Result<_>>()?;
    for (k, &z) in zs.iter().enumerate() {
        range.see((z - zmin).min(zmax - z));
        if k > 0 {
            mono.see(zs[k - 1] - z + 1e-10);
            variation += (z - zs[k - 1]).abs();
            tau_inc.see(tau(bg, lambda, grid[k]) - tau(bg, lambda, grid[k - 1]));
        }
    }
    tv.see(zmax - zmin - variation);
    checks.push(range.finish(1e-12));
    checks.push(mono.finish(0.0));
    checks.push(tv.finish(1e-12));
    checks.push(tau_inc.finish(0.0));

    let mut root = Tracker::new("tau_at_t_star");
    root.see(1e-12 - (tau(bg, lambda, ts) - 1.0).abs());
    checks.push(root.finish(0.0));

    let mut gn = Tracker::new("lambda_gnorm_identity");
    for &t in &grid {
        let a = lambda_gnorm(bg, lambda, t);
        let b = tau(bg, lambda, t) / t;
        gn.see(1e-12 - (a - b).abs() / b);
    }
    checks.push(gn.finish(0.0));

    let qc = QuadConfig { abs_tol: 1e-15, rel_tol: 1e-12, max_intervals: 4000 };
    let mut high = Tracker::new("tau_negative_power_integral");
    for alpha in [0.5, 1.0, 2.0] {
        let r = quadrature::integrate(|u: f64, o: &mut [f64]| o[0] = tau(bg, lambda, u.exp()).powf(-alpha), ts.ln(), 0.0, 1, &qc)?;
        let bound = zmax / alpha;
        high.see((bound - r.value[0]) / bound);
    }
    checks.push(high.finish(1e-10));

    let mut low = Tracker::new("tau_low_log_integral");
    let c_low = 0.5 * zmax * (1.0 + zmax * zmax).max(1.5 * zmax * zmax / (zmin * zmin));
    for &t in grid.iter().filter(|&&t| t <= ts) {
        let r = quadrature::integrate_to_neg_infinity(
            |u: f64, o: &mut [f64]| {
                let l = ts.ln() - u;
                o[0] = tau_sq(bg, lambda, u.exp()) * (1.0 + l * l);
            },
            t.ln(),
            4.0 * zmax,
            1,
            &qc,
        )?;
        let l = (ts / t).ln();
        let bound = c_low * tau_sq(bg, lambda, t) * (1.0 + l * l);
        low.see((bound - r.value[0]) / bound);
    }
    checks.push(low.finish(1e-10));

    let mut gb = Tracker::new("g_tensor_bound");
    let d = bg.dim();
    for &t in grid.iter().filter(|&&t| t <= ts) {
        let g = g_tensor(bg, t, ts);
        for i in 0..d {
            for j in 0..d {
                let e = 2.0 * (bg.p()[i] - bg.p()[j]);
                let bound = (t / ts).powf(e).max(1.0) * ts.powf(e) * (ts / t).ln();
                let v = g[i * d + j];
                let scale = bound.max(f64::MIN_POSITIVE);
                gb.see(((bound - v) / scale).min(v / scale + 1e-14));
            }
        }
    }
    checks.push(gb.finish(1e-12));

    // Growth windows of the t* symbol: per-axis upper bound, the 1/D-share
    // lower bound, and their Japanese-bracket consequences.
    let mut win = Tracker::new("t_star_symbol_windows");
    let br2 = 1.0 + lambda.iter().map(|&l| (l * l) as f64).sum::<f64>();
    let df = d as f64;
    let mut lower = f64::INFINITY;
    for (&p, &l) in bg.p().iter().zip(lambda) {
        if l != 0 {
            let li = (l as f64).abs();
            let up = li.powf(-1.0 / (1.0 - p));
            win.see((up - ts) / up + 1e-13);
            lower = lower.min((df * li * li).powf(-0.5 / (1.0 - p)));
        }
    }
    win.see((ts - lower) / ts + 1e-13);
    let inv_window = (df * br2).powf(0.5 / (1.0 - bg.max_p()));
    win.see((inv_window - 1.0 / ts) / inv_window + 1e-13);
    let max_axis = lambda.iter().map(|&l| l.abs()).max().unwrap_or(0) as f64;
    let fwd_axis = max_axis.powf(-1.0 / (1.0 - bg.min_p()));
    win.see((fwd_axis - ts) / fwd_axis + 1e-13);
    checks.push(win.finish(0.0));

    Ok(BoundsReport { lambda: lambda.to_vec(), checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn aniso() -> KasnerBackground<f64> {
        make_background(vec![0.5, 0.25, 0.25], 0.3125f64.sqrt()).unwrap()
    }

    #[test]
    fn generators_respect_relations() {
        let b = vacuum_circle(0.0).unwrap();
        assert!((b.p()[0] - 1.0).abs() < 1e-15);
        assert!(b.is_degenerate());
        for seed in 0..20 {
            for dim in [2, 3, 4] {
                let bg = sample_background(seed, dim, 0.05).unwrap();
                assert!(bg.is_subcritical() && !bg.is_degenerate() && bg.delta() >= 0.05);
            }
        }
        assert_eq!(sample_background(1, 3, 0.2).unwrap(), sample_background(1, 3, 0.2).unwrap());
    }

    #[test]
    fn t_star_closed_forms() {
        let iso = make_background(vec![1.0 / 3.0; 3], (1.0f64 / 3.0).sqrt()).unwrap();
        assert!((t_star(&iso, &[2, 0, 0]).unwrap() - 2f64.powf(-1.5)).abs() < 1e-15);
        assert!((t_star(&aniso(), &[0, 2, 0]).unwrap() - 4f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(t_star(&iso, &[1, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn g_entry_continuity_near_equal_exponents() {
        let a: f64 = g_entry(0.3, 0.3, 0.1, 1.0);
        let b = g_entry(0.3 + 1e-12, 0.3, 0.1, 1.0);
        assert!((a - b).abs() < 1e-10);
    }
}
