//! Scalar wave equation on Kasner: per-mode systems, energies, the Bessel
//! oracle, and the scattering maps between t = 1 and t = 0.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bessel;
use crate::error::{Result, ScatterError};
use crate::integrator::{self, IntegratorConfig, OdeSystem};
use crate::kasner::{self, KasnerBackground};
use crate::quadrature::{self, QuadConfig};
use crate::scalar::{Scalar, C};
use crate::spectral::{self, ScalarField, SymbolSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveModeState<S: Scalar> {
    pub phi: C<S>,
    pub psi: C<S>,
    pub t: S,
}

/// psi and phi~ = phi + log(t*/t) psi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveRenormState<S: Scalar> {
    pub psi: C<S>,
    pub phi_tilde: C<S>,
    pub t: S,
}

impl<S: Scalar> WaveModeState<S> {
    pub fn to_renorm(&self, t_star: S) -> WaveRenormState<S> {
        let l = (t_star / self.t).ln();
        WaveRenormState { psi: self.psi, phi_tilde: self.phi + self.psi * l, t: self.t }
    }

    fn pack(&self) -> [S; 4] {
        [self.phi.re, self.phi.im, self.psi.re, self.psi.im]
    }

    fn unpack(y: &[S], t: S) -> Self {
        WaveModeState { phi: C::new(y[0], y[1]), psi: C::new(y[2], y[3]), t }
    }
}

impl<S: Scalar> WaveRenormState<S> {
    pub fn to_physical(&self, t_star: S) -> WaveModeState<S> {
        let l = (t_star / self.t).ln();
        WaveModeState { phi: self.phi_tilde - self.psi * l, psi: self.psi, t: self.t }
    }

    fn pack(&self) -> [S; 4] {
        [self.psi.re, self.psi.im, self.phi_tilde.re, self.phi_tilde.im]
    }

    fn unpack(y: &[S], t: S) -> Self {
        WaveRenormState { psi: C::new(y[0], y[1]), phi_tilde: C::new(y[2], y[3]), t }
    }
}

fn nonzero(lambda: &[i64]) -> Result<()> {
    if kasner::is_zero_mode(lambda) {
        Err(ScatterError::ZeroMode)
    } else {
        Ok(())
    }
}

/// (t d/dt phi, t d/dt psi) = (psi, -tau^2 phi).
pub fn wave_rhs<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S, state: &WaveModeState<S>) -> Result<(C<S>, C<S>)> {
    nonzero(lambda)?;
    let t2 = kasner::tau_sq(bg, lambda, t);
    Ok((state.psi, -state.phi * t2))
}

/// Derivatives of (psi, phi~) below t*.
pub fn wave_rhs_renorm<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    t_star: S,
    t: S,
    state: &WaveRenormState<S>,
) -> Result<(C<S>, C<S>)> {
    nonzero(lambda)?;
    let t2 = kasner::tau_sq(bg, lambda, t);
    let l = (t_star / t).ln();
    let dpsi = (-state.phi_tilde + state.psi * l) * t2;
    Ok((dpsi, dpsi * l))
}

pub struct PhysicalSystem<'a, S: Scalar> {
    pub bg: &'a KasnerBackground<S>,
    pub lambda: &'a [i64],
}

impl<S: Scalar> OdeSystem<S> for PhysicalSystem<'_, S> {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, t: S, y: &[S], dy: &mut [S]) {
        let t2 = kasner::tau_sq(self.bg, self.lambda, t);
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = -t2 * y[0];
        dy[3] = -t2 * y[1];
    }
}

pub struct RenormSystem<'a, S: Scalar> {
    pub bg: &'a KasnerBackground<S>,
    pub lambda: &'a [i64],
    pub t_star: S,
}

impl<S: Scalar> OdeSystem<S> for RenormSystem<'_, S> {
    fn dim(&self) -> usize {
        4
    }
    fn rhs(&self, t: S, y: &[S], dy: &mut [S]) {
        let t2 = kasner::tau_sq(self.bg, self.lambda, t);
        if t2 == S::zero() {
            dy.iter_mut().for_each(|d| *d = S::zero());
            return;
        }
        let l = (self.t_star / t).ln();
        for c in 0..2 {
            let d = t2 * (-y[2 + c] + l * y[c]);
            dy[c] = d;
            dy[2 + c] = l * d;
        }
    }
}

/// zeta^2|psi|^2/tau + zeta Re(psi conj phi)/tau + |phi|^2/(2 tau) + zeta^2 tau |phi|^2.
pub fn energy_high<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S, state: &WaveModeState<S>) -> Result<S> {
    let z = kasner::zeta(bg, lambda, t)?;
    let tau = kasner::tau(bg, lambda, t);
    Ok(high_form(z, tau, state.phi, state.psi))
}

pub(crate) fn high_form<S: Scalar>(z: S, tau: S, phi: C<S>, psi: C<S>) -> S {
    z * z * psi.norm_sqr() / tau + z * (psi * phi.conj()).re / tau + phi.norm_sqr() / (S::lit(2.0) * tau) + z * z * tau * phi.norm_sqr()
}

/// |psi|^2 + |phi~|^2.
pub fn energy_low<S: Scalar>(state: &WaveRenormState<S>) -> S {
    state.psi.norm_sqr() + state.phi_tilde.norm_sqr()
}

/// (a, beta) with tau(t) = a t^beta, when the active axes share one exponent.
pub fn power_law<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64]) -> Result<(S, S)> {
    nonzero(lambda)?;
    let mut expo = None;
    let mut a2 = S::zero();
    for (&p, &l) in bg.p().iter().zip(lambda) {
        if l != 0 {
            match expo {
                None => expo = Some(p),
                Some(q) if q == p => {}
                Some(_) => return Err(ScatterError::NotPowerLawMode { lambda: lambda.to_vec() }),
            }
            let lf = S::from_int(l);
            a2 += lf * lf;
        }
    }
    Ok((a2.sqrt(), S::one() - expo.unwrap()))
}

/// Exact solution phi = cJ J0(zeta tau) + cY Y0(zeta tau) on a power-law mode.
pub fn bessel_oracle(bg: &KasnerBackground<f64>, lambda: &[i64], c_j: Complex64, c_y: Complex64, t: f64) -> Result<WaveModeState<f64>> {
    let (a, beta) = power_law(bg, lambda)?;
    let tau = a * t.powf(beta);
    let x = tau / beta;
    let b = bessel::bessel_all(x);
    let (y0, y1) = if c_y == Complex64::new(0.0, 0.0) { (0.0, 0.0) } else { (b.y0, b.y1) };
    Ok(WaveModeState { phi: c_j * b.j0 + c_y * y0, psi: -(c_j * b.j1 + c_y * y1) * tau, t })
}

/// (cJ, cY) of the Bessel solution through a given state, via the Wronskian
/// J1 Y0 - J0 Y1 = 2/(pi x).
pub fn bessel_coefficients(bg: &KasnerBackground<f64>, lambda: &[i64], state: &WaveModeState<f64>) -> Result<(Complex64, Complex64)> {
    let (a, beta) = power_law(bg, lambda)?;
    let tau = a * state.t.powf(beta);
    let x = tau / beta;
    let b = bessel::bessel_all(x);
    // phi = cJ J0 + cY Y0, -psi/tau = cJ J1 + cY Y1
    let u = -state.psi / tau;
    let w = 2.0 / (std::f64::consts::PI * x);
    let c_j = (state.phi * b.y1 - u * b.y0) / (-w);
    let c_y = (u * b.j0 - state.phi * b.j1) / (-w);
    Ok((c_j, c_y))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct WaveTolerances {
    pub integrator: IntegratorConfig,
    /// Target for the integrated remainder beyond the last integration time.
    pub tail_tol: f64,
    /// Multiplier applied to the tail majorant when choosing that time.
    pub c_safe: f64,
    /// Add one Picard correction for the remainder at the end of integration.
    pub extrapolate: bool,
}

impl Default for WaveTolerances {
    fn default() -> Self {
        WaveTolerances { integrator: IntegratorConfig::default(), tail_tol: 1e-8, c_safe: 10.0, extrapolate: true }
    }
}

impl WaveTolerances {
    pub fn quad(&self) -> QuadConfig {
        QuadConfig { abs_tol: 1e-300, rel_tol: (self.integrator.rel_tol * 1e-2).max(1e-14), max_intervals: 4000 }
    }
}

/// tau^2 (1 + log^2(t*/t)).
pub fn tail_majorant<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t_star: S, t: S) -> S {
    let l = (t_star / t).ln();
    kasner::tau_sq(bg, lambda, t) * (S::one() + l * l)
}

/// Largest t <= t* where c_safe times the tail majorant is below tail_tol.
pub fn tail_time<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t_star: S, tail_tol: S, c_safe: S) -> Result<S> {
    integrator::launch_time(&|t: S| c_safe * tail_majorant(bg, lambda, t_star, t), tail_tol, t_star)
}

/// Integral of rhs(s, y) ds/s over (0, t): the one-step Picard remainder.
pub(crate) fn picard_remainder<S: Scalar, Sys: OdeSystem<S>>(sys: &Sys, y: &[S], t: S, width: S, quad: &QuadConfig) -> Result<Vec<S>> {
    let r = quadrature::integrate_to_neg_infinity(|u: S, out: &mut [S]| sys.rhs(u.exp(), y, out), t.ln(), width, sys.dim(), quad)?;
    Ok(r.value)
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveModeReport {
    pub lambda: Vec<i64>,
    pub t_star: f64,
    pub e_high_1: f64,
    pub e_high_tstar: f64,
    pub e_low_end: f64,
    pub psi_inf: (f64, f64),
    pub phi_tilde_inf: (f64, f64),
    pub t_end: f64,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveModeLimits<S: Scalar> {
    pub psi_inf: C<S>,
    pub phi_tilde_inf: C<S>,
    pub t_star: S,
    pub t_end: S,
    pub tail_bound: S,
    pub e_high_1: S,
    pub e_high_tstar: S,
    pub e_low_end: S,
}

/// Cauchy data at t = 1 to limits at t = 0 for one nonzero mode.
pub fn mode_scatter_down<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    phi: C<S>,
    psi: C<S>,
    tol: &WaveTolerances,
) -> Result<WaveModeLimits<S>> {
    nonzero(lambda)?;
    bg.require_non_degenerate()?;
    let ts = kasner::t_star(bg, lambda)?;
    let start = WaveModeState { phi, psi, t: S::one() };
    let e1 = energy_high(bg, lambda, S::one(), &start)?;
    let phys = PhysicalSystem { bg, lambda };
    let at_star = if ts < S::one() {
        let (y, _) = integrator::integrate(&phys, &start.pack(), S::one(), ts, &tol.integrator)?;
        WaveModeState::unpack(&y, ts)
    } else {
        start
    };
    let e_ts = energy_high(bg, lambda, ts, &at_star)?;
    let ren = at_star.to_renorm(ts);
    let t_end = tail_time(bg, lambda, ts, S::lit(tol.tail_tol), S::lit(tol.c_safe))?;
    let rsys = RenormSystem { bg, lambda, t_star: ts };
    let (mut y, _) = integrator::integrate(&rsys, &ren.pack(), ts, t_end, &tol.integrator)?;
    let e_low_end = energy_low(&WaveRenormState::unpack(&y, t_end));
    if tol.extrapolate {
        let (_, zmax) = bg.zeta_bounds();
        let r = picard_remainder(&rsys, &y, t_end, S::lit(4.0) * zmax, &tol.quad())?;
        for (a, b) in y.iter_mut().zip(r) {
            *a += b;
        }
    }
    let lim = WaveRenormState::unpack(&y, t_end);
    Ok(WaveModeLimits {
        psi_inf: lim.psi,
        phi_tilde_inf: lim.phi_tilde,
        t_star: ts,
        t_end,
        tail_bound: tail_majorant(bg, lambda, ts, t_end),
        e_high_1: e1,
        e_high_tstar: e_ts,
        e_low_end,
    })
}

/// Limits at t = 0 to Cauchy data at t = 1 for one nonzero mode.
pub fn mode_scatter_up<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    psi_inf: C<S>,
    phi_tilde_inf: C<S>,
    tol: &WaveTolerances,
) -> Result<WaveModeState<S>> {
    nonzero(lambda)?;
    bg.require_non_degenerate()?;
    let ts = kasner::t_star(bg, lambda)?;
    let rsys = RenormSystem { bg, lambda, t_star: ts };
    let v = WaveRenormState { psi: psi_inf, phi_tilde: phi_tilde_inf, t: S::zero() }.pack();
    let (_, zmax) = bg.zeta_bounds();
    let c_safe = S::lit(tol.c_safe);
    let launch = integrator::fuchsian_launch(
        &rsys,
        &v,
        S::lit(2.0) / zmax,
        |t: S| c_safe * tail_majorant(bg, lambda, ts, t),
        S::lit(tol.tail_tol),
        ts,
        &tol.quad(),
    )?;
    let (y, _) = integrator::integrate(&rsys, &launch.state, launch.t0, ts, &tol.integrator)?;
    let at_star = WaveRenormState::unpack(&y, ts).to_physical(ts);
    if ts < S::one() {
        let phys = PhysicalSystem { bg, lambda };
        let (y, _) = integrator::integrate(&phys, &at_star.pack(), ts, S::one(), &tol.integrator)?;
        Ok(WaveModeState::unpack(&y, S::one()))
    } else {
        Ok(WaveModeState { t: S::one(), ..at_star })
    }
}

/// Cauchy data (phi_C, psi_C) at t = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveCauchyData {
    pub phi: ScalarField,
    pub psi: ScalarField,
}

/// Limits per mode; at lambda = 0 the entries are the conserved constants.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveAsymptotics {
    pub psi_inf: ScalarField,
    pub phi_tilde_inf: ScalarField,
}

impl WaveAsymptotics {
    /// phi_inf = phi~_inf - psi_inf log t* mode by mode.
    pub fn phi_inf(&self, bg: &KasnerBackground<f64>) -> Result<ScalarField> {
        let mut out = self.phi_tilde_inf.clone();
        for (k, l) in out.modes.iter() {
            if !kasner::is_zero_mode(&l) {
                out.coeffs[k] -= self.psi_inf.coeffs[k] * kasner::t_star(bg, &l)?.ln();
            }
        }
        Ok(out)
    }
}

fn check_same_modes(a: &ScalarField, b: &ScalarField, bg: &KasnerBackground<f64>) -> Result<()> {
    if a.modes != b.modes || a.modes.dim != bg.dim() {
        return Err(ScatterError::InvalidInput("fields must share a mode set matching the background".into()));
    }
    Ok(())
}

/// Work list: all modes, or the nonpositive half when both inputs are real.
fn work_indices(a: &ScalarField, b: &ScalarField) -> (Vec<usize>, bool) {
    let real = a.real && b.real;
    let n = if real { a.modes.zero_index() + 1 } else { a.modes.len() };
    ((0..n).collect(), real)
}

pub fn scatter_down(bg: &KasnerBackground<f64>, data: &WaveCauchyData, tol: &WaveTolerances) -> Result<(WaveAsymptotics, Vec<WaveModeReport>)> {
    bg.require_non_degenerate()?;
    check_same_modes(&data.phi, &data.psi, bg)?;
    let modes = data.phi.modes;
    let (idx, real) = work_indices(&data.phi, &data.psi);
    let zero = modes.zero_index();
    let results: Vec<(usize, Complex64, Complex64, Option<WaveModeReport>)> = idx
        .par_iter()
        .map(|&k| {
            let (phi, psi) = (data.phi.coeffs[k], data.psi.coeffs[k]);
            if k == zero {
                return Ok((k, psi, phi, None));
            }
            if phi == Complex64::new(0.0, 0.0) && psi == Complex64::new(0.0, 0.0) {
                return Ok((k, psi, phi, None));
            }
            let l = modes.mode(k);
            let r = mode_scatter_down(bg, &l, phi, psi, tol)?;
            let rep = WaveModeReport {
                lambda: l,
                t_star: r.t_star,
                e_high_1: r.e_high_1,
                e_high_tstar: r.e_high_tstar,
                e_low_end: r.e_low_end,
                psi_inf: (r.psi_inf.re, r.psi_inf.im),
                phi_tilde_inf: (r.phi_tilde_inf.re, r.phi_tilde_inf.im),
                t_end: r.t_end,
                tail_bound: r.tail_bound,
            };
            Ok((k, r.psi_inf, r.phi_tilde_inf, Some(rep)))
        })
        .collect::<Result<_>>()?;
    let mut psi_inf = ScalarField::zeros(modes, real);
    let mut phi_tilde_inf = ScalarField::zeros(modes, real);
    let mut reports = Vec::new();
    for (k, a, b, rep) in results {
        psi_inf.coeffs[k] = a;
        phi_tilde_inf.coeffs[k] = b;
        if real && k != zero {
            let c = modes.conj_index(k);
            psi_inf.coeffs[c] = a.conj();
            phi_tilde_inf.coeffs[c] = b.conj();
        }
        reports.extend(rep);
    }
    Ok((WaveAsymptotics { psi_inf, phi_tilde_inf }, reports))
}

pub fn scatter_up(bg: &KasnerBackground<f64>, asym: &WaveAsymptotics, tol: &WaveTolerances) -> Result<WaveCauchyData> {
    bg.require_non_degenerate()?;
    check_same_modes(&asym.psi_inf, &asym.phi_tilde_inf, bg)?;
    let modes = asym.psi_inf.modes;
    let (idx, real) = work_indices(&asym.psi_inf, &asym.phi_tilde_inf);
    let zero = modes.zero_index();
    let results: Vec<(usize, Complex64, Complex64)> = idx
        .par_iter()
        .map(|&k| {
            let (psi, phit) = (asym.psi_inf.coeffs[k], asym.phi_tilde_inf.coeffs[k]);
            if k == zero || (psi == Complex64::new(0.0, 0.0) && phit == Complex64::new(0.0, 0.0)) {
                return Ok((k, phit, psi));
            }
            let s = mode_scatter_up(bg, &modes.mode(k), psi, phit, tol)?;
            Ok((k, s.phi, s.psi))
        })
        .collect::<Result<_>>()?;
    let mut phi = ScalarField::zeros(modes, real);
    let mut psi = ScalarField::zeros(modes, real);
    for (k, a, b) in results {
        phi.coeffs[k] = a;
        psi.coeffs[k] = b;
        if real && k != zero {
            let c = modes.conj_index(k);
            phi.coeffs[c] = a.conj();
            psi.coeffs[c] = b.conj();
        }
    }
    Ok(WaveCauchyData { phi, psi })
}

/// sqrt(|phi|_{H^(s+1)}^2 + |psi|_{H^s}^2).
pub fn cauchy_norm(data: &WaveCauchyData, s: f64) -> f64 {
    let a = spectral::sobolev_norm(&data.phi, s + 1.0);
    let b = spectral::sobolev_norm(&data.psi, s);
    (a * a + b * b).sqrt()
}

/// sqrt(|psi_inf|_{H^(s+1/2)}^2 + |phi_inf + log(T*) psi_inf|_{H^(s+1/2)}^2).
pub fn asymptotic_norm(psi_inf: &ScalarField, phi_inf: &ScalarField, s: f64, bg: &KasnerBackground<f64>) -> Result<f64> {
    let corr = spectral::symbol_apply_scalar(psi_inf, &SymbolSpec::LogTstar, bg)?;
    let mut shifted = phi_inf.clone();
    for (a, b) in shifted.coeffs.iter_mut().zip(&corr.coeffs) {
        *a += *b;
    }
    let a = spectral::sobolev_norm(psi_inf, s + 0.5);
    let b = spectral::sobolev_norm(&shifted, s + 0.5);
    Ok((a * a + b * b).sqrt())
}

/// (H^s_C norm of the data, H^s_inf norm of the asymptotics).
pub fn wave_hilbert_norms(data: &WaveCauchyData, asym: &WaveAsymptotics, s: f64, bg: &KasnerBackground<f64>) -> Result<(f64, f64)> {
    Ok((cauchy_norm(data, s), asymptotic_norm(&asym.psi_inf, &asym.phi_inf(bg)?, s, bg)?))
}

pub fn mode_reports_csv(reports: &[WaveModeReport]) -> String {
    let mut out = String::from("lambda,t_star,E1,E_tstar,E_low_end,psi_inf_re,psi_inf_im,phi_tilde_inf_re,phi_tilde_inf_im,tail_bound\n");
    for r in reports {
        let l: Vec<String> = r.lambda.iter().map(|x| x.to_string()).collect();
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
            l.join(" "),
            r.t_star,
            r.e_high_1,
            r.e_high_tstar,
            r.e_low_end,
            r.psi_inf.0,
            r.psi_inf.1,
            r.phi_tilde_inf.0,
            r.phi_tilde_inf.1,
            r.tail_bound
        ));
    }
    out
}

/// Two-sided energy ratio constants measured along one trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnergyWindow {
    /// max over [t*, 1] of max(E/E(1), E(1)/E) for the high energy.
    pub c_high: f64,
    /// max over [t_end, t*] of max(E/E(t*), E(t*)/E) for the low energy.
    pub c_low: f64,
    /// E_high(t*) / E_low(t*).
    pub seam_ratio: f64,
}

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| (a.ln() + (b.ln() - a.ln()) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Samples both energies on log grids and reports the ratio constants.
pub fn energy_window(bg: &KasnerBackground<f64>, lambda: &[i64], phi: Complex64, psi: Complex64, tol: &WaveTolerances, samples: usize) -> Result<EnergyWindow> {
    nonzero(lambda)?;
    let ts = kasner::t_star(bg, lambda)?;
    let phys = PhysicalSystem { bg, lambda };
    let start = WaveModeState { phi, psi, t: 1.0 };
    let e1 = energy_high(bg, lambda, 1.0, &start)?;
    let mut c_high: f64 = 1.0;
    let mut at_star = start;
    if ts < 1.0 {
        let grid: Vec<f64> = log_grid(1.0, ts, samples).into_iter().skip(1).collect();
        let (ys, _) = integrator::integrate_samples(&phys, &start.pack(), 1.0, &grid, &tol.integrator)?;
        for (y, &t) in ys.iter().zip(&grid) {
            let e = energy_high(bg, lambda, t, &WaveModeState::unpack(y, t))?;
            c_high = c_high.max(e / e1).max(e1 / e);
        }
        at_star = WaveModeState::unpack(ys.last().unwrap(), ts);
    }
    let ren = at_star.to_renorm(ts);
    let e_star = energy_low(&ren);
    let seam_ratio = energy_high(bg, lambda, ts, &at_star)? / e_star;
    let t_end = tail_time(bg, lambda, ts, tol.tail_tol, tol.c_safe)?;
    let rsys = RenormSystem { bg, lambda, t_star: ts };
    let grid: Vec<f64> = log_grid(ts, t_end, samples).into_iter().skip(1).collect();
    let (ys, _) = integrator::integrate_samples(&rsys, &ren.pack(), ts, &grid, &tol.integrator)?;
    let mut c_low: f64 = 1.0;
    for (y, &t) in ys.iter().zip(&grid) {
        let e = energy_low(&WaveRenormState::unpack(y, t));
        c_low = c_low.max(e / e_star).max(e_star / e);
    }
    Ok(EnergyWindow { c_high, c_low, seam_ratio })
}

/// max over sampled t in [t_end, t*] of |psi(t) - psi_inf| / (tau^2 (1 + L^2) E_low(t*)^(1/2)).
pub fn tail_rate_constant(bg: &KasnerBackground<f64>, lambda: &[i64], psi_star: Complex64, phi_tilde_star: Complex64, tol: &WaveTolerances, samples: usize) -> Result<f64> {
    nonzero(lambda)?;
    let ts = kasner::t_star(bg, lambda)?;
    let rsys = RenormSystem { bg, lambda, t_star: ts };
    let ren = WaveRenormState { psi: psi_star, phi_tilde: phi_tilde_star, t: ts };
    let e_star = energy_low(&ren).sqrt();
    let t_end = tail_time(bg, lambda, ts, tol.tail_tol, tol.c_safe)?;
    let grid: Vec<f64> = log_grid(ts, t_end, samples).into_iter().skip(1).collect();
    let (ys, _) = integrator::integrate_samples(&rsys, &ren.pack(), ts, &grid, &tol.integrator)?;
    let (_, zmax) = bg.zeta_bounds();
    let mut last = ys.last().unwrap().clone();
    let r = picard_remainder(&rsys, &last, t_end, 4.0 * zmax, &tol.quad())?;
    for (a, b) in last.iter_mut().zip(r) {
        *a += b;
    }
    let psi_inf = Complex64::new(last[0], last[1]);
    let mut c: f64 = 0.0;
    for (y, &t) in ys.iter().zip(&grid) {
        let d = (Complex64::new(y[0], y[1]) - psi_inf).norm();
        c = c.max(d / (tail_majorant(bg, lambda, ts, t) * e_star));
    }
    Ok(c)
}
