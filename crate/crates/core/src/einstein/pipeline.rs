use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::integrator::{self, IntegratorConfig};
use crate::kasner::{self, KasnerBackground};
use crate::quadrature::QuadConfig;
use crate::scalar::{cz, Scalar, C};
use crate::spectral::{self, Decay, ModeSet, ScalarField, TensorField};
use crate::wave::picard_remainder;
use crate::Complex64;

use super::constraints::{asymptotic_constraints_residual, constraints_residual, project_asymptotic_constraints, project_constraints, ConstraintResidual};
use super::energy::{high_form, low_form, mid_form};
use super::equations::{Mode, PhysicalSystem, RenormSystem};
use super::gauge::{cmcfa_xi, gauge_transform_renorm, gauge_transform_state, to_cmcsh};
use super::tensor::{self, CMat};
use super::{EinsteinModeState, EinsteinRenormState, Gauge};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EinsteinTolerances {
    pub integrator: IntegratorConfig,
    /// Target for c_safe (t/t*)^delta at the last integration time.
    pub tail_tol: f64,
    pub c_safe: f64,
    /// Add one Picard correction for the remainder at the end of integration.
    pub extrapolate: bool,
    /// Largest relative constraint residual accepted on input.
    pub constraint_tol: f64,
}

impl Default for EinsteinTolerances {
    fn default() -> Self {
        EinsteinTolerances {
            integrator: IntegratorConfig::default(),
            tail_tol: 1e-9,
            c_safe: 10.0,
            extrapolate: true,
            constraint_tol: 1e-8,
        }
    }
}

impl EinsteinTolerances {
    pub fn quad(&self) -> QuadConfig {
        QuadConfig { abs_tol: 1e-300, rel_tol: (self.integrator.rel_tol * 1e-2).max(1e-14), max_intervals: 4000 }
    }
}

/// (t/t*)^delta.
pub fn einstein_tail_majorant<S: Scalar>(bg: &KasnerBackground<S>, t_star: S, t: S) -> S {
    (t / t_star).powf(bg.delta())
}

/// Time where c_safe (t/t*)^delta = tail_tol.
pub fn einstein_tail_time<S: Scalar>(bg: &KasnerBackground<S>, t_star: S, tail_tol: S, c_safe: S) -> Result<S> {
    let r = (tail_tol / c_safe).ln() / bg.delta();
    let t = t_star * r.exp().min(S::one());
    if t > S::zero() && t.is_finite() {
        Ok(t)
    } else {
        Err(ScatterError::TailUnreachable { tail_tol: tail_tol.to_f64_lossy() })
    }
}

fn check_cauchy<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], state: &EinsteinModeState<S>, tol: f64) -> Result<()> {
    let r = constraints_residual(bg, lambda, state);
    let worst = r.max_relative_with_gauge();
    if worst <= tol {
        Ok(())
    } else {
        Err(ScatterError::ConstraintViolation { residual: worst, tolerance: tol })
    }
}

fn check_asymptotic<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], asym: &EinsteinRenormState<S>, tol: f64) -> Result<()> {
    let r = asymptotic_constraints_residual(bg, lambda, asym)?;
    let worst = r.max_relative_with_gauge();
    if worst <= tol {
        Ok(())
    } else {
        Err(ScatterError::ConstraintViolation { residual: worst, tolerance: tol })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EinsteinModeLimits<S: Scalar> {
    /// Frequency-adapted limits (kappa, Upsilon~, psi, phi~); `t` is 0.
    pub asym: EinsteinRenormState<S>,
    /// Limits of the zero-shift solution through the CMCSH state at t*, before
    /// the frequency-adapted gauge change.
    pub tc_limits: EinsteinRenormState<S>,
    pub xi_inf: Vec<C<S>>,
    /// Harmonic gauge vector accumulated on [t*, 1]: t d/dt xi = chi, xi(1) = 0.
    pub xi_sh_tstar: Vec<C<S>>,
    pub t_star: S,
    pub t_end: S,
    pub tail_bound: S,
    pub steps: usize,
}

/// CMCSH evolution of constraint-satisfying data from its time to `t_to`,
/// together with the gauge vector integral.
pub(crate) fn evolve_cmcsh<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    state: &EinsteinModeState<S>,
    t_to: S,
    cfg: &IntegratorConfig,
) -> Result<(EinsteinModeState<S>, Vec<C<S>>, usize)> {
    let d = bg.dim();
    let sys = PhysicalSystem { m: Mode::new(bg, lambda), gauge: Gauge::Cmcsh, with_xi: true };
    let mut y0 = state.pack();
    y0.extend(std::iter::repeat_n(S::zero(), 2 * d));
    if t_to == state.t {
        return Ok((EinsteinModeState { gauge: Gauge::Cmcsh, ..state.clone() }, vec![cz(); d], 0));
    }
    let (y, stats) = integrator::integrate(&sys, &y0, state.t, t_to, cfg)?;
    let xi = tensor::unpack(&y, 2 * d * d + 2, d);
    Ok((EinsteinModeState::unpack(&y, d, t_to, Gauge::Cmcsh), xi, stats.accepted))
}

/// Cauchy data at t = 1 (CMCSH, constraint-satisfying) to frequency-adapted
/// limits at t = 0 for one nonzero mode.
pub fn einstein_mode_scatter_down<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    data: &EinsteinModeState<S>,
    tol: &EinsteinTolerances,
) -> Result<EinsteinModeLimits<S>> {
    if kasner::is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    bg.require_subcritical()?;
    check_cauchy(bg, lambda, data, tol.constraint_tol)?;
    let d = bg.dim();
    let ts = kasner::t_star(bg, lambda)?;
    let (at_star, xi_sh, steps_sh) = evolve_cmcsh(bg, lambda, data, ts, &tol.integrator)?;
    let ren = at_star.to_renorm(bg, ts);
    let t_end = einstein_tail_time(bg, ts, S::lit(tol.tail_tol), S::lit(tol.c_safe))?;
    let rsys = RenormSystem { m: Mode::new(bg, lambda), ln_t_star: ts.ln() };
    let (mut y, stats) = integrator::integrate(&rsys, &ren.pack(), ts, t_end, &tol.integrator)?;
    if tol.extrapolate {
        let r = picard_remainder(&rsys, &y, t_end, S::lit(4.0) / bg.delta(), &tol.quad())?;
        for (a, b) in y.iter_mut().zip(r) {
            *a += b;
        }
    }
    let tc_limits = EinsteinRenormState::unpack(&y, d, S::zero());
    let xi_l = cmcfa_xi(bg, lambda, &tc_limits.upsilon_tilde)?;
    let asym = gauge_transform_renorm(bg, lambda, ts, &tc_limits, &xi_l);
    let xi_inf = xi_sh.iter().zip(&xi_l).map(|(&a, &b)| a - b).collect();
    Ok(EinsteinModeLimits {
        asym,
        tc_limits,
        xi_inf,
        xi_sh_tstar: xi_sh,
        t_star: ts,
        t_end,
        tail_bound: einstein_tail_majorant(bg, ts, t_end),
        steps: steps_sh + stats.accepted,
    })
}

/// Frequency-adapted limits to Cauchy data at t = 1 in CMCSH gauge, one nonzero mode.
pub fn einstein_mode_scatter_up<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    asym: &EinsteinRenormState<S>,
    tol: &EinsteinTolerances,
) -> Result<EinsteinModeState<S>> {
    if kasner::is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    bg.require_subcritical()?;
    check_asymptotic(bg, lambda, asym, tol.constraint_tol)?;
    let d = bg.dim();
    let ts = kasner::t_star(bg, lambda)?;
    let rsys = RenormSystem { m: Mode::new(bg, lambda), ln_t_star: ts.ln() };
    let c_safe = S::lit(tol.c_safe);
    let launch = integrator::fuchsian_launch(
        &rsys,
        &asym.pack(),
        bg.delta(),
        |t: S| c_safe * einstein_tail_majorant(bg, ts, t),
        S::lit(tol.tail_tol),
        ts,
        &tol.quad(),
    )?;
    let y = if launch.t0 < ts {
        integrator::integrate(&rsys, &launch.state, launch.t0, ts, &tol.integrator)?.0
    } else {
        launch.state
    };
    let phys = EinsteinRenormState::unpack(&y, d, ts).to_physical(bg, ts);
    let (sh, _) = to_cmcsh(bg, lambda, &phys)?;
    let (out, _, _) = evolve_cmcsh(bg, lambda, &sh, S::one(), &tol.integrator)?;
    Ok(out)
}

/// Residuals sampled along the CMCSH evolution from the data's time down to t*.
pub fn cmcsh_constraint_history<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    data: &EinsteinModeState<S>,
    cfg: &IntegratorConfig,
    samples: usize,
) -> Result<Vec<(S, ConstraintResidual)>> {
    if kasner::is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    let d = bg.dim();
    let ts = kasner::t_star(bg, lambda)?;
    let grid = log_grid(data.t, ts, samples.max(2));
    let sys = PhysicalSystem { m: Mode::new(bg, lambda), gauge: Gauge::Cmcsh, with_xi: false };
    let mut out = vec![(data.t, constraints_residual(bg, lambda, data))];
    if ts < data.t {
        let (ys, _) = integrator::integrate_samples(&sys, &data.pack(), data.t, &grid[1..], cfg)?;
        for (y, &t) in ys.iter().zip(&grid[1..]) {
            let s = EinsteinModeState::unpack(y, d, t, Gauge::Cmcsh);
            out.push((t, constraints_residual(bg, lambda, &s)));
        }
    }
    Ok(out)
}

fn log_grid<S: Scalar>(a: S, b: S, n: usize) -> Vec<S> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|k| (la + (lb - la) * S::from_int(k as i64) / S::from_int(n as i64 - 1)).exp()).collect()
}

/// Largest t with tau(t) <= target (tau increases with t).
pub fn time_at_tau<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], target: S) -> Result<S> {
    if kasner::is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    let ts = kasner::t_star(bg, lambda)?;
    let (mut a, mut b) = (ts.ln(), ts.ln());
    while kasner::tau(bg, lambda, b.exp()) < target {
        b += S::one();
    }
    while kasner::tau(bg, lambda, a.exp()) > target {
        a -= S::one();
    }
    for _ in 0..200 {
        let m = (a + b) * S::lit(0.5);
        if kasner::tau(bg, lambda, m.exp()) <= target {
            a = m;
        } else {
            b = m;
        }
        if b - a < S::epsilon() * S::lit(4.0) * (S::one() + a.abs()) {
            break;
        }
    }
    Ok(a.exp())
}

/// Two-sided energy constants measured along one trajectory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EinsteinEnergyWindow {
    /// max of max(E/E(1), E(1)/E) for the high energy on tau >= tau_ringed, t <= 1.
    pub c_high: f64,
    /// Same for the mid energy on 1 <= tau <= tau_ringed (1 when that window is empty).
    pub c_mid: f64,
    /// Same for the low energy on [t_end, t*] relative to t*.
    pub c_low: f64,
    /// E_high / E_mid at tau = tau_ringed.
    pub seam_ringed: f64,
    /// E_mid / E_low at tau = 1; E_high / E_low when tau_ringed = 1.
    pub seam_unit: f64,
}

fn ratio_const(e: f64, e0: f64) -> f64 {
    (e / e0).max(e0 / e)
}

/// Samples all three energies along the evolution of `data` (CMCSH at t = 1,
/// then zero-shift renormalized below t*).
pub fn einstein_energy_window(
    bg: &KasnerBackground<f64>,
    lambda: &[i64],
    data: &EinsteinModeState<f64>,
    tol: &EinsteinTolerances,
    samples: usize,
) -> Result<EinsteinEnergyWindow> {
    bg.require_subcritical()?;
    let d = bg.dim();
    let ts = kasner::t_star(bg, lambda)?;
    let ringed = bg.tau_ringed().unwrap_or(1.0);
    let t_ring = if kasner::tau(bg, lambda, 1.0) <= ringed { 1.0 } else { time_at_tau(bg, lambda, ringed)? };
    let sys = PhysicalSystem { m: Mode::new(bg, lambda), gauge: Gauge::Cmcsh, with_xi: false };
    let e1 = high_form(bg, lambda, data)?;
    let mut c_high: f64 = 1.0;
    let mut state = data.clone();
    if t_ring < 1.0 {
        let grid = log_grid(1.0, t_ring, samples.max(2));
        let (ys, _) = integrator::integrate_samples(&sys, &data.pack(), 1.0, &grid[1..], &tol.integrator)?;
        for (y, &t) in ys.iter().zip(&grid[1..]) {
            state = EinsteinModeState::unpack(y, d, t, Gauge::Cmcsh);
            c_high = c_high.max(ratio_const(high_form(bg, lambda, &state)?, e1));
        }
    }
    let e_high_ring = high_form(bg, lambda, &state)?;
    let e_mid_ring = mid_form(bg, &state);
    let mut c_mid: f64 = 1.0;
    if ts < t_ring {
        let grid = log_grid(t_ring, ts, samples.max(2));
        let (ys, _) = integrator::integrate_samples(&sys, &state.pack(), t_ring, &grid[1..], &tol.integrator)?;
        for (y, &t) in ys.iter().zip(&grid[1..]) {
            state = EinsteinModeState::unpack(y, d, t, Gauge::Cmcsh);
            c_mid = c_mid.max(ratio_const(mid_form(bg, &state), e_mid_ring));
        }
    }
    let at_star = EinsteinModeState { t: ts, ..state };
    let ren = at_star.to_renorm(bg, ts);
    let e_low_star = low_form(bg, ts, &ren);
    let upper = if ringed > 1.0 { mid_form(bg, &at_star) } else { high_form(bg, lambda, &at_star)? };
    let t_end = einstein_tail_time(bg, ts, tol.tail_tol, tol.c_safe)?;
    let rsys = RenormSystem { m: Mode::new(bg, lambda), ln_t_star: ts.ln() };
    let grid = log_grid(ts, t_end, samples.max(2));
    let (ys, _) = integrator::integrate_samples(&rsys, &ren.pack(), ts, &grid[1..], &tol.integrator)?;
    let mut c_low: f64 = 1.0;
    for (y, &t) in ys.iter().zip(&grid[1..]) {
        let r = EinsteinRenormState::unpack(y, d, t);
        c_low = c_low.max(ratio_const(low_form(bg, ts, &r), e_low_star));
    }
    Ok(EinsteinEnergyWindow {
        c_high,
        c_mid,
        c_low,
        seam_ringed: e_high_ring / e_mid_ring,
        seam_unit: upper / e_low_star,
    })
}

/// Elliptic quantities of a state against their majorants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EllipticReport {
    pub tau: f64,
    pub energy: f64,
    pub tr_eta: f64,
    pub nu: f64,
    /// |chi|_g = sqrt(sum_j t^(2p_j) |chi^j|^2); 0 outside CMCSH.
    pub chi_g: f64,
    /// Majorant of |tr eta| + |nu| (high: tau^(-3/2) E^(1/2); low: the log-weighted
    /// bound max_a (t/t*)^(2-2p_a) (1 + log(t*/t)) E^(1/2)).
    pub majorant: f64,
    /// t tau^(-3/2) E^(1/2) in the high regime, 0 otherwise.
    pub chi_majorant: f64,
    /// (|tr eta| + |nu|) / majorant.
    pub constant: f64,
    /// |chi|_g / chi_majorant.
    pub chi_constant: f64,
}

/// High-regime check on a CMCSH state (tau >= tau_ringed).
pub fn elliptic_estimates_check<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    state: &EinsteinModeState<S>,
) -> Result<EllipticReport> {
    let e = super::energy::einstein_energy(bg, lambda, state, super::energy::Regime::High)?;
    let t = state.t;
    let tau = kasner::tau(bg, lambda, t);
    let m = Mode::new(bg, lambda);
    let nu = super::equations::lapse_solve_sh(bg, lambda, t, &state.eta);
    let chi = super::equations::shift_solve_cmcsh(bg, lambda, t, &state.eta, nu, state.phi)?;
    let lt = t.ln();
    let chi_g = m.p.iter().zip(&chi).fold(S::zero(), |a, (&p, c)| a + (S::lit(2.0) * p * lt).exp() * c.norm_sqr()).sqrt();
    let tr = state.eta.trace().norm();
    let maj = tau.powf(S::lit(-1.5)) * e.sqrt();
    let chi_maj = t * maj;
    let f = |x: S| x.to_f64_lossy();
    let safe = |a: S, b: S| if b > S::zero() { f(a / b) } else { 0.0 };
    Ok(EllipticReport {
        tau: f(tau),
        energy: f(e),
        tr_eta: f(tr),
        nu: f(nu.norm()),
        chi_g: f(chi_g),
        majorant: f(maj),
        chi_majorant: f(chi_maj),
        constant: safe(tr + nu.norm(), maj),
        chi_constant: safe(chi_g, chi_maj),
    })
}

/// Low-regime lapse check on renormalized variables (T = t*).
pub fn elliptic_estimates_check_low<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    state: &EinsteinRenormState<S>,
) -> Result<EllipticReport> {
    let e = super::energy::einstein_energy_low(bg, lambda, state)?;
    let ts = kasner::t_star(bg, lambda)?;
    let t = state.t;
    let phys = state.to_physical(bg, ts);
    let nu = super::equations::lapse_solve(bg, lambda, t, &phys.eta);
    let l = (ts / t).ln();
    let w = bg.p().iter().fold(S::zero(), |a, &p| a.max((t / ts).powf(S::lit(2.0) - S::lit(2.0) * p)));
    let maj = w * (S::one() + l) * e.sqrt();
    let f = |x: S| x.to_f64_lossy();
    Ok(EllipticReport {
        tau: f(kasner::tau(bg, lambda, t)),
        energy: f(e),
        tr_eta: f(state.upsilon_tilde.trace().norm()),
        nu: f(nu.norm()),
        chi_g: 0.0,
        majorant: f(maj),
        chi_majorant: 0.0,
        constant: if maj > S::zero() { f(nu.norm() / maj) } else { 0.0 },
        chi_constant: 0.0,
    })
}

/// Cauchy data at t = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EinsteinCauchyData {
    pub eta: TensorField,
    pub kappa: TensorField,
    pub phi: ScalarField,
    pub psi: ScalarField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GaugeTime {
    Static,
    Sampled(f64),
}

/// Per-mode complex D-vectors; the zero mode is always 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeVector {
    pub modes: ModeSet,
    pub xi: Vec<Complex64>,
    pub time: GaugeTime,
}

impl GaugeVector {
    pub fn zeros(modes: ModeSet, time: GaugeTime) -> Self {
        GaugeVector { modes, xi: vec![Complex64::new(0.0, 0.0); modes.len() * modes.dim], time }
    }

    pub fn block(&self, idx: usize) -> &[Complex64] {
        &self.xi[idx * self.modes.dim..(idx + 1) * self.modes.dim]
    }

    pub fn block_mut(&mut self, idx: usize) -> &mut [Complex64] {
        let d = self.modes.dim;
        &mut self.xi[idx * d..(idx + 1) * d]
    }
}

/// Frequency-adapted asymptotic data; the zero mode holds the conserved
/// (kappa, eta, psi, phi) of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct EinsteinAsymptotics {
    pub kappa_inf: TensorField,
    pub upsilon_tilde_inf: TensorField,
    pub psi_inf: ScalarField,
    pub phi_tilde_inf: ScalarField,
    pub xi_inf: GaugeVector,
}

#[derive(Debug, Clone, Serialize)]
pub struct EinsteinModeReport {
    pub lambda: Vec<i64>,
    pub t_star: f64,
    pub t_end: f64,
    pub tail_bound: f64,
    pub steps: usize,
    pub input_residual: f64,
    pub output_residual: f64,
}

impl EinsteinCauchyData {
    pub fn zeros(modes: ModeSet, real: bool) -> Self {
        EinsteinCauchyData {
            eta: TensorField::zeros(modes, real),
            kappa: TensorField::zeros(modes, real),
            phi: ScalarField::zeros(modes, real),
            psi: ScalarField::zeros(modes, real),
        }
    }

    pub fn modes(&self) -> ModeSet {
        self.phi.modes
    }

    fn is_real(&self) -> bool {
        self.eta.real && self.kappa.real && self.phi.real && self.psi.real
    }

    /// State of mode `k` at t = 1 in CMCSH gauge.
    pub fn mode_state(&self, k: usize) -> EinsteinModeState<f64> {
        let d = self.modes().dim;
        EinsteinModeState {
            eta: CMat::from_slice(d, self.eta.block(k)),
            kappa: CMat::from_slice(d, self.kappa.block(k)),
            phi: self.phi.coeffs[k],
            psi: self.psi.coeffs[k],
            t: 1.0,
            gauge: Gauge::Cmcsh,
        }
    }

    pub fn set_mode_state(&mut self, k: usize, s: &EinsteinModeState<f64>) {
        self.eta.block_mut(k).copy_from_slice(&s.eta.data);
        self.kappa.block_mut(k).copy_from_slice(&s.kappa.data);
        self.phi.coeffs[k] = s.phi;
        self.psi.coeffs[k] = s.psi;
    }

    fn check(&self, bg: &KasnerBackground<f64>) -> Result<()> {
        let m = self.modes();
        if m.dim != bg.dim() || self.eta.modes != m || self.kappa.modes != m || self.psi.modes != m {
            return Err(ScatterError::InvalidInput("fields must share a mode set matching the background".into()));
        }
        Ok(())
    }
}

impl EinsteinAsymptotics {
    pub fn zeros(modes: ModeSet, real: bool) -> Self {
        EinsteinAsymptotics {
            kappa_inf: TensorField::zeros(modes, real),
            upsilon_tilde_inf: TensorField::zeros(modes, real),
            psi_inf: ScalarField::zeros(modes, real),
            phi_tilde_inf: ScalarField::zeros(modes, real),
            xi_inf: GaugeVector::zeros(modes, GaugeTime::Static),
        }
    }

    pub fn modes(&self) -> ModeSet {
        self.psi_inf.modes
    }

    fn is_real(&self) -> bool {
        self.kappa_inf.real && self.upsilon_tilde_inf.real && self.psi_inf.real && self.phi_tilde_inf.real
    }

    pub fn mode_state(&self, k: usize) -> EinsteinRenormState<f64> {
        let d = self.modes().dim;
        EinsteinRenormState {
            kappa: CMat::from_slice(d, self.kappa_inf.block(k)),
            upsilon_tilde: CMat::from_slice(d, self.upsilon_tilde_inf.block(k)),
            psi: self.psi_inf.coeffs[k],
            phi_tilde: self.phi_tilde_inf.coeffs[k],
            t: 0.0,
        }
    }

    pub fn set_mode_state(&mut self, k: usize, s: &EinsteinRenormState<f64>) {
        self.kappa_inf.block_mut(k).copy_from_slice(&s.kappa.data);
        self.upsilon_tilde_inf.block_mut(k).copy_from_slice(&s.upsilon_tilde.data);
        self.psi_inf.coeffs[k] = s.psi;
        self.phi_tilde_inf.coeffs[k] = s.phi_tilde;
    }

    fn check(&self, bg: &KasnerBackground<f64>) -> Result<()> {
        let m = self.modes();
        if m.dim != bg.dim() || self.kappa_inf.modes != m || self.upsilon_tilde_inf.modes != m || self.phi_tilde_inf.modes != m {
            return Err(ScatterError::InvalidInput("fields must share a mode set matching the background".into()));
        }
        Ok(())
    }
}

fn is_zero_state(s: &EinsteinModeState<f64>) -> bool {
    s.norm_sqr() == 0.0
}

/// Work list: every mode, or the nonpositive half for real fields.
fn work(modes: ModeSet, real: bool) -> Vec<usize> {
    let n = if real { modes.zero_index() + 1 } else { modes.len() };
    (0..n).collect()
}

fn conj_state(s: &EinsteinModeState<f64>) -> EinsteinModeState<f64> {
    EinsteinModeState { eta: s.eta.conj(), kappa: s.kappa.conj(), phi: s.phi.conj(), psi: s.psi.conj(), ..s.clone() }
}

fn conj_renorm(s: &EinsteinRenormState<f64>) -> EinsteinRenormState<f64> {
    EinsteinRenormState {
        kappa: s.kappa.conj(),
        upsilon_tilde: s.upsilon_tilde.conj(),
        psi: s.psi.conj(),
        phi_tilde: s.phi_tilde.conj(),
        t: s.t,
    }
}

fn as_renorm(s: &EinsteinModeState<f64>) -> EinsteinRenormState<f64> {
    EinsteinRenormState { kappa: s.kappa.clone(), upsilon_tilde: s.eta.clone(), psi: s.psi, phi_tilde: s.phi, t: 0.0 }
}

fn as_physical(s: &EinsteinRenormState<f64>) -> EinsteinModeState<f64> {
    EinsteinModeState {
        eta: s.upsilon_tilde.clone(),
        kappa: s.kappa.clone(),
        phi: s.phi_tilde,
        psi: s.psi,
        t: 1.0,
        gauge: Gauge::Cmcsh,
    }
}

/// Scatters every mode to t = 0. Input modes must satisfy the constraints and
/// the harmonic condition at t = 1 to `tol.constraint_tol`.
pub fn einstein_scatter_down(
    bg: &KasnerBackground<f64>,
    data: &EinsteinCauchyData,
    tol: &EinsteinTolerances,
) -> Result<(EinsteinAsymptotics, Vec<EinsteinModeReport>)> {
    bg.require_subcritical()?;
    data.check(bg)?;
    let modes = data.modes();
    let real = data.is_real();
    let zero = modes.zero_index();
    let d = modes.dim;
    type Out = (usize, EinsteinRenormState<f64>, Vec<Complex64>, Option<EinsteinModeReport>);
    let results: Vec<Out> = work(modes, real)
        .par_iter()
        .map(|&k| {
            let s = data.mode_state(k);
            let l = modes.mode(k);
            if k == zero {
                check_cauchy(bg, &l, &s, tol.constraint_tol)?;
                return Ok((k, as_renorm(&s), vec![cz(); d], None));
            }
            if is_zero_state(&s) {
                return Ok((k, as_renorm(&s), vec![cz(); d], None));
            }
            let input_residual = constraints_residual(bg, &l, &s).max_relative_with_gauge();
            let r = einstein_mode_scatter_down(bg, &l, &s, tol)?;
            let output_residual = asymptotic_constraints_residual(bg, &l, &r.asym)?.max_relative_with_gauge();
            let rep = EinsteinModeReport {
                lambda: l,
                t_star: r.t_star,
                t_end: r.t_end,
                tail_bound: r.tail_bound,
                steps: r.steps,
                input_residual,
                output_residual,
            };
            Ok((k, r.asym, r.xi_inf, Some(rep)))
        })
        .collect::<Result<_>>()?;
    let mut asym = EinsteinAsymptotics::zeros(modes, real);
    let mut reports = Vec::new();
    for (k, a, xi, rep) in results {
        asym.set_mode_state(k, &a);
        asym.xi_inf.block_mut(k).copy_from_slice(&xi);
        if real && k != zero {
            let c = modes.conj_index(k);
            asym.set_mode_state(c, &conj_renorm(&a));
            for (dst, src) in asym.xi_inf.block_mut(c).iter_mut().zip(&xi) {
                *dst = src.conj();
            }
        }
        reports.extend(rep);
    }
    Ok((asym, reports))
}

/// Inverse of [`einstein_scatter_down`]: limits satisfying the asymptotic
/// constraints and the frequency-adapted gauge condition to data at t = 1.
pub fn einstein_scatter_up(bg: &KasnerBackground<f64>, asym: &EinsteinAsymptotics, tol: &EinsteinTolerances) -> Result<EinsteinCauchyData> {
    bg.require_subcritical()?;
    asym.check(bg)?;
    let modes = asym.modes();
    let real = asym.is_real();
    let zero = modes.zero_index();
    let results: Vec<(usize, EinsteinModeState<f64>)> = work(modes, real)
        .par_iter()
        .map(|&k| {
            let a = asym.mode_state(k);
            let l = modes.mode(k);
            if k == zero {
                check_asymptotic(bg, &l, &a, tol.constraint_tol)?;
                return Ok((k, as_physical(&a)));
            }
            if a.norm_sqr() == 0.0 {
                return Ok((k, as_physical(&a)));
            }
            Ok((k, einstein_mode_scatter_up(bg, &l, &a, tol)?))
        })
        .collect::<Result<_>>()?;
    let mut data = EinsteinCauchyData::zeros(modes, real);
    for (k, s) in results {
        data.set_mode_state(k, &s);
        if real && k != zero {
            data.set_mode_state(modes.conj_index(k), &conj_state(&s));
        }
    }
    Ok(data)
}

/// Projects every mode of `data` onto the constraints and the harmonic
/// condition at t = 1. Real fields stay real.
pub fn project_cauchy_data(bg: &KasnerBackground<f64>, data: &EinsteinCauchyData) -> Result<EinsteinCauchyData> {
    data.check(bg)?;
    let modes = data.modes();
    let real = data.is_real();
    let mut out = data.clone();
    let projected: Vec<(usize, EinsteinModeState<f64>)> =
        work(modes, real).par_iter().map(|&k| (k, project_constraints(bg, &modes.mode(k), &data.mode_state(k)))).collect();
    for (k, s) in projected {
        out.set_mode_state(k, &s);
        if real && k != modes.zero_index() {
            out.set_mode_state(modes.conj_index(k), &conj_state(&s));
        }
    }
    Ok(out)
}

/// Projects every mode onto the asymptotic constraints and the frequency-adapted
/// gauge condition; xi is left untouched.
pub fn project_asymptotics(bg: &KasnerBackground<f64>, asym: &EinsteinAsymptotics) -> Result<EinsteinAsymptotics> {
    asym.check(bg)?;
    let modes = asym.modes();
    let real = asym.is_real();
    let mut out = asym.clone();
    let projected: Vec<(usize, EinsteinRenormState<f64>)> = work(modes, real)
        .par_iter()
        .map(|&k| Ok((k, project_asymptotic_constraints(bg, &modes.mode(k), &asym.mode_state(k))?)))
        .collect::<Result<_>>()?;
    for (k, s) in projected {
        out.set_mode_state(k, &s);
        if real && k != modes.zero_index() {
            out.set_mode_state(modes.conj_index(k), &conj_renorm(&s));
        }
    }
    Ok(out)
}

/// Random real band-limited data projected onto the constraint set; seeds
/// seed, seed+1, seed+2, seed+3 drive eta, kappa, phi, psi.
pub fn sample_constrained_data(bg: &KasnerBackground<f64>, seed: u64, modes: ModeSet, decay: Decay) -> Result<EinsteinCauchyData> {
    let raw = EinsteinCauchyData {
        eta: spectral::sample_tensor(seed, modes, decay, true),
        kappa: spectral::sample_tensor(seed.wrapping_add(1), modes, decay, true),
        phi: spectral::sample_scalar(seed.wrapping_add(2), modes, decay, true),
        psi: spectral::sample_scalar(seed.wrapping_add(3), modes, decay, true),
    };
    project_cauchy_data(bg, &raw)
}

/// Static gauge change of every mode of Cauchy data at time `t`.
pub fn gauge_transform_data(bg: &KasnerBackground<f64>, data: &EinsteinCauchyData, xi: &GaugeVector, t: f64) -> Result<EinsteinCauchyData> {
    data.check(bg)?;
    let modes = data.modes();
    if xi.modes != modes {
        return Err(ScatterError::InvalidInput("gauge vector mode set differs from the data".into()));
    }
    if xi.block(modes.zero_index()).iter().any(|z| z.norm() != 0.0) {
        return Err(ScatterError::InvalidInput("gauge vector must vanish on the zero mode".into()));
    }
    let mut out = data.clone();
    for (k, l) in modes.iter() {
        let s = EinsteinModeState { t, ..data.mode_state(k) };
        out.set_mode_state(k, &gauge_transform_state(bg, &l, &s, xi.block(k)));
    }
    Ok(out)
}

/// Static gauge change of asymptotic data, Upsilon~ weighted at T = t* per mode.
pub fn gauge_transform_asymptotics(bg: &KasnerBackground<f64>, asym: &EinsteinAsymptotics, xi: &GaugeVector) -> Result<EinsteinAsymptotics> {
    asym.check(bg)?;
    let modes = asym.modes();
    if xi.modes != modes {
        return Err(ScatterError::InvalidInput("gauge vector mode set differs from the data".into()));
    }
    let mut out = asym.clone();
    for (k, l) in modes.iter() {
        if k == modes.zero_index() {
            continue;
        }
        let ts = kasner::t_star(bg, &l)?;
        out.set_mode_state(k, &gauge_transform_renorm(bg, &l, ts, &asym.mode_state(k), xi.block(k)));
    }
    Ok(out)
}

/// sqrt(|eta|_{H^(s+1)}^2 + |kappa|_{H^s}^2 + |phi|_{H^(s+1)}^2 + |psi|_{H^s}^2).
pub fn einstein_cauchy_norm(data: &EinsteinCauchyData, s: f64) -> f64 {
    let parts = [
        spectral::sobolev_norm(&data.eta, s + 1.0),
        spectral::sobolev_norm(&data.kappa, s),
        spectral::sobolev_norm(&data.phi, s + 1.0),
        spectral::sobolev_norm(&data.psi, s),
    ];
    parts.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Frequency-adapted H^(s+1/2) norm of the limits.
pub fn einstein_asymptotic_norm(asym: &EinsteinAsymptotics, s: f64, bg: &KasnerBackground<f64>) -> Result<f64> {
    let parts = [
        spectral::freq_adapted_norm(&asym.kappa_inf, s + 0.5, bg)?,
        spectral::freq_adapted_norm(&asym.upsilon_tilde_inf, s + 0.5, bg)?,
        spectral::sobolev_norm(&asym.psi_inf, s + 0.5),
        spectral::sobolev_norm(&asym.phi_tilde_inf, s + 0.5),
    ];
    Ok(parts.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// (H^s_C norm of the data, frequency-adapted H^s_inf norm of the limits).
pub fn einstein_hilbert_norms(
    data: &EinsteinCauchyData,
    asym: &EinsteinAsymptotics,
    s: f64,
    bg: &KasnerBackground<f64>,
) -> Result<(f64, f64)> {
    Ok((einstein_cauchy_norm(data, s), einstein_asymptotic_norm(asym, s, bg)?))
}

/// Evolves a physical state to `t_to` in its own gauge.
pub fn evolve_mode<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    state: &EinsteinModeState<S>,
    t_to: S,
    cfg: &IntegratorConfig,
) -> Result<EinsteinModeState<S>> {
    if state.gauge == Gauge::Cmcsh && kasner::is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    let sys = PhysicalSystem { m: Mode::new(bg, lambda), gauge: state.gauge, with_xi: false };
    let (y, _) = integrator::integrate(&sys, &state.pack(), state.t, t_to, cfg)?;
    Ok(EinsteinModeState::unpack(&y, bg.dim(), t_to, state.gauge))
}

/// Evolves renormalized variables (T = t*) to `t_to` <= t*.
pub fn evolve_renorm<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    state: &EinsteinRenormState<S>,
    t_to: S,
    cfg: &IntegratorConfig,
) -> Result<EinsteinRenormState<S>> {
    if kasner::is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    let ts = kasner::t_star(bg, lambda)?;
    let rsys = RenormSystem { m: Mode::new(bg, lambda), ln_t_star: ts.ln() };
    let (y, _) = integrator::integrate(&rsys, &state.pack(), state.t, t_to, cfg)?;
    Ok(EinsteinRenormState::unpack(&y, bg.dim(), t_to))
}
