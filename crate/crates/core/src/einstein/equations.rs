//! Per-mode right-hand sides of the linearized Einstein-scalar field system in
//! the Fourier convention d_k -> +i lambda_k, with g_ii = t^(2p_i) and
//! t k_i^j = -p_i delta_i^j.

use crate::einstein::tensor::CMat;
use crate::error::{Result, ScatterError};
use crate::integrator::OdeSystem;
use crate::kasner::{self, KasnerBackground};
use crate::scalar::{ci, cr, cz, Scalar, C};

use super::tensor::{pack, unpack};
use super::{EinsteinModeState, EinsteinRenormState, Gauge};

/// Mode constants reused by every evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Mode<S: Scalar> {
    pub d: usize,
    pub p: Vec<S>,
    pub p_phi: S,
    pub lam: Vec<S>,
}

impl<S: Scalar> Mode<S> {
    pub fn new(bg: &KasnerBackground<S>, lambda: &[i64]) -> Self {
        Mode { d: bg.dim(), p: bg.p().to_vec(), p_phi: bg.p_phi(), lam: lambda.iter().map(|&l| S::from_int(l)).collect() }
    }

    /// ln t^(2 - 2p_a).
    pub fn log_weights(&self, t: S) -> Vec<S> {
        let lt = t.ln();
        self.p.iter().map(|&p| (S::lit(2.0) - S::lit(2.0) * p) * lt).collect()
    }

    /// t^(2 - 2p_a) = t^2 g^aa.
    pub fn weights(&self, t: S) -> Vec<S> {
        self.log_weights(t).into_iter().map(|x| x.exp()).collect()
    }

    /// g^aa = t^(-2p_a).
    pub fn inv_metric(&self, t: S) -> Vec<S> {
        let lt = t.ln();
        self.p.iter().map(|&p| (-S::lit(2.0) * p * lt).exp()).collect()
    }

    pub fn tau_sq(&self, w: &[S]) -> S {
        w.iter().zip(&self.lam).fold(S::zero(), |a, (&w, &l)| a + w * l * l)
    }
}

/// Source of weighted eta entries: `get(lw, a, b)` returns exp(lw) eta_a^b.
/// Lets the renormalized system form the weighted products without ever
/// materializing the large G kappa parts of eta.
trait EtaSource<S: Scalar> {
    fn get(&self, lw: S, a: usize, b: usize) -> C<S>;
}

struct Plain<'a, S: Scalar>(&'a CMat<S>);

impl<S: Scalar> EtaSource<S> for Plain<'_, S> {
    fn get(&self, lw: S, a: usize, b: usize) -> C<S> {
        self.0[(a, b)] * lw.exp()
    }
}

/// eta = Upsilon~ - G kappa^T with G_ab = integral_t^T s^(2p_a - 2p_b) ds/s.
pub(crate) struct Renormalized<'a, S: Scalar> {
    pub upsilon: &'a CMat<S>,
    pub kappa: &'a CMat<S>,
    pub p: &'a [S],
    pub ln_t: S,
    pub ln_big_t: S,
}

impl<S: Scalar> Renormalized<'_, S> {
    /// exp(lw) G_ab without overflow in either factor.
    fn weighted_g(&self, lw: S, a: usize, b: usize) -> S {
        let e = S::lit(2.0) * (self.p[a] - self.p[b]);
        let l = self.ln_big_t - self.ln_t;
        if e == S::zero() {
            lw.exp() * l
        } else if e > S::zero() {
            // T^e (1 - (t/T)^e) / e, bounded by T^e / e.
            (lw + e * self.ln_big_t).exp() * (-(-e * l).exp_m1()) / e
        } else {
            // t^e ((T/t)^e - 1) / e with the t^e folded into the weight.
            (lw + e * self.ln_t).exp() * (e * l).exp_m1() / e
        }
    }
}

impl<S: Scalar> EtaSource<S> for Renormalized<'_, S> {
    fn get(&self, lw: S, a: usize, b: usize) -> C<S> {
        self.upsilon[(a, b)] * lw.exp() - self.kappa[(b, a)] * self.weighted_g(lw, a, b)
    }
}

/// sum over a, i of t^2 g^aa lambda_i lambda_a eta_a^i.
fn grad_grad<S: Scalar>(m: &Mode<S>, lw: &[S], eta: &impl EtaSource<S>) -> C<S> {
    let mut acc = cz();
    for a in 0..m.d {
        if m.lam[a] == S::zero() {
            continue;
        }
        for i in 0..m.d {
            if m.lam[i] != S::zero() {
                acc += eta.get(lw[a], a, i) * (m.lam[i] * m.lam[a]);
            }
        }
    }
    acc
}

fn lapse_from<S: Scalar>(m: &Mode<S>, lw: &[S], tau2: S, tr: C<S>, eta: &impl EtaSource<S>) -> C<S> {
    let two = S::lit(2.0);
    (tr * (two * tau2) - grad_grad(m, lw, eta) * two) / (S::one() + tau2)
}

/// t^2 Ric_i^j, with the a = i and b = j contributions of the two gradient sums
/// folded into the tau^2 eta term so that no cancellation is left to rounding.
fn ricci_from<S: Scalar>(m: &Mode<S>, lw: &[S], tr: C<S>, eta: &impl EtaSource<S>) -> CMat<S> {
    let d = m.d;
    let lam = &m.lam;
    let mut out = CMat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = cz();
            for a in 0..d {
                if lam[a] == S::zero() {
                    continue;
                }
                let sign = if i == j && a == i {
                    S::one()
                } else if a == i || a == j {
                    continue;
                } else {
                    -S::one()
                };
                acc += eta.get(lw[a], i, j) * (sign * lam[a] * lam[a]);
            }
            if lam[i] != S::zero() {
                for a in (0..d).filter(|&a| a != i && lam[a] != S::zero()) {
                    acc += eta.get(lw[a], a, j) * (lam[i] * lam[a]);
                }
            }
            if lam[j] != S::zero() {
                for b in (0..d).filter(|&b| b != j && lam[b] != S::zero()) {
                    acc += eta.get(lw[j], i, b) * (lam[j] * lam[b]);
                }
                acc -= tr * (lw[j].exp() * lam[i] * lam[j]);
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Lapse from the elliptic equation
/// (1 + tau^2) nu = 2 tau^2 tr eta - 2 t^2 g^ab lambda_i lambda_a eta_b^i.
pub fn lapse_solve<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S, eta: &CMat<S>) -> C<S> {
    let m = Mode::new(bg, lambda);
    let lw = m.log_weights(t);
    let tau2 = m.tau_sq(&m.weights(t));
    lapse_from(&m, &lw, tau2, eta.trace(), &Plain(eta))
}

/// Lapse in spatially harmonic gauge: (1 + tau^2) nu = tau^2 tr eta.
pub fn lapse_solve_sh<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S, eta: &CMat<S>) -> C<S> {
    let tau2 = kasner::tau_sq(bg, lambda, t);
    eta.trace() * (tau2 / (S::one() + tau2))
}

/// t^2 Ric for a general gauge.
pub fn ricci<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S, eta: &CMat<S>) -> CMat<S> {
    let m = Mode::new(bg, lambda);
    ricci_from(&m, &m.log_weights(t), eta.trace(), &Plain(eta))
}

fn shift_from<S: Scalar>(m: &Mode<S>, w: &[S], tau2: S, eta: &CMat<S>, nu: C<S>, phi: C<S>) -> Vec<C<S>> {
    let two = S::lit(2.0);
    let mut p_tr: C<S> = cz();
    for a in 0..m.d {
        p_tr += eta[(a, a)] * m.p[a];
    }
    let bracket = -p_tr + phi * (two * m.p_phi);
    (0..m.d)
        .map(|j| {
            let mut acc = -nu * (w[j] * m.lam[j] * (S::one() - two * m.p[j])) + bracket * (two * w[j] * m.lam[j]);
            for q in 0..m.d {
                acc += eta[(q, j)] * (S::lit(4.0) * w[q] * m.p[q] * m.lam[q]);
            }
            ci(acc) / tau2
        })
        .collect()
}

/// Shift of the CMCSH gauge. Refuses the zero mode, where tau vanishes.
pub fn shift_solve_cmcsh<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    t: S,
    eta: &CMat<S>,
    nu: C<S>,
    phi: C<S>,
) -> Result<Vec<C<S>>> {
    if kasner::is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    let m = Mode::new(bg, lambda);
    let w = m.weights(t);
    Ok(shift_from(&m, &w, m.tau_sq(&w), eta, nu, phi))
}

/// Derivatives t d/dt of the physical variables plus the shift in use.
pub(crate) struct Deriv<S: Scalar> {
    pub eta: CMat<S>,
    pub kappa: CMat<S>,
    pub phi: C<S>,
    pub psi: C<S>,
    pub chi: Vec<C<S>>,
}

pub(crate) fn physical_rhs<S: Scalar>(
    m: &Mode<S>,
    t: S,
    eta: &CMat<S>,
    kappa: &CMat<S>,
    phi: C<S>,
    psi: C<S>,
    gauge: Gauge,
) -> Deriv<S> {
    let d = m.d;
    let lw = m.log_weights(t);
    let w: Vec<S> = lw.iter().map(|x| x.exp()).collect();
    let tau2 = m.tau_sq(&w);
    let tr = eta.trace();
    let (nu, ric, chi) = match gauge {
        Gauge::Cmcsh => {
            let nu = tr * (tau2 / (S::one() + tau2));
            let chi = if tau2 > S::zero() { shift_from(m, &w, tau2, eta, nu, phi) } else { vec![cz(); d] };
            (nu, eta.scale(cr(-tau2)), chi)
        }
        Gauge::Cmctc => {
            let src = Plain(eta);
            (lapse_from(m, &lw, tau2, tr, &src), ricci_from(m, &lw, tr, &src), vec![cz(); d])
        }
    };
    let two = S::lit(2.0);
    let lt = t.ln();
    let mut de = CMat::zeros(d);
    let mut dk = CMat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let dp = m.p[i] - m.p[j];
            let ratio = (two * dp * lt).exp();
            let mut e = kappa[(i, j)] + eta[(i, j)] * (two * dp)
                - ci(chi[j] * m.lam[i] + chi[i] * (ratio * m.lam[j])) * S::lit(0.5);
            let mut k = ric[(i, j)] + nu * (w[j] * m.lam[i] * m.lam[j]) + ci(chi[j] * (dp * m.lam[i]));
            if i == j {
                e -= nu * m.p[i];
                k += nu * m.p[i];
            }
            de[(i, j)] = e;
            dk[(i, j)] = k;
        }
    }
    Deriv {
        eta: de,
        kappa: dk,
        phi: psi + nu * m.p_phi,
        psi: -phi * tau2 - nu * m.p_phi,
        chi,
    }
}

/// Derivatives t d/dt of the renormalized variables (kappa, Upsilon~, psi, phi~).
pub(crate) fn renorm_rhs<S: Scalar>(
    m: &Mode<S>,
    t: S,
    ln_big_t: S,
    kappa: &CMat<S>,
    upsilon: &CMat<S>,
    psi: C<S>,
    phi_tilde: C<S>,
) -> (CMat<S>, CMat<S>, C<S>, C<S>) {
    let d = m.d;
    let lw = m.log_weights(t);
    let w: Vec<S> = lw.iter().map(|x| x.exp()).collect();
    let tau2 = m.tau_sq(&w);
    if tau2 == S::zero() {
        return (CMat::zeros(d), CMat::zeros(d), cz(), cz());
    }
    let ln_t = t.ln();
    let src = Renormalized { upsilon, kappa, p: &m.p, ln_t, ln_big_t };
    let tr = upsilon.trace();
    let nu = lapse_from(m, &lw, tau2, tr, &src);
    let ric = ricci_from(m, &lw, tr, &src);
    let mut dk = CMat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let mut k = ric[(i, j)] + nu * (w[j] * m.lam[i] * m.lam[j]);
            if i == j {
                k += nu * m.p[i];
            }
            dk[(i, j)] = k;
        }
    }
    let mut du = CMat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let g = src.weighted_g(S::zero(), i, j);
            let mut u = dk[(j, i)] * g;
            if i == j {
                u -= nu * m.p[i];
            }
            du[(i, j)] = u;
        }
    }
    let l = ln_big_t - ln_t;
    let dpsi = -(phi_tilde - psi * l) * tau2 - nu * m.p_phi;
    let dphi = dpsi * l + nu * m.p_phi;
    (dk, du, dpsi, dphi)
}

fn nonzero(lambda: &[i64]) -> Result<()> {
    if kasner::is_zero_mode(lambda) {
        Err(ScatterError::ZeroMode)
    } else {
        Ok(())
    }
}

fn as_state<S: Scalar>(dv: Deriv<S>, t: S, gauge: Gauge) -> EinsteinModeState<S> {
    EinsteinModeState { eta: dv.eta, kappa: dv.kappa, phi: dv.phi, psi: dv.psi, t, gauge }
}

/// t d/dt of a CMCSH state, with Ric = -tau^2 eta and the SH lapse.
pub fn einstein_rhs_cmcsh<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    t: S,
    state: &EinsteinModeState<S>,
) -> Result<EinsteinModeState<S>> {
    nonzero(lambda)?;
    if state.gauge != Gauge::Cmcsh {
        return Err(ScatterError::InvalidInput("state is not in CMCSH gauge".into()));
    }
    let m = Mode::new(bg, lambda);
    let dv = physical_rhs(&m, t, &state.eta, &state.kappa, state.phi, state.psi, Gauge::Cmcsh);
    Ok(as_state(dv, t, Gauge::Cmcsh))
}

/// t d/dt of a CMCTC state (zero shift, general lapse and Ricci).
pub fn einstein_rhs_cmctc<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    t: S,
    state: &EinsteinModeState<S>,
) -> Result<EinsteinModeState<S>> {
    if state.gauge != Gauge::Cmctc {
        return Err(ScatterError::InvalidInput("state is not in CMCTC gauge".into()));
    }
    let m = Mode::new(bg, lambda);
    let dv = physical_rhs(&m, t, &state.eta, &state.kappa, state.phi, state.psi, Gauge::Cmctc);
    Ok(as_state(dv, t, Gauge::Cmctc))
}

/// t d/dt of the renormalized CMCTC variables with T = t*.
pub fn einstein_rhs_cmctc_renorm<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    t: S,
    state: &EinsteinRenormState<S>,
) -> Result<EinsteinRenormState<S>> {
    nonzero(lambda)?;
    let ts = kasner::t_star(bg, lambda)?;
    if t > ts * (S::one() + S::lit(1e3) * S::epsilon()) {
        return Err(ScatterError::InvalidInput("renormalized variables are defined for t <= t*".into()));
    }
    let m = Mode::new(bg, lambda);
    let (kappa, upsilon_tilde, psi, phi_tilde) =
        renorm_rhs(&m, t, ts.ln(), &state.kappa, &state.upsilon_tilde, state.psi, state.phi_tilde);
    Ok(EinsteinRenormState { kappa, upsilon_tilde, psi, phi_tilde, t })
}

/// Physical variables [eta, kappa, phi, psi] in a fixed gauge, optionally
/// augmented by the gauge vector xi with t d/dt xi = chi.
pub(crate) struct PhysicalSystem<S: Scalar> {
    pub m: Mode<S>,
    pub gauge: Gauge,
    pub with_xi: bool,
}

impl<S: Scalar> PhysicalSystem<S> {
    pub fn n_complex(&self) -> usize {
        2 * self.m.d * self.m.d + 2 + if self.with_xi { self.m.d } else { 0 }
    }
}

impl<S: Scalar> OdeSystem<S> for PhysicalSystem<S> {
    fn dim(&self) -> usize {
        2 * self.n_complex()
    }

    fn rhs(&self, t: S, y: &[S], dy: &mut [S]) {
        let dd = self.m.d * self.m.d;
        let eta = CMat::from_slice(self.m.d, &unpack(y, 0, dd));
        let kappa = CMat::from_slice(self.m.d, &unpack(y, dd, dd));
        let s = unpack(y, 2 * dd, 2);
        let dv = physical_rhs(&self.m, t, &eta, &kappa, s[0], s[1], self.gauge);
        let phis = [dv.phi, dv.psi];
        let out = if self.with_xi {
            pack(&[&dv.eta.data, &dv.kappa.data, &phis, &dv.chi])
        } else {
            pack(&[&dv.eta.data, &dv.kappa.data, &phis])
        };
        dy.copy_from_slice(&out);
    }
}

/// Renormalized variables [kappa, Upsilon~, psi, phi~] with T = t*.
pub(crate) struct RenormSystem<S: Scalar> {
    pub m: Mode<S>,
    pub ln_t_star: S,
}

impl<S: Scalar> OdeSystem<S> for RenormSystem<S> {
    fn dim(&self) -> usize {
        2 * (2 * self.m.d * self.m.d + 2)
    }

    fn rhs(&self, t: S, y: &[S], dy: &mut [S]) {
        let d = self.m.d;
        let dd = d * d;
        let kappa = CMat::from_slice(d, &unpack(y, 0, dd));
        let ups = CMat::from_slice(d, &unpack(y, dd, dd));
        let s = unpack(y, 2 * dd, 2);
        let (dk, du, dpsi, dphi) = renorm_rhs(&self.m, t, self.ln_t_star, &kappa, &ups, s[0], s[1]);
        dy.copy_from_slice(&pack(&[&dk.data, &du.data, &[dpsi, dphi]]));
    }
}
