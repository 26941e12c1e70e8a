use crate::error::{Result, ScatterError};
use crate::kasner::{self, KasnerBackground};
use crate::scalar::{ci, Scalar, C};

use super::equations::Mode;
use super::tensor::CMat;
use super::{EinsteinModeState, EinsteinRenormState, Gauge};

/// Linearized Lie derivative of the background along xi, with reference
/// weights g(t_ref): delta eta_i^j = (i/2)(lambda_i xi^j + t_ref^(2p_i - 2p_j) lambda_j xi^i).
fn metric_change<S: Scalar>(m: &Mode<S>, t_ref: S, xi: &[C<S>]) -> CMat<S> {
    let lt = t_ref.ln();
    CMat::from_fn(m.d, |i, j| {
        let r = (S::lit(2.0) * (m.p[i] - m.p[j]) * lt).exp();
        ci(xi[j] * m.lam[i] + xi[i] * (r * m.lam[j])) * S::lit(0.5)
    })
}

/// delta kappa_i^j = i (p_j - p_i) lambda_i xi^j.
fn kappa_change<S: Scalar>(m: &Mode<S>, xi: &[C<S>]) -> CMat<S> {
    CMat::from_fn(m.d, |i, j| ci(xi[j] * ((m.p[j] - m.p[i]) * m.lam[i])))
}

/// Static change of spatial coordinates along xi; scalars are unchanged.
pub fn gauge_transform_state<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    state: &EinsteinModeState<S>,
    xi: &[C<S>],
) -> EinsteinModeState<S> {
    let m = Mode::new(bg, lambda);
    EinsteinModeState {
        eta: state.eta.add(&metric_change(&m, state.t, xi)),
        kappa: state.kappa.add(&kappa_change(&m, xi)),
        ..state.clone()
    }
}

/// The same change on renormalized variables with reference time `big_t`;
/// Upsilon~ picks up the metric change at g(big_t).
pub fn gauge_transform_renorm<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    big_t: S,
    state: &EinsteinRenormState<S>,
    xi: &[C<S>],
) -> EinsteinRenormState<S> {
    let m = Mode::new(bg, lambda);
    EinsteinRenormState {
        upsilon_tilde: state.upsilon_tilde.add(&metric_change(&m, big_t, xi)),
        kappa: state.kappa.add(&kappa_change(&m, xi)),
        ..state.clone()
    }
}

/// Shift after a time-dependent change: chi - t d/dt xi.
pub fn gauge_shift<S: Scalar>(chi: &[C<S>], t_dxi: &[C<S>]) -> Vec<C<S>> {
    chi.iter().zip(t_dxi).map(|(&a, &b)| a - b).collect()
}

/// 2 lambda_j A_i^j - lambda_i tr A for each i.
pub fn harmonic_defect<S: Scalar>(lambda: &[i64], a: &CMat<S>) -> Vec<C<S>> {
    let tr = a.trace();
    (0..a.dim)
        .map(|i| {
            let mut s = -tr * S::from_int(lambda[i]);
            for (j, &l) in lambda.iter().enumerate() {
                s += a[(i, j)] * S::lit(2.0 * l as f64);
            }
            s
        })
        .collect()
}

/// xi^p = i t^(2 - 2p_p) (2 lambda_j A_p^j - lambda_p tr A) / tau^2(t), which
/// removes the harmonic defect of A at reference time t.
fn harmonic_xi<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S, a: &CMat<S>) -> Result<Vec<C<S>>> {
    if kasner::is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    let m = Mode::new(bg, lambda);
    let w = m.weights(t);
    let tau2 = m.tau_sq(&w);
    Ok(harmonic_defect(lambda, a).into_iter().zip(&w).map(|(r, &wp)| ci(r) * (wp / tau2)).collect())
}

/// Moves a state into spatially harmonic gauge at its own time and returns the
/// vector used.
pub fn to_cmcsh<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    state: &EinsteinModeState<S>,
) -> Result<(EinsteinModeState<S>, Vec<C<S>>)> {
    let xi = harmonic_xi(bg, lambda, state.t, &state.eta)?;
    let mut out = gauge_transform_state(bg, lambda, state, &xi);
    out.gauge = Gauge::Cmcsh;
    Ok((out, xi))
}

/// Vector that brings asymptotic data into the frequency-adapted gauge
/// 2 lambda_j Upsilon~_i^j = lambda_i tr Upsilon~ at T = t*.
pub fn cmcfa_xi<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], upsilon_tilde: &CMat<S>) -> Result<Vec<C<S>>> {
    if kasner::is_zero_mode(lambda) {
        return Err(ScatterError::ZeroMode);
    }
    let ts = kasner::t_star(bg, lambda)?;
    harmonic_xi(bg, lambda, ts, upsilon_tilde)
}
