use serde::{Deserialize, Serialize};

use crate::error::{Result, ScatterError};
use crate::kasner::{self, KasnerBackground};
use crate::scalar::Scalar;
use crate::wave;

use super::tensor::CMat;
use super::{EinsteinModeState, EinsteinRenormState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    High,
    Mid,
    Low,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::High => "high",
            Regime::Mid => "mid",
            Regime::Low => "low",
        }
    }
}

fn regime_check<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], t: S, regime: Regime) -> Result<()> {
    bg.require_non_degenerate()?;
    let tau = kasner::tau(bg, lambda, t);
    let ringed = bg.tau_ringed().unwrap_or(S::one());
    let slack = S::lit(1e-9);
    let ok = match regime {
        Regime::High => tau >= ringed * (S::one() - slack),
        Regime::Mid => tau >= S::one() - slack && tau <= ringed * (S::one() + slack),
        Regime::Low => tau <= S::one() + slack,
    };
    if ok && !kasner::is_zero_mode(lambda) {
        Ok(())
    } else if kasner::is_zero_mode(lambda) {
        Err(ScatterError::ZeroMode)
    } else {
        Err(ScatterError::RegimeMismatch { regime: regime.name(), tau: tau.to_f64_lossy() })
    }
}

/// Sum over i, j of (T^(-2p_i + 2p_j)) |A_i^j|^2.
fn weighted_sq<S: Scalar>(p: &[S], big_t: S, a: &CMat<S>) -> S {
    let lt = big_t.ln();
    let mut s = S::zero();
    for i in 0..a.dim {
        for j in 0..a.dim {
            s += (S::lit(2.0) * (p[j] - p[i]) * lt).exp() * a[(i, j)].norm_sqr();
        }
    }
    s
}

/// <A, B> = sum A_i^j conj(B_j^i).
fn pairing<S: Scalar>(a: &CMat<S>, b: &CMat<S>) -> S {
    let mut s = S::zero();
    for i in 0..a.dim {
        for j in 0..a.dim {
            s += (a[(i, j)] * b[(j, i)].conj()).re;
        }
    }
    s
}

/// High-frequency energy with every component weighted by g^ii g_jj, which is
/// positive definite once tau >= tau_ringed.
pub(crate) fn high_form<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], state: &EinsteinModeState<S>) -> Result<S> {
    let t = state.t;
    let z = kasner::zeta(bg, lambda, t)?;
    let tau = kasner::tau(bg, lambda, t);
    let p = bg.p();
    let lt = t.ln();
    let two = S::lit(2.0);
    let mut e = wave::high_form(z, tau, state.phi, state.psi);
    for i in 0..state.dim() {
        for j in 0..state.dim() {
            let w = (two * (p[j] - p[i]) * lt).exp();
            let k = state.kappa[(i, j)];
            let h = state.eta[(i, j)];
            let cross = z / tau * (S::one() + two * (p[i] - p[j]) * z) * (k * h.conj()).re;
            e += w * (z * z / tau * k.norm_sqr() + (S::one() / (two * tau) + z * z * tau) * h.norm_sqr() + cross);
        }
    }
    Ok(e)
}

/// High-frequency energy in its index-contracted form; equals [`einstein_energy`]
/// in the high regime on states satisfying the symmetry constraints.
pub fn einstein_energy_high_literal<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], state: &EinsteinModeState<S>) -> Result<S> {
    regime_check(bg, lambda, state.t, Regime::High)?;
    let z = kasner::zeta(bg, lambda, state.t)?;
    let tau = kasner::tau(bg, lambda, state.t);
    let two = S::lit(2.0);
    Ok(z * z / tau * pairing(&state.kappa, &state.kappa)
        + z / tau * pairing(&state.kappa, &state.eta)
        + (S::one() / (two * tau) + z * z * tau) * pairing(&state.eta, &state.eta)
        + wave::high_form(z, tau, state.phi, state.psi))
}

pub(crate) fn mid_form<S: Scalar>(bg: &KasnerBackground<S>, state: &EinsteinModeState<S>) -> S {
    weighted_sq(bg.p(), state.t, &state.kappa)
        + weighted_sq(bg.p(), state.t, &state.eta)
        + state.phi.norm_sqr()
        + state.psi.norm_sqr()
}

pub(crate) fn low_form<S: Scalar>(bg: &KasnerBackground<S>, t_star: S, state: &EinsteinRenormState<S>) -> S {
    weighted_sq(bg.p(), t_star, &state.kappa)
        + weighted_sq(bg.p(), t_star, &state.upsilon_tilde)
        + state.psi.norm_sqr()
        + state.phi_tilde.norm_sqr()
}

/// Energy of a physical state in the requested regime. The low regime converts
/// to renormalized variables with T = t*.
pub fn einstein_energy<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    state: &EinsteinModeState<S>,
    regime: Regime,
) -> Result<S> {
    regime_check(bg, lambda, state.t, regime)?;
    match regime {
        Regime::High => high_form(bg, lambda, state),
        Regime::Mid => Ok(mid_form(bg, state)),
        Regime::Low => {
            let ts = kasner::t_star(bg, lambda)?;
            Ok(low_form(bg, ts, &state.to_renorm(bg, ts)))
        }
    }
}

/// Low-frequency energy of renormalized variables (T = t*).
pub fn einstein_energy_low<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], state: &EinsteinRenormState<S>) -> Result<S> {
    regime_check(bg, lambda, state.t, Regime::Low)?;
    let ts = kasner::t_star(bg, lambda)?;
    Ok(low_form(bg, ts, state))
}
