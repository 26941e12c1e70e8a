//! Linearized Einstein-scalar field perturbations of Kasner, mode by mode.
//!
//! Physical variables are the metric perturbation eta_i^j, the second
//! fundamental form perturbation kappa_i^j, the scalar pair (phi, psi), the
//! lapse nu and the shift chi. Below the mode's transition time t* the
//! evolution runs in the renormalized variables
//! Upsilon~_i^j = eta_i^j + G_ij(t; t*) kappa_j^i and phi~ = phi + log(t*/t) psi,
//! which converge as t -> 0.

mod constraints;
mod energy;
mod equations;
mod gauge;
mod pipeline;
mod tensor;

pub use constraints::*;
pub use energy::*;
pub use equations::{
    einstein_rhs_cmcsh, einstein_rhs_cmctc, einstein_rhs_cmctc_renorm, lapse_solve, lapse_solve_sh, ricci,
    shift_solve_cmcsh,
};
pub use gauge::*;
pub use pipeline::*;
pub use tensor::CMat;

use crate::kasner::{self, KasnerBackground};
use crate::scalar::{cz, Scalar, C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    /// Constant mean curvature, zero shift.
    Cmctc,
    /// Constant mean curvature, spatially harmonic.
    Cmcsh,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EinsteinModeState<S: Scalar> {
    pub eta: CMat<S>,
    pub kappa: CMat<S>,
    pub phi: C<S>,
    pub psi: C<S>,
    pub t: S,
    pub gauge: Gauge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EinsteinRenormState<S: Scalar> {
    pub kappa: CMat<S>,
    pub upsilon_tilde: CMat<S>,
    pub psi: C<S>,
    pub phi_tilde: C<S>,
    pub t: S,
}

impl<S: Scalar> EinsteinModeState<S> {
    pub fn zeros(dim: usize, t: S, gauge: Gauge) -> Self {
        EinsteinModeState { eta: CMat::zeros(dim), kappa: CMat::zeros(dim), phi: cz(), psi: cz(), t, gauge }
    }

    pub fn dim(&self) -> usize {
        self.eta.dim
    }

    /// Renormalized variables with reference time `big_t`.
    pub fn to_renorm(&self, bg: &KasnerBackground<S>, big_t: S) -> EinsteinRenormState<S> {
        let d = self.dim();
        let p = bg.p();
        let ups = CMat::from_fn(d, |i, j| self.eta[(i, j)] + self.kappa[(j, i)] * kasner::g_entry(p[i], p[j], self.t, big_t));
        EinsteinRenormState {
            kappa: self.kappa.clone(),
            upsilon_tilde: ups,
            psi: self.psi,
            phi_tilde: self.phi + self.psi * (big_t / self.t).ln(),
            t: self.t,
        }
    }

    pub(crate) fn pack(&self) -> Vec<S> {
        tensor::pack(&[&self.eta.data, &self.kappa.data, &[self.phi, self.psi]])
    }

    pub(crate) fn unpack(y: &[S], dim: usize, t: S, gauge: Gauge) -> Self {
        let dd = dim * dim;
        let s = tensor::unpack(y, 2 * dd, 2);
        EinsteinModeState {
            eta: CMat::from_slice(dim, &tensor::unpack(y, 0, dd)),
            kappa: CMat::from_slice(dim, &tensor::unpack(y, dd, dd)),
            phi: s[0],
            psi: s[1],
            t,
            gauge,
        }
    }

    pub fn norm_sqr(&self) -> S {
        self.eta.norm_sqr() + self.kappa.norm_sqr() + self.phi.norm_sqr() + self.psi.norm_sqr()
    }
}

impl<S: Scalar> EinsteinRenormState<S> {
    pub fn zeros(dim: usize, t: S) -> Self {
        EinsteinRenormState { kappa: CMat::zeros(dim), upsilon_tilde: CMat::zeros(dim), psi: cz(), phi_tilde: cz(), t }
    }

    pub fn dim(&self) -> usize {
        self.kappa.dim
    }

    /// Physical CMCTC variables; inverse of [`EinsteinModeState::to_renorm`].
    pub fn to_physical(&self, bg: &KasnerBackground<S>, big_t: S) -> EinsteinModeState<S> {
        let d = self.dim();
        let p = bg.p();
        let eta =
            CMat::from_fn(d, |i, j| self.upsilon_tilde[(i, j)] - self.kappa[(j, i)] * kasner::g_entry(p[i], p[j], self.t, big_t));
        EinsteinModeState {
            eta,
            kappa: self.kappa.clone(),
            phi: self.phi_tilde - self.psi * (big_t / self.t).ln(),
            psi: self.psi,
            t: self.t,
            gauge: Gauge::Cmctc,
        }
    }

    pub(crate) fn pack(&self) -> Vec<S> {
        tensor::pack(&[&self.kappa.data, &self.upsilon_tilde.data, &[self.psi, self.phi_tilde]])
    }

    pub(crate) fn unpack(y: &[S], dim: usize, t: S) -> Self {
        let dd = dim * dim;
        let s = tensor::unpack(y, 2 * dd, 2);
        EinsteinRenormState {
            kappa: CMat::from_slice(dim, &tensor::unpack(y, 0, dd)),
            upsilon_tilde: CMat::from_slice(dim, &tensor::unpack(y, dd, dd)),
            psi: s[0],
            phi_tilde: s[1],
            t,
        }
    }

    pub fn norm_sqr(&self) -> S {
        self.kappa.norm_sqr() + self.upsilon_tilde.norm_sqr() + self.psi.norm_sqr() + self.phi_tilde.norm_sqr()
    }
}
