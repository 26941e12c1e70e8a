use serde::Serialize;

use crate::error::Result;
use crate::kasner::{self, KasnerBackground};
use crate::scalar::{cz, Scalar, C};

use super::equations::Mode;
use super::tensor::CMat;
use super::{EinsteinModeState, EinsteinRenormState, Gauge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Hamiltonian,
    Momentum1,
    Momentum2,
    SymmetryEta,
    SymmetryKappa,
    TraceKappa,
    /// 2 lambda_j eta_i^j = lambda_i tr eta (spatially harmonic, or its
    /// frequency-adapted counterpart on asymptotic data).
    Harmonic,
}

pub const CONSTRAINT_KINDS: [ConstraintKind; 7] = [
    ConstraintKind::Hamiltonian,
    ConstraintKind::Momentum1,
    ConstraintKind::Momentum2,
    ConstraintKind::SymmetryEta,
    ConstraintKind::SymmetryKappa,
    ConstraintKind::TraceKappa,
    ConstraintKind::Harmonic,
];

/// Residual of one family: max |value| over its rows, and max over rows of the
/// sum of absolute term magnitudes, which is the rounding-level scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyResidual {
    pub kind: ConstraintKind,
    pub residual: f64,
    pub scale: f64,
}

impl FamilyResidual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual / self.scale
        } else {
            self.residual
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintResidual {
    pub families: Vec<FamilyResidual>,
    /// Euclidean norm of the state's components.
    pub state_norm: f64,
    /// The second momentum form reduces to the first only when the harmonic
    /// condition holds, so it counts as a constraint only in harmonic gauges.
    pub harmonic_gauge: bool,
}

impl ConstraintResidual {
    pub fn get(&self, kind: ConstraintKind) -> FamilyResidual {
        *self.families.iter().find(|f| f.kind == kind).expect("every family is recorded")
    }

    /// Largest relative residual over the constraint families, gauge condition excluded.
    pub fn max_relative(&self) -> f64 {
        self.families
            .iter()
            .filter(|f| f.kind != ConstraintKind::Harmonic)
            .filter(|f| self.harmonic_gauge || f.kind != ConstraintKind::Momentum2)
            .map(|f| f.relative())
            .fold(0.0, f64::max)
    }

    pub fn harmonic_relative(&self) -> f64 {
        self.get(ConstraintKind::Harmonic).relative()
    }

    /// Largest relative residual including the gauge condition.
    pub fn max_relative_with_gauge(&self) -> f64 {
        self.max_relative().max(self.harmonic_relative())
    }

    pub fn max_abs(&self) -> f64 {
        self.families.iter().map(|f| f.residual).fold(0.0, f64::max)
    }
}

struct Acc<S: Scalar> {
    v: C<S>,
    s: S,
}

impl<S: Scalar> Acc<S> {
    fn new() -> Self {
        Acc { v: cz(), s: S::zero() }
    }
    fn add(&mut self, z: C<S>) {
        self.v += z;
        self.s += z.norm();
    }
}

/// Every constraint row at weights g(t) for (eta, kappa, phi, psi). With
/// `asymptotic`, the tau^2 terms of the Hamiltonian constraint are dropped,
/// which gives the limiting constraints for (Upsilon~, kappa, phi~, psi) at T.
pub(crate) fn constraint_rows<S: Scalar>(
    m: &Mode<S>,
    t: S,
    eta: &CMat<S>,
    kappa: &CMat<S>,
    phi: C<S>,
    psi: C<S>,
    asymptotic: bool,
) -> Vec<(ConstraintKind, Acc2<S>)> {
    let d = m.d;
    let two = S::lit(2.0);
    let w = m.weights(t);
    let ginv = m.inv_metric(t);
    let lam = &m.lam;
    let tr = eta.trace();
    let mut rows = Vec::new();

    let mut h = Acc::new();
    if !asymptotic {
        let tau2 = m.tau_sq(&w);
        h.add(tr * (two * tau2));
        for a in 0..d {
            for i in 0..d {
                h.add(-eta[(a, i)] * (two * w[a] * lam[i] * lam[a]));
            }
        }
    }
    for a in 0..d {
        h.add(-kappa[(a, a)] * (two * m.p[a]));
    }
    h.add(psi * (S::lit(4.0) * m.p_phi));
    rows.push((ConstraintKind::Hamiltonian, h.into()));

    let mut p_tr = Acc::new();
    for a in 0..d {
        p_tr.add(-eta[(a, a)] * m.p[a]);
    }
    p_tr.add(phi * (two * m.p_phi));

    for i in 0..d {
        let mut r = Acc::new();
        for j in 0..d {
            r.add(kappa[(i, j)] * lam[j]);
        }
        r.v += p_tr.v * lam[i];
        r.s += p_tr.s * lam[i].abs();
        for a in 0..d {
            r.add(eta[(a, a)] * (m.p[i] * lam[i]));
        }
        rows.push((ConstraintKind::Momentum1, r.into()));
    }

    for c in 0..d {
        let mut r = Acc::new();
        for a in 0..d {
            r.add(kappa[(a, c)] * (ginv[a] * lam[a]));
            r.add(eta[(a, c)] * (two * ginv[a] * m.p[a] * lam[a]));
        }
        r.v += p_tr.v * (ginv[c] * lam[c]);
        r.s += p_tr.s * (ginv[c] * lam[c]).abs();
        rows.push((ConstraintKind::Momentum2, r.into()));
    }

    for a in 0..d {
        for c in a + 1..d {
            let mut r = Acc::new();
            r.add(eta[(a, c)] * ginv[a]);
            r.add(-eta[(c, a)] * ginv[c]);
            rows.push((ConstraintKind::SymmetryEta, r.into()));
            let mut r = Acc::new();
            r.add(kappa[(a, c)] * ginv[a]);
            r.add(eta[(a, c)] * (two * m.p[a] * ginv[a]));
            r.add(-kappa[(c, a)] * ginv[c]);
            r.add(-eta[(c, a)] * (two * m.p[c] * ginv[c]));
            rows.push((ConstraintKind::SymmetryKappa, r.into()));
        }
    }

    let mut r = Acc::new();
    for a in 0..d {
        r.add(kappa[(a, a)]);
    }
    rows.push((ConstraintKind::TraceKappa, r.into()));

    for i in 0..d {
        let mut r = Acc::new();
        for j in 0..d {
            r.add(eta[(i, j)] * (two * lam[j]));
            r.add(-eta[(j, j)] * lam[i]);
        }
        rows.push((ConstraintKind::Harmonic, r.into()));
    }
    rows
}

/// Value and term scale of one row.
pub(crate) struct Acc2<S: Scalar> {
    pub value: C<S>,
    pub scale: S,
}

impl<S: Scalar> From<Acc<S>> for Acc2<S> {
    fn from(a: Acc<S>) -> Self {
        Acc2 { value: a.v, scale: a.s }
    }
}

fn summarize<S: Scalar>(rows: Vec<(ConstraintKind, Acc2<S>)>, state_norm: S, harmonic_gauge: bool) -> ConstraintResidual {
    let families = CONSTRAINT_KINDS
        .iter()
        .map(|&kind| {
            let (mut residual, mut scale) = (0.0f64, 0.0f64);
            for (k, r) in &rows {
                if *k == kind {
                    residual = residual.max(r.value.norm().to_f64_lossy());
                    scale = scale.max(r.scale.to_f64_lossy());
                }
            }
            FamilyResidual { kind, residual, scale }
        })
        .collect();
    ConstraintResidual { families, state_norm: state_norm.sqrt().to_f64_lossy(), harmonic_gauge }
}

/// Constraint residuals of a physical state at its own time. The harmonic row
/// is always reported; it enters [`ConstraintResidual::max_relative_with_gauge`].
pub fn constraints_residual<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], state: &EinsteinModeState<S>) -> ConstraintResidual {
    let m = Mode::new(bg, lambda);
    let rows = constraint_rows(&m, state.t, &state.eta, &state.kappa, state.phi, state.psi, false);
    summarize(rows, state.norm_sqr(), state.gauge == Gauge::Cmcsh)
}

/// Reference time of a mode's asymptotic data: t* for lambda != 0, 1 otherwise.
pub fn asymptotic_reference_time<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64]) -> Result<S> {
    kasner::t_star(bg, lambda)
}

/// Limiting constraints for asymptotic data (kappa, Upsilon~, psi, phi~) with
/// T = t*; the `t` field of `asym` is ignored.
pub fn asymptotic_constraints_residual<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    asym: &EinsteinRenormState<S>,
) -> Result<ConstraintResidual> {
    let big_t = asymptotic_reference_time(bg, lambda)?;
    let m = Mode::new(bg, lambda);
    let rows = constraint_rows(&m, big_t, &asym.upsilon_tilde, &asym.kappa, asym.phi_tilde, asym.psi, true);
    Ok(summarize(rows, asym.norm_sqr(), true))
}

/// Orthogonal projection of `x` onto the common null space of the linear
/// functionals `rows` (x -> sum_k r_k x_k), by Gram-Schmidt on the conjugated rows.
pub(crate) fn project_null<S: Scalar>(rows: &[Vec<C<S>>], x: &mut [C<S>]) {
    let tol = S::lit(1e3) * S::epsilon();
    let mut basis: Vec<Vec<C<S>>> = Vec::new();
    for r in rows {
        let scale = r.iter().fold(S::zero(), |a, z| a + z.norm_sqr()).sqrt();
        if scale == S::zero() {
            continue;
        }
        let mut u: Vec<C<S>> = r.iter().map(|z| z.conj()).collect();
        for _ in 0..2 {
            for q in &basis {
                let c = inner(q, &u);
                for (a, b) in u.iter_mut().zip(q) {
                    *a -= *b * c;
                }
            }
        }
        let n = u.iter().fold(S::zero(), |a, z| a + z.norm_sqr()).sqrt();
        if n > tol * scale {
            for a in u.iter_mut() {
                *a /= n;
            }
            basis.push(u);
        }
    }
    for _ in 0..2 {
        for q in &basis {
            let c = inner(q, x);
            for (a, b) in x.iter_mut().zip(q) {
                *a -= *b * c;
            }
        }
    }
}

/// sum conj(q_k) x_k.
fn inner<S: Scalar>(q: &[C<S>], x: &[C<S>]) -> C<S> {
    q.iter().zip(x).fold(cz(), |a, (u, v)| a + u.conj() * v)
}

fn row_matrix<S: Scalar>(n: usize, eval: impl Fn(&[C<S>]) -> Vec<C<S>>) -> Vec<Vec<C<S>>> {
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let mut e = vec![cz(); n];
        e[k] = C::new(S::one(), S::zero());
        cols.push(eval(&e));
    }
    let m = cols[0].len();
    (0..m).map(|r| cols.iter().map(|c| c[r]).collect()).collect()
}

fn split<S: Scalar>(d: usize, x: &[C<S>]) -> (CMat<S>, CMat<S>, C<S>, C<S>) {
    let dd = d * d;
    (CMat::from_slice(d, &x[..dd]), CMat::from_slice(d, &x[dd..2 * dd]), x[2 * dd], x[2 * dd + 1])
}

/// Nearest state (Euclidean in the components) satisfying every constraint,
/// tr kappa = 0 and the harmonic condition at the state's time.
pub fn project_constraints<S: Scalar>(bg: &KasnerBackground<S>, lambda: &[i64], state: &EinsteinModeState<S>) -> EinsteinModeState<S> {
    let m = Mode::new(bg, lambda);
    let d = m.d;
    let n = 2 * d * d + 2;
    let t = state.t;
    let rows = row_matrix(n, |x| {
        let (eta, kappa, phi, psi) = split(d, x);
        constraint_rows(&m, t, &eta, &kappa, phi, psi, false).into_iter().map(|(_, r)| r.value).collect()
    });
    let mut x: Vec<C<S>> = state.eta.data.iter().chain(&state.kappa.data).copied().chain([state.phi, state.psi]).collect();
    project_null(&rows, &mut x);
    let (eta, kappa, phi, psi) = split(d, &x);
    EinsteinModeState { eta, kappa, phi, psi, t, gauge: state.gauge }
}

/// Nearest asymptotic data satisfying the limiting constraints, tr kappa = 0
/// and the frequency-adapted gauge condition.
pub fn project_asymptotic_constraints<S: Scalar>(
    bg: &KasnerBackground<S>,
    lambda: &[i64],
    asym: &EinsteinRenormState<S>,
) -> Result<EinsteinRenormState<S>> {
    let big_t = asymptotic_reference_time(bg, lambda)?;
    let m = Mode::new(bg, lambda);
    let d = m.d;
    let n = 2 * d * d + 2;
    let rows = row_matrix(n, |x| {
        let (ups, kappa, phit, psi) = split(d, x);
        constraint_rows(&m, big_t, &ups, &kappa, phit, psi, true).into_iter().map(|(_, r)| r.value).collect()
    });
    let mut x: Vec<C<S>> =
        asym.upsilon_tilde.data.iter().chain(&asym.kappa.data).copied().chain([asym.phi_tilde, asym.psi]).collect();
    project_null(&rows, &mut x);
    let (upsilon_tilde, kappa, phi_tilde, psi) = split(d, &x);
    Ok(EinsteinRenormState { kappa, upsilon_tilde, psi, phi_tilde, t: asym.t })
}
