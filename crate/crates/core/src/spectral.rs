//! Truncated Fourier fields on the D-torus: Sobolev and frequency adapted
//! norms, t* symbols, seeded sampling and a plain-text file format.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, ScatterError};
use crate::kasner::{self, KasnerBackground};

/// All modes with max_i |lambda_i| <= cutoff, in lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSet {
    pub dim: usize,
    pub cutoff: i64,
}

impl ModeSet {
    pub fn new(dim: usize, cutoff: i64) -> Result<Self> {
        if dim < 1 || cutoff < 0 {
            return Err(ScatterError::InvalidInput(format!("mode set D={dim}, cutoff={cutoff}")));
        }
        Ok(ModeSet { dim, cutoff })
    }

    fn side(&self) -> usize {
        (2 * self.cutoff + 1) as usize
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mode(&self, mut idx: usize) -> Vec<i64> {
        let side = self.side();
        let mut out = vec![0i64; self.dim];
        for k in (0..self.dim).rev() {
            out[k] = (idx % side) as i64 - self.cutoff;
            idx /= side;
        }
        out
    }

    pub fn index(&self, lambda: &[i64]) -> Option<usize> {
        if lambda.len() != self.dim || lambda.iter().any(|l| l.abs() > self.cutoff) {
            return None;
        }
        Some(lambda.iter().fold(0usize, |acc, &l| acc * self.side() + (l + self.cutoff) as usize))
    }

    pub fn zero_index(&self) -> usize {
        self.len() / 2
    }

    /// Index of -lambda.
    pub fn conj_index(&self, idx: usize) -> usize {
        self.len() - 1 - idx
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Vec<i64>)> + '_ {
        (0..self.len()).map(move |i| (i, self.mode(i)))
    }
}

/// sqrt(1 + |lambda|^2).
pub fn japanese(lambda: &[i64]) -> f64 {
    (1.0 + lambda.iter().map(|&l| (l * l) as f64).sum::<f64>()).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub modes: ModeSet,
    pub real: bool,
    pub coeffs: Vec<Complex64>,
}

/// Coefficients (A_lambda)_i^j stored row-major per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    pub modes: ModeSet,
    pub real: bool,
    pub coeffs: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(modes: ModeSet, real: bool) -> Self {
        ScalarField { modes, real, coeffs: vec![Complex64::new(0.0, 0.0); modes.len()] }
    }

    pub fn constant(modes: ModeSet, c: Complex64) -> Self {
        let mut f = Self::zeros(modes, c.im == 0.0);
        f.coeffs[modes.zero_index()] = c;
        f
    }

    pub fn get(&self, lambda: &[i64]) -> Complex64 {
        self.modes.index(lambda).map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn set(&mut self, lambda: &[i64], v: Complex64) {
        let i = self.modes.index(lambda).expect("mode inside cutoff");
        self.coeffs[i] = v;
    }

    /// max |f_{-lambda} - conj f_lambda|.
    pub fn reality_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.modes.conj_index(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }
}

impl TensorField {
    pub fn zeros(modes: ModeSet, real: bool) -> Self {
        TensorField { modes, real, coeffs: vec![Complex64::new(0.0, 0.0); modes.len() * modes.dim * modes.dim] }
    }

    pub fn block(&self, idx: usize) -> &[Complex64] {
        let dd = self.modes.dim * self.modes.dim;
        &self.coeffs[idx * dd..(idx + 1) * dd]
    }

    pub fn block_mut(&mut self, idx: usize) -> &mut [Complex64] {
        let dd = self.modes.dim * self.modes.dim;
        &mut self.coeffs[idx * dd..(idx + 1) * dd]
    }

    pub fn get(&self, lambda: &[i64], i: usize, j: usize) -> Complex64 {
        self.modes.index(lambda).map_or(Complex64::new(0.0, 0.0), |k| self.block(k)[i * self.modes.dim + j])
    }

    pub fn set(&mut self, lambda: &[i64], i: usize, j: usize, v: Complex64) {
        let d = self.modes.dim;
        let k = self.modes.index(lambda).expect("mode inside cutoff");
        self.block_mut(k)[i * d + j] = v;
    }

    pub fn reality_defect(&self) -> f64 {
        let dd = self.modes.dim * self.modes.dim;
        let mut m: f64 = 0.0;
        for k in 0..self.modes.len() {
            let c = self.modes.conj_index(k);
            for e in 0..dd {
                m = m.max((self.coeffs[c * dd + e] - self.coeffs[k * dd + e].conj()).norm());
            }
        }
        m
    }
}

/// Anything with per-mode squared magnitudes.
pub trait ModeField {
    fn mode_set(&self) -> ModeSet;
    fn mode_norm_sq(&self, idx: usize) -> f64;
}

impl ModeField for ScalarField {
    fn mode_set(&self) -> ModeSet {
        self.modes
    }
    fn mode_norm_sq(&self, idx: usize) -> f64 {
        self.coeffs[idx].norm_sqr()
    }
}

impl ModeField for TensorField {
    fn mode_set(&self) -> ModeSet {
        self.modes
    }
    fn mode_norm_sq(&self, idx: usize) -> f64 {
        self.block(idx).iter().map(|z| z.norm_sqr()).sum()
    }
}

pub fn sobolev_norm<F: ModeField>(f: &F, s: f64) -> f64 {
    let modes = f.mode_set();
    modes
        .iter()
        .map(|(i, l)| {
            let w = japanese(&l).powf(2.0 * s);
            w * f.mode_norm_sq(i)
        })
        .sum::<f64>()
        .sqrt()
}

/// Each entry (i, j) of mode lambda weighted by t*^(-2p_i + 2p_j) inside the sum.
pub fn freq_adapted_norm(a: &TensorField, s: f64, bg: &KasnerBackground<f64>) -> Result<f64> {
    bg.require_non_degenerate()?;
    let d = a.modes.dim;
    if d != bg.dim() {
        return Err(ScatterError::InvalidInput("field and background dimensions differ".into()));
    }
    let mut sum = 0.0;
    for (k, l) in a.modes.iter() {
        let blk = a.block(k);
        if blk.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            continue;
        }
        let lt = kasner::t_star(bg, &l)?.ln();
        let w = japanese(&l).powf(2.0 * s);
        for i in 0..d {
            for j in 0..d {
                let g = (2.0 * (bg.p()[j] - bg.p()[i]) * lt).exp();
                sum += w * g * blk[i * d + j].norm_sqr();
            }
        }
    }
    Ok(sum.sqrt())
}

#[derive(Clone)]
pub enum SymbolSpec {
    LogTstar,
    TstarPower(f64),
    /// t*^(-p_i + p_j) for a fixed index pair.
    GWeight { i: usize, j: usize },
    /// Entry (i, j) of a tensor multiplied by t*^(-p_i + p_j).
    FrequencyAdapted,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for SymbolSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SymbolSpec::LogTstar => write!(f, "LogTstar"),
            SymbolSpec::TstarPower(a) => write!(f, "TstarPower({a})"),
            SymbolSpec::GWeight { i, j } => write!(f, "GWeight({i},{j})"),
            SymbolSpec::FrequencyAdapted => write!(f, "FrequencyAdapted"),
            SymbolSpec::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl SymbolSpec {
    /// Multiplier at mode lambda != 0 for tensor entry (i, j).
    fn multiplier(&self, bg: &KasnerBackground<f64>, t_star: f64, i: usize, j: usize) -> f64 {
        let p = bg.p();
        match self {
            SymbolSpec::LogTstar => t_star.ln(),
            SymbolSpec::TstarPower(a) => (a * t_star.ln()).exp(),
            SymbolSpec::GWeight { i, j } => ((p[*j] - p[*i]) * t_star.ln()).exp(),
            SymbolSpec::FrequencyAdapted => ((p[j] - p[i]) * t_star.ln()).exp(),
            SymbolSpec::Custom(f) => f(t_star),
        }
    }
}

pub fn symbol_apply_scalar(f: &ScalarField, spec: &SymbolSpec, bg: &KasnerBackground<f64>) -> Result<ScalarField> {
    bg.require_non_degenerate()?;
    let mut out = f.clone();
    for (k, l) in f.modes.iter() {
        if kasner::is_zero_mode(&l) {
            out.coeffs[k] = Complex64::new(0.0, 0.0);
        } else if f.coeffs[k] != Complex64::new(0.0, 0.0) {
            let ts = kasner::t_star(bg, &l)?;
            out.coeffs[k] = f.coeffs[k] * spec.multiplier(bg, ts, 0, 0);
        }
    }
    Ok(out)
}

pub fn symbol_apply_tensor(a: &TensorField, spec: &SymbolSpec, bg: &KasnerBackground<f64>) -> Result<TensorField> {
    bg.require_non_degenerate()?;
    let d = a.modes.dim;
    let mut out = a.clone();
    for (k, l) in a.modes.iter() {
        let zero = kasner::is_zero_mode(&l);
        let ts = if zero { 1.0 } else { kasner::t_star(bg, &l)? };
        let blk = out.block_mut(k);
        for i in 0..d {
            for j in 0..d {
                blk[i * d + j] = if zero { Complex64::new(0.0, 0.0) } else { blk[i * d + j] * spec.multiplier(bg, ts, i, j) };
            }
        }
    }
    Ok(out)
}

/// max over lambda != 0 of |F(t*_lambda)| <lambda>^(-order): the H^s -> H^(s-order)
/// operator norm of a scalar symbol restricted to the mode set.
pub fn symbol_operator_norm(spec: &SymbolSpec, bg: &KasnerBackground<f64>, modes: ModeSet, order: f64) -> Result<f64> {
    bg.require_non_degenerate()?;
    let mut m: f64 = 0.0;
    for (_, l) in modes.iter() {
        if kasner::is_zero_mode(&l) {
            continue;
        }
        let ts = kasner::t_star(bg, &l)?;
        m = m.max(spec.multiplier(bg, ts, 0, 0).abs() * japanese(&l).powf(-order));
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Tensor,
}

/// Decay rate of sampled coefficients; `Infinite` keeps only the zero mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    Rate(f64),
    Infinite,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampledField {
    Scalar(ScalarField),
    Tensor(TensorField),
}

/// Deterministic pseudo-random coefficients with |f_lambda| ~ <lambda>^(-sigma).
pub fn sample_band_limited(seed: u64, modes: ModeSet, decay: Decay, kind: FieldKind, real: bool) -> Result<SampledField> {
    if let Decay::Rate(s) = decay {
        if !(s > 0.0) {
            return Err(ScatterError::InvalidInput(format!("decay rate {s} must be positive")));
        }
    }
    let width = match kind {
        FieldKind::Scalar => 1,
        FieldKind::Tensor => modes.dim * modes.dim,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); modes.len() * width];
    let zero = modes.zero_index();
    for (k, l) in modes.iter() {
        let amp = match decay {
            Decay::Infinite if k != zero => continue,
            Decay::Infinite => 1.0,
            Decay::Rate(s) => japanese(&l).powf(-s),
        };
        if real && k > zero {
            continue;
        }
        for e in 0..width {
            let re: f64 = rng.gen_range(-1.0..1.0);
            let im: f64 = rng.gen_range(-1.0..1.0);
            let v = if real && k == zero { Complex64::new(re, 0.0) } else { Complex64::new(re, im) };
            coeffs[k * width + e] = v * amp;
        }
    }
    if real {
        for k in zero + 1..modes.len() {
            let c = modes.conj_index(k);
            for e in 0..width {
                coeffs[k * width + e] = coeffs[c * width + e].conj();
            }
        }
    }
    Ok(match kind {
        FieldKind::Scalar => SampledField::Scalar(ScalarField { modes, real, coeffs }),
        FieldKind::Tensor => SampledField::Tensor(TensorField { modes, real, coeffs }),
    })
}

pub fn sample_scalar(seed: u64, modes: ModeSet, decay: Decay, real: bool) -> ScalarField {
    match sample_band_limited(seed, modes, decay, FieldKind::Scalar, real) {
        Ok(SampledField::Scalar(f)) => f,
        _ => ScalarField::zeros(modes, real),
    }
}

pub fn sample_tensor(seed: u64, modes: ModeSet, decay: Decay, real: bool) -> TensorField {
    match sample_band_limited(seed, modes, decay, FieldKind::Tensor, real) {
        Ok(SampledField::Tensor(f)) => f,
        _ => TensorField::zeros(modes, real),
    }
}

fn write_header(out: &mut String, modes: ModeSet, kind: &str, real: bool) {
    let _ = writeln!(out, "D={} Lambda={} kind={} real={}", modes.dim, modes.cutoff, kind, real);
}

fn write_records(out: &mut String, modes: ModeSet, width: usize, coeffs: &[Complex64]) {
    for (k, l) in modes.iter() {
        let ls: Vec<String> = l.iter().map(|x| x.to_string()).collect();
        out.push_str(&ls.join(" "));
        for z in &coeffs[k * width..(k + 1) * width] {
            let _ = write!(out, " {:e} {:e}", z.re, z.im);
        }
        out.push('\n');
    }
}

impl SampledField {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self {
            SampledField::Scalar(f) => {
                write_header(&mut out, f.modes, "scalar", f.real);
                write_records(&mut out, f.modes, 1, &f.coeffs);
            }
            SampledField::Tensor(f) => {
                write_header(&mut out, f.modes, "tensor", f.real);
                write_records(&mut out, f.modes, f.modes.dim * f.modes.dim, &f.coeffs);
            }
        }
        out
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let mut lines = s.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| ScatterError::Parse("empty field file".into()))?;
        let mut dim = None;
        let mut cutoff = None;
        let mut kind = None;
        let mut real = None;
        for tok in header.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| ScatterError::Parse(format!("bad header token {tok}")))?;
            let bad = |e: String| ScatterError::Parse(format!("{k}: {e}"));
            match k {
                "D" => dim = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "Lambda" => cutoff = Some(v.parse::<i64>().map_err(|e| bad(e.to_string()))?),
                "kind" => kind = Some(v.to_string()),
                "real" => real = Some(v.parse::<bool>().map_err(|e| bad(e.to_string()))?),
                _ => return Err(ScatterError::Parse(format!("unknown header key {k}"))),
            }
        }
        let missing = |n: &str| ScatterError::Parse(format!("header missing {n}"));
        let modes = ModeSet::new(dim.ok_or_else(|| missing("D"))?, cutoff.ok_or_else(|| missing("Lambda"))?)?;
        let real = real.ok_or_else(|| missing("real"))?;
        let kind = kind.ok_or_else(|| missing("kind"))?;
        let width = match kind.as_str() {
            "scalar" => 1,
            "tensor" => modes.dim * modes.dim,
            other => return Err(ScatterError::Parse(format!("unknown kind {other}"))),
        };
        let mut coeffs = vec![Complex64::new(0.0, 0.0); modes.len() * width];
        let mut seen = 0usize;
        for line in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != modes.dim + 2 * width {
                return Err(ScatterError::Parse(format!("record has {} fields: {line}", toks.len())));
            }
            let l: Vec<i64> = toks[..modes.dim]
                .iter()
                .map(|x| x.parse::<i64>().map_err(|e| ScatterError::Parse(e.to_string())))
                .collect::<Result<_>>()?;
            let k = modes.index(&l).ok_or_else(|| ScatterError::Parse(format!("mode {l:?} outside cutoff")))?;
            for e in 0..width {
                let p = |x: &str| x.parse::<f64>().map_err(|e| ScatterError::Parse(e.to_string()));
                coeffs[k * width + e] = Complex64::new(p(toks[modes.dim + 2 * e])?, p(toks[modes.dim + 2 * e + 1])?);
            }
            seen += 1;
        }
        if seen != modes.len() {
            return Err(ScatterError::Parse(format!("expected {} records, found {seen}", modes.len())));
        }
        Ok(if width == 1 && kind == "scalar" {
            SampledField::Scalar(ScalarField { modes, real, coeffs })
        } else {
            SampledField::Tensor(TensorField { modes, real, coeffs })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_indexing_roundtrip() {
        let m = ModeSet::new(3, 2).unwrap();
        for (i, l) in m.iter() {
            assert_eq!(m.index(&l), Some(i));
            let neg: Vec<i64> = l.iter().map(|x| -x).collect();
            assert_eq!(m.index(&neg), Some(m.conj_index(i)));
        }
        assert_eq!(m.mode(m.zero_index()), vec![0, 0, 0]);
    }

    #[test]
    fn real_sampling_is_hermitian() {
        let m = ModeSet::new(2, 3).unwrap();
        let f = sample_scalar(7, m, Decay::Rate(2.0), true);
        assert_eq!(f.reality_defect(), 0.0);
        let t = sample_tensor(7, m, Decay::Rate(2.0), true);
        assert_eq!(t.reality_defect(), 0.0);
    }
}
