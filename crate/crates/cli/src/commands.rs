use anyhow::{bail, Result};
use kasner_scatter::einstein::{self, EinsteinCauchyData, EinsteinModeState, Gauge};
use kasner_scatter::integrator;
use kasner_scatter::kasner::{self, KasnerBackground};
use kasner_scatter::spectral::{sample_scalar, ModeSet, ScalarField, TensorField};
use kasner_scatter::wave::{self, WaveCauchyData, WaveModeState};
use kasner_scatter::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{decay, ExperimentConfig, Sector};

/// Result of one command: the JSON body, optional CSV tables, and whether
/// every asserted property held.
pub struct Outcome {
    pub results: Value,
    pub tables: Vec<(String, String)>,
    pub pass: bool,
}

fn csv_table<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn lambda_str(l: &[i64]) -> String {
    l.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn scale_scalar(f: &mut ScalarField, a: f64) {
    f.coeffs.iter_mut().for_each(|z| *z *= a);
}

fn scale_tensor(f: &mut TensorField, a: f64) {
    f.coeffs.iter_mut().for_each(|z| *z *= a);
}

fn sub_scalar(a: &mut ScalarField, b: &ScalarField) {
    a.coeffs.iter_mut().zip(&b.coeffs).for_each(|(x, y)| *x -= *y);
}

fn sub_tensor(a: &mut TensorField, b: &TensorField) {
    a.coeffs.iter_mut().zip(&b.coeffs).for_each(|(x, y)| *x -= *y);
}

fn relative(err: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        err
    } else {
        err / reference
    }
}

fn wave_data(cfg: &ExperimentConfig, modes: ModeSet, amplitude: f64, rate: f64) -> WaveCauchyData {
    let mut data = WaveCauchyData {
        phi: sample_scalar(cfg.seed, modes, decay(rate + 1.0), true),
        psi: sample_scalar(cfg.seed.wrapping_add(1), modes, decay(rate), true),
    };
    scale_scalar(&mut data.phi, amplitude);
    scale_scalar(&mut data.psi, amplitude);
    data
}

fn einstein_data(cfg: &ExperimentConfig, bg: &KasnerBackground<f64>, modes: ModeSet, amplitude: f64, rate: f64) -> Result<EinsteinCauchyData> {
    let mut data = einstein::sample_constrained_data(bg, cfg.seed, modes, decay(rate))?;
    scale_tensor(&mut data.eta, amplitude);
    scale_tensor(&mut data.kappa, amplitude);
    scale_scalar(&mut data.phi, amplitude);
    scale_scalar(&mut data.psi, amplitude);
    Ok(data)
}

fn einstein_background(cfg: &ExperimentConfig) -> Result<KasnerBackground<f64>> {
    let bg = cfg.background()?;
    bg.require_subcritical()?;
    Ok(bg)
}

pub fn wave_roundtrip(cfg: &ExperimentConfig) -> Result<Outcome> {
    let o = &cfg.wave_roundtrip;
    let bg = cfg.background()?;
    bg.require_non_degenerate()?;
    let modes = ModeSet::new(bg.dim(), cfg.cutoff)?;
    let tol = cfg.wave_tolerances();
    let data = wave_data(cfg, modes, o.amplitude, o.decay);
    let (asym, reports) = wave::scatter_down(&bg, &data, &tol)?;
    let back = wave::scatter_up(&bg, &asym, &tol)?;
    let mut diff = back;
    sub_scalar(&mut diff.phi, &data.phi);
    sub_scalar(&mut diff.psi, &data.psi);
    let (norm_c, norm_inf) = wave::wave_hilbert_norms(&data, &asym, o.s, &bg)?;
    let err = relative(wave::cauchy_norm(&diff, o.s), norm_c);
    let pass = err <= o.threshold;
    Ok(Outcome {
        results: json!({
            "modes": modes.len(),
            "relative_error": err,
            "threshold": o.threshold,
            "norm_cauchy": norm_c,
            "norm_asymptotic": norm_inf,
            "norm_ratio": if norm_c > 0.0 { norm_inf / norm_c } else { 0.0 },
        }),
        tables: vec![("modes".into(), wave::mode_reports_csv(&reports))],
        pass,
    })
}

#[derive(Serialize)]
struct BesselRow {
    lambda: String,
    t_star: f64,
    max_rel_err: f64,
    phi_re: f64,
    phi_im: f64,
    psi_re: f64,
    psi_im: f64,
}

pub fn bessel_validate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let o = &cfg.bessel_validate;
    let bg = cfg.background()?;
    bg.require_non_degenerate()?;
    if o.samples < 2 {
        bail!("bessel_validate.samples must be at least 2");
    }
    let c_j = Complex64::new(o.c_j[0], o.c_j[1]);
    let c_y = Complex64::new(o.c_y[0], o.c_y[1]);
    let icfg = cfg.integrator();
    let rows: Vec<BesselRow> = o
        .modes
        .par_iter()
        .map(|l| -> Result<BesselRow> {
            if l.len() != bg.dim() {
                bail!("mode {l:?} has the wrong dimension");
            }
            let start = wave::bessel_oracle(&bg, l, c_j, c_y, 1.0)?;
            let ts: f64 = kasner::t_star(&bg, l)?;
            let mut worst: f64 = 0.0;
            if ts < 1.0 {
                let grid: Vec<f64> = (1..o.samples).map(|k| (ts.ln() * k as f64 / (o.samples - 1) as f64).exp()).collect();
                let sys = wave::PhysicalSystem { bg: &bg, lambda: l };
                let y0 = [start.phi.re, start.phi.im, start.psi.re, start.psi.im];
                let (ys, _) = integrator::integrate_samples(&sys, &y0, 1.0, &grid, &icfg)?;
                for (y, &t) in ys.iter().zip(&grid) {
                    let exact: WaveModeState<f64> = wave::bessel_oracle(&bg, l, c_j, c_y, t)?;
                    let tau2 = kasner::tau_sq(&bg, l, t);
                    let d = tau2 * (Complex64::new(y[0], y[1]) - exact.phi).norm_sqr() + (Complex64::new(y[2], y[3]) - exact.psi).norm_sqr();
                    let n = tau2 * exact.phi.norm_sqr() + exact.psi.norm_sqr();
                    worst = worst.max(relative(d.sqrt(), n.sqrt()));
                }
            }
            Ok(BesselRow {
                lambda: lambda_str(l),
                t_star: ts,
                max_rel_err: worst,
                phi_re: start.phi.re,
                phi_im: start.phi.im,
                psi_re: start.psi.re,
                psi_im: start.psi.im,
            })
        })
        .collect::<Result<_>>()?;
    let worst = rows.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    Ok(Outcome {
        results: json!({ "modes": rows.len(), "max_rel_err": worst, "threshold": o.threshold, "rows": rows }),
        tables: vec![("modes".into(), csv_table(&rows)?)],
        pass: worst <= o.threshold,
    })
}

#[derive(Serialize, Clone)]
struct SweepRow {
    lambda: String,
    magnitude: f64,
    c_high: f64,
    c_mid: f64,
    c_low: f64,
    seam_ringed: f64,
    seam_unit: f64,
}

#[derive(Serialize)]
struct PlotRow {
    magnitude: f64,
    max_ratio: f64,
}

fn random_einstein_mode(bg: &KasnerBackground<f64>, l: &[i64], seed: u64) -> EinsteinModeState<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = EinsteinModeState::zeros(bg.dim(), 1.0, Gauge::Cmcsh);
    for z in s.eta.data.iter_mut().chain(s.kappa.data.iter_mut()) {
        *z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    s.phi = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    s.psi = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    einstein::project_constraints(bg, l, &s)
}

pub fn energy_sweep(cfg: &ExperimentConfig) -> Result<Outcome> {
    let o = &cfg.energy_sweep;
    let bg = match cfg.sector {
        Sector::Wave => cfg.background()?,
        Sector::Einstein => einstein_background(cfg)?,
    };
    bg.require_non_degenerate()?;
    let mut jobs = Vec::new();
    for &m in &o.magnitudes {
        for d in &o.directions {
            if d.len() != bg.dim() {
                bail!("direction {d:?} has the wrong dimension");
            }
            let l: Vec<i64> = d.iter().map(|x| x * m).collect();
            if kasner::is_zero_mode(&l) {
                bail!("energy sweep needs nonzero modes");
            }
            jobs.push((m, l));
        }
    }
    let wtol = cfg.wave_tolerances();
    let etol = cfg.einstein_tolerances();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(k, (_, l))| -> Result<SweepRow> {
            let magnitude = l.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            Ok(match cfg.sector {
                Sector::Wave => {
                    let psi = Complex64::new(0.0, kasner::tau(&bg, l, 1.0));
                    let w = wave::energy_window(&bg, l, Complex64::new(1.0, 0.0), psi, &wtol, o.samples)?;
                    SweepRow { lambda: lambda_str(l), magnitude, c_high: w.c_high, c_mid: 1.0, c_low: w.c_low, seam_ringed: 1.0, seam_unit: w.seam_ratio }
                }
                Sector::Einstein => {
                    let s = random_einstein_mode(&bg, l, cfg.seed.wrapping_add(k as u64));
                    let w = einstein::einstein_energy_window(&bg, l, &s, &etol, o.samples)?;
                    SweepRow {
                        lambda: lambda_str(l),
                        magnitude,
                        c_high: w.c_high,
                        c_mid: w.c_mid,
                        c_low: w.c_low,
                        seam_ringed: w.seam_ringed,
                        seam_unit: w.seam_unit,
                    }
                }
            })
        })
        .collect::<Result<_>>()?;
    let mut plot: Vec<PlotRow> = Vec::new();
    for &m in &o.magnitudes {
        let max_ratio = rows
            .iter()
            .zip(&jobs)
            .filter(|(_, (jm, _))| *jm == m)
            .map(|(r, _)| r.c_high.max(r.c_mid).max(r.c_low))
            .fold(1.0, f64::max);
        if !plot.iter().any(|p| p.magnitude == m as f64) {
            plot.push(PlotRow { magnitude: m as f64, max_ratio });
        }
    }
    let growth = match (plot.first(), plot.last()) {
        (Some(a), Some(b)) => b.max_ratio / a.max_ratio,
        _ => 1.0,
    };
    let finite = rows.iter().all(|r| [r.c_high, r.c_mid, r.c_low, r.seam_ringed, r.seam_unit].iter().all(|x| x.is_finite()));
    let pass = finite && growth <= o.growth_limit;
    Ok(Outcome {
        results: json!({
            "sector": cfg.sector,
            "rows": rows,
            "growth_factor": growth,
            "growth_limit": o.growth_limit,
            "growth_pass": pass,
        }),
        tables: vec![("modes".into(), csv_table(&rows)?), ("plot".into(), csv_table(&plot)?)],
        pass,
    })
}

fn einstein_diff_norm(a: &EinsteinCauchyData, b: &EinsteinCauchyData, s: f64) -> f64 {
    let mut d = a.clone();
    sub_tensor(&mut d.eta, &b.eta);
    sub_tensor(&mut d.kappa, &b.kappa);
    sub_scalar(&mut d.phi, &b.phi);
    sub_scalar(&mut d.psi, &b.psi);
    einstein::einstein_cauchy_norm(&d, s)
}

pub fn einstein_roundtrip(cfg: &ExperimentConfig) -> Result<Outcome> {
    let o = &cfg.einstein_roundtrip;
    let bg = einstein_background(cfg)?;
    let modes = ModeSet::new(bg.dim(), cfg.cutoff)?;
    let tol = cfg.einstein_tolerances();
    let data = einstein_data(cfg, &bg, modes, o.amplitude, o.decay)?;
    let (asym, reports) = einstein::einstein_scatter_down(&bg, &data, &tol)?;
    let back = einstein::einstein_scatter_up(&bg, &asym, &tol)?;
    let (norm_c, norm_inf) = einstein::einstein_hilbert_norms(&data, &asym, o.s, &bg)?;
    let err = relative(einstein_diff_norm(&back, &data, o.s), norm_c);
    let asym_residual = reports.iter().map(|r| r.output_residual).fold(0.0, f64::max);
    let pass = err <= o.threshold && asym_residual <= o.asymptotic_threshold;
    let rows: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "lambda": lambda_str(&r.lambda),
                "t_star": r.t_star,
                "t_end": r.t_end,
                "tail_bound": r.tail_bound,
                "steps": r.steps,
                "input_residual": r.input_residual,
                "output_residual": r.output_residual,
            })
        })
        .collect();
    Ok(Outcome {
        results: json!({
            "modes": modes.len(),
            "relative_error": err,
            "threshold": o.threshold,
            "asymptotic_residual": asym_residual,
            "asymptotic_threshold": o.asymptotic_threshold,
            "norm_cauchy": norm_c,
            "norm_asymptotic": norm_inf,
        }),
        tables: vec![("modes".into(), csv_from_values(&rows)?)],
        pass,
    })
}

fn csv_from_values(rows: &[Value]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if let Some(Value::Object(first)) = rows.first() {
        w.write_record(first.keys())?;
        for r in rows {
            if let Value::Object(m) = r {
                w.write_record(m.values().map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                }))?;
            }
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Serialize)]
struct ResidualRow {
    lambda: String,
    t: f64,
    max_relative: f64,
}

pub fn einstein_constraints(cfg: &ExperimentConfig) -> Result<Outcome> {
    let o = &cfg.einstein_constraints;
    let bg = einstein_background(cfg)?;
    let modes = ModeSet::new(bg.dim(), cfg.cutoff)?;
    let data = einstein_data(cfg, &bg, modes, o.amplitude, o.decay)?;
    let icfg = cfg.integrator();
    let zero = modes.zero_index();
    let idx: Vec<usize> = (0..modes.len()).filter(|&k| k != zero && k < modes.conj_index(k)).collect();
    let series: Vec<Vec<ResidualRow>> = idx
        .par_iter()
        .map(|&k| -> Result<Vec<ResidualRow>> {
            let l = modes.mode(k);
            let hist = einstein::cmcsh_constraint_history(&bg, &l, &data.mode_state(k), &icfg, o.samples)?;
            Ok(hist.into_iter().map(|(t, r)| ResidualRow { lambda: lambda_str(&l), t, max_relative: r.max_relative_with_gauge() }).collect())
        })
        .collect::<Result<_>>()?;
    let rows: Vec<ResidualRow> = series.into_iter().flatten().collect();
    let worst = rows.iter().map(|r| r.max_relative).fold(0.0, f64::max);
    Ok(Outcome {
        results: json!({ "modes": idx.len(), "max_relative_residual": worst, "threshold": o.threshold }),
        tables: vec![("residuals".into(), csv_table(&rows)?)],
        pass: worst <= o.threshold,
    })
}

/// Uniform random points of the vacuum variety sum p = sum p^2 = 1 in dimension `dim`.
fn vacuum_sample(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let d = dim as f64;
    let r = (1.0 - 1.0 / d).sqrt();
    loop {
        let mut u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = u.iter().sum::<f64>() / d;
        u.iter_mut().for_each(|x| *x -= mean);
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-6 {
            return u.iter().map(|x| 1.0 / d + r * x / n).collect();
        }
    }
}

pub fn subcritical_scan(cfg: &ExperimentConfig) -> Result<Outcome> {
    let o = &cfg.subcritical_scan;
    let bg = cfg.background()?;
    let dim = bg.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut max_margin = f64::NEG_INFINITY;
    let mut argmax = Vec::new();
    for _ in 0..o.samples {
        let p = vacuum_sample(&mut rng, dim);
        let vac = kasner::make_background(p.clone(), 0.0)?;
        let m = kasner::subcriticality_margin(&vac);
        if m > max_margin {
            max_margin = m;
            argmax = p;
        }
    }
    let asserted = dim == 3;
    let pass = !asserted || o.samples == 0 || max_margin <= 0.0;
    Ok(Outcome {
        results: json!({
            "dim": dim,
            "samples": o.samples,
            "vacuum_max_margin": if o.samples == 0 { Value::Null } else { json!(max_margin) },
            "vacuum_argmax": argmax,
            "nonpositive_asserted": asserted,
            "background_margin": kasner::subcriticality_margin(&bg),
            "background_subcritical": bg.is_subcritical(),
        }),
        tables: Vec::new(),
        pass,
    })
}

#[derive(Serialize)]
struct NormRow {
    s: f64,
    cauchy: f64,
    asymptotic: f64,
    ratio: f64,
}

pub fn norms(cfg: &ExperimentConfig) -> Result<Outcome> {
    let o = &cfg.norms;
    let mut rows = Vec::new();
    match cfg.sector {
        Sector::Wave => {
            let bg = cfg.background()?;
            bg.require_non_degenerate()?;
            let modes = ModeSet::new(bg.dim(), cfg.cutoff)?;
            let data = wave_data(cfg, modes, o.amplitude, o.decay);
            let (asym, _) = wave::scatter_down(&bg, &data, &cfg.wave_tolerances())?;
            for &s in &o.s_values {
                let (a, b) = wave::wave_hilbert_norms(&data, &asym, s, &bg)?;
                rows.push(NormRow { s, cauchy: a, asymptotic: b, ratio: relative(b, a) });
            }
        }
        Sector::Einstein => {
            let bg = einstein_background(cfg)?;
            let modes = ModeSet::new(bg.dim(), cfg.cutoff)?;
            let data = einstein_data(cfg, &bg, modes, o.amplitude, o.decay)?;
            let (asym, _) = einstein::einstein_scatter_down(&bg, &data, &cfg.einstein_tolerances())?;
            for &s in &o.s_values {
                let (a, b) = einstein::einstein_hilbert_norms(&data, &asym, s, &bg)?;
                rows.push(NormRow { s, cauchy: a, asymptotic: b, ratio: relative(b, a) });
            }
        }
    }
    let pass = rows.iter().all(|r| r.cauchy.is_finite() && r.asymptotic.is_finite());
    Ok(Outcome {
        results: json!({ "sector": cfg.sector, "rows": rows }),
        tables: vec![("norms".into(), csv_table(&rows)?)],
        pass,
    })
}
