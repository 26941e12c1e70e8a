//! The twelve acceptance criteria. Each prints one PASS/FAIL line to stdout
//! (uncaptured, so the lines also appear in a plain `cargo test` log).

use std::io::Write;
use std::time::Instant;

use kasner_scatter::einstein::*;
use kasner_scatter::integrator::{self, IntegratorConfig};
use kasner_scatter::kasner::{self, make_background, KasnerBackground};
use kasner_scatter::spectral::{sample_scalar, Decay, ModeSet};
use kasner_scatter::wave::{self, PhysicalSystem, WaveCauchyData, WaveTolerances};
use kasner_scatter::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn iso() -> KasnerBackground<f64> {
    make_background(vec![1.0 / 3.0; 3], (1.0f64 / 3.0).sqrt()).unwrap()
}

fn aniso() -> KasnerBackground<f64> {
    make_background(vec![0.5, 0.25, 0.25], 0.3125f64.sqrt()).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| (a.ln() + (b.ln() - a.ln()) * k as f64 / (n - 1) as f64).exp()).collect()
}

fn report(n: usize, name: &str, pass: bool, detail: String, start: Instant) {
    let line = format!(
        "criterion {n:>2} [{}] {name}: {detail} ({:.1} s)\n",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn norm(v: &[i64]) -> f64 {
    v.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt()
}

fn wkb(bg: &KasnerBackground<f64>, l: &[i64]) -> (Complex64, Complex64) {
    (c(1.0, 0.0), c(0.0, kasner::tau(bg, l, 1.0)))
}

fn max_min_ratio(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::MIN, f64::max);
    let min = xs.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

fn random_mode(rng: &mut ChaCha8Rng, dim: usize, cutoff: i64) -> Vec<i64> {
    loop {
        let l: Vec<i64> = (0..dim).map(|_| rng.gen_range(-cutoff..=cutoff)).collect();
        if !kasner::is_zero_mode(&l) {
            return l;
        }
    }
}

#[test]
fn criterion_01_bessel_oracle() {
    let start = Instant::now();
    let cfg = IntegratorConfig::with_rel_tol(1e-10);
    let mut cases: Vec<(KasnerBackground<f64>, Vec<i64>)> = Vec::new();
    for l in [[1i64, 0, 0], [2, 1, 0], [3, 2, 2], [7, -4, 1], [12, 9, -3], [20, 11, 5], [0, 17, -25], [32, 0, 0], [18, 18, 18]] {
        if norm(&l) <= 32.0 {
            cases.push((iso(), l.to_vec()));
        }
    }
    for l in [[1i64, 0, 0], [4, 0, 0], [16, 0, 0], [32, 0, 0], [0, 3, 0], [0, 0, 29], [0, 7, -5], [0, 20, 24]] {
        cases.push((aniso(), l.to_vec()));
    }
    let coeffs = [(c(1.0, 0.0), c(0.0, 0.0)), (c(0.0, 0.0), c(1.0, 0.0)), (c(1.0, 0.0), c(1.0, 0.0))];
    let worst = cases
        .par_iter()
        .map(|(bg, l)| {
            let ts = kasner::t_star(bg, l).unwrap();
            let grid = log_grid(1.0, ts, 64);
            let sys = PhysicalSystem { bg, lambda: l };
            let mut worst: f64 = 0.0;
            for &(cj, cy) in &coeffs {
                let s0 = wave::bessel_oracle(bg, l, cj, cy, 1.0).unwrap();
                let y0 = [s0.phi.re, s0.phi.im, s0.psi.re, s0.psi.im];
                let (ys, _) = integrator::integrate_samples(&sys, &y0, 1.0, &grid[1..], &cfg).unwrap();
                for (y, &t) in ys.iter().zip(&grid[1..]) {
                    let o = wave::bessel_oracle(bg, l, cj, cy, t).unwrap();
                    let tau2 = kasner::tau_sq(bg, l, t);
                    let d = tau2 * (c(y[0], y[1]) - o.phi).norm_sqr() + (c(y[2], y[3]) - o.psi).norm_sqr();
                    let n = tau2 * o.phi.norm_sqr() + o.psi.norm_sqr();
                    worst = worst.max((d / n).sqrt());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        "Bessel oracle equivalence",
        worst <= 1e-8 && secs < 30.0,
        format!("{} modes x 3 coefficient pairs x 64 times, max rel err {worst:.2e} (<= 1e-8)", cases.len()),
        start,
    );
}

#[test]
fn criterion_02_wave_energy_uniformity() {
    let start = Instant::now();
    let tol = WaveTolerances::default();
    let dirs: [[i64; 3]; 4] = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0]];
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, bg) in [("iso", iso()), ("aniso", aniso())] {
        let measure = |n: i64| {
            dirs.par_iter()
                .map(|d| {
                    let l: Vec<i64> = d.iter().map(|x| x * n).collect();
                    let (phi, psi) = wkb(&bg, &l);
                    let w = wave::energy_window(&bg, &l, phi, psi, &tol, 64).unwrap();
                    (w.c_high, w.c_low)
                })
                .reduce(|| (1.0, 1.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
        };
        let (h4, l4) = measure(4);
        let (h128, l128) = measure(128);
        let ok = [h4, l4, h128, l128].iter().all(|x| x.is_finite()) && h128 <= 2.0 * h4 && l128 <= 2.0 * l4;
        pass &= ok;
        detail.push(format!("{name}: C_high {h4:.3}->{h128:.3}, C_low {l4:.3}->{l128:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    report(2, "wave energy uniformity", pass && secs < 60.0, detail.join("; "), start);
}

#[test]
fn criterion_03_wave_round_trip() {
    let start = Instant::now();
    let bg = aniso();
    let modes = ModeSet::new(3, 16).unwrap();
    let data = WaveCauchyData {
        phi: sample_scalar(1, modes, Decay::Rate(2.0), true),
        psi: sample_scalar(2, modes, Decay::Rate(1.0), true),
    };
    let tol = WaveTolerances { integrator: IntegratorConfig::with_rel_tol(1e-10), tail_tol: 1e-8, ..Default::default() };
    let (asym, _) = wave::scatter_down(&bg, &data, &tol).unwrap();
    let back = wave::scatter_up(&bg, &asym, &tol).unwrap();
    let mut diff = back.clone();
    for (a, b) in diff.phi.coeffs.iter_mut().zip(&data.phi.coeffs) {
        *a -= *b;
    }
    for (a, b) in diff.psi.coeffs.iter_mut().zip(&data.psi.coeffs) {
        *a -= *b;
    }
    let rel = wave::cauchy_norm(&diff, 0.0) / wave::cauchy_norm(&data, 0.0);
    report(3, "wave round trip", rel <= 1e-6, format!("Lambda = 16, {} modes, relative H^1 error {rel:.2e} (<= 1e-6)", modes.len()), start);
}

#[test]
fn criterion_04_half_derivative_gain() {
    let start = Instant::now();
    let tol = WaveTolerances::default();
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, bg) in [("iso", iso()), ("aniso", aniso())] {
        let ratios: Vec<f64> = [4i64, 8, 16, 32, 64, 128, 256]
            .par_iter()
            .flat_map_iter(|&n| {
                let bg = &bg;
                [[1i64, 0, 0], [0, 1, 0], [0, 0, 1]].into_iter().map(move |d| {
                    let l: Vec<i64> = d.iter().map(|x| x * n).collect();
                    let (phi, psi) = wkb(bg, &l);
                    let e1 = wave::energy_high(bg, &l, 1.0, &wave::WaveModeState { phi, psi, t: 1.0 }).unwrap();
                    let r = wave::mode_scatter_down(bg, &l, phi, psi, &tol).unwrap();
                    (r.psi_inf.norm_sqr() + r.phi_tilde_inf.norm_sqr()) / e1
                })
            })
            .collect();
        let w = max_min_ratio(&ratios);
        pass &= w <= 4.0 && ratios.iter().all(|r| r.is_finite() && *r > 0.0);
        detail.push(format!("{name}: window max/min {w:.3}"));
    }
    report(4, "half-derivative gain", pass, format!("|lambda| in 4..256, {} (<= 4)", detail.join(", ")), start);
}

#[test]
fn criterion_05_fuchsian_tail_rate() {
    let start = Instant::now();
    let tol = WaveTolerances::default();
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, bg) in [("iso", iso()), ("aniso", aniso())] {
        let cs: Vec<f64> = [[4i64, 0, 0], [0, 9, 0], [0, 0, 16], [3, 5, -2], [20, 7, 1], [40, 0, 30], [64, 64, 0], [100, -3, 7]]
            .par_iter()
            .map(|l| {
                let (phi, psi) = wkb(&bg, l);
                let ts = kasner::t_star(&bg, l).unwrap();
                let sys = PhysicalSystem { bg: &bg, lambda: l };
                let (y, _) = integrator::integrate(&sys, &[phi.re, phi.im, psi.re, psi.im], 1.0, ts, &tol.integrator).unwrap();
                let at = wave::WaveModeState { phi: c(y[0], y[1]), psi: c(y[2], y[3]), t: ts }.to_renorm(ts);
                wave::tail_rate_constant(&bg, l, at.psi, at.phi_tilde, &tol, 48).unwrap()
            })
            .collect();
        let var = max_min_ratio(&cs);
        let fitted = cs.iter().cloned().fold(0.0, f64::max);
        pass &= fitted.is_finite() && var <= 2.0;
        detail.push(format!("{name}: C = {fitted:.3}, variation {var:.3}"));
    }
    report(5, "Fuchsian tail rate", pass, format!("{} (variation <= 2)", detail.join("; ")), start);
}

fn einstein_data() -> (KasnerBackground<f64>, EinsteinCauchyData) {
    let bg = aniso();
    let modes = ModeSet::new(3, 8).unwrap();
    let data = sample_constrained_data(&bg, 6, modes, Decay::Rate(2.0)).unwrap();
    (bg, data)
}

#[test]
fn criterion_06_einstein_constraint_propagation() {
    let start = Instant::now();
    let (bg, data) = einstein_data();
    let modes = data.modes();
    let cfg = IntegratorConfig::with_rel_tol(1e-10);
    let zero = modes.zero_index();
    let idx: Vec<usize> = (0..modes.len()).filter(|&k| k != zero && k < modes.conj_index(k)).collect();
    let worst = idx
        .par_iter()
        .map(|&k| {
            let l = modes.mode(k);
            let hist = cmcsh_constraint_history(&bg, &l, &data.mode_state(k), &cfg, 16).unwrap();
            hist.iter().map(|(_, r)| r.max_relative_with_gauge()).fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    report(
        6,
        "Einstein constraint propagation",
        worst <= 1e-7,
        format!("Lambda = 8, {} independent modes, max relative residual {worst:.2e} (<= 1e-7)", idx.len()),
        start,
    );
}

#[test]
fn criterion_07_einstein_round_trip() {
    let start = Instant::now();
    let (bg, data) = einstein_data();
    let tol = EinsteinTolerances::default();
    let (asym, reports) = einstein_scatter_down(&bg, &data, &tol).unwrap();
    let back = einstein_scatter_up(&bg, &asym, &tol).unwrap();
    let mut d = back;
    for (a, b) in d.eta.coeffs.iter_mut().zip(&data.eta.coeffs) {
        *a -= *b;
    }
    for (a, b) in d.kappa.coeffs.iter_mut().zip(&data.kappa.coeffs) {
        *a -= *b;
    }
    for (a, b) in d.phi.coeffs.iter_mut().zip(&data.phi.coeffs) {
        *a -= *b;
    }
    for (a, b) in d.psi.coeffs.iter_mut().zip(&data.psi.coeffs) {
        *a -= *b;
    }
    let rel = einstein_cauchy_norm(&d, 0.0) / einstein_cauchy_norm(&data, 0.0);
    let out = reports.iter().map(|r| r.output_residual).fold(0.0, f64::max);
    report(
        7,
        "Einstein round trip",
        rel <= 1e-5 && out <= 1e-6,
        format!("relative error {rel:.2e} (<= 1e-5), asymptotic constraint residual {out:.2e} (<= 1e-6)"),
        start,
    );
}

#[test]
fn criterion_08_einstein_energy_estimates() {
    let start = Instant::now();
    let bg = aniso();
    let tol = EinsteinTolerances::default();
    let dirs: [[i64; 3]; 4] = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0]];
    let windows = |n: i64| -> Vec<EinsteinEnergyWindow> {
        dirs.par_iter()
            .enumerate()
            .map(|(k, d)| {
                let l: Vec<i64> = d.iter().map(|x| x * n).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(40 + k as u64);
                let mut s = EinsteinModeState::zeros(3, 1.0, Gauge::Cmcsh);
                for z in s.eta.data.iter_mut().chain(s.kappa.data.iter_mut()) {
                    *z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
                s.phi = c(rng.gen_range(-1.0..1.0), 0.0);
                s.psi = c(0.0, rng.gen_range(-1.0..1.0));
                let s = project_constraints(&bg, &l, &s);
                einstein_energy_window(&bg, &l, &s, &tol, 48).unwrap()
            })
            .collect()
    };
    let lo = windows(4);
    let hi = windows(128);
    let worst = |w: &[EinsteinEnergyWindow], f: fn(&EinsteinEnergyWindow) -> f64| w.iter().map(f).fold(1.0, f64::max);
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, f) in [
        ("C_high", (|w: &EinsteinEnergyWindow| w.c_high) as fn(&EinsteinEnergyWindow) -> f64),
        ("C_mid", |w| w.c_mid),
        ("C_low", |w| w.c_low),
    ] {
        let (a, b) = (worst(&lo, f), worst(&hi, f));
        pass &= a.is_finite() && b.is_finite() && b <= 2.0 * a;
        detail.push(format!("{name} {a:.3}->{b:.3}"));
    }
    let window = lo.iter().chain(&hi).map(|w| w.c_high.max(w.c_mid).max(w.c_low)).fold(1.0, f64::max);
    let seams: Vec<f64> = lo.iter().chain(&hi).flat_map(|w| [w.seam_ringed, w.seam_unit]).collect();
    let seam_spread = max_min_ratio(&seams);
    pass &= seams.iter().all(|s| s.is_finite() && *s > 0.0) && seam_spread <= window * window;
    detail.push(format!("seam spread {seam_spread:.3} (<= window^2 = {:.3})", window * window));
    report(8, "Einstein energy estimates", pass, detail.join(", "), start);
}

#[test]
fn criterion_09_zero_mode_conservation() {
    let start = Instant::now();
    let modes = ModeSet::new(3, 1).unwrap();
    let k0 = modes.zero_index();
    let bg = aniso();

    let mut wdata = WaveCauchyData { phi: sample_scalar(3, modes, Decay::Rate(1.0), true), psi: sample_scalar(4, modes, Decay::Rate(1.0), true) };
    wdata.phi.coeffs[k0] = c(0.123_456_789, 0.0);
    wdata.psi.coeffs[k0] = c(-2.718_281_828, 0.0);
    let (wa, _) = wave::scatter_down(&bg, &wdata, &WaveTolerances::default()).unwrap();
    let wb = wave::scatter_up(&bg, &wa, &WaveTolerances::default()).unwrap();
    let wave_ok = wa.phi_tilde_inf.coeffs[k0] == wdata.phi.coeffs[k0]
        && wa.psi_inf.coeffs[k0] == wdata.psi.coeffs[k0]
        && wb.phi.coeffs[k0] == wdata.phi.coeffs[k0]
        && wb.psi.coeffs[k0] == wdata.psi.coeffs[k0];

    let mut edata = EinsteinCauchyData::zeros(modes, true);
    let mut s = EinsteinModeState::zeros(3, 1.0, Gauge::Cmcsh);
    s.kappa = CMat::from_fn(3, |i, j| c(if i == j { [0.3, -0.1, -0.2][i] } else { 0.05 * (i + j) as f64 }, 0.0));
    s.eta = CMat::from_fn(3, |i, j| c(0.1 * (1 + i * 3 + j) as f64, 0.0));
    s.phi = c(0.7, 0.0);
    s.psi = c(0.0, 0.0);
    let s = project_constraints(&bg, &[0, 0, 0], &s);
    edata.set_mode_state(k0, &s);
    let tol = EinsteinTolerances::default();
    let (ea, _) = einstein_scatter_down(&bg, &edata, &tol).unwrap();
    let eb = einstein_scatter_up(&bg, &ea, &tol).unwrap();
    let a = ea.mode_state(k0);
    let einstein_ok = a.kappa == s.kappa && a.upsilon_tilde == s.eta && a.psi == s.psi && a.phi_tilde == s.phi && eb == edata;
    report(
        9,
        "zero-mode conservation",
        wave_ok && einstein_ok,
        format!("wave constants bit-identical: {wave_ok}, Einstein constants bit-identical: {einstein_ok}"),
        start,
    );
}

#[test]
fn criterion_10_gauge_covariance() {
    let start = Instant::now();
    let bg = aniso();
    let cfg = IntegratorConfig::with_rel_tol(1e-10);
    let cases: Vec<Vec<i64>> = vec![vec![1, 0, 0], vec![3, -2, 1], vec![0, 5, 2], vec![8, 8, -3], vec![2, 7, -6], vec![6, -1, 4]];
    let worst = cases
        .par_iter()
        .enumerate()
        .map(|(k, l)| {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
            let mut s = EinsteinModeState::zeros(3, 1.0, Gauge::Cmctc);
            for z in s.eta.data.iter_mut().chain(s.kappa.data.iter_mut()) {
                *z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            s.phi = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            s.psi = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let s = project_constraints(&bg, l, &s);
            let xi: Vec<Complex64> = (0..3).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let ts = kasner::t_star(&bg, l).unwrap();
            let mut worst: f64 = 0.0;
            for t1 in [0.5 * (1.0 + ts), ts.max(1e-3)] {
                let a = evolve_mode(&bg, l, &gauge_transform_state(&bg, l, &s, &xi), t1, &cfg).unwrap();
                let b = gauge_transform_state(&bg, l, &evolve_mode(&bg, l, &s, t1, &cfg).unwrap(), &xi);
                let d = a.eta.sub(&b.eta).norm_sqr() + a.kappa.sub(&b.kappa).norm_sqr() + (a.phi - b.phi).norm_sqr() + (a.psi - b.psi).norm_sqr();
                worst = worst.max((d / b.norm_sqr()).sqrt());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    report(10, "gauge covariance", worst <= 1e-8, format!("{} modes, max relative defect {worst:.2e} (<= 1e-8)", cases.len()), start);
}

#[test]
fn criterion_11_subcritical_variety() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut max_margin = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let bg = kasner::vacuum_circle(rng.gen_range(0.0..std::f64::consts::TAU)).unwrap();
        max_margin = max_margin.max(kasner::subcriticality_margin(&bg));
    }
    let iso_margin = kasner::subcriticality_margin(&iso());
    report(
        11,
        "subcritical variety",
        max_margin <= 0.0 && (iso_margin - 2.0 / 3.0).abs() <= 1e-12,
        format!("vacuum D = 3 max margin {max_margin:.3e} (<= 0), isotropic scalar-field margin {iso_margin:.15}"),
        start,
    );
}

#[test]
fn criterion_12_analytic_bounds() {
    let start = Instant::now();
    let times = log_grid(1e-8, 1.0, 64);
    let results: Vec<(usize, usize, Vec<String>)> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            let dim = [2, 3, 4][(seed % 3) as usize];
            let bg = kasner::sample_background(seed, dim, 0.02).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut checks = 0;
            let mut passed = 0;
            let mut failures = Vec::new();
            for _ in 0..20 {
                let l = random_mode(&mut rng, dim, 32);
                let r = kasner::check_bounds(&bg, &l, &times).unwrap();
                for ch in &r.checks {
                    checks += 1;
                    if ch.passed {
                        passed += 1;
                    } else {
                        failures.push(format!("{:?} {:?} {} slack {:.2e}", bg.p(), l, ch.name, ch.slack));
                    }
                }
            }
            (checks, passed, failures)
        })
        .collect();
    let checks: usize = results.iter().map(|r| r.0).sum();
    let passed: usize = results.iter().map(|r| r.1).sum();
    let failures: Vec<&String> = results.iter().flat_map(|r| &r.2).take(3).collect();
    let secs = start.elapsed().as_secs_f64();
    report(
        12,
        "analytic bounds battery",
        passed == checks && secs < 60.0,
        format!("50 backgrounds x 20 modes x 64 times, {passed}/{checks} checks passed {failures:?}"),
        start,
    );
}
