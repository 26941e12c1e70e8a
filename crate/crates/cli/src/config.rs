use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kasner_scatter::einstein::EinsteinTolerances;
use kasner_scatter::integrator::IntegratorConfig;
use kasner_scatter::kasner::{self, KasnerBackground};
use kasner_scatter::spectral::Decay;
use kasner_scatter::wave::WaveTolerances;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Wave,
    Einstein,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub background: BackgroundSpec,
    #[serde(default = "default_sector")]
    pub sector: Sector,
    #[serde(default = "default_cutoff")]
    pub cutoff: i64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub wave_roundtrip: WaveRoundtrip,
    #[serde(default)]
    pub bessel_validate: BesselValidate,
    #[serde(default)]
    pub energy_sweep: EnergySweep,
    #[serde(default)]
    pub einstein_roundtrip: EinsteinRoundtrip,
    #[serde(default)]
    pub einstein_constraints: EinsteinConstraints,
    #[serde(default)]
    pub subcritical_scan: SubcriticalScan,
    #[serde(default)]
    pub norms: Norms,
}

/// Either explicit exponents or a generator seed with a margin constraint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundSpec {
    pub p: Option<Vec<f64>>,
    pub p_phi: Option<f64>,
    pub generator_seed: Option<u64>,
    pub dim: Option<usize>,
    pub min_delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub tail_tol: f64,
    pub c_safe: f64,
    pub constraint_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveRoundtrip {
    pub amplitude: f64,
    pub decay: f64,
    pub s: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BesselValidate {
    pub modes: Vec<Vec<i64>>,
    pub c_j: [f64; 2],
    pub c_y: [f64; 2],
    pub samples: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySweep {
    pub directions: Vec<Vec<i64>>,
    pub magnitudes: Vec<i64>,
    pub samples: usize,
    pub growth_limit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EinsteinRoundtrip {
    pub amplitude: f64,
    pub decay: f64,
    pub s: f64,
    pub threshold: f64,
    pub asymptotic_threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EinsteinConstraints {
    pub amplitude: f64,
    pub decay: f64,
    pub samples: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubcriticalScan {
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Norms {
    pub amplitude: f64,
    pub decay: f64,
    pub s_values: Vec<f64>,
}

fn default_sector() -> Sector {
    Sector::Wave
}
fn default_cutoff() -> i64 {
    4
}
fn default_seed() -> u64 {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rel_tol: 1e-10, abs_tol: 1e-14, tail_tol: 1e-8, c_safe: 10.0, constraint_tol: 1e-8 }
    }
}

impl Default for WaveRoundtrip {
    fn default() -> Self {
        WaveRoundtrip { amplitude: 1.0, decay: 2.0, s: 0.0, threshold: 1e-6 }
    }
}

impl Default for BesselValidate {
    fn default() -> Self {
        BesselValidate { modes: vec![vec![1, 0, 0], vec![4, 0, 0], vec![3, 2, 2], vec![20, 11, 5]], c_j: [1.0, 0.0], c_y: [0.0, 0.0], samples: 64, threshold: 1e-8 }
    }
}

impl Default for EnergySweep {
    fn default() -> Self {
        EnergySweep {
            directions: vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
            magnitudes: vec![4, 8, 16, 32, 64, 128],
            samples: 64,
            growth_limit: 2.0,
        }
    }
}

impl Default for EinsteinRoundtrip {
    fn default() -> Self {
        EinsteinRoundtrip { amplitude: 1.0, decay: 2.0, s: 0.0, threshold: 1e-5, asymptotic_threshold: 1e-6 }
    }
}

impl Default for EinsteinConstraints {
    fn default() -> Self {
        EinsteinConstraints { amplitude: 1.0, decay: 2.0, samples: 16, threshold: 1e-7 }
    }
}

impl Default for SubcriticalScan {
    fn default() -> Self {
        SubcriticalScan { samples: 10_000 }
    }
}

impl Default for Norms {
    fn default() -> Self {
        Norms { amplitude: 1.0, decay: 2.0, s_values: vec![0.0, 1.0, 2.0] }
    }
}

pub fn decay(rate: f64) -> Decay {
    if rate.is_infinite() {
        Decay::Infinite
    } else {
        Decay::Rate(rate)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.tolerances;
        for (name, v) in [("rel_tol", t.rel_tol), ("abs_tol", t.abs_tol), ("tail_tol", t.tail_tol), ("c_safe", t.c_safe), ("constraint_tol", t.constraint_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                bail!("tolerance {name} must be positive and finite, got {v}");
            }
        }
        if self.cutoff < 0 {
            bail!("cutoff must be non-negative");
        }
        Ok(())
    }

    pub fn background(&self) -> Result<KasnerBackground<f64>> {
        let b = &self.background;
        match (&b.p, b.generator_seed) {
            (Some(p), None) => Ok(kasner::make_background(p.clone(), b.p_phi.unwrap_or(0.0))?),
            (None, Some(seed)) => {
                if b.p_phi.is_some() {
                    bail!("p_phi is set together with generator_seed");
                }
                Ok(kasner::sample_background(seed, b.dim.unwrap_or(3), b.min_delta.unwrap_or(0.05))?)
            }
            _ => bail!("background needs exactly one of `p` or `generator_seed`"),
        }
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig { rel_tol: self.tolerances.rel_tol, abs_tol: self.tolerances.abs_tol, ..Default::default() }
    }

    pub fn wave_tolerances(&self) -> WaveTolerances {
        WaveTolerances { integrator: self.integrator(), tail_tol: self.tolerances.tail_tol, c_safe: self.tolerances.c_safe, extrapolate: true }
    }

    pub fn einstein_tolerances(&self) -> EinsteinTolerances {
        EinsteinTolerances {
            integrator: self.integrator(),
            tail_tol: self.tolerances.tail_tol,
            c_safe: self.tolerances.c_safe,
            extrapolate: true,
            constraint_tol: self.tolerances.constraint_tol,
        }
    }
}
