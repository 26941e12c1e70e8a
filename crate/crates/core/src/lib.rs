//! Scattering from Cauchy data at t = 1 to asymptotic data at the Kasner
//! singularity t = 0 and back, mode by mode, for the scalar wave equation and
//! the linearized Einstein-scalar field system.
//!
//! Kernels are generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! `f64`, which is what field-level pipelines use.

pub mod bessel;
pub mod einstein;
pub mod error;
pub mod integrator;
pub mod kasner;
pub mod quadrature;
pub mod scalar;
pub mod spectral;
pub mod wave;

pub use error::{Result, ScatterError};
pub use scalar::Scalar;

pub type Complex64 = num_complex::Complex<f64>;
pub type Background = kasner::KasnerBackground<f64>;
pub type Geometry = kasner::ModeGeometry<f64>;
pub type WaveState = wave::WaveModeState<f64>;
pub type WaveRenorm = wave::WaveRenormState<f64>;
pub type EinsteinState = einstein::EinsteinModeState<f64>;
pub type EinsteinRenorm = einstein::EinsteinRenormState<f64>;
pub type Tensor = einstein::CMat<f64>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
