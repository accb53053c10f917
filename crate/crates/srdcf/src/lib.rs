//! Spatially regularized discriminative correlation filter (SRDCF) tracking.
//!
//! The filter is learned in the Fourier domain under a spatial penalty on the
//! coefficient magnitudes. A point-reflection change of basis turns the
//! Hermitian-symmetric spectra into real vectors, the resulting normal
//! equations stay sparse because the penalty has a sparse spectrum, and the
//! system is solved online with Gauss-Seidel sweeps. Detection runs the filter
//! over a scale pyramid and refines the response peak to sub-grid precision
//! with Newton's method.
//!
//! Core numerics are generic over the scalar type (`f32` or `f64`); concrete
//! aliases live at the crate root.

pub mod bench;
pub mod detection;
pub mod error;
pub mod features;
pub mod regularization;
pub mod scalar;
pub mod signal;
pub mod solver;
pub mod sparse;
pub mod tracker;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision tracker, the default for the CLI and harness.
pub type Tracker = tracker::Tracker<f64>;
pub type TrackerF32 = tracker::Tracker<f32>;

pub type ModelState = solver::ModelState<f64>;
pub type ModelStateF32 = solver::ModelState<f32>;

pub type FeatureMap = features::FeatureMap<f64>;
pub type FeatureMapF32 = features::FeatureMap<f32>;
