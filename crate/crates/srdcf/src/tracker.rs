//! The tracker: configuration, per-sequence state, and the init/step loop
//! that ties features, regularization, the solver and detection together.

use crate::detection::{multi_scale_detect, DetectParams};
use crate::error::{Error, Result};
use crate::features::{
    extract_sample, gaussian_label, FeatureKind, Frame, LabelMap, SampleGeometry,
};
use crate::regularization::{build_operator, SpatialWeights};
use crate::scalar::Scalar;
use crate::signal::partition_domain;
use crate::solver::{initial_solve, AssemblyPattern, ModelState};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// How the filter is regularized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegMode {
    /// Spatially varying quadratic penalty.
    Srdcf,
    /// Constant penalty `sqrt(lambda)` everywhere (a plain DCF).
    Uniform,
}

/// All tracker knobs. Every field has a default; unknown fields in a config
/// file are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    /// Minimum of the spatial penalty, at the target center.
    pub mu: f64,
    /// Growth of the penalty away from the target.
    pub eta: f64,
    /// Exponential forgetting rate of the model update.
    pub learning_rate: f64,
    /// Gauss-Seidel sweeps per frame.
    pub gauss_seidel_iters: usize,
    /// Newton refinements of the detection peak.
    pub newton_iters: usize,
    /// Scale levels probed per frame.
    pub num_scales: usize,
    /// Relative scale between adjacent levels.
    pub scale_step: f64,
    /// Feature cell side in pixels.
    pub cell_size: usize,
    /// Sample area relative to the target area.
    pub sample_area_factor: f64,
    /// Upper bound on the cell-grid side.
    pub max_grid_size: usize,
    /// Label bandwidth relative to the target size.
    pub label_sigma_factor: f64,
    /// Weight of the uniform penalty (`reg_mode = "uniform"` only).
    pub lambda: f64,
    /// Spectrum coefficients kept for the spatial penalty.
    pub target_nnz: usize,
    pub feature: FeatureKind,
    pub reg_mode: RegMode,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            mu: 0.1,
            eta: 3.0,
            learning_rate: 0.025,
            gauss_seidel_iters: 4,
            newton_iters: 5,
            num_scales: 5,
            scale_step: 1.02,
            cell_size: 4,
            sample_area_factor: 16.0,
            max_grid_size: 50,
            label_sigma_factor: 1.0 / 16.0,
            lambda: 0.01,
            target_nnz: 10,
            feature: FeatureKind::Hog,
            reg_mode: RegMode::Srdcf,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if !(self.eta >= 0.0) {
            return bad("eta must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return bad("learning_rate must be in [0, 1]");
        }
        if self.gauss_seidel_iters == 0 {
            return bad("gauss_seidel_iters must be at least 1");
        }
        if self.num_scales == 0 || self.num_scales % 2 == 0 {
            return bad("num_scales must be odd and at least 1");
        }
        if !(self.scale_step > 1.0) {
            return bad("scale_step must be greater than 1");
        }
        if self.cell_size == 0 {
            return bad("cell_size must be at least 1");
        }
        if !(self.sample_area_factor > 0.0) {
            return bad("sample_area_factor must be positive");
        }
        if self.max_grid_size < 2 {
            return bad("max_grid_size must be at least 2");
        }
        if !(self.label_sigma_factor > 0.0) {
            return bad("label_sigma_factor must be positive");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if self.target_nnz == 0 {
            return bad("target_nnz must be at least 1");
        }
        Ok(())
    }
}

/// Current target estimate in source-image coordinates.
#[derive(Debug, Clone, Copy)]
pub struct TargetState {
    /// Center, (x, y) with x rightward and y downward.
    pub center: (f64, f64),
    /// Size relative to the initial target size.
    pub scale: f64,
}

/// Outcome of one tracked frame.
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    /// Estimated box as (x, y, width, height) in pixels.
    pub bbox: [f64; 4],
    /// Detection score at the refined peak.
    pub score: f64,
    pub scale: f64,
    pub scale_index: i32,
    pub newton_iters: usize,
}

/// Online tracker over a single target.
#[derive(Debug, Clone)]
pub struct Tracker<T> {
    config: TrackerConfig,
    geom: SampleGeometry,
    basis: Arc<crate::signal::RealSpectrumBasis>,
    weights: SpatialWeights<T>,
    label: LabelMap<T>,
    model: ModelState<T>,
    state: TargetState,
    frame_count: usize,
}

impl<T: Scalar> Tracker<T> {
    /// Initialize on the first frame from a ground-truth box
    /// `(x, y, width, height)` in pixels.
    pub fn init(config: TrackerConfig, frame: &Frame<T>, bbox: [f64; 4]) -> Result<Self> {
        config.validate()?;
        let [x, y, w, h] = bbox;
        if !(w >= 2.0 && h >= 2.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::invalid_input(format!(
                "initial box {w}x{h} at ({x}, {y}) is degenerate"
            )));
        }
        if frame.height() == 0 || frame.width() == 0 {
            return Err(Error::invalid_input("empty frame"));
        }
        let geom = SampleGeometry::new(
            h,
            w,
            config.sample_area_factor,
            config.cell_size,
            config.max_grid_size,
        )?;
        let basis = Arc::new(partition_domain(geom.grid));
        let target_cells = geom.target_size_cells();
        let weights = match config.reg_mode {
            RegMode::Srdcf => SpatialWeights::quadratic(
                geom.grid,
                target_cells,
                config.mu,
                config.eta,
                config.target_nnz,
            ),
            RegMode::Uniform => SpatialWeights::uniform(geom.grid, config.lambda),
        };
        let reg = build_operator(&weights.sparse_spectrum, &basis)?;
        let label = gaussian_label::<T>(geom.grid, target_cells, config.label_sigma_factor);

        let center = (x + w / 2.0, y + h / 2.0);
        let sample = extract_sample(frame, center, &geom, 1.0, 1.0, config.feature)?;
        let pattern = Arc::new(AssemblyPattern::build(sample.num_channels(), &basis, &reg));
        let mut model = ModelState::init(
            &sample,
            &label,
            pattern,
            basis.clone(),
            config.learning_rate,
        )?;
        // Direct per-layer solve seeds the filter; the usual sweeps then pick
        // up the cross-layer coupling.
        model.f_real = initial_solve(&sample, &label, &reg, &basis)?;
        model.gauss_seidel(config.gauss_seidel_iters)?;

        Ok(Tracker {
            config,
            geom,
            basis,
            weights,
            label,
            model,
            state: TargetState {
                center,
                scale: 1.0,
            },
            frame_count: 1,
        })
    }

    /// Track the target into the next frame and update the model.
    ///
    /// Detection and feature extraction run before any state is touched, so
    /// a failing frame leaves the tracker unchanged.
    pub fn step(&mut self, frame: &Frame<T>) -> Result<StepReport> {
        if frame.height() == 0 || frame.width() == 0 {
            return Err(Error::invalid_input("empty frame"));
        }
        let params = DetectParams {
            num_scales: self.config.num_scales,
            scale_step: self.config.scale_step,
            newton_iters: self.config.newton_iters,
            kind: self.config.feature,
        };
        let det = multi_scale_detect(
            frame,
            self.state.center,
            &self.geom,
            &self.model.f_spectra,
            self.state.scale,
            &params,
        )?;

        let new_scale = self.state.scale * det.scale_factor;
        let ppc = self.geom.pixels_per_cell(new_scale);
        let mut cx = self.state.center.0 + det.displacement.1 * ppc;
        let mut cy = self.state.center.1 + det.displacement.0 * ppc;
        cx = cx.clamp(0.0, frame.width() as f64 - 1.0);
        cy = cy.clamp(0.0, frame.height() as f64 - 1.0);

        let sample = extract_sample(frame, (cx, cy), &self.geom, new_scale, 1.0, self.config.feature)?;

        self.state = TargetState {
            center: (cx, cy),
            scale: new_scale,
        };
        self.frame_count += 1;
        self.model.update(&sample, &self.label)?;
        self.model.gauss_seidel(self.config.gauss_seidel_iters)?;

        Ok(StepReport {
            bbox: self.bbox(),
            score: det.score,
            scale: new_scale,
            scale_index: det.scale_index,
            newton_iters: det.newton_iters,
        })
    }

    /// Current estimate as `(x, y, width, height)` in pixels.
    pub fn bbox(&self) -> [f64; 4] {
        let (h0, w0) = self.geom.target_size;
        let w = w0 * self.state.scale;
        let h = h0 * self.state.scale;
        [
            self.state.center.0 - w / 2.0,
            self.state.center.1 - h / 2.0,
            w,
            h,
        ]
    }

    pub fn state(&self) -> TargetState {
        self.state
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn geometry(&self) -> &SampleGeometry {
        &self.geom
    }

    pub fn weights(&self) -> &SpatialWeights<T> {
        &self.weights
    }

    pub fn model(&self) -> &ModelState<T> {
        &self.model
    }

    pub fn basis(&self) -> &crate::signal::RealSpectrumBasis {
        &self.basis
    }

    pub fn frames_seen(&self) -> usize {
        self.frame_count
    }
}
