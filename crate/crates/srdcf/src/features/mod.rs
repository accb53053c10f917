//! Sample extraction and label generation.
//!
//! Training and detection samples are square windows around the target,
//! cropped with replicate padding, resized to the fixed cell grid, converted
//! to features (mean-removed grayscale or 31-channel HOG) and tapered by a
//! Hann window.

mod hog;

pub use hog::{fhog, HOG_CHANNELS};

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::signal::GridDomain;
use ndarray::Array2;

/// Decoded raster frame with pixel values scaled to `[0, 1]`.
///
/// The luminance plane always exists; RGB planes are kept when the source
/// image had color, so HOG gradients can use the strongest color channel.
#[derive(Debug, Clone)]
pub struct Frame<T> {
    pub gray: Array2<T>,
    pub rgb: Option<[Array2<T>; 3]>,
}

impl<T: Scalar> Frame<T> {
    pub fn from_gray(gray: Array2<T>) -> Self {
        Frame { gray, rgb: None }
    }

    pub fn from_rgb(r: Array2<T>, g: Array2<T>, b: Array2<T>) -> Self {
        // Rec. 601 luminance.
        let gray = r.mapv(|v| v * cast::<T>(0.299))
            + g.mapv(|v| v * cast::<T>(0.587))
            + b.mapv(|v| v * cast::<T>(0.114));
        Frame {
            gray,
            rgb: Some([r, g, b]),
        }
    }

    pub fn height(&self) -> usize {
        self.gray.nrows()
    }

    pub fn width(&self) -> usize {
        self.gray.ncols()
    }
}

/// Feature flavor used for samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    /// Single mean-removed intensity channel at cell-stride pooling.
    Grayscale,
    /// 31-channel Felzenszwalb HOG.
    Hog,
}

/// Multi-channel spatial sample on the feature-cell grid.
#[derive(Debug, Clone)]
pub struct FeatureMap<T> {
    pub channels: Vec<Array2<T>>,
    pub cell_size: usize,
    pub domain: GridDomain,
}

impl<T: Scalar> FeatureMap<T> {
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }
}

/// Sizing of the square sample region around the target.
#[derive(Debug, Clone, Copy)]
pub struct SampleGeometry {
    /// Target size in pixels, (height, width), at the initial scale.
    pub target_size: (f64, f64),
    pub sample_area_factor: f64,
    pub cell_size: usize,
    /// Fixed square cell grid (M = N).
    pub grid: GridDomain,
    /// Side of the sample region in source pixels at unit scale.
    pub base_side: f64,
    /// Pixels in the resized patch per source pixel; below 1 when the
    /// max-grid clamp binds.
    pub resolution: f64,
}

impl SampleGeometry {
    pub fn new(
        target_h: f64,
        target_w: f64,
        sample_area_factor: f64,
        cell_size: usize,
        max_grid_size: usize,
    ) -> Result<Self> {
        if !(target_h >= 2.0 && target_w >= 2.0) {
            return Err(Error::invalid_input(format!(
                "degenerate target size {}x{}",
                target_w, target_h
            )));
        }
        if cell_size == 0 || sample_area_factor <= 0.0 {
            return Err(Error::invalid_input("bad sample geometry parameters"));
        }
        let base_side = (sample_area_factor * target_h * target_w).sqrt();
        let m = ((base_side / cell_size as f64).round() as usize)
            .clamp(1, max_grid_size)
            .max(2);
        let grid = GridDomain::new(m, m)?;
        let resolution = (m * cell_size) as f64 / base_side;
        Ok(SampleGeometry {
            target_size: (target_h, target_w),
            sample_area_factor,
            cell_size,
            grid,
            base_side,
            resolution,
        })
    }

    /// Target extent in feature cells (height, width); scale invariant.
    pub fn target_size_cells(&self) -> (f64, f64) {
        let c = self.cell_size as f64;
        (
            self.target_size.0 * self.resolution / c,
            self.target_size.1 * self.resolution / c,
        )
    }

    /// Source pixels spanned by one feature cell at the given scale.
    pub fn pixels_per_cell(&self, scale: f64) -> f64 {
        self.cell_size as f64 * scale / self.resolution
    }
}

/// Separable Hann window on the cell grid. Endpoints are exactly zero for
/// dimensions above one.
pub fn hann_window<T: Scalar>(domain: GridDomain) -> Array2<T> {
    let hann_1d = |k: usize, len: usize| -> T {
        if len <= 1 {
            T::one()
        } else {
            let x = 2.0 * std::f64::consts::PI * k as f64 / (len - 1) as f64;
            cast::<T>(0.5 * (1.0 - x.cos()))
        }
    };
    Array2::from_shape_fn((domain.rows, domain.cols), |(m, n)| {
        hann_1d(m, domain.rows) * hann_1d(n, domain.cols)
    })
}

/// Gaussian regression target, peaked at the sample-center cell.
#[derive(Debug, Clone)]
pub struct LabelMap<T> {
    pub values: Array2<T>,
    pub sigma: f64,
}

/// Build the label with `sigma = sigma_factor * sqrt(p * q)` in cells and
/// circular displacement from the center cell.
pub fn gaussian_label<T: Scalar>(
    domain: GridDomain,
    target_cells: (f64, f64),
    sigma_factor: f64,
) -> LabelMap<T> {
    let sigma = (sigma_factor * (target_cells.0 * target_cells.1).sqrt()).max(1e-6);
    let (cm, cn) = (domain.rows / 2, domain.cols / 2);
    let values = Array2::from_shape_fn((domain.rows, domain.cols), |(m, n)| {
        let dm = signed_offset(m as f64 - cm as f64, domain.rows as f64);
        let dn = signed_offset(n as f64 - cn as f64, domain.cols as f64);
        cast::<T>((-(dm * dm + dn * dn) / (2.0 * sigma * sigma)).exp())
    });
    LabelMap { values, sigma }
}

/// Wrap a circular offset into `[-len/2, len/2)`.
#[inline]
pub fn signed_offset(delta: f64, len: f64) -> f64 {
    (delta + len / 2.0).rem_euclid(len) - len / 2.0
}

/// Bilinear sample with replicate padding outside the image.
#[inline]
fn sample_bilinear<T: Scalar>(plane: &Array2<T>, y: f64, x: f64) -> T {
    let h = plane.nrows() as f64;
    let w = plane.ncols() as f64;
    let yc = y.clamp(0.0, h - 1.0);
    let xc = x.clamp(0.0, w - 1.0);
    let y0 = yc.floor();
    let x0 = xc.floor();
    let ty = yc - y0;
    let tx = xc - x0;
    let y0 = y0 as usize;
    let x0 = x0 as usize;
    let y1 = (y0 + 1).min(plane.nrows() - 1);
    let x1 = (x0 + 1).min(plane.ncols() - 1);
    let ty = cast::<T>(ty);
    let tx = cast::<T>(tx);
    let one = T::one();
    plane[[y0, x0]] * (one - ty) * (one - tx)
        + plane[[y0, x1]] * (one - ty) * tx
        + plane[[y1, x0]] * ty * (one - tx)
        + plane[[y1, x1]] * ty * tx
}

/// Crop the sample region and resize it to the pixel grid of the features.
fn resize_region<T: Scalar>(
    plane: &Array2<T>,
    center: (f64, f64),
    side: f64,
    out_rows: usize,
    out_cols: usize,
) -> Array2<T> {
    let (cx, cy) = center;
    Array2::from_shape_fn((out_rows, out_cols), |(i, j)| {
        let sy = cy + ((i as f64 + 0.5) / out_rows as f64 - 0.5) * side - 0.5;
        let sx = cx + ((j as f64 + 0.5) / out_cols as f64 - 0.5) * side - 0.5;
        sample_bilinear(plane, sy, sx)
    })
}

/// Extract a windowed multi-channel sample centered at `center` (pixel
/// coordinates, x right, y down) at `current_scale * scale_factor` times the
/// initial target scale.
pub fn extract_sample<T: Scalar>(
    frame: &Frame<T>,
    center: (f64, f64),
    geom: &SampleGeometry,
    current_scale: f64,
    scale_factor: f64,
    kind: FeatureKind,
) -> Result<FeatureMap<T>> {
    if scale_factor <= 0.0 || current_scale <= 0.0 {
        return Err(Error::invalid_input("scale factors must be positive"));
    }
    if frame.height() == 0 || frame.width() == 0 {
        return Err(Error::invalid_input("empty frame"));
    }
    let side = geom.base_side * current_scale * scale_factor;
    let (m, n) = (geom.grid.rows, geom.grid.cols);
    let cell = geom.cell_size;
    let (pr, pc) = (m * cell, n * cell);

    let mut channels = match kind {
        FeatureKind::Grayscale => {
            let patch = resize_region(&frame.gray, center, side, pr, pc);
            let mut pooled = Array2::<T>::zeros((m, n));
            let inv = cast::<T>(1.0 / (cell * cell) as f64);
            for i in 0..m {
                for j in 0..n {
                    let mut s = T::zero();
                    for di in 0..cell {
                        for dj in 0..cell {
                            s += patch[[i * cell + di, j * cell + dj]];
                        }
                    }
                    pooled[[i, j]] = s * inv;
                }
            }
            let mean = pooled.iter().copied().sum::<T>() * cast::<T>(1.0 / (m * n) as f64);
            pooled.mapv_inplace(|v| v - mean);
            vec![pooled]
        }
        FeatureKind::Hog => {
            let planes: Vec<Array2<T>> = match &frame.rgb {
                Some(rgb) => rgb
                    .iter()
                    .map(|p| resize_region(p, center, side, pr, pc))
                    .collect(),
                None => vec![resize_region(&frame.gray, center, side, pr, pc)],
            };
            fhog(&planes, cell)
        }
    };

    let window = hann_window::<T>(geom.grid);
    for ch in &mut channels {
        *ch = &*ch * &window;
    }
    Ok(FeatureMap {
        channels,
        cell_size: cell,
        domain: geom.grid,
    })
}
