//! Detection: score fields over a scale pyramid, trigonometric-polynomial
//! interpolation of the scores, and Newton refinement of the peak.

use crate::error::{Error, Result};
use crate::features::{extract_sample, signed_offset, FeatureKind, FeatureMap, Frame, SampleGeometry};
use crate::scalar::{cast, Scalar};
use crate::signal::{dft2, idft2, Spectrum};
use ndarray::Array2;

/// Detection scores of one sample: spectrum, grid values and scale slot.
#[derive(Debug, Clone)]
pub struct ScoreField<T> {
    pub spectrum: Spectrum<T>,
    pub grid: Array2<T>,
    pub scale_index: i32,
}

/// `s^ = sum_l z^l ⊙ f^l`, grid scores by inverse DFT.
pub fn score_field<T: Scalar>(
    sample: &FeatureMap<T>,
    f_spectra: &[Spectrum<T>],
    scale_index: i32,
) -> Result<ScoreField<T>> {
    if sample.num_channels() != f_spectra.len() {
        return Err(Error::invalid_input(format!(
            "sample has {} channels, filter has {}",
            sample.num_channels(),
            f_spectra.len()
        )));
    }
    let (rows, cols) = (sample.domain.rows, sample.domain.cols);
    let mut spectrum = Spectrum::from_elem((rows, cols), num_complex::Complex::new(T::zero(), T::zero()));
    for (ch, f) in sample.channels.iter().zip(f_spectra) {
        if f.nrows() != rows || f.ncols() != cols {
            return Err(Error::invalid_input("filter spectrum dimension mismatch"));
        }
        let z = dft2(ch);
        spectrum = spectrum + &z * f;
    }
    let grid = idft2(&spectrum);
    Ok(ScoreField {
        spectrum,
        grid,
        scale_index,
    })
}

/// Value, gradient and Hessian of the trigonometric interpolant
/// `s(u,v) = (1/MN) sum s^(m,n) exp(i2π(m u/M + n v/N))` at a continuous
/// location, using signed frequencies so the value is real.
pub fn interpolate_score<T: Scalar>(
    field: &ScoreField<T>,
    u: f64,
    v: f64,
) -> (T, [T; 2], [[T; 2]; 2]) {
    let (rows, cols) = (field.spectrum.nrows(), field.spectrum.ncols());
    let two_pi = 2.0 * std::f64::consts::PI;

    // Signed frequency per axis and per-axis phasors.
    let freq = |k: usize, len: usize| -> f64 {
        if k < len / 2 + len % 2 {
            k as f64
        } else {
            k as f64 - len as f64
        }
    };
    let mut row_ph = Vec::with_capacity(rows);
    let mut row_c = Vec::with_capacity(rows);
    for m in 0..rows {
        let km = freq(m, rows);
        let w = two_pi * km / rows as f64;
        row_ph.push(num_complex::Complex::new((w * u).cos(), (w * u).sin()));
        row_c.push(w); // derivative factor is i*w
    }
    let mut col_ph = Vec::with_capacity(cols);
    let mut col_c = Vec::with_capacity(cols);
    for n in 0..cols {
        let kn = freq(n, cols);
        let w = two_pi * kn / cols as f64;
        col_ph.push(num_complex::Complex::new((w * v).cos(), (w * v).sin()));
        col_c.push(w);
    }

    let mut val = num_complex::Complex::new(0.0f64, 0.0);
    let mut gu = num_complex::Complex::new(0.0f64, 0.0);
    let mut gv = num_complex::Complex::new(0.0f64, 0.0);
    let mut huu = num_complex::Complex::new(0.0f64, 0.0);
    let mut huv = num_complex::Complex::new(0.0f64, 0.0);
    let mut hvv = num_complex::Complex::new(0.0f64, 0.0);
    let i_unit = num_complex::Complex::new(0.0f64, 1.0);
    for m in 0..rows {
        let cm = i_unit * row_c[m];
        for n in 0..cols {
            let s = field.spectrum[[m, n]];
            let s = num_complex::Complex::new(s.re.to_f64().unwrap(), s.im.to_f64().unwrap());
            let term = s * row_ph[m] * col_ph[n];
            let cn = i_unit * col_c[n];
            val += term;
            gu += cm * term;
            gv += cn * term;
            huu += cm * cm * term;
            huv += cm * cn * term;
            hvv += cn * cn * term;
        }
    }
    let scale = 1.0 / (rows * cols) as f64;
    (
        cast::<T>(val.re * scale),
        [cast::<T>(gu.re * scale), cast::<T>(gv.re * scale)],
        [
            [cast::<T>(huu.re * scale), cast::<T>(huv.re * scale)],
            [cast::<T>(huv.re * scale), cast::<T>(hvv.re * scale)],
        ],
    )
}

/// Sub-grid maximum of a score field: Newton ascent from the grid argmax
/// with fallbacks that never return worse than the grid maximum.
pub fn subgrid_maximize<T: Scalar>(
    field: &ScoreField<T>,
    max_iters: usize,
) -> (f64, f64, T, usize) {
    let (rows, cols) = (field.grid.nrows(), field.grid.ncols());
    // Grid argmax, row-major first on ties.
    let mut best = (0usize, 0usize);
    let mut best_val = field.grid[[0, 0]];
    for m in 0..rows {
        for n in 0..cols {
            if field.grid[[m, n]] > best_val {
                best_val = field.grid[[m, n]];
                best = (m, n);
            }
        }
    }
    let grid_val = best_val.to_f64().unwrap();
    let (mut u, mut v) = (best.0 as f64, best.1 as f64);
    let max_step = rows.max(cols) as f64 / 4.0;
    let mut iters = 0usize;

    for _ in 0..max_iters {
        let (_, g, h) = interpolate_score(field, u, v);
        let (g0, g1) = (g[0].to_f64().unwrap(), g[1].to_f64().unwrap());
        if (g0 * g0 + g1 * g1).sqrt() < 1e-12 {
            break;
        }
        let h00 = h[0][0].to_f64().unwrap();
        let h01 = h[0][1].to_f64().unwrap();
        let h11 = h[1][1].to_f64().unwrap();
        let det = h00 * h11 - h01 * h01;
        let neg_definite = h00 < 0.0 && det > 0.0;
        let (mut su, mut sv) = if neg_definite {
            (
                -(h11 * g0 - h01 * g1) / det,
                -(-h01 * g0 + h00 * g1) / det,
            )
        } else {
            (g0, g1)
        };
        let norm = (su * su + sv * sv).sqrt();
        let use_ascent = !neg_definite || norm > max_step;
        if use_ascent {
            // Backtracking gradient ascent.
            let (val0, _, _) = interpolate_score(field, u, v);
            let val0 = val0.to_f64().unwrap();
            let gn = (g0 * g0 + g1 * g1).sqrt();
            let mut t = 1.0f64.min(max_step / gn.max(1e-30));
            let mut moved = false;
            for _ in 0..20 {
                let (cand, _, _) = interpolate_score(field, u + t * g0, v + t * g1);
                if cand.to_f64().unwrap() > val0 {
                    su = t * g0;
                    sv = t * g1;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        u += su;
        v += sv;
        iters += 1;
        if (su * su + sv * sv).sqrt() < 1e-4 {
            break;
        }
    }

    let (final_val, _, _) = interpolate_score(field, u, v);
    if final_val.to_f64().unwrap() < grid_val - 1e-12 {
        // Fall back to the grid argmax.
        return (best.0 as f64, best.1 as f64, best_val, iters);
    }
    (u, v, final_val, iters)
}

/// Result of multi-scale detection.
#[derive(Debug, Clone, Copy)]
pub struct Detection {
    /// Sub-grid displacement from the sample-center cell, (rows, cols),
    /// in feature cells.
    pub displacement: (f64, f64),
    /// Winning relative scale `a^r`.
    pub scale_factor: f64,
    pub scale_index: i32,
    pub score: f64,
    pub newton_iters: usize,
}

/// Knobs for the detection pass.
#[derive(Debug, Clone, Copy)]
pub struct DetectParams {
    pub num_scales: usize,
    pub scale_step: f64,
    pub newton_iters: usize,
    pub kind: FeatureKind,
}

/// Run the filter at all scale levels around the previous target state and
/// return the best refined peak.
pub fn multi_scale_detect<T: Scalar>(
    frame: &Frame<T>,
    center: (f64, f64),
    geom: &SampleGeometry,
    f_spectra: &[Spectrum<T>],
    current_scale: f64,
    params: &DetectParams,
) -> Result<Detection> {
    let s = params.num_scales as i32;
    let lo = (1 - s).div_euclid(2);
    let hi = (s - 1).div_euclid(2);
    let (cm, cn) = (geom.grid.rows / 2, geom.grid.cols / 2);

    let mut result: Option<Detection> = None;
    for r in lo..=hi {
        let factor = params.scale_step.powi(r);
        let sample = extract_sample(frame, center, geom, current_scale, factor, params.kind)?;
        let field = score_field(&sample, f_spectra, r)?;
        let (u, v, score, iters) = subgrid_maximize(&field, params.newton_iters);
        let score = score.to_f64().unwrap();
        let det = Detection {
            displacement: (
                signed_offset(u - cm as f64, geom.grid.rows as f64),
                signed_offset(v - cn as f64, geom.grid.cols as f64),
            ),
            scale_factor: factor,
            scale_index: r,
            score,
            newton_iters: iters,
        };
        if result.as_ref().map_or(true, |b| score > b.score) {
            result = Some(det);
        }
    }
    Ok(result.expect("at least one scale"))
}
