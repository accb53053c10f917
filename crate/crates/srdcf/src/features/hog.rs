//! 31-channel Felzenszwalb HOG: 18 contrast-sensitive and 9 contrast-
//! insensitive orientation channels plus 4 normalization-energy channels.

use crate::scalar::{cast, Scalar};
use ndarray::Array2;

pub const HOG_CHANNELS: usize = 31;
const ORIENTATIONS: usize = 9;
const TRUNCATION: f64 = 0.2;

/// Compute HOG features over one or more color planes.
///
/// Input planes must share the same shape with dimensions divisible by
/// `cell`; the output grid is `(rows/cell) x (cols/cell)`. Per pixel, the
/// gradient of the plane with the largest magnitude is used.
pub fn fhog<T: Scalar>(planes: &[Array2<T>], cell: usize) -> Vec<Array2<T>> {
    assert!(!planes.is_empty() && cell >= 1);
    let rows = planes[0].nrows();
    let cols = planes[0].ncols();
    assert!(rows % cell == 0 && cols % cell == 0, "plane not cell-aligned");
    let (gm, gn) = (rows / cell, cols / cell);

    // Unit vectors for the 9 orientation half-circle.
    let mut uu = [0.0f64; ORIENTATIONS];
    let mut vv = [0.0f64; ORIENTATIONS];
    for k in 0..ORIENTATIONS {
        let th = k as f64 * std::f64::consts::PI / ORIENTATIONS as f64;
        uu[k] = th.cos();
        vv[k] = th.sin();
    }

    // 18-bin histograms with bilinear spatial interpolation into cells.
    let mut hist = vec![0.0f64; gm * gn * 2 * ORIENTATIONS];
    for y in 0..rows {
        for x in 0..cols {
            let mut gx = 0.0f64;
            let mut gy = 0.0f64;
            let mut best = -1.0f64;
            for plane in planes {
                let xm = plane[[y, x.saturating_sub(1)]];
                let xp = plane[[y, (x + 1).min(cols - 1)]];
                let ym = plane[[y.saturating_sub(1), x]];
                let yp = plane[[(y + 1).min(rows - 1), x]];
                let dx = (xp - xm).to_f64().unwrap();
                let dy = (yp - ym).to_f64().unwrap();
                let mag2 = dx * dx + dy * dy;
                if mag2 > best {
                    best = mag2;
                    gx = dx;
                    gy = dy;
                }
            }
            let v = best.max(0.0).sqrt();
            if v == 0.0 {
                continue;
            }
            // Snap to the best of 18 contrast-sensitive orientations.
            let mut best_dot = 0.0f64;
            let mut best_o = 0usize;
            for k in 0..ORIENTATIONS {
                let dot = uu[k] * gx + vv[k] * gy;
                if dot > best_dot {
                    best_dot = dot;
                    best_o = k;
                } else if -dot > best_dot {
                    best_dot = -dot;
                    best_o = k + ORIENTATIONS;
                }
            }
            // Bilinear interpolation into the four surrounding cells.
            let xp = (x as f64 + 0.5) / cell as f64 - 0.5;
            let yp = (y as f64 + 0.5) / cell as f64 - 0.5;
            let ix = xp.floor();
            let iy = yp.floor();
            let vx = xp - ix;
            let vy = yp - iy;
            let ix = ix as i64;
            let iy = iy as i64;
            for (dy_c, wy) in [(0i64, 1.0 - vy), (1, vy)] {
                for (dx_c, wx) in [(0i64, 1.0 - vx), (1, vx)] {
                    let cy = iy + dy_c;
                    let cx = ix + dx_c;
                    if cy >= 0 && cy < gm as i64 && cx >= 0 && cx < gn as i64 {
                        hist[(cy as usize * gn + cx as usize) * 2 * ORIENTATIONS + best_o] +=
                            v * wy * wx;
                    }
                }
            }
        }
    }

    // Cell energies over the 9 contrast-insensitive sums.
    let mut energy = vec![0.0f64; gm * gn];
    for c in 0..gm * gn {
        let h = &hist[c * 2 * ORIENTATIONS..(c + 1) * 2 * ORIENTATIONS];
        let mut e = 0.0;
        for k in 0..ORIENTATIONS {
            let s = h[k] + h[k + ORIENTATIONS];
            e += s * s;
        }
        energy[c] = e;
    }

    let at = |i: i64, j: i64| -> f64 {
        let i = i.clamp(0, gm as i64 - 1) as usize;
        let j = j.clamp(0, gn as i64 - 1) as usize;
        energy[i * gn + j]
    };

    let mut out = vec![Array2::<T>::zeros((gm, gn)); HOG_CHANNELS];
    let eps = 1e-10f64;
    for i in 0..gm as i64 {
        for j in 0..gn as i64 {
            // Four 2x2-block normalizers around the cell, borders replicated.
            let norms = [
                (at(i, j) + at(i, j - 1) + at(i - 1, j) + at(i - 1, j - 1) + eps)
                    .sqrt()
                    .recip(),
                (at(i, j) + at(i, j + 1) + at(i - 1, j) + at(i - 1, j + 1) + eps)
                    .sqrt()
                    .recip(),
                (at(i, j) + at(i, j - 1) + at(i + 1, j) + at(i + 1, j - 1) + eps)
                    .sqrt()
                    .recip(),
                (at(i, j) + at(i, j + 1) + at(i + 1, j) + at(i + 1, j + 1) + eps)
                    .sqrt()
                    .recip(),
            ];
            let c = (i as usize * gn + j as usize) * 2 * ORIENTATIONS;
            let mut texture = [0.0f64; 4];
            // Contrast-sensitive channels 0..18.
            for o in 0..2 * ORIENTATIONS {
                let h = hist[c + o];
                let mut s = 0.0;
                for (b, nrm) in norms.iter().enumerate() {
                    let t = (h * nrm).min(TRUNCATION);
                    s += t;
                    texture[b] += t;
                }
                out[o][[i as usize, j as usize]] = cast::<T>(0.5 * s);
            }
            // Contrast-insensitive channels 18..27.
            for o in 0..ORIENTATIONS {
                let h = hist[c + o] + hist[c + o + ORIENTATIONS];
                let mut s = 0.0;
                for nrm in &norms {
                    s += (h * nrm).min(TRUNCATION);
                }
                out[2 * ORIENTATIONS + o][[i as usize, j as usize]] = cast::<T>(0.5 * s);
            }
            // Normalization-energy channels 27..31.
            for b in 0..4 {
                out[27 + b][[i as usize, j as usize]] = cast::<T>(0.2357 * texture[b]);
            }
        }
    }
    out
}
