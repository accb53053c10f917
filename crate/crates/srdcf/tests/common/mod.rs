//! Shared oracles for the integration tests: brute-force transforms, direct
//! convolutions, dense elimination, and loss functionals evaluated three
//! independent ways. Everything here is written for clarity, not speed, so
//! the fast library paths have something honest to be checked against.
#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srdcf::features::{FeatureMap, LabelMap};
use srdcf::regularization::RegularizationOperator;
use srdcf::signal::{dft2, GridDomain, RealSpectrumBasis, Spectrum};
use srdcf::solver::DataOperator;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_map(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

pub fn random_feature_map(
    rng: &mut ChaCha8Rng,
    dom: GridDomain,
    channels: usize,
) -> FeatureMap<f64> {
    FeatureMap {
        channels: (0..channels)
            .map(|_| random_map(rng, dom.rows, dom.cols))
            .collect(),
        cell_size: 1,
        domain: dom,
    }
}

pub fn random_label(rng: &mut ChaCha8Rng, dom: GridDomain) -> LabelMap<f64> {
    LabelMap {
        values: random_map(rng, dom.rows, dom.cols),
        sigma: 1.0,
    }
}

/// O((MN)^2) forward DFT straight from the definition.
pub fn naive_dft2(map: &Array2<f64>) -> Spectrum<f64> {
    let (rows, cols) = map.dim();
    Array2::from_shape_fn((rows, cols), |(k, l)| {
        let mut acc = Complex::new(0.0, 0.0);
        for m in 0..rows {
            for n in 0..cols {
                let ph = -2.0 * std::f64::consts::PI
                    * (k as f64 * m as f64 / rows as f64 + l as f64 * n as f64 / cols as f64);
                acc += map[[m, n]] * Complex::new(ph.cos(), ph.sin());
            }
        }
        acc
    })
}

/// Direct circular convolution of two real maps; its DFT is the elementwise
/// product of the operands' DFTs.
pub fn circ_conv2(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = a.dim();
    assert_eq!(b.dim(), (rows, cols));
    Array2::from_shape_fn((rows, cols), |(m, n)| {
        let mut acc = 0.0;
        for p in 0..rows {
            for q in 0..cols {
                acc += a[[p, q]] * b[[(m + rows - p) % rows, (n + cols - q) % cols]];
            }
        }
        acc
    })
}

/// Direct circular convolution of two spectra over the frequency grid.
pub fn circ_conv2_spec(a: &Spectrum<f64>, b: &Spectrum<f64>) -> Spectrum<f64> {
    let (rows, cols) = a.dim();
    assert_eq!(b.dim(), (rows, cols));
    Array2::from_shape_fn((rows, cols), |(m, n)| {
        let mut acc = Complex::new(0.0, 0.0);
        for p in 0..rows {
            for q in 0..cols {
                acc += a[[p, q]] * b[[(m + rows - p) % rows, (n + cols - q) % cols]];
            }
        }
        acc
    })
}

/// Gaussian elimination with partial pivoting on a row-major dense matrix.
pub fn solve_dense(a: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), n * n);
    assert_eq!(rhs.len(), n);
    let mut m = a.to_vec();
    let mut x = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                m[i * n + col]
                    .abs()
                    .partial_cmp(&m[j * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        assert!(m[pivot * n + col].abs() > 1e-14, "singular oracle system");
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = m[row * n + col] / m[col * n + col];
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut s = x[row];
        for k in row + 1..n {
            s -= m[row * n + k] * x[k];
        }
        x[row] = s / m[row * n + row];
    }
    x
}

/// Materialize a dense matrix column by column from a matrix-vector product.
pub fn dense_from_matvec<F: FnMut(&[f64]) -> Vec<f64>>(n: usize, mut matvec: F) -> Vec<f64> {
    let mut dense = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        let out = matvec(&e);
        e[col] = 0.0;
        for row in 0..n {
            dense[row * n + col] = out[row];
        }
    }
    dense
}

/// One training instance for the loss-equivalence checks: `d` feature
/// layers, a label map, penalty weights, and a candidate filter, all on the
/// same grid.
pub struct LossInstance {
    pub dom: GridDomain,
    pub x: Vec<Array2<f64>>,
    pub y: Array2<f64>,
    pub w: Array2<f64>,
    pub f: Vec<Array2<f64>>,
}

impl LossInstance {
    pub fn random(rng: &mut ChaCha8Rng, dom: GridDomain, d: usize) -> Self {
        // Keep the penalty positive so it looks like a real weight function.
        let w = Array2::from_shape_fn((dom.rows, dom.cols), |_| rng.gen_range(0.1..2.0));
        LossInstance {
            dom,
            x: (0..d).map(|_| random_map(rng, dom.rows, dom.cols)).collect(),
            y: random_map(rng, dom.rows, dom.cols),
            w,
            f: (0..d).map(|_| random_map(rng, dom.rows, dom.cols)).collect(),
        }
    }
}

/// Training loss in the spatial domain: squared residual of the circular
/// convolution response plus the squared weighted filter norm.
pub fn loss_spatial(inst: &LossInstance) -> f64 {
    let (rows, cols) = inst.y.dim();
    let mut resp = Array2::<f64>::zeros((rows, cols));
    for (x, f) in inst.x.iter().zip(&inst.f) {
        resp = resp + circ_conv2(x, f);
    }
    let data: f64 = resp
        .iter()
        .zip(inst.y.iter())
        .map(|(r, y)| (r - y).powi(2))
        .sum();
    let reg: f64 = inst
        .f
        .iter()
        .map(|f| {
            f.iter()
                .zip(inst.w.iter())
                .map(|(fv, wv)| (wv * fv).powi(2))
                .sum::<f64>()
        })
        .sum();
    data + reg
}

/// The same loss evaluated on the spectra via Parseval: residual in the
/// frequency domain and the penalty as a frequency-domain convolution, both
/// scaled by 1/MN.
pub fn loss_fourier(inst: &LossInstance) -> f64 {
    let mn = inst.dom.len() as f64;
    let (rows, cols) = inst.y.dim();
    let mut resid = dft2(&inst.y).mapv(|c| -c);
    for (x, f) in inst.x.iter().zip(&inst.f) {
        resid = resid + dft2(x) * dft2(f);
    }
    let data: f64 = resid.iter().map(|c| c.norm_sqr()).sum();
    let what = dft2(&inst.w);
    let mut reg = 0.0;
    for f in &inst.f {
        let conv = circ_conv2_spec(&what, &dft2(f));
        for m in 0..rows {
            for n in 0..cols {
                reg += (conv[[m, n]] / mn).norm_sqr();
            }
        }
    }
    (data + reg) / mn
}

/// The same loss in the transformed real coordinates: data term through the
/// real data operator, penalty through the real convolution operator.
pub fn loss_real(
    inst: &LossInstance,
    basis: &RealSpectrumBasis,
    dop: &DataOperator<f64>,
    reg_op: &RegularizationOperator<f64>,
) -> f64 {
    let mn = inst.dom.len();
    let mut f_real = Vec::with_capacity(inst.f.len() * mn);
    for f in &inst.f {
        f_real.extend(srdcf::signal::to_real_spectrum(&dft2(f), basis).unwrap());
    }
    let y_real = srdcf::signal::to_real_spectrum(&dft2(&inst.y), basis).unwrap();
    let resp = dop.apply(basis, &f_real);
    let data: f64 = resp
        .iter()
        .zip(&y_real)
        .map(|(r, y)| (r - y).powi(2))
        .sum();
    let mut reg = 0.0;
    for l in 0..inst.f.len() {
        let cf = reg_op.real_conv.matvec(&f_real[l * mn..(l + 1) * mn]);
        reg += cf.iter().map(|v| v * v).sum::<f64>();
    }
    (data + reg) / mn as f64
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn rel_err_vec(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / den.max(1e-300)
}
