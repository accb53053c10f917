//! Spatial penalty weights, their sparsified spectrum, and the transformed
//! regularization operator used in the normal equations.
//!
//! The weights start from a quadratic bowl `w(m,n) = mu + eta (dm/P)^2 +
//! eta (dn/Q)^2` centered on the sample-center cell. Only the handful of
//! dominant DFT coefficients are kept, which is what makes the normal
//! equations sparse.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::signal::{dft2, idft2, GridDomain, RealSpectrumBasis};
use crate::sparse::Csr;
use ndarray::Array2;
use num_complex::Complex;

/// Sparse spectrum entry: linear frequency index and coefficient.
pub type SparseSpectrum<T> = Vec<(usize, Complex<T>)>;

/// Quadratic penalty weights with circular signed displacement from the
/// sample-center cell, so `w` is point-reflection symmetric about it.
pub fn build_weights<T: Scalar>(
    domain: GridDomain,
    target_cells: (f64, f64),
    mu: f64,
    eta: f64,
) -> Array2<T> {
    let p = target_cells.0.max(1.0);
    let q = target_cells.1.max(1.0);
    assert!(mu > 0.0 && eta >= 0.0);
    let (cm, cn) = (domain.rows / 2, domain.cols / 2);
    Array2::from_shape_fn((domain.rows, domain.cols), |(m, n)| {
        let dm = crate::features::signed_offset(m as f64 - cm as f64, domain.rows as f64);
        let dn = crate::features::signed_offset(n as f64 - cn as f64, domain.cols as f64);
        cast::<T>(mu + eta * (dm / p).powi(2) + eta * (dn / q).powi(2))
    })
}

/// Keep the largest-magnitude DFT coefficients of `w`, whole conjugate
/// pairs at a time and DC always, stopping before the count would exceed
/// `target_nnz`.
pub fn sparsify_spectrum<T: Scalar>(w: &Array2<T>, target_nnz: usize) -> SparseSpectrum<T> {
    let spec = dft2(w);
    let dom = GridDomain {
        rows: w.nrows(),
        cols: w.ncols(),
    };
    let flat: Vec<Complex<T>> = spec.iter().copied().collect();

    // Group indices into self-paired singletons and conjugate pairs.
    let mut groups: Vec<(Vec<usize>, f64)> = Vec::new();
    for p in 0..dom.len() {
        let q = dom.reflect(p);
        if p == q {
            groups.push((vec![p], flat[p].norm().to_f64().unwrap()));
        } else if p < q {
            groups.push((vec![p, q], flat[p].norm().to_f64().unwrap()));
        }
    }
    groups.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());

    let max_norm = groups.first().map(|g| g.1).unwrap_or(0.0);
    let negligible = 1e-12 * max_norm.max(1.0);
    let mut kept: Vec<usize> = vec![0]; // DC always kept
    for (idxs, norm) in groups {
        if idxs.contains(&0) {
            continue;
        }
        if norm <= negligible || kept.len() + idxs.len() > target_nnz.max(1) {
            break;
        }
        kept.extend(idxs);
    }
    kept.sort_unstable();
    kept.into_iter().map(|p| (p, flat[p])).collect()
}

/// Evaluate the spatial weights implied by a sparse spectrum (its real
/// inverse DFT). After truncation this is the exact penalty the solver sees.
pub fn weights_from_spectrum<T: Scalar>(
    spectrum: &SparseSpectrum<T>,
    domain: GridDomain,
) -> Array2<T> {
    let mut spec = Array2::from_elem(
        (domain.rows, domain.cols),
        Complex::new(T::zero(), T::zero()),
    );
    for &(p, c) in spectrum {
        spec[[p / domain.cols, p % domain.cols]] = c;
    }
    idft2(&spec)
}

/// Sparse spectrum of uniform weights `w = sqrt(lambda)`: a single DC
/// coefficient of `MN * sqrt(lambda)`.
pub fn uniform_spectrum<T: Scalar>(domain: GridDomain, lambda: f64) -> SparseSpectrum<T> {
    vec![(
        0,
        Complex::new(cast::<T>(domain.len() as f64 * lambda.sqrt()), T::zero()),
    )]
}

/// The penalty `w`, its sparsified spectrum and parameters.
#[derive(Debug, Clone)]
pub struct SpatialWeights<T> {
    pub mu: f64,
    pub eta: f64,
    pub target_cells: (f64, f64),
    pub domain: GridDomain,
    /// Inverse DFT of the sparse spectrum, i.e. the penalty actually applied.
    pub spatial: Array2<T>,
    pub sparse_spectrum: SparseSpectrum<T>,
}

impl<T: Scalar> SpatialWeights<T> {
    pub fn quadratic(
        domain: GridDomain,
        target_cells: (f64, f64),
        mu: f64,
        eta: f64,
        target_nnz: usize,
    ) -> Self {
        let w = build_weights::<T>(domain, target_cells, mu, eta);
        let sparse_spectrum = sparsify_spectrum(&w, target_nnz);
        let spatial = weights_from_spectrum(&sparse_spectrum, domain);
        SpatialWeights {
            mu,
            eta,
            target_cells,
            domain,
            spatial,
            sparse_spectrum,
        }
    }

    pub fn uniform(domain: GridDomain, lambda: f64) -> Self {
        let sparse_spectrum = uniform_spectrum::<T>(domain, lambda);
        let spatial = weights_from_spectrum(&sparse_spectrum, domain);
        SpatialWeights {
            mu: lambda.sqrt(),
            eta: 0.0,
            target_cells: (1.0, 1.0),
            domain,
            spatial,
            sparse_spectrum,
        }
    }

    pub fn nnz(&self) -> usize {
        self.sparse_spectrum.len()
    }
}

/// Real-transformed convolution operator `C~ = (1/MN) B Conv(w^) B^H` and
/// its Gram matrix.
#[derive(Debug, Clone)]
pub struct RegularizationOperator<T> {
    pub real_conv: Csr<T>,
    pub gram: Csr<T>,
    /// Non-zero coefficient count of the sparse spectrum.
    pub k: usize,
}

/// Build the transformed operator from a Hermitian sparse spectrum.
pub fn build_operator<T: Scalar>(
    spectrum: &SparseSpectrum<T>,
    basis: &RealSpectrumBasis,
) -> Result<RegularizationOperator<T>> {
    let dom = basis.domain;
    let mn = dom.len();
    check_spectrum_hermitian(spectrum, dom)?;

    // B as complex CSR.
    let mut b_trip = Vec::with_capacity(2 * mn);
    for p in 0..mn {
        for (c, v) in basis.b_row::<T>(p) {
            b_trip.push((p as u32, c as u32, v));
        }
    }
    let b = Csr::from_triplets(mn, mn, b_trip);
    let bh = b.transpose().map(|v: Complex<T>| v.conj());

    // Circular-convolution matrix of the sparse spectrum.
    let mut conv_trip = Vec::with_capacity(mn * spectrum.len());
    for u in 0..mn {
        let (um, un) = (u / dom.cols, u % dom.cols);
        for &(o, c) in spectrum {
            let (om, on) = (o / dom.cols, o % dom.cols);
            let qm = (um + dom.rows - om) % dom.rows;
            let qn = (un + dom.cols - on) % dom.cols;
            conv_trip.push((u as u32, dom.index(qm, qn) as u32, c));
        }
    }
    let conv = Csr::from_triplets(mn, mn, conv_trip);

    let scale = cast::<T>(1.0 / mn as f64);
    let prod = b.matmul(&conv).matmul(&bh);

    // The transformed operator must be real; verify before discarding the
    // imaginary residue.
    let max_abs = prod
        .vals
        .iter()
        .map(|c| c.norm())
        .fold(T::zero(), |a, b| a.max(b))
        .max(T::one());
    let tol = cast::<T>(1e-10) * max_abs;
    for v in &prod.vals {
        if v.im.abs() > tol {
            return Err(Error::SymmetryViolation(format!(
                "transformed convolution operator has imaginary residue {:e}",
                v.im.abs().to_f64().unwrap_or(f64::NAN)
            )));
        }
    }
    let drop_tol = cast::<T>(1e-12) * max_abs;
    let real_conv = prod
        .map(|c| c.re * scale)
        .prune(|v| v.abs() > drop_tol * scale);

    // Gram matrix, structurally symmetrized.
    let raw = real_conv.transpose().matmul(&real_conv);
    let rawt = raw.transpose();
    let half = cast::<T>(0.5);
    let mut trip = Vec::with_capacity(2 * raw.nnz());
    for r in 0..mn {
        let (cols, vals) = raw.row(r);
        for (c, v) in cols.iter().zip(vals) {
            trip.push((r as u32, *c, *v * half));
        }
        let (cols, vals) = rawt.row(r);
        for (c, v) in cols.iter().zip(vals) {
            trip.push((r as u32, *c, *v * half));
        }
    }
    let gram = Csr::from_triplets(mn, mn, trip);
    let gmax = gram
        .vals
        .iter()
        .fold(T::zero(), |a, b| a.max(b.abs()))
        .max(T::epsilon());
    let gtol = cast::<T>(1e-14) * gmax;
    let gram = gram.prune(|v| v.abs() > gtol);

    Ok(RegularizationOperator {
        real_conv,
        gram,
        k: spectrum.len(),
    })
}

fn check_spectrum_hermitian<T: Scalar>(
    spectrum: &SparseSpectrum<T>,
    dom: GridDomain,
) -> Result<()> {
    let lookup: std::collections::BTreeMap<usize, Complex<T>> =
        spectrum.iter().copied().collect();
    let scale = spectrum
        .iter()
        .map(|(_, c)| c.norm())
        .fold(T::zero(), |a, b| a.max(b))
        .max(T::one());
    let tol = cast::<T>(1e-8) * scale;
    for &(p, c) in spectrum {
        let q = dom.reflect(p);
        match lookup.get(&q) {
            Some(cq) if (c - cq.conj()).norm() <= tol => {}
            Some(_) => {
                return Err(Error::SymmetryViolation(format!(
                    "sparse spectrum coefficient {} is not conjugate to its reflection",
                    p
                )))
            }
            None => {
                return Err(Error::SymmetryViolation(format!(
                    "sparse spectrum keeps {} without its reflection {}",
                    p, q
                )))
            }
        }
    }
    Ok(())
}
