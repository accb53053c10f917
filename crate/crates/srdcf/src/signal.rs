//! 2D DFT machinery and the real-spectrum change of basis.
//!
//! The DFT of a real map is Hermitian symmetric under the point reflection
//! `ρ(m,n) = (-m mod M, -n mod N)`. Partitioning the index set into fixed
//! points `Ω0` and reflected pairs `Ω+`/`Ω-` yields a unitary matrix `B`
//! (at most two non-zeros per row) that maps Hermitian spectra to real
//! vectors. Everything downstream of the Fourier transform works in these
//! real coordinates.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use ndarray::Array2;
use num_complex::Complex;
use rustfft::FftPlanner;

/// Spectrum of an `M x N` real map, stored densely in row-major index order.
pub type Spectrum<T> = Array2<Complex<T>>;

/// The `M x N` index grid of a feature sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridDomain {
    pub rows: usize,
    pub cols: usize,
}

impl GridDomain {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid_input("grid domain must be at least 1x1"));
        }
        Ok(GridDomain { rows, cols })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major linear index.
    #[inline]
    pub fn index(&self, m: usize, n: usize) -> usize {
        m * self.cols + n
    }

    /// Point reflection `ρ(m,n) = (-m mod M, -n mod N)` on linear indices.
    #[inline]
    pub fn reflect(&self, idx: usize) -> usize {
        let m = idx / self.cols;
        let n = idx % self.cols;
        let rm = (self.rows - m) % self.rows;
        let rn = (self.cols - n) % self.cols;
        self.index(rm, rn)
    }
}

/// Forward unnormalized 2D DFT of a real map.
pub fn dft2<T: Scalar>(map: &Array2<T>) -> Spectrum<T> {
    let mut data: Vec<Complex<T>> = map.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft2_inplace(map.nrows(), map.ncols(), &mut data, rustfft::FftDirection::Forward);
    Array2::from_shape_vec((map.nrows(), map.ncols()), data).unwrap()
}

/// Forward unnormalized 2D DFT of a complex map.
pub fn dft2_complex<T: Scalar>(map: &Spectrum<T>) -> Spectrum<T> {
    let mut data: Vec<Complex<T>> = map.iter().copied().collect();
    fft2_inplace(map.nrows(), map.ncols(), &mut data, rustfft::FftDirection::Forward);
    Array2::from_shape_vec((map.nrows(), map.ncols()), data).unwrap()
}

/// Inverse 2D DFT carrying the `1/(MN)` factor; returns the real part.
///
/// `idft2(dft2(x)) == x` for real `x`.
pub fn idft2<T: Scalar>(spec: &Spectrum<T>) -> Array2<T> {
    let full = idft2_complex(spec);
    full.mapv(|c| c.re)
}

/// Inverse 2D DFT carrying the `1/(MN)` factor, kept complex.
pub fn idft2_complex<T: Scalar>(spec: &Spectrum<T>) -> Spectrum<T> {
    let (rows, cols) = (spec.nrows(), spec.ncols());
    let mut data: Vec<Complex<T>> = spec.iter().copied().collect();
    fft2_inplace(rows, cols, &mut data, rustfft::FftDirection::Inverse);
    let scale = cast::<T>(1.0 / (rows as f64 * cols as f64));
    for v in &mut data {
        *v = *v * scale;
    }
    Array2::from_shape_vec((rows, cols), data).unwrap()
}

fn fft2_inplace<T: Scalar>(
    rows: usize,
    cols: usize,
    data: &mut [Complex<T>],
    dir: rustfft::FftDirection,
) {
    let mut planner = FftPlanner::new();
    // Rows.
    let row_fft = planner.plan_fft(cols, dir);
    for r in 0..rows {
        row_fft.process(&mut data[r * cols..(r + 1) * cols]);
    }
    // Columns, via transpose-process-transpose on a scratch column.
    let col_fft = planner.plan_fft(rows, dir);
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); rows];
    for c in 0..cols {
        for r in 0..rows {
            scratch[r] = data[r * cols + c];
        }
        col_fft.process(&mut scratch);
        for r in 0..rows {
            data[r * cols + c] = scratch[r];
        }
    }
}

/// Class of a frequency index under the point reflection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexClass {
    /// Fixed point of `ρ`.
    Zero,
    /// Row-major-smaller member of a reflected pair.
    Plus,
    /// Reflection of a `Plus` index.
    Minus,
}

/// Point-reflection partition of the frequency domain and the induced
/// unitary real-spectrum transform `B`.
#[derive(Debug, Clone)]
pub struct RealSpectrumBasis {
    pub domain: GridDomain,
    /// `ρ` on linear indices; an involution.
    pub partner: Vec<u32>,
    pub class: Vec<IndexClass>,
    pub omega0: Vec<u32>,
    pub omega_plus: Vec<u32>,
    pub omega_minus: Vec<u32>,
}

/// Build the partition. For each non-fixed pair the row-major-smaller index
/// goes to `Ω+`.
pub fn partition_domain(domain: GridDomain) -> RealSpectrumBasis {
    let len = domain.len();
    let mut partner = vec![0u32; len];
    let mut class = vec![IndexClass::Zero; len];
    let mut omega0 = Vec::new();
    let mut omega_plus = Vec::new();
    let mut omega_minus = Vec::new();
    for p in 0..len {
        let q = domain.reflect(p);
        partner[p] = q as u32;
        if q == p {
            class[p] = IndexClass::Zero;
            omega0.push(p as u32);
        } else if p < q {
            class[p] = IndexClass::Plus;
            omega_plus.push(p as u32);
        } else {
            class[p] = IndexClass::Minus;
            omega_minus.push(p as u32);
        }
    }
    RealSpectrumBasis {
        domain,
        partner,
        class,
        omega0,
        omega_plus,
        omega_minus,
    }
}

impl RealSpectrumBasis {
    #[inline]
    pub fn len(&self) -> usize {
        self.domain.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Rows of `B` as `(column, coefficient)` pairs, at most two per row.
    pub fn b_row<T: Scalar>(&self, p: usize) -> Vec<(usize, Complex<T>)> {
        let q = self.partner[p] as usize;
        let s = cast::<T>(std::f64::consts::FRAC_1_SQRT_2);
        match self.class[p] {
            IndexClass::Zero => vec![(p, Complex::new(T::one(), T::zero()))],
            IndexClass::Plus => vec![
                (p, Complex::new(s, T::zero())),
                (q, Complex::new(s, T::zero())),
            ],
            // f~(p) = (f^(p) - f^(q)) / (i sqrt(2)) for p in Ω-.
            IndexClass::Minus => vec![
                (p, Complex::new(T::zero(), -s)),
                (q, Complex::new(T::zero(), s)),
            ],
        }
    }
}

/// Apply `B`: map a (Hermitian) spectrum to the real vector `f~`.
///
/// With debug assertions enabled, a spectrum whose Hermitian symmetry is
/// violated beyond tolerance produces an error.
pub fn to_real_spectrum<T: Scalar>(
    spec: &Spectrum<T>,
    basis: &RealSpectrumBasis,
) -> Result<Vec<T>> {
    let dom = basis.domain;
    if spec.nrows() != dom.rows || spec.ncols() != dom.cols {
        return Err(Error::invalid_input(format!(
            "spectrum is {}x{}, basis domain is {}x{}",
            spec.nrows(),
            spec.ncols(),
            dom.rows,
            dom.cols
        )));
    }
    let flat = spec.as_slice().unwrap();
    if cfg!(debug_assertions) {
        check_hermitian(flat, basis)?;
    }
    let s = cast::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let mut out = vec![T::zero(); dom.len()];
    for p in 0..dom.len() {
        let q = basis.partner[p] as usize;
        out[p] = match basis.class[p] {
            IndexClass::Zero => flat[p].re,
            IndexClass::Plus => (flat[p] + flat[q]).re * s,
            // (f^(p) - f^(q)) / (i sqrt(2)); real part of -i (a - b) is Im(a - b).
            IndexClass::Minus => (flat[p] - flat[q]).im * s,
        };
    }
    Ok(out)
}

fn check_hermitian<T: Scalar>(flat: &[Complex<T>], basis: &RealSpectrumBasis) -> Result<()> {
    let scale = flat
        .iter()
        .map(|c| c.norm_sqr())
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
        .max(T::one());
    let tol = cast::<T>(1e-8) * scale;
    for p in 0..flat.len() {
        let q = basis.partner[p] as usize;
        let diff = flat[p] - flat[q].conj();
        if diff.norm() > tol {
            return Err(Error::SymmetryViolation(format!(
                "index {} vs reflected {}: |f(p) - conj(f(rho(p)))| = {:e}",
                p,
                q,
                diff.norm().to_f64().unwrap_or(f64::NAN)
            )));
        }
    }
    Ok(())
}

/// Apply `B^H`: map a real vector back to a Hermitian spectrum.
pub fn from_real_spectrum<T: Scalar>(v: &[T], basis: &RealSpectrumBasis) -> Spectrum<T> {
    let dom = basis.domain;
    assert_eq!(v.len(), dom.len(), "real-spectrum vector length mismatch");
    let s = cast::<T>(std::f64::consts::FRAC_1_SQRT_2);
    let mut out = vec![Complex::new(T::zero(), T::zero()); dom.len()];
    for p in 0..dom.len() {
        let q = basis.partner[p] as usize;
        match basis.class[p] {
            IndexClass::Zero => out[p] = Complex::new(v[p], T::zero()),
            IndexClass::Plus => {
                // f^(p) = (f~(p) - i f~(q)) / sqrt(2), q = rho(p) in Ω-.
                out[p] = Complex::new(v[p] * s, -v[q] * s);
            }
            IndexClass::Minus => {
                // f^(p) = (f~(q) + i f~(p)) / sqrt(2), q = rho(p) in Ω+.
                out[p] = Complex::new(v[q] * s, v[p] * s);
            }
        }
    }
    Array2::from_shape_vec((dom.rows, dom.cols), out).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_map_is_dc_only() {
        let map = Array2::<f64>::ones((4, 4));
        let spec = dft2(&map);
        assert!((spec[[0, 0]].re - 16.0).abs() < 1e-12);
        assert!(spec[[0, 0]].im.abs() < 1e-12);
        for (idx, v) in spec.indexed_iter() {
            if idx != (0, 0) {
                assert!(v.norm() < 1e-12, "non-DC bin {:?} not zero", idx);
            }
        }
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut map = Array2::<f64>::zeros((3, 3));
        map[[0, 0]] = 1.0;
        let spec = dft2(&map);
        for v in spec.iter() {
            assert!((v.re - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn partition_2x2_is_all_fixed() {
        let basis = partition_domain(GridDomain::new(2, 2).unwrap());
        assert_eq!(basis.omega0.len(), 4);
        assert_eq!(basis.omega_plus.len(), 0);
        assert_eq!(basis.omega_minus.len(), 0);
    }

    #[test]
    fn partition_3x3_has_one_fixed() {
        let basis = partition_domain(GridDomain::new(3, 3).unwrap());
        assert_eq!(basis.omega0.len(), 1);
        assert_eq!(basis.omega_plus.len(), 4);
        assert_eq!(basis.omega_minus.len(), 4);
    }

    #[test]
    fn partition_4x6_cardinalities() {
        // Fixed points satisfy 2m = 0 mod 4 and 2n = 0 mod 6.
        let basis = partition_domain(GridDomain::new(4, 6).unwrap());
        assert_eq!(basis.omega0.len(), 4);
        assert_eq!(basis.omega_plus.len(), 10);
        assert_eq!(basis.omega_minus.len(), 10);
        assert_eq!(basis.omega0.len() + 2 * basis.omega_plus.len(), 24);
    }

    #[test]
    fn reflection_is_involution() {
        for (m, n) in [(1, 1), (3, 5), (4, 4), (7, 2)] {
            let dom = GridDomain::new(m, n).unwrap();
            for p in 0..dom.len() {
                assert_eq!(dom.reflect(dom.reflect(p)), p);
            }
        }
    }

    #[test]
    fn all_ones_spectrum_maps_per_eq_cases() {
        // Spectrum of the impulse at (0,0) on 3x3 is all ones.
        let dom = GridDomain::new(3, 3).unwrap();
        let basis = partition_domain(dom);
        let spec = Spectrum::<f64>::from_elem((3, 3), Complex::new(1.0, 0.0));
        let v = to_real_spectrum(&spec, &basis).unwrap();
        for &p in &basis.omega0 {
            assert!((v[p as usize] - 1.0).abs() < 1e-12);
        }
        for &p in &basis.omega_plus {
            assert!((v[p as usize] - 2.0f64.sqrt()).abs() < 1e-12);
        }
        for &p in &basis.omega_minus {
            assert!(v[p as usize].abs() < 1e-12);
        }
    }

    #[test]
    fn zero_spectrum_round_trip() {
        let dom = GridDomain::new(4, 5).unwrap();
        let basis = partition_domain(dom);
        let spec = Spectrum::<f64>::from_elem((4, 5), Complex::new(0.0, 0.0));
        let v = to_real_spectrum(&spec, &basis).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        let back = from_real_spectrum(&v, &basis);
        assert!(back.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn identity_on_2x2_domain() {
        let dom = GridDomain::new(2, 2).unwrap();
        let basis = partition_domain(dom);
        let v = vec![1.0f64, -2.0, 3.0, 0.5];
        let spec = from_real_spectrum(&v, &basis);
        for (i, c) in spec.iter().enumerate() {
            assert_eq!(c.re, v[i]);
            assert_eq!(c.im, 0.0);
        }
    }

    #[test]
    fn hann_window_free_dimension_check() {
        let dom = GridDomain::new(3, 3).unwrap();
        let basis = partition_domain(dom);
        let spec = Spectrum::<f64>::from_elem((4, 4), Complex::new(0.0, 0.0));
        assert!(to_real_spectrum(&spec, &basis).is_err());
    }

    #[test]
    fn dc_normalization_round_trip() {
        let map = array![[1.0f64, 2.0, 3.0], [4.0, 5.0, 6.0]];
        let back = idft2(&dft2(&map));
        for (a, b) in map.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
