//! Real-valued normal equations: assembly, online update with exponential
//! forgetting, the first-frame direct solve, and Gauss-Seidel sweeps.
//!
//! In the transformed coordinates every per-layer data operator
//! `D~ = B diag(x^) B^H` is real with at most two non-zeros per row: for a
//! reflected pair the 2x2 block is `[[a, b], [-b, a]]` with `a + ib` the
//! spectrum value at the `Ω+` member. The full system matrix
//! `A = sum_k α_k D_k' D_k + W' W` therefore keeps a fixed sparsity pattern
//! across frames, which the assembly plan below exploits.

use crate::error::{Error, Result};
use crate::features::{FeatureMap, LabelMap};
use crate::regularization::RegularizationOperator;
use crate::scalar::{cast, Scalar};
use crate::signal::{dft2, from_real_spectrum, to_real_spectrum, RealSpectrumBasis, Spectrum};
use crate::sparse::Csr;
use std::io::{Read, Write};
use std::sync::Arc;

/// Per-layer real-transformed data operators `D~^l` for one sample.
#[derive(Debug, Clone)]
pub struct DataOperator<T> {
    pub d: usize,
    pub mn: usize,
    /// `Re(x^)` per layer, flat `d * mn`; the diagonal of each block row.
    rdiag: Vec<T>,
    /// `Im(x^)` per layer, flat `d * mn`; the off-diagonal toward the partner.
    roff: Vec<T>,
}

impl<T: Scalar> DataOperator<T> {
    /// Apply the concatenated operator: `B vec(sum_l x^l ⊙ f^l)`.
    pub fn apply(&self, basis: &RealSpectrumBasis, f: &[T]) -> Vec<T> {
        assert_eq!(f.len(), self.d * self.mn);
        let mut out = vec![T::zero(); self.mn];
        for l in 0..self.d {
            let fl = &f[l * self.mn..(l + 1) * self.mn];
            let rd = &self.rdiag[l * self.mn..(l + 1) * self.mn];
            let ro = &self.roff[l * self.mn..(l + 1) * self.mn];
            for p in 0..self.mn {
                let j = basis.partner[p] as usize;
                out[p] += rd[p] * fl[p] + ro[p] * fl[j];
            }
        }
        out
    }

    /// Adjoint applied to a real-spectrum vector: `(D~^l)' y` per layer,
    /// concatenated.
    pub fn apply_adjoint(&self, basis: &RealSpectrumBasis, y: &[T]) -> Vec<T> {
        assert_eq!(y.len(), self.mn);
        let mut out = vec![T::zero(); self.d * self.mn];
        for l in 0..self.d {
            let rd = &self.rdiag[l * self.mn..(l + 1) * self.mn];
            let ro = &self.roff[l * self.mn..(l + 1) * self.mn];
            for p in 0..self.mn {
                let j = basis.partner[p] as usize;
                out[l * self.mn + p] = rd[p] * y[p] + ro[j] * y[j];
            }
        }
        out
    }
}

/// Build the per-layer data operators from a sample's channel spectra.
pub fn build_data_operator<T: Scalar>(
    sample: &FeatureMap<T>,
    basis: &RealSpectrumBasis,
) -> Result<DataOperator<T>> {
    if sample.domain != basis.domain {
        return Err(Error::invalid_input(format!(
            "sample domain {}x{} does not match basis {}x{}",
            sample.domain.rows, sample.domain.cols, basis.domain.rows, basis.domain.cols
        )));
    }
    let mn = basis.len();
    let d = sample.num_channels();
    let mut rdiag = Vec::with_capacity(d * mn);
    let mut roff = Vec::with_capacity(d * mn);
    for ch in &sample.channels {
        let spec = dft2(ch);
        let flat = spec.as_slice().unwrap();
        for c in flat {
            rdiag.push(c.re);
            roff.push(c.im);
        }
    }
    Ok(DataOperator {
        d,
        mn,
        rdiag,
        roff,
    })
}

/// Fixed sparsity pattern of `A` plus scatter plans for fast re-assembly.
#[derive(Debug)]
pub struct AssemblyPattern<T> {
    pub d: usize,
    pub mn: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    diag_pos: Vec<u32>,
    /// Per row `l*mn + p`: positions of columns `lp*mn + p` and
    /// `lp*mn + partner(p)` for each layer `lp`, interleaved.
    data_pos: Vec<u32>,
    gram_pos: Vec<u32>,
    gram_ptr: Vec<usize>,
    pub gram: Csr<T>,
    pub k: usize,
}

impl<T: Scalar> AssemblyPattern<T> {
    pub fn build(d: usize, basis: &RealSpectrumBasis, reg: &RegularizationOperator<T>) -> Self {
        let mn = basis.len();
        let gram = reg.gram.clone();
        let n = d * mn;
        let mut indptr = vec![0usize; n + 1];
        let mut indices: Vec<u32> = Vec::new();
        let mut row_cols: Vec<u32> = Vec::new();
        for l in 0..d {
            for p in 0..mn {
                row_cols.clear();
                let j = basis.partner[p] as usize;
                for lp in 0..d {
                    row_cols.push((lp * mn + p) as u32);
                    row_cols.push((lp * mn + j) as u32);
                }
                let (gcols, _) = gram.row(p);
                for c in gcols {
                    row_cols.push((l * mn) as u32 + c);
                }
                row_cols.sort_unstable();
                row_cols.dedup();
                indices.extend_from_slice(&row_cols);
                indptr[l * mn + p + 1] = indices.len();
            }
        }

        let find = |row: usize, col: u32| -> u32 {
            let lo = indptr[row];
            let hi = indptr[row + 1];
            (lo + indices[lo..hi].binary_search(&col).expect("pattern column")) as u32
        };

        let mut diag_pos = Vec::with_capacity(n);
        let mut data_pos = Vec::with_capacity(n * 2 * d);
        let mut gram_pos = Vec::new();
        let mut gram_ptr = vec![0usize; n + 1];
        for l in 0..d {
            for p in 0..mn {
                let row = l * mn + p;
                diag_pos.push(find(row, row as u32));
                let j = basis.partner[p] as usize;
                for lp in 0..d {
                    data_pos.push(find(row, (lp * mn + p) as u32));
                    data_pos.push(find(row, (lp * mn + j) as u32));
                }
                let (gcols, _) = gram.row(p);
                for c in gcols {
                    gram_pos.push(find(row, (l * mn) as u32 + c));
                }
                gram_ptr[row + 1] = gram_pos.len();
            }
        }
        AssemblyPattern {
            d,
            mn,
            indptr,
            indices,
            diag_pos,
            data_pos,
            gram_pos,
            gram_ptr,
            gram,
            k: reg.k,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Running normal-equation state `A f~ = b` with the current filter.
#[derive(Debug, Clone)]
pub struct ModelState<T> {
    pub pattern: Arc<AssemblyPattern<T>>,
    pub basis: Arc<RealSpectrumBasis>,
    pub a_vals: Vec<T>,
    pub b: Vec<T>,
    pub f_real: Vec<T>,
    pub f_spectra: Vec<Spectrum<T>>,
    pub gamma: f64,
    pub frame_count: u32,
}

fn real_label<T: Scalar>(label: &LabelMap<T>, basis: &RealSpectrumBasis) -> Result<Vec<T>> {
    to_real_spectrum(&dft2(&label.values), basis)
}

impl<T: Scalar> ModelState<T> {
    /// First-frame state: `A = D'D + W'W`, `b = D'y~`, zero filter.
    pub fn init(
        sample: &FeatureMap<T>,
        label: &LabelMap<T>,
        pattern: Arc<AssemblyPattern<T>>,
        basis: Arc<RealSpectrumBasis>,
        gamma: f64,
    ) -> Result<Self> {
        if sample.num_channels() != pattern.d {
            return Err(Error::invalid_input(format!(
                "sample has {} channels, pattern expects {}",
                sample.num_channels(),
                pattern.d
            )));
        }
        let n = pattern.d * pattern.mn;
        let mut state = ModelState {
            pattern: pattern.clone(),
            basis: basis.clone(),
            a_vals: vec![T::zero(); pattern.nnz()],
            b: vec![T::zero(); n],
            f_real: vec![T::zero(); n],
            f_spectra: vec![
                Spectrum::from_elem(
                    (basis.domain.rows, basis.domain.cols),
                    num_complex::Complex::new(T::zero(), T::zero())
                );
                pattern.d
            ],
            gamma,
            frame_count: 1,
        };
        let dop = build_data_operator(sample, &basis)?;
        let y = real_label(label, &basis)?;
        state.accumulate(&dop, &y, T::zero(), T::one());
        Ok(state)
    }

    /// Exponential-forgetting update:
    /// `A <- (1-γ)A + γ(D'D + W'W)`, `b <- (1-γ)b + γ D'y~`.
    pub fn update(&mut self, sample: &FeatureMap<T>, label: &LabelMap<T>) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} outside [0, 1]",
                self.gamma
            )));
        }
        let dop = build_data_operator(sample, &self.basis)?;
        let y = real_label(label, &self.basis)?;
        let g = cast::<T>(self.gamma);
        self.accumulate(&dop, &y, T::one() - g, g);
        self.frame_count += 1;
        Ok(())
    }

    fn accumulate(&mut self, dop: &DataOperator<T>, y: &[T], old: T, new: T) {
        let pat = &self.pattern;
        let (d, mn) = (pat.d, pat.mn);
        assert_eq!(dop.d, d);
        assert_eq!(dop.mn, mn);
        for v in &mut self.a_vals {
            *v *= old;
        }
        for v in &mut self.b {
            *v *= old;
        }
        let vals = &mut self.a_vals;
        for l in 0..d {
            for p in 0..mn {
                let row = l * mn + p;
                let j = self.basis.partner[p] as usize;
                let al = dop.rdiag[l * mn + p];
                let bj = dop.roff[l * mn + j];
                let base = row * 2 * d;
                for lp in 0..d {
                    let v1 = al * dop.rdiag[lp * mn + p] + bj * dop.roff[lp * mn + j];
                    let v2 = al * dop.roff[lp * mn + p] + bj * dop.rdiag[lp * mn + j];
                    vals[pat.data_pos[base + 2 * lp] as usize] += new * v1;
                    vals[pat.data_pos[base + 2 * lp + 1] as usize] += new * v2;
                }
                let g0 = pat.gram_ptr[row];
                let (_, gvals) = pat.gram.row(p);
                for (k, gv) in gvals.iter().enumerate() {
                    vals[pat.gram_pos[g0 + k] as usize] += new * *gv;
                }
                self.b[row] += new * (al * y[p] + bj * y[j]);
            }
        }
    }

    /// One matrix-vector product with the current `A`.
    pub fn a_matvec(&self, x: &[T]) -> Vec<T> {
        let pat = &self.pattern;
        let n = pat.d * pat.mn;
        assert_eq!(x.len(), n);
        let mut y = vec![T::zero(); n];
        for r in 0..n {
            let mut s = T::zero();
            for i in pat.indptr[r]..pat.indptr[r + 1] {
                s += self.a_vals[i] * x[pat.indices[i] as usize];
            }
            y[r] = s;
        }
        y
    }

    /// Run exactly `iterations` Gauss-Seidel sweeps from the warm start in
    /// `f_real`, then refresh the per-layer spectra.
    pub fn gauss_seidel(&mut self, iterations: usize) -> Result<()> {
        let pat = &self.pattern;
        let n = pat.d * pat.mn;
        for _ in 0..iterations {
            for r in 0..n {
                let diag = self.a_vals[pat.diag_pos[r] as usize];
                if diag == T::zero() {
                    return Err(Error::SingularSystem(format!(
                        "zero diagonal at row {r} during Gauss-Seidel sweep"
                    )));
                }
                let mut s = self.b[r];
                for i in pat.indptr[r]..pat.indptr[r + 1] {
                    let c = pat.indices[i] as usize;
                    if c != r {
                        s -= self.a_vals[i] * self.f_real[c];
                    }
                }
                self.f_real[r] = s / diag;
            }
        }
        self.refresh_spectra();
        Ok(())
    }

    /// Rebuild `f_spectra` from `f_real`.
    pub fn refresh_spectra(&mut self) {
        let mn = self.pattern.mn;
        for l in 0..self.pattern.d {
            self.f_spectra[l] =
                from_real_spectrum(&self.f_real[l * mn..(l + 1) * mn], &self.basis);
        }
    }

    /// Measured sparsity of `A` against the `(2d + K^2)/(dMN)` bound.
    pub fn nnz_fraction(&self) -> f64 {
        let n = (self.pattern.d * self.pattern.mn) as f64;
        self.pattern.nnz() as f64 / (n * n)
    }

    pub fn sparsity_bound(&self) -> f64 {
        let pat = &self.pattern;
        (2.0 * pat.d as f64 + (pat.k * pat.k) as f64) / (pat.d * pat.mn) as f64
    }

    const SNAPSHOT_MAGIC: &'static [u8; 4] = b"SRDC";
    const SNAPSHOT_VERSION: u32 = 1;

    /// Versioned binary snapshot for pause/resume and fixtures.
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(Self::SNAPSHOT_MAGIC)?;
        w.write_all(&Self::SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(self.pattern.d as u32).to_le_bytes())?;
        w.write_all(&(self.basis.domain.rows as u32).to_le_bytes())?;
        w.write_all(&(self.basis.domain.cols as u32).to_le_bytes())?;
        w.write_all(&self.gamma.to_le_bytes())?;
        w.write_all(&self.frame_count.to_le_bytes())?;
        for v in &self.b {
            w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
        }
        w.write_all(&(self.pattern.nnz() as u64).to_le_bytes())?;
        for p in &self.pattern.indptr {
            w.write_all(&(*p as u64).to_le_bytes())?;
        }
        for c in &self.pattern.indices {
            w.write_all(&c.to_le_bytes())?;
        }
        for v in &self.a_vals {
            w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
        }
        for v in &self.f_real {
            w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
        }
        Ok(())
    }

    /// Read a snapshot written by [`ModelState::write_snapshot`]. The caller
    /// supplies the pattern and basis (reconstructible from the tracker
    /// config); the stored structure is validated against them.
    pub fn read_snapshot<R: Read>(
        r: &mut R,
        pattern: Arc<AssemblyPattern<T>>,
        basis: Arc<RealSpectrumBasis>,
    ) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != Self::SNAPSHOT_MAGIC {
            return Err(Error::invalid_input("bad snapshot magic"));
        }
        let version = read_u32(r)?;
        if version != Self::SNAPSHOT_VERSION {
            return Err(Error::invalid_input(format!(
                "unsupported snapshot version {version}"
            )));
        }
        let d = read_u32(r)? as usize;
        let rows = read_u32(r)? as usize;
        let cols = read_u32(r)? as usize;
        if d != pattern.d || rows != basis.domain.rows || cols != basis.domain.cols {
            return Err(Error::invalid_input("snapshot dimensions do not match"));
        }
        let gamma = read_f64(r)?;
        let frame_count = read_u32(r)?;
        let n = d * pattern.mn;
        let mut b = Vec::with_capacity(n);
        for _ in 0..n {
            b.push(cast::<T>(read_f64(r)?));
        }
        let nnz = read_u64(r)? as usize;
        if nnz != pattern.nnz() {
            return Err(Error::invalid_input("snapshot sparsity does not match"));
        }
        for expect in &pattern.indptr {
            if read_u64(r)? as usize != *expect {
                return Err(Error::invalid_input("snapshot row structure mismatch"));
            }
        }
        for expect in &pattern.indices {
            if read_u32(r)? != *expect {
                return Err(Error::invalid_input("snapshot column structure mismatch"));
            }
        }
        let mut a_vals = Vec::with_capacity(nnz);
        for _ in 0..nnz {
            a_vals.push(cast::<T>(read_f64(r)?));
        }
        let mut f_real = Vec::with_capacity(n);
        for _ in 0..n {
            f_real.push(cast::<T>(read_f64(r)?));
        }
        let mut state = ModelState {
            pattern,
            basis: basis.clone(),
            a_vals,
            b,
            f_real,
            f_spectra: vec![
                Spectrum::from_elem((rows, cols), num_complex::Complex::new(T::zero(), T::zero()));
                d
            ],
            gamma,
            frame_count,
        };
        state.refresh_spectra();
        Ok(state)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

/// Solve the first-frame per-layer system
/// `(sum_p D^p' D^p + d C~'C~) f^l = D^l' y~` with a dense Cholesky
/// factorization shared across the `d` right-hand sides.
pub fn initial_solve<T: Scalar>(
    sample: &FeatureMap<T>,
    label: &LabelMap<T>,
    reg: &RegularizationOperator<T>,
    basis: &RealSpectrumBasis,
) -> Result<Vec<T>> {
    let dop = build_data_operator(sample, basis)?;
    let y = real_label(label, basis)?;
    let (d, mn) = (dop.d, dop.mn);

    let mut g = vec![T::zero(); mn * mn];
    for l in 0..d {
        for p in 0..mn {
            let j = basis.partner[p] as usize;
            let al = dop.rdiag[l * mn + p];
            let bj = dop.roff[l * mn + j];
            g[p * mn + p] += al * dop.rdiag[l * mn + p] + bj * dop.roff[l * mn + j];
            g[p * mn + j] += al * dop.roff[l * mn + p] + bj * dop.rdiag[l * mn + j];
        }
    }
    let dt = cast::<T>(d as f64);
    for p in 0..mn {
        let (cols, vals) = reg.gram.row(p);
        for (c, v) in cols.iter().zip(vals) {
            g[p * mn + *c as usize] += dt * *v;
        }
    }

    let chol = dense_cholesky(g, mn)?;
    let mut out = vec![T::zero(); d * mn];
    for l in 0..d {
        let mut rhs = vec![T::zero(); mn];
        for p in 0..mn {
            let j = basis.partner[p] as usize;
            rhs[p] = dop.rdiag[l * mn + p] * y[p] + dop.roff[l * mn + j] * y[j];
        }
        cholesky_solve(&chol, mn, &mut rhs);
        out[l * mn..(l + 1) * mn].copy_from_slice(&rhs);
    }
    Ok(out)
}

/// In-place lower Cholesky factor of a dense SPD matrix (row-major).
pub fn dense_cholesky<T: Scalar>(mut a: Vec<T>, n: usize) -> Result<Vec<T>> {
    for j in 0..n {
        let mut s = a[j * n + j];
        for k in 0..j {
            s -= a[j * n + k] * a[j * n + k];
        }
        if s <= T::zero() {
            return Err(Error::SingularSystem(format!(
                "non-positive pivot at column {j} in Cholesky factorization"
            )));
        }
        let ljj = s.sqrt();
        a[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    Ok(a)
}

/// Solve `L L' x = rhs` in place given the lower factor.
pub fn cholesky_solve<T: Scalar>(l: &[T], n: usize, rhs: &mut [T]) {
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i * n + k] * rhs[k];
        }
        rhs[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in i + 1..n {
            s -= l[k * n + i] * rhs[k];
        }
        rhs[i] = s / l[i * n + i];
    }
}
