//! Minimal CSR sparse matrix, generic over the element type so the same
//! machinery serves the complex basis products and the real operators.

use num_traits::Zero;
use std::ops::{Add, AddAssign, Mul};

/// Row-compressed sparse matrix with sorted column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<u32>,
    pub vals: Vec<T>,
}

impl<T: Copy + Zero + PartialEq + Add<Output = T> + AddAssign + Mul<Output = T>> Csr<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Build from (row, col, value) triplets; duplicates are summed,
    /// exact zeros after summation are kept (callers prune explicitly).
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(u32, u32, T)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut vals: Vec<T> = Vec::with_capacity(trip.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in trip {
            debug_assert!((r as usize) < nrows && (c as usize) < ncols);
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                vals.push(v);
                indptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            vals,
        }
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[u32], &[T]) {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        (&self.indices[lo..hi], &self.vals[lo..hi])
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(i) => vals[i],
            Err(_) => T::zero(),
        }
    }

    pub fn transpose(&self) -> Csr<T> {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                trip.push((*c, r as u32, *v));
            }
        }
        Csr::from_triplets(self.ncols, self.nrows, trip)
    }

    /// Sparse-sparse product `self * rhs`.
    pub fn matmul(&self, rhs: &Csr<T>) -> Csr<T> {
        assert_eq!(self.ncols, rhs.nrows, "matmul dimension mismatch");
        let mut trip: Vec<(u32, u32, T)> = Vec::new();
        let mut acc: Vec<T> = vec![T::zero(); rhs.ncols];
        let mut touched: Vec<u32> = Vec::new();
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (k, v) in cols.iter().zip(vals) {
                let (rcols, rvals) = rhs.row(*k as usize);
                for (c, rv) in rcols.iter().zip(rvals) {
                    if acc[*c as usize] == T::zero() {
                        touched.push(*c);
                    }
                    acc[*c as usize] += *v * *rv;
                }
            }
            for &c in &touched {
                trip.push((r as u32, c, acc[c as usize]));
                acc[c as usize] = T::zero();
            }
            touched.clear();
        }
        Csr::from_triplets(self.nrows, rhs.ncols, trip)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![T::zero(); self.nrows];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut s = T::zero();
            for (c, v) in cols.iter().zip(vals) {
                s += *v * x[*c as usize];
            }
            y[r] = s;
        }
        y
    }

    pub fn map<U, F>(&self, f: F) -> Csr<U>
    where
        F: Fn(T) -> U,
    {
        Csr {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            vals: self.vals.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Drop entries for which `keep` is false, preserving row structure.
    pub fn prune<F: Fn(&T) -> bool>(&self, keep: F) -> Csr<T> {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                if keep(v) {
                    trip.push((r as u32, *c, *v));
                }
            }
        }
        Csr::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.nrows)
            .map(|r| self.indptr[r + 1] - self.indptr[r])
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut out = vec![vec![T::zero(); self.ncols]; self.nrows];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                out[r][*c as usize] = *v;
            }
        }
        out
    }
}
