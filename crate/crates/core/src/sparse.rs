//! Row-oriented sparse matrices and thin wrappers over faer's sparse
//! factorizations.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Cholesky, Lu};
use faer::sparse::SparseColMat;
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sparse matrix stored as sorted (column, value) lists per row.
#[derive(Clone, Debug)]
pub struct Sparse {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

/// Sorts a row and merges duplicate columns in a fixed order.
fn compress(mut row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    row.sort_by_key(|e| e.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (c, v) in row {
        match out.last_mut() {
            Some(last) if last.0 == c => last.1 += v,
            _ => out.push((c, v)),
        }
    }
    out
}

impl Sparse {
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let rows: Vec<_> = rows.into_iter().map(compress).collect();
        debug_assert!(rows.iter().flatten().all(|e| e.0 < ncols));
        Self { nrows: rows.len(), ncols, rows }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols);
        DVector::from_iterator(self.nrows, self.rows.iter().map(|r| r.iter().map(|&(c, v)| v * x[c]).sum::<f64>()))
    }

    pub fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut out = DMatrix::zeros(self.nrows, x.ncols());
        for j in 0..x.ncols() {
            for (i, r) in self.rows.iter().enumerate() {
                out[(i, j)] = r.iter().map(|&(c, v)| v * x[(c, j)]).sum();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.ncols];
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, v) in r {
                rows[c].push((i, v));
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, rows }
    }

    /// self · other.
    pub fn matmul(&self, other: &Sparse) -> Sparse {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut cols = Vec::new();
                for &(k, a) in r {
                    for &(c, b) in &other.rows[k] {
                        if mark[c] != i {
                            mark[c] = i;
                            acc[c] = 0.0;
                            cols.push(c);
                        }
                        acc[c] += a * b;
                    }
                }
                cols.sort_unstable();
                cols.into_iter().map(|c| (c, acc[c])).collect()
            })
            .collect();
        Sparse { nrows: self.nrows, ncols: other.ncols, rows }
    }

    /// Scales row i by `r[i]` and column j by `c[j]`.
    pub fn scale(&mut self, r: &[f64], c: &[f64]) {
        for (i, row) in self.rows.iter_mut().enumerate() {
            for e in row.iter_mut() {
                e.1 *= r[i] * c[e.0];
            }
        }
    }

    /// AᵀA + μ·Id.
    pub fn normal(&self, mu: f64) -> Sparse {
        let mut n = self.transpose().matmul(self);
        for (i, row) in n.rows.iter_mut().enumerate() {
            match row.binary_search_by_key(&i, |e| e.0) {
                Ok(p) => row[p].1 += mu,
                Err(p) => row.insert(p, (i, mu)),
            }
        }
        n
    }

    /// Largest absolute diagonal entry.
    pub fn max_diag(&self) -> f64 {
        self.rows
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.iter().find(|e| e.0 == i).map(|e| e.1.abs()))
            .fold(0.0, f64::max)
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<(usize, usize, f64)> = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().map(move |&(c, v)| (i, c, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::Linalg(format!("sparse assembly failed: {e:?}")))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, r) in self.rows.iter().enumerate() {
            for &(c, v) in r {
                m[(i, c)] += v;
            }
        }
        m
    }
}

fn to_mat(x: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)])
}

fn from_mat(m: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m.read(i, j))
}

fn check_finite(m: &Mat<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m.read(i, j).is_finite() {
                return Err(Error::Linalg("solve produced non-finite values".into()));
            }
        }
    }
    Ok(())
}

/// Sparse LU factorization of a square matrix.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn new(a: &Sparse) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Linalg("LU needs a square matrix".into()));
        }
        let lu = a.to_faer()?.sp_lu().map_err(|e| Error::Linalg(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { lu, n: a.nrows })
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        assert_eq!(b.nrows(), self.n);
        let mut m = to_mat(b);
        self.lu.solve_in_place(m.as_mut());
        check_finite(&m)?;
        Ok(from_mat(&m))
    }

    pub fn solve_transpose(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        assert_eq!(b.nrows(), self.n);
        let mut m = to_mat(b);
        self.lu.solve_transpose_in_place(m.as_mut());
        check_finite(&m)?;
        Ok(from_mat(&m))
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SparseCholesky {
    llt: Cholesky<usize, f64>,
    n: usize,
}

impl SparseCholesky {
    pub fn new(a: &Sparse) -> Result<Self> {
        let llt = a
            .to_faer()?
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Linalg(format!("sparse Cholesky failed: {e:?}")))?;
        Ok(Self { llt, n: a.nrows })
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        assert_eq!(b.nrows(), self.n);
        let mut m = to_mat(b);
        self.llt.solve_in_place(m.as_mut());
        check_finite(&m)?;
        Ok(from_mat(&m))
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        assert_eq!(b.len(), self.n);
        let mut m = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(m.as_mut());
        check_finite(&m)?;
        Ok(DVector::from_fn(self.n, |i, _| m.read(i, 0)))
    }
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// `a`. Returns the iterate and whether ‖b − a·x‖ ≤ tol·‖b‖ was reached
/// within `max_iter` steps.
pub fn pcg(
    a: &Sparse,
    precond: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, bool)> {
    let target = tol * b.norm();
    let mut x = DVector::zeros(b.len());
    let mut r = b.clone();
    if r.norm() <= target {
        return Ok((x, true));
    }
    let mut z = precond(&r)?;
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for _ in 0..max_iter {
        let ap = a.mul_vec(&p);
        let alpha = rz / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if r.norm() <= target {
            return Ok((x, true));
        }
        z = precond(&r)?;
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    Ok((x, false))
}
