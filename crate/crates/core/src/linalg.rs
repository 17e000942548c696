//! Dense fiber matrices, eigensolver wrappers and a small CSR type for
//! assembled truncations.

use faer::{c64, Mat, Par, Side};

use crate::error::{Error, Result};

/// An N×N fiber matrix (element of B = M_N(ℂ)).
pub type Matrix = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };

pub fn zeros(n: usize) -> Matrix {
    Mat::zeros(n, n)
}

pub fn identity(n: usize) -> Matrix {
    Mat::identity(n, n)
}

pub fn scalar(n: usize, z: c64) -> Matrix {
    Mat::from_fn(n, n, |i, j| if i == j { z } else { ZERO })
}

/// Builds a matrix from row-major real entries.
pub fn real(n: usize, entries: &[f64]) -> Matrix {
    assert_eq!(entries.len(), n * n);
    Mat::from_fn(n, n, |i, j| c64::new(entries[i * n + j], 0.0))
}

/// Single nonzero entry E_ij.
pub fn unit(n: usize, i: usize, j: usize) -> Matrix {
    let mut m = zeros(n);
    m[(i, j)] = ONE;
    m
}

pub fn adjoint(m: &Matrix) -> Matrix {
    m.adjoint().to_owned()
}

pub fn mul(a: &Matrix, b: &Matrix) -> Matrix {
    a * b
}

pub fn add(a: &Matrix, b: &Matrix) -> Matrix {
    a + b
}

pub fn sub(a: &Matrix, b: &Matrix) -> Matrix {
    a - b
}

pub fn scale(a: &Matrix, z: c64) -> Matrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * z)
}

/// Largest entry modulus.
pub fn max_abs(m: &Matrix) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

/// Operator 2-norm upper bound (Frobenius).
pub fn frobenius(m: &Matrix) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn distance(a: &Matrix, b: &Matrix) -> f64 {
    max_abs(&sub(a, b))
}

pub fn is_hermitian(m: &Matrix, tol: f64) -> bool {
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > tol {
                return false;
            }
        }
    }
    true
}

pub fn is_unitary(m: &Matrix, tol: f64) -> bool {
    let n = m.nrows();
    distance(&(m.adjoint() * m), &identity(n)) <= tol
}

pub fn determinant(m: &Matrix) -> c64 {
    match m.nrows() {
        0 => ONE,
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.determinant(),
    }
}

/// Runs dense factorizations on the calling thread only. Blocked parallel
/// kernels split work by thread count, so results can differ in the last
/// bits between pool sizes; call this when outputs must be bit-reproducible.
pub fn sequential_dense_kernels() {
    faer::set_global_parallelism(Par::Seq);
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    match m.nrows() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![m[(0, 0)].re]),
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(1, 0)].norm();
            let mean = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            Ok(vec![mean - r, mean + r])
        }
        _ => m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}"))),
    }
}

/// Hermitian eigendecomposition: ascending eigenvalues and orthonormal
/// eigenvectors as columns.
pub fn hermitian_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok((values, evd.U().to_owned()))
}

/// Eigenvalues of a general complex matrix (unsorted).
pub fn general_eigenvalues(m: &Matrix) -> Result<Vec<c64>> {
    match m.nrows() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![m[(0, 0)]]),
        2 => {
            let tr = m[(0, 0)] + m[(1, 1)];
            let det = determinant(m);
            let half = tr * 0.5;
            let disc = (half * half - det).sqrt();
            Ok(vec![half - disc, half + disc])
        }
        _ => m
            .eigenvalues()
            .map_err(|e| Error::Eigensolver(format!("{e:?}"))),
    }
}

/// General eigendecomposition; eigenvector columns are normalized.
pub fn general_eigen(m: &Matrix) -> Result<(Vec<c64>, Matrix)> {
    let evd = m.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let values: Vec<c64> = (0..m.nrows()).map(|i| s[i]).collect();
    let mut u = evd.U().to_owned();
    for j in 0..u.ncols() {
        let n: f64 = (0..u.nrows()).map(|i| u[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if n > 0.0 {
            for i in 0..u.nrows() {
                u[(i, j)] /= n;
            }
        }
    }
    Ok((values, u))
}

/// Orders complex numbers by real part, then imaginary part.
pub fn cmp_complex(a: &c64, b: &c64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Compressed sparse rows; the truncation of an interface operator.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<c64>,
}

impl CsrMatrix {
    /// Builds from per-row (column, value) lists; duplicate columns are summed
    /// in the given order.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, c64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, c64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> c64 {
        self.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap_or(ZERO)
    }

    pub fn mul_vec(&self, x: &[c64], y: &mut [c64]) {
        for i in 0..self.n {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[c64]) -> Vec<c64> {
        let mut y = vec![ZERO; self.n];
        self.mul_vec(x, &mut y);
        y
    }

    pub fn adjoint(&self) -> CsrMatrix {
        let mut rows: Vec<Vec<(usize, c64)>> = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                rows[j].push((i, v.conj()));
            }
        }
        CsrMatrix::from_rows(self.n, rows)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if (v - self.get(j, i).conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Gershgorin bound on the spectral radius (max absolute row sum).
    pub fn gershgorin_radius(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Restriction to a subset of indices (kept in the given order).
    pub fn restrict(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let rows = keep
            .iter()
            .map(|&old| {
                self.row(old)
                    .filter(|&(c, _)| map[c] != usize::MAX)
                    .map(|(c, v)| (map[c], v))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(keep.len(), rows)
    }
}

/// Matrix-free square operator.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[c64], y: &mut [c64]);
    fn apply_adjoint_into(&self, x: &[c64], y: &mut [c64]);
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[c64], y: &mut [c64]) {
        self.mul_vec(x, y)
    }

    fn apply_adjoint_into(&self, x: &[c64], y: &mut [c64]) {
        y.iter_mut().for_each(|v| *v = ZERO);
        for i in 0..self.n {
            let xi = x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.cols[k]] += self.vals[k].conj() * xi;
            }
        }
    }
}
