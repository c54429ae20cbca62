//! Dense symmetric matrices and the few kernels the algorithms need.

use faer::linalg::matmul::triangular::{matmul as tri_matmul, BlockStructure};
use faer::{Mat, MatRef, Parallelism, Side};

use crate::exec::Exec;
use crate::{Error, Result};

const ROW_CHUNK: usize = 64;

/// Symmetric `n × n` matrix with full column-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    /// Builds from the lower triangle `f(i, j)`, `i ≥ j`.
    pub fn from_lower_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                m.data[i + j * n] = v;
                m.data[j + i * n] = v;
            }
        }
        m
    }

    /// Takes ownership of a square faer matrix, symmetrising from its lower triangle.
    pub fn from_faer_lower(m: Mat<f64>) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols());
        let mut data = vec![0.0; n * n];
        for j in 0..n {
            for i in j..n {
                let v = m.read(i, j);
                data[i + j * n] = v;
                data[j + i * n] = v;
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.n]
    }

    /// Column `j`, equal to row `j`.
    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn as_faer(&self) -> MatRef<'_, f64> {
        faer::mat::from_column_major_slice(&self.data, self.n, self.n)
    }

    /// Adds `scale · v vᵀ`.
    pub fn add_rank_one(&mut self, scale: f64, v: &[f64]) {
        let n = self.n;
        assert_eq!(v.len(), n);
        for j in 0..n {
            let s = scale * v[j];
            let col = &mut self.data[j * n..(j + 1) * n];
            for (c, &vi) in col.iter_mut().zip(v) {
                *c += s * vi;
            }
        }
    }

    /// Adds `s` to the diagonal.
    /// `self + scale·other`.
    pub fn add_scaled(mut self, scale: f64, other: &SymMatrix) -> SymMatrix {
        assert_eq!(self.n, other.n);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        self
    }

    pub fn shift_diagonal(&mut self, s: f64) {
        for i in 0..self.n {
            self.data[i + i * self.n] += s;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|A_ij − A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            for i in j + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// `out = A x`.
    pub fn matvec_into(&self, x: &[f64], out: &mut [f64], exec: Exec) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        exec.for_chunks(out, ROW_CHUNK, |start, chunk| {
            for (k, o) in chunk.iter_mut().enumerate() {
                *o = dot(self.col(start + k), x);
            }
        });
    }

    pub fn matvec(&self, x: &[f64], exec: Exec) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.matvec_into(x, &mut out, exec);
        out
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64], exec: Exec) -> f64 {
        dot(&self.matvec(x, exec), x)
    }

    /// Matrix product `A B` of two symmetric matrices that commute,
    /// so the product is symmetric (e.g. powers of the same matrix).
    pub fn mul_commuting(&self, other: &SymMatrix, exec: Exec) -> SymMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = Mat::<f64>::zeros(n, n);
        tri_matmul(
            acc.as_mut(),
            BlockStructure::TriangularLower,
            self.as_faer(),
            BlockStructure::Rectangular,
            other.as_faer(),
            BlockStructure::Rectangular,
            None,
            1.0,
            parallelism(exec),
        );
        SymMatrix::from_faer_lower(acc)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev = self.as_faer().selfadjoint_eigenvalues(Side::Lower);
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    /// Eigenvalues (ascending) and eigenvectors as columns.
    pub fn eigh(&self) -> (Vec<f64>, Mat<f64>) {
        let e = self.as_faer().selfadjoint_eigendecomposition(Side::Lower);
        let s = e.s().column_vector();
        let vals: Vec<f64> = (0..self.n).map(|i| s.read(i)).collect();
        (vals, e.u().to_owned())
    }
}

/// Parallelism hint for faer kernels.
pub fn parallelism(exec: Exec) -> Parallelism<'static> {
    if exec.is_parallel() {
        #[cfg(feature = "parallel")]
        return Parallelism::Rayon(0);
    }
    Parallelism::None
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators keep the summation order fixed and vectorise well
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Symmetric square root of a small positive semidefinite matrix given as
/// rows. Eigenvalues below zero are clamped; an error is raised when the
/// most negative one falls below `-tol` (relative to the largest).
pub fn psd_sqrt(a: &[Vec<f64>], tol: f64) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = a.len();
    if n == 0 {
        return Ok((vec![], 0.0));
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    let e = m.selfadjoint_eigendecomposition(Side::Lower);
    let s = e.s().column_vector();
    let u = e.u();
    let vals: Vec<f64> = (0..n).map(|i| s.read(i)).collect();
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tol * scale {
        return Err(Error::Factorization(format!("matrix is indefinite: smallest eigenvalue {min:.3e}")));
    }
    let roots: Vec<f64> = vals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = (0..n).map(|k| u.read(i, k) * roots[k] * u.read(j, k)).sum();
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok((out, min))
}

/// Smallest eigenvalue of a small symmetric matrix given as rows.
pub fn min_eigenvalue(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let m = Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (a[i][j] + a[j][i]));
    m.selfadjoint_eigenvalues(Side::Lower).into_iter().fold(f64::INFINITY, f64::min)
}

/// Leading eigenvector by power iteration on `A + shift·I`.
///
/// `shift` should make the spectrum nonnegative so the top eigenvalue
/// dominates. Returns the eigenvector (unit norm), its Rayleigh quotient in `A`,
/// and the number of iterations.
pub fn top_eigenvector(
    a: &SymMatrix,
    shift: f64,
    start: &[f64],
    tol: f64,
    max_iter: usize,
    exec: Exec,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = a.n();
    let nrm = norm2(start);
    if nrm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut v: Vec<f64> = start.iter().map(|x| x / nrm).collect();
    let mut w = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec_into(&v, &mut w, exec);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += shift * vi;
        }
        let nw = norm2(&w);
        if nw == 0.0 {
            return Err(Error::ZeroVector);
        }
        let mut change: f64 = 0.0;
        for (wi, vi) in w.iter_mut().zip(v.iter_mut()) {
            *wi /= nw;
            change = change.max((*wi - *vi).abs());
            *vi = *wi;
        }
        if change < tol {
            let rq = a.quad_form(&v, exec);
            return Ok((v, rq, it));
        }
    }
    let rq = a.quad_form(&v, exec);
    Err(Error::NonConvergence { iterations: max_iter, residual: rq })
}
