//! Small dense linear algebra: complex Hermitian matrices up to a handful of
//! rows, plus the real square systems that appear in the estimator.
//!
//! Everything here is written for n ≤ 16 or so. There is no blocking and no
//! attempt at cache friendliness; matrices are row-major `Vec`s.

use std::fmt;
use std::ops::{Add, Index, Mul, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Asymmetry accepted by [`HermitianMatrix::new`], relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Off-diagonal Frobenius mass at which the Jacobi sweep stops.
pub const JACOBI_TOL: f64 = 1e-13;
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Relative pivot floor below which a real system counts as singular.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// Dense square complex matrix.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    dim: usize,
    entries: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            entries: vec![Complex::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = Complex::one();
        }
        m
    }

    /// Builds a matrix from row-major entries; fails on wrong length or
    /// non-finite values.
    pub fn from_entries(dim: usize, entries: Vec<Complex<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ContractViolation("matrix dimension must be positive".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::ContractViolation("non-finite matrix entry".into()));
        }
        Ok(ComplexMatrix { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<Complex<T>>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_entries(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.entries[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex<T>) {
        self.entries[i * self.dim + j] = z;
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.entries[i * n + j].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.dim;
        assert_eq!(n, other.dim, "matmul dimension mismatch");
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    out.entries[i * n + j] += a * other.entries[k * n + j];
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).map(|i| self.get(i, i)).fold(Complex::zero(), |a, b| a + b)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let (p, q) = (self.dim, other.dim);
        let n = p * q;
        let mut out = Self::zeros(n);
        for i in 0..p {
            for j in 0..p {
                let a = self.get(i, j);
                for k in 0..q {
                    for l in 0..q {
                        out.entries[(i * q + k) * n + j * q + l] = a * other.get(k, l);
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: Complex<T>) -> Self {
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, z| m.max(z.norm()))
    }

    /// Largest `|self[i][j] − conj(self[j][i])|`.
    pub fn max_asymmetry(&self) -> T {
        let n = self.dim;
        let mut worst = T::zero();
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }
}

impl<T: Real> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.entries[i * self.dim + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for ComplexMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = &self.entries[i * self.dim + j];
                    format!("{:?}{:+?}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Complex Hermitian matrix. Construction checks Hermiticity and then
/// symmetrizes as `(H + H†)/2`, so downstream code never sees asymmetry noise.
#[derive(Clone, PartialEq)]
pub struct HermitianMatrix<T>(ComplexMatrix<T>);

impl<T: Real> HermitianMatrix<T> {
    pub fn new(m: ComplexMatrix<T>) -> Result<Self> {
        let asym = m.max_asymmetry();
        let scale = T::one().max(m.max_abs());
        if asym > T::tol(HERMITIAN_TOL) * scale {
            return Err(Error::NotHermitian(asym.as_f64()));
        }
        Ok(Self::symmetrized(m))
    }

    fn symmetrized(mut m: ComplexMatrix<T>) -> Self {
        let n = m.dim;
        let half = T::lit(0.5);
        for i in 0..n {
            let d = m.get(i, i);
            m.set(i, i, Complex::new(d.re, T::zero()));
            for j in (i + 1)..n {
                let avg = (m.get(i, j) + m.get(j, i).conj()) * half;
                m.set(i, j, avg);
                m.set(j, i, avg.conj());
            }
        }
        HermitianMatrix(m)
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianMatrix(ComplexMatrix::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianMatrix(ComplexMatrix::identity(dim))
    }

    pub fn from_real_diagonal(diag: &[T]) -> Self {
        let mut m = ComplexMatrix::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, Complex::new(d, T::zero()));
        }
        HermitianMatrix(m)
    }

    /// The rank-one operator `scale·|v⟩⟨v|`.
    pub fn outer(v: &[Complex<T>], scale: T) -> Self {
        let n = v.len();
        let mut m = ComplexMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, v[i] * v[j].conj() * scale);
            }
        }
        Self::symmetrized(m)
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.0.get(i, j)
    }

    pub fn as_matrix(&self) -> &ComplexMatrix<T> {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix<T> {
        self.0
    }

    pub fn trace(&self) -> T {
        (0..self.dim()).map(|i| self.0.get(i, i).re).sum()
    }

    pub fn scale(&self, s: T) -> Self {
        HermitianMatrix(self.0.scale(Complex::new(s, T::zero())))
    }

    /// Entrywise complex conjugate (the transpose, for a Hermitian matrix).
    pub fn conj(&self) -> Self {
        HermitianMatrix(ComplexMatrix {
            dim: self.0.dim,
            entries: self.0.entries.iter().map(|z| z.conj()).collect(),
        })
    }

    /// `U H U†`.
    pub fn conjugate_by(&self, u: &ComplexMatrix<T>) -> Self {
        Self::symmetrized(u.matmul(&self.0).matmul(&u.adjoint()))
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.0
            .entries
            .iter()
            .zip(&other.0.entries)
            .fold(T::zero(), |m, (a, b)| m.max((*a - *b).norm()))
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> T {
        self.0.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex<T>, Complex<T>) -> Complex<T>) -> Self {
        assert_eq!(self.dim(), other.dim(), "Hermitian dimension mismatch");
        HermitianMatrix(ComplexMatrix {
            dim: self.0.dim,
            entries: self
                .0
                .entries
                .iter()
                .zip(&other.0.entries)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

impl<T: Real> Index<(usize, usize)> for HermitianMatrix<T> {
    type Output = Complex<T>;

    fn index(&self, idx: (usize, usize)) -> &Complex<T> {
        &self.0[idx]
    }
}

impl<T: fmt::Debug> fmt::Debug for HermitianMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hermitian")?;
        self.0.fmt(f)
    }
}

impl<T: Real> Add for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;

    fn add(self, rhs: Self) -> HermitianMatrix<T> {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl<T: Real> Sub for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;

    fn sub(self, rhs: Self) -> HermitianMatrix<T> {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl<T: Real> Mul<T> for &HermitianMatrix<T> {
    type Output = HermitianMatrix<T>;

    fn mul(self, rhs: T) -> HermitianMatrix<T> {
        self.scale(rhs)
    }
}

/// Eigenvalues of a Hermitian matrix in descending order, by cyclic complex
/// Jacobi rotations.
///
/// Each rotation first removes the phase of the pivot entry with a diagonal
/// unitary and then applies a real Givens rotation, so the working matrix
/// stays exactly Hermitian up to rounding.
pub fn hermitian_eigenvalues<T: Real>(h: &HermitianMatrix<T>) -> Result<Vec<T>> {
    let n = h.dim();
    let mut a = h.0.entries.clone();
    let scale = T::one().max(h.frobenius_sq().sqrt());
    let threshold = T::tol(JACOBI_TOL) * scale;

    let off_mass = |a: &[Complex<T>]| -> T {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off_mass(&a) > threshold {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NonConvergence { sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let z = a[p * n + q];
                let r = z.norm();
                if r == T::zero() {
                    continue;
                }
                let phase = z / r;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (r + r);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // U = diag(1, conj(phase)) · [[c, s], [-s, c]] on the (p, q) plane.
                let u_pp = Complex::new(c, T::zero());
                let u_pq = Complex::new(s, T::zero());
                let u_qp = phase.conj() * (-s);
                let u_qq = phase.conj() * c;
                // A ← A U
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * u_pp + akq * u_qp;
                    a[k * n + q] = akp * u_pq + akq * u_qq;
                }
                // A ← U† A
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[q * n + k] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[p * n + q] = Complex::zero();
                a[q * n + p] = Complex::zero();
                a[p * n + p].im = T::zero();
                a[q * n + q].im = T::zero();
            }
        }
    }

    let mut eig: Vec<T> = (0..n).map(|i| a[i * n + i].re).collect();
    eig.sort_by(|x, y| y.partial_cmp(x).expect("finite eigenvalues"));
    Ok(eig)
}

pub fn min_eigenvalue<T: Real>(h: &HermitianMatrix<T>) -> Result<T> {
    Ok(*hermitian_eigenvalues(h)?.last().expect("non-empty matrix"))
}

/// True iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd<T: Real>(h: &HermitianMatrix<T>, tol: T) -> Result<bool> {
    Ok(min_eigenvalue(h)? >= -tol)
}

/// Hilbert–Schmidt pairing `Tr(A·B)`, real for Hermitian arguments.
pub fn hs_inner<T: Real>(a: &HermitianMatrix<T>, b: &HermitianMatrix<T>) -> Result<T> {
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.dim(),
        });
    }
    let mut acc = Complex::<T>::zero();
    for i in 0..n {
        for j in 0..n {
            acc += a.get(i, j) * b.get(j, i);
        }
    }
    debug_assert!(acc.im.abs() <= T::tol(1e-10) * T::one().max(acc.re.abs()));
    Ok(acc.re)
}

/// Dense real matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct RealMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> RealMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RealMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 {
            return Err(Error::ContractViolation("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::ContractViolation("non-finite matrix entry".into()));
        }
        Ok(RealMatrix { rows: r, cols: c, data })
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j);
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn scale(&self, s: T) -> Self {
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        RealMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Largest `|self[i][j] − self[j][i]|`.
    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols.min(self.rows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Views a symmetric real matrix as a Hermitian one (for eigenvalue checks).
    pub fn to_hermitian(&self) -> Result<HermitianMatrix<T>> {
        if !self.is_square() {
            return Err(Error::ContractViolation("non-square matrix".into()));
        }
        let entries = self.data.iter().map(|&x| Complex::new(x, T::zero())).collect();
        HermitianMatrix::new(ComplexMatrix::from_entries(self.rows, entries)?)
    }
}

impl<T: fmt::Debug> fmt::Debug for RealMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RealMatrix({}x{})", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.data[i * self.cols..(i + 1) * self.cols]
                .iter()
                .map(|x| format!("{x:?}"))
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// LU factorization with partial pivoting, `P·M = L·U` packed in one matrix.
pub(crate) struct Lu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
    sign: T,
    /// Smallest `|u_kk|` divided by the largest entry of the input.
    min_rel_pivot: T,
}

impl<T: Real> Lu<T> {
    pub(crate) fn factor(m: &RealMatrix<T>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ContractViolation(format!(
                "expected a square matrix, got {}x{}",
                m.rows, m.cols
            )));
        }
        let n = m.rows;
        let mut lu = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let scale = m.max_abs();
        let mut min_pivot = T::infinity();

        for k in 0..n {
            let mut piv = k;
            let mut best = lu[k * n + k].abs();
            for i in (k + 1)..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let pivot = lu[k * n + k];
            min_pivot = min_pivot.min(pivot.abs());
            if pivot == T::zero() {
                continue;
            }
            for i in (k + 1)..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f == T::zero() {
                    continue;
                }
                for j in (k + 1)..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] -= f * u;
                }
            }
        }
        let min_rel_pivot = if scale > T::zero() {
            min_pivot / scale
        } else {
            T::zero()
        };
        Ok(Lu {
            n,
            lu,
            perm,
            sign,
            min_rel_pivot,
        })
    }

    pub(crate) fn determinant(&self) -> T {
        let mut det = self.sign;
        for k in 0..self.n {
            det *= self.lu[k * self.n + k];
        }
        det
    }

    pub(crate) fn min_rel_pivot(&self) -> T {
        self.min_rel_pivot
    }

    pub(crate) fn is_singular(&self) -> bool {
        self.n > 0 && self.min_rel_pivot <= T::tol(PIVOT_FLOOR)
    }

    pub(crate) fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        if self.is_singular() {
            return Err(Error::SingularDesign(self.min_rel_pivot.as_f64()));
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let l = self.lu[i * n + k];
                x[i] = x[i] - l * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let u = self.lu[i * n + k];
                x[i] = x[i] - u * x[k];
            }
            x[i] /= self.lu[i * n + i];
        }
        Ok(x)
    }
}

/// Determinant by pivoted elimination.
pub fn determinant<T: Real>(m: &RealMatrix<T>) -> Result<T> {
    Ok(Lu::factor(m)?.determinant())
}

/// Solves `M x = b`; fails with [`Error::SingularDesign`] when a pivot falls
/// below the relative floor instead of regularizing.
pub fn solve_linear<T: Real>(m: &RealMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    Lu::factor(m)?.solve(b)
}
