//! POVMs in matrix and coordinate form, closure, validation and the
//! convergence diagnostics σ, δ, Δ.
//!
//! Coordinates use the orthonormal basis of [`crate::basis`]: an element is
//! `E = a0·(I + Σ a_k σ_k)` with `Tr E = a0·n`. The design matrix and every
//! overlap formula use the same convention.

use std::fmt;
use std::fmt::Write as _;

use num_complex::Complex;

use crate::basis::OrthonormalBasis;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, hs_inner, min_eigenvalue, ComplexMatrix, HermitianMatrix};
use crate::scalar::Real;

/// Positivity slack used when POVMs are built or re-closed.
pub const CONSTRUCTION_TOL: f64 = 1e-10;
/// Slack used by acceptance-level validation.
pub const ACCEPTANCE_TOL: f64 = 1e-9;

/// Coordinate form `(a0, a)` of one element.
#[derive(Clone, Debug, PartialEq)]
pub struct PovmElementCoords<T> {
    pub a0: T,
    pub a: Vec<T>,
}

impl<T: Real> PovmElementCoords<T> {
    pub fn new(a0: T, a: Vec<T>) -> Self {
        PovmElementCoords { a0, a }
    }

    /// `a0·(I + a·σ)`.
    pub fn to_element(&self, basis: &OrthonormalBasis<T>) -> Result<HermitianMatrix<T>> {
        let scaled: Vec<T> = self.a.iter().map(|&x| x * self.a0).collect();
        basis.expand(self.a0, &scaled)
    }

    /// Reads `a0 = Tr E / n` and `a_k = Tr(E σ_k)/a0`; fails for `a0 ≤ 0`.
    pub fn from_element(e: &HermitianMatrix<T>, basis: &OrthonormalBasis<T>) -> Result<Self> {
        let a0 = e.trace() / T::from_count(basis.dim());
        if a0 <= T::zero() {
            return Err(Error::ContractViolation(format!(
                "element with trace {} has no coordinate form",
                e.trace()
            )));
        }
        let a = basis.coefficients(e)?.into_iter().map(|x| x / a0).collect();
        Ok(PovmElementCoords { a0, a })
    }

    /// Whether `a0 ≥ 0` and `I + a·σ` is positive semidefinite within `tol`.
    pub fn is_valid(&self, basis: &OrthonormalBasis<T>, tol: T) -> Result<bool> {
        if self.a0 < T::zero() {
            return Ok(false);
        }
        let shape = basis.expand(T::one(), &self.a)?;
        Ok(min_eigenvalue(&shape)? >= -tol)
    }
}

/// A finite POVM: positive elements summing to the identity.
#[derive(Clone, PartialEq)]
pub struct Povm<T> {
    dim: usize,
    elements: Vec<HermitianMatrix<T>>,
}

impl<T: Real> Povm<T> {
    /// Validates at [`CONSTRUCTION_TOL`].
    pub fn new(elements: Vec<HermitianMatrix<T>>) -> Result<Self> {
        let p = Self::unchecked(elements)?;
        let violations = p.validate(T::tol(CONSTRUCTION_TOL));
        if violations.is_empty() {
            Ok(p)
        } else {
            let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(Error::ContractViolation(msg.join("; ")))
        }
    }

    /// Wraps elements without positivity/completeness checks. Only the
    /// dimensions must agree.
    pub fn unchecked(elements: Vec<HermitianMatrix<T>>) -> Result<Self> {
        let dim = elements
            .first()
            .map(HermitianMatrix::dim)
            .ok_or_else(|| Error::ContractViolation("POVM needs at least one element".into()))?;
        if let Some(bad) = elements.iter().find(|e| e.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Povm { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianMatrix<T>] {
        &self.elements
    }

    pub fn into_elements(self) -> Vec<HermitianMatrix<T>> {
        self.elements
    }

    pub fn sum(&self) -> HermitianMatrix<T> {
        self.elements
            .iter()
            .skip(1)
            .fold(self.elements[0].clone(), |acc, e| &acc + e)
    }

    /// Coordinate form of the first `count` elements.
    pub fn coords(&self, basis: &OrthonormalBasis<T>, count: usize) -> Result<Vec<PovmElementCoords<T>>> {
        self.elements
            .iter()
            .take(count)
            .map(|e| PovmElementCoords::from_element(e, basis))
            .collect()
    }

    /// Lists every violated invariant; empty iff the POVM is valid at `tol`.
    pub fn validate(&self, tol: T) -> Vec<Violation> {
        let mut out = Vec::new();
        for (i, e) in self.elements.iter().enumerate() {
            match min_eigenvalue(e) {
                Ok(lambda) if lambda < -tol => out.push(Violation::Positivity {
                    element: i,
                    min_eigenvalue: lambda.as_f64(),
                }),
                Ok(_) => {}
                Err(err) => out.push(Violation::Numerical {
                    element: i,
                    detail: err.to_string(),
                }),
            }
        }
        let residual = &self.sum() - &HermitianMatrix::identity(self.dim);
        let max_dev = residual.as_matrix().max_abs();
        if max_dev > tol {
            let trace_norm = hermitian_eigenvalues(&residual)
                .map(|ev| ev.iter().map(|x| x.abs()).sum::<T>().as_f64())
                .unwrap_or(f64::NAN);
            out.push(Violation::Completeness {
                max_entry_deviation: max_dev.as_f64(),
                trace_norm,
            });
        }
        out
    }

    /// Pairwise overlaps `Tr(E_i E_j)` as a dense m×m table.
    pub fn overlaps(&self) -> Vec<Vec<T>> {
        let m = self.len();
        let mut g = vec![vec![T::zero(); m]; m];
        for i in 0..m {
            for j in i..m {
                let v = hs_inner(&self.elements[i], &self.elements[j]).expect("equal dims");
                g[i][j] = v;
                g[j][i] = v;
            }
        }
        g
    }

    /// Convergence diagnostics σ, δ, Δ.
    ///
    /// δ and Δ are sums of squared deviations from the arithmetic mean, over
    /// elements and over ordered pairs `i ≠ j` respectively.
    pub fn metrics(&self) -> Result<PovmMetrics<T>> {
        let mut sigma = T::zero();
        for e in &self.elements {
            let ev = hermitian_eigenvalues(e)?;
            sigma += ev.get(1).copied().unwrap_or_else(T::zero);
        }
        let g = self.overlaps();
        let m = self.len();
        let self_overlaps: Vec<T> = (0..m).map(|i| g[i][i]).collect();
        let cross: Vec<T> = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| g[i][j])
            .collect();
        Ok(PovmMetrics {
            sigma,
            delta: squared_spread(&self_overlaps),
            big_delta: squared_spread(&cross),
        })
    }

    /// Entrywise complex conjugate of every element.
    pub fn conj(&self) -> Self {
        Povm {
            dim: self.dim,
            elements: self.elements.iter().map(HermitianMatrix::conj).collect(),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Povm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Povm")
            .field("dim", &self.dim)
            .field("elements", &self.elements)
            .finish()
    }
}

fn squared_spread<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    let mean = xs.iter().copied().sum::<T>() / T::from_count(xs.len());
    xs.iter().map(|&x| (x - mean) * (x - mean)).sum()
}

/// Appends `I − Σ first` and accepts the result only if that residual is
/// positive semidefinite within [`CONSTRUCTION_TOL`].
pub fn complete_povm<T: Real>(first: Vec<HermitianMatrix<T>>) -> Result<Povm<T>> {
    let dim = first
        .first()
        .map(HermitianMatrix::dim)
        .ok_or_else(|| Error::ContractViolation("closure needs at least one element".into()))?;
    let mut residual = HermitianMatrix::identity(dim);
    for e in &first {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: e.dim(),
            });
        }
        residual = &residual - e;
    }
    let lambda = min_eigenvalue(&residual)?;
    if lambda < -T::tol(CONSTRUCTION_TOL) {
        return Err(Error::ClosureNotPositive(lambda.as_f64()));
    }
    let mut elements = first;
    elements.push(residual);
    Ok(Povm { dim, elements })
}

/// σ: sum of second-largest eigenvalues; δ: spread of self-overlaps;
/// Δ: spread of cross-overlaps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PovmMetrics<T> {
    pub sigma: T,
    pub delta: T,
    pub big_delta: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Positivity { element: usize, min_eigenvalue: f64 },
    Completeness { max_entry_deviation: f64, trace_norm: f64 },
    Numerical { element: usize, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Positivity { element, min_eigenvalue } => {
                write!(f, "element {element} not positive (min eigenvalue {min_eigenvalue:e})")
            }
            Violation::Completeness {
                max_entry_deviation,
                trace_norm,
            } => write!(
                f,
                "elements do not sum to identity (max entry deviation {max_entry_deviation:e}, trace norm {trace_norm:e})"
            ),
            Violation::Numerical { element, detail } => write!(f, "element {element}: {detail}"),
        }
    }
}

/// Serializes in the POVM text format: a header line `n m`, then for each
/// element n rows of `re im` pairs separated by `;`. Values use the shortest
/// round-trip decimal rendering, so parsing recovers them bit for bit.
pub fn write_povm_text<T: Real>(p: &Povm<T>) -> String {
    let n = p.dim();
    let mut out = format!("{} {}\n", n, p.len());
    for e in p.elements() {
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| {
                    let z = e.get(i, j);
                    format!("{} {}", z.re, z.im)
                })
                .collect();
            writeln!(out, "{}", row.join("; ")).expect("write to String");
        }
    }
    out
}

/// Parses the POVM text format. Blank lines are ignored. The result is not
/// validated beyond Hermiticity of each element.
pub fn parse_povm_text<T: Real>(text: &str) -> Result<Povm<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header `n m`".into(),
    })?;
    let nums: Vec<&str> = header.split_whitespace().collect();
    let parse_usize = |s: &str| {
        s.parse::<usize>().map_err(|_| Error::Parse {
            line: hline,
            message: format!("expected a positive integer, found `{s}`"),
        })
    };
    if nums.len() != 2 {
        return Err(Error::Parse {
            line: hline,
            message: "header must be `n m`".into(),
        });
    }
    let (n, m) = (parse_usize(nums[0])?, parse_usize(nums[1])?);
    if n == 0 || m == 0 {
        return Err(Error::Parse {
            line: hline,
            message: "n and m must be positive".into(),
        });
    }
    let parse_real = |s: &str, line: usize| {
        s.parse::<T>().map_err(|_| Error::Parse {
            line,
            message: format!("invalid number `{s}`"),
        })
    };

    let mut elements = Vec::with_capacity(m);
    for _ in 0..m {
        let mut entries = Vec::with_capacity(n * n);
        for _ in 0..n {
            let (lno, row) = lines.next().ok_or(Error::Parse {
                line: text.lines().count() + 1,
                message: "unexpected end of file".into(),
            })?;
            let cells: Vec<&str> = row.split(';').collect();
            if cells.len() != n {
                return Err(Error::Parse {
                    line: lno,
                    message: format!("expected {n} entries, found {}", cells.len()),
                });
            }
            for cell in cells {
                let parts: Vec<&str> = cell.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(Error::Parse {
                        line: lno,
                        message: format!("entry `{}` is not a `re im` pair", cell.trim()),
                    });
                }
                entries.push(Complex::new(parse_real(parts[0], lno)?, parse_real(parts[1], lno)?));
            }
        }
        let m = ComplexMatrix::from_entries(n, entries)?;
        elements.push(HermitianMatrix::new(m)?);
    }
    if let Some((lno, _)) = lines.next() {
        return Err(Error::Parse {
            line: lno,
            message: "trailing content after last element".into(),
        });
    }
    Povm::unchecked(elements)
}
