//! Orthonormal traceless Hermitian operator bases and Bloch-vector coordinates.
//!
//! # Index map
//!
//! Basis elements are numbered `1..=n²−1` (index 0 is the identity element
//! `I/√n`). Configuration files and [`ParameterPattern`] refer to these
//! numbers.
//!
//! For n = 2 and n = 3 the basis is the Gell-Mann family scaled to unit
//! Hilbert–Schmidt norm, ordered
//!
//! 1. symmetric generators `(E_jk + E_kj)/√2`, `j < k`, lexicographic in `(j, k)`,
//! 2. antisymmetric generators `(−i E_jk + i E_kj)/√2`, same order,
//! 3. diagonal generators `diag(1, …, 1, −l, 0, …)/√(l(l+1))`, `l = 1..n−1`.
//!
//! So for the qubit the order is (x, y, z) and for the qutrit indices 7 and 8
//! are the two diagonal generators.
//!
//! For n = 4 the basis is `½ σ_i ⊗ σ_j` over Pauli factors
//! `σ_0..σ_3 = I, X, Y, Z`, with `(i, j)` lexicographic and `(0, 0)` skipped:
//! index `4i + j`. The diagonal elements are 3 (`I⊗Z`), 12 (`Z⊗I`) and
//! 15 (`Z⊗Z`).

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::linalg::{hs_inner, ComplexMatrix, HermitianMatrix};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct OrthonormalBasis<T> {
    dim: usize,
    elements: Vec<HermitianMatrix<T>>,
    labels: Vec<String>,
    identity_element: HermitianMatrix<T>,
}

/// Builds the supported basis for dimension `n` (see the module docs for the
/// ordering).
pub fn gell_mann_basis<T: Real>(n: usize) -> Result<OrthonormalBasis<T>> {
    match n {
        2 | 3 => Ok(generalized_gell_mann(n)),
        4 => Ok(pauli_tensor_basis()),
        _ => Err(Error::UnsupportedDimension(n)),
    }
}

fn build<T: Real>(n: usize, entries: &[(usize, usize, Complex<f64>)], scale: f64) -> HermitianMatrix<T> {
    let mut m = ComplexMatrix::<T>::zeros(n);
    for &(i, j, z) in entries {
        let cur = m.get(i, j);
        m.set(i, j, cur + Complex::new(T::lit(z.re * scale), T::lit(z.im * scale)));
    }
    HermitianMatrix::new(m).expect("basis element is Hermitian")
}

/// Normalized generalized Gell-Mann basis for any `n ≥ 2`.
pub fn generalized_gell_mann<T: Real>(n: usize) -> OrthonormalBasis<T> {
    assert!(n >= 2, "dimension must be at least 2");
    let r = 1.0 / 2f64.sqrt();
    let one = Complex::new(1.0, 0.0);
    let i_unit = Complex::new(0.0, 1.0);
    let mut elements = Vec::with_capacity(n * n - 1);
    let mut labels = Vec::with_capacity(n * n - 1);

    for j in 0..n {
        for k in (j + 1)..n {
            elements.push(build(n, &[(j, k, one), (k, j, one)], r));
            labels.push(format!("S{}{}", j + 1, k + 1));
        }
    }
    for j in 0..n {
        for k in (j + 1)..n {
            elements.push(build(n, &[(j, k, -i_unit), (k, j, i_unit)], r));
            labels.push(format!("A{}{}", j + 1, k + 1));
        }
    }
    for l in 1..n {
        let lf = l as f64;
        let norm = 1.0 / (lf * (lf + 1.0)).sqrt();
        let mut e: Vec<_> = (0..l).map(|d| (d, d, one)).collect();
        e.push((l, l, Complex::new(-lf, 0.0)));
        elements.push(build(n, &e, norm));
        labels.push(format!("D{}", l));
    }

    OrthonormalBasis {
        dim: n,
        elements,
        labels,
        identity_element: identity_element(n),
    }
}

fn identity_element<T: Real>(n: usize) -> HermitianMatrix<T> {
    HermitianMatrix::identity(n).scale(T::one() / T::from_count(n).sqrt())
}

/// Pauli matrices `I, X, Y, Z` (unnormalized).
pub fn pauli<T: Real>(k: usize) -> ComplexMatrix<T> {
    let (z, o) = (Complex::<T>::zero(), Complex::<T>::one());
    let i = Complex::new(T::zero(), T::one());
    let rows = match k {
        0 => [[o, z], [z, o]],
        1 => [[z, o], [o, z]],
        2 => [[z, -i], [i, z]],
        3 => [[o, z], [z, -o]],
        _ => panic!("Pauli index {k} out of range"),
    };
    ComplexMatrix::from_entries(2, rows.iter().flatten().copied().collect()).expect("2x2")
}

fn pauli_tensor_basis<T: Real>() -> OrthonormalBasis<T> {
    const NAMES: [char; 4] = ['I', 'X', 'Y', 'Z'];
    let half = Complex::new(T::lit(0.5), T::zero());
    let mut elements = Vec::with_capacity(15);
    let mut labels = Vec::with_capacity(15);
    for i in 0..4 {
        for j in 0..4 {
            if i == 0 && j == 0 {
                continue;
            }
            let m = pauli::<T>(i).kron(&pauli::<T>(j)).scale(half);
            elements.push(HermitianMatrix::new(m).expect("tensor of Hermitian factors"));
            labels.push(format!("{}{}", NAMES[i], NAMES[j]));
        }
    }
    OrthonormalBasis {
        dim: 4,
        elements,
        labels,
        identity_element: identity_element(4),
    }
}

impl<T: Real> OrthonormalBasis<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of traceless elements, `n² − 1`.
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Traceless elements σ_1..σ_{n²−1}; slice position `k − 1` holds σ_k.
    pub fn elements(&self) -> &[HermitianMatrix<T>] {
        &self.elements
    }

    /// σ_k by basis index (1-based; 0 is the identity element).
    pub fn element(&self, k: usize) -> &HermitianMatrix<T> {
        if k == 0 {
            &self.identity_element
        } else {
            &self.elements[k - 1]
        }
    }

    pub fn identity_element(&self) -> &HermitianMatrix<T> {
        &self.identity_element
    }

    pub fn label(&self, k: usize) -> &str {
        if k == 0 {
            "I"
        } else {
            &self.labels[k - 1]
        }
    }

    /// Basis indices whose element is a diagonal matrix.
    pub fn diagonal_indices(&self) -> Vec<usize> {
        let n = self.dim;
        (1..=self.len())
            .filter(|&k| {
                let e = self.element(k);
                (0..n).all(|i| (0..n).all(|j| i == j || e.get(i, j).is_zero()))
            })
            .collect()
    }

    /// `I/n + Σ θ_k σ_k`. Positivity is not enforced.
    pub fn bloch_to_state(&self, theta: &BlochVector<T>) -> Result<HermitianMatrix<T>> {
        self.expand(T::one() / T::from_count(self.dim), theta.coords())
    }

    /// `c·I + Σ v_k σ_k`.
    pub(crate) fn expand(&self, identity_coeff: T, coords: &[T]) -> Result<HermitianMatrix<T>> {
        if coords.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: coords.len(),
            });
        }
        let n = self.dim;
        let mut acc = vec![Complex::<T>::zero(); n * n];
        for i in 0..n {
            acc[i * n + i] = Complex::new(identity_coeff, T::zero());
        }
        for (sigma, &v) in self.elements.iter().zip(coords) {
            if v == T::zero() {
                continue;
            }
            for (a, z) in acc.iter_mut().zip(sigma.as_matrix().entries()) {
                *a += *z * v;
            }
        }
        HermitianMatrix::new(ComplexMatrix::from_entries(n, acc)?)
    }

    /// Coefficients `Tr(H σ_k)` for k = 1..n²−1.
    pub fn coefficients(&self, h: &HermitianMatrix<T>) -> Result<Vec<T>> {
        self.elements.iter().map(|s| hs_inner(h, s)).collect()
    }

    /// Inverse of [`bloch_to_state`](Self::bloch_to_state) for unit-trace input.
    pub fn state_to_bloch(&self, rho: &HermitianMatrix<T>) -> Result<BlochVector<T>> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        let tr = rho.trace();
        if (tr - T::one()).abs() > T::tol(1e-9) {
            return Err(Error::TraceViolation(tr.as_f64()));
        }
        Ok(BlochVector::new(self.coefficients(rho)?))
    }

    /// Bloch radius of pure states, `√((n−1)/n)`.
    pub fn pure_state_radius(&self) -> T {
        let n = T::from_count(self.dim);
        ((n - T::one()) / n).sqrt()
    }
}

/// Generalized Bloch vector: coordinates of `ρ − I/n` in the orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochVector<T>(Vec<T>);

impl<T: Real> BlochVector<T> {
    pub fn new(coords: Vec<T>) -> Self {
        BlochVector(coords)
    }

    pub fn zeros(len: usize) -> Self {
        BlochVector(vec![T::zero(); len])
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sq(&self) -> T {
        self.0.iter().map(|&x| x * x).sum()
    }

    /// Coordinate of basis index `k` (1-based).
    pub fn at(&self, k: usize) -> T {
        self.0[k - 1]
    }
}

/// Split of basis indices into the N unknown parameters and the known ones
/// with their fixed values.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterPattern<T> {
    dim: usize,
    unknown: Vec<usize>,
    known: Vec<usize>,
    known_values: Vec<T>,
}

impl<T: Real> ParameterPattern<T> {
    /// Known indices (1-based) with their values; every other index is
    /// unknown, in ascending order.
    pub fn new(dim: usize, known: Vec<usize>, known_values: Vec<T>) -> Result<Self> {
        let total = dim * dim - 1;
        if known.len() != known_values.len() {
            return Err(Error::DimensionMismatch {
                expected: known.len(),
                found: known_values.len(),
            });
        }
        let mut seen = vec![false; total + 1];
        for &k in &known {
            if k == 0 || k > total {
                return Err(Error::ContractViolation(format!(
                    "basis index {k} outside 1..={total}"
                )));
            }
            if seen[k] {
                return Err(Error::ContractViolation(format!("basis index {k} listed twice")));
            }
            seen[k] = true;
        }
        if known_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation("non-finite known value".into()));
        }
        let unknown: Vec<usize> = (1..=total).filter(|&k| !seen[k]).collect();
        if unknown.is_empty() {
            return Err(Error::ContractViolation("at least one parameter must be unknown".into()));
        }
        Ok(ParameterPattern {
            dim,
            unknown,
            known,
            known_values,
        })
    }

    /// Only `unknown` is estimated; all other coordinates are known to be zero.
    pub fn with_unknown(dim: usize, unknown: &[usize]) -> Result<Self> {
        let total = dim * dim - 1;
        let known: Vec<usize> = (1..=total).filter(|k| !unknown.contains(k)).collect();
        let values = vec![T::zero(); known.len()];
        let p = Self::new(dim, known, values)?;
        let mut want = unknown.to_vec();
        want.sort_unstable();
        if p.unknown != want {
            return Err(Error::ContractViolation(format!(
                "invalid unknown index list {unknown:?}"
            )));
        }
        Ok(p)
    }

    pub fn all_unknown(dim: usize) -> Self {
        Self::new(dim, vec![], vec![]).expect("nonempty unknown set")
    }

    /// Diagonal generators known to be zero (e.g. qubit z, qutrit diagonal).
    pub fn diagonal_known(basis: &OrthonormalBasis<T>) -> Self {
        let diag = basis.diagonal_indices();
        let zeros = vec![T::zero(); diag.len()];
        Self::new(basis.dim(), diag, zeros).expect("diagonal pattern is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of unknown parameters N.
    pub fn unknown_count(&self) -> usize {
        self.unknown.len()
    }

    pub fn unknown_indices(&self) -> &[usize] {
        &self.unknown
    }

    pub fn known_indices(&self) -> &[usize] {
        &self.known
    }

    pub fn known_values(&self) -> &[T] {
        &self.known_values
    }

    /// Full Bloch vector with the known values inserted.
    pub fn assemble_full_vector(&self, unknown_coords: &[T]) -> Result<BlochVector<T>> {
        if unknown_coords.len() != self.unknown.len() {
            return Err(Error::DimensionMismatch {
                expected: self.unknown.len(),
                found: unknown_coords.len(),
            });
        }
        let mut full = vec![T::zero(); self.dim * self.dim - 1];
        for (&k, &v) in self.unknown.iter().zip(unknown_coords) {
            full[k - 1] = v;
        }
        for (&k, &v) in self.known.iter().zip(&self.known_values) {
            full[k - 1] = v;
        }
        Ok(BlochVector(full))
    }

    /// Unknown coordinates of a full vector, in pattern order.
    pub fn unknown_part(&self, theta: &BlochVector<T>) -> Vec<T> {
        self.unknown.iter().map(|&k| theta.at(k)).collect()
    }
}
