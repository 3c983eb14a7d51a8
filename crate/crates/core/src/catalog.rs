//! Known optimal measurements, used as oracles, and the conditional-SIC
//! certification report.
//!
//! A POVM `{E_i}` is a conditional SIC-POVM for a parameter pattern when
//!
//! 1. every `E_i = c·P_i` for projections `P_i` and one common `c`,
//! 2. `Tr(E_i E_j) = d` for all `i ≠ j`,
//! 3. `Tr(σ_k E_i) = 0` for every known basis direction `k`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex;

use crate::basis::{pauli, OrthonormalBasis, ParameterPattern};
use crate::error::Result;
use crate::linalg::{hermitian_eigenvalues, hs_inner, ComplexMatrix, HermitianMatrix};
use crate::povm::Povm;
use crate::scalar::Real;

/// Eigenvalues below this fraction of an element's largest eigenvalue count
/// as zero when detecting ranks.
pub const RANK_TOL: f64 = 1e-8;

/// Powers of ε = exp(2πi/7) in the first four qutrit elements; the remaining
/// three are their complex conjugates.
const QUTRIT_EXPONENTS: [[[u32; 3]; 3]; 4] = [
    [[0, 0, 0], [0, 0, 0], [0, 0, 0]],
    [[0, 6, 2], [1, 0, 3], [5, 4, 0]],
    [[0, 2, 3], [5, 0, 1], [4, 6, 0]],
    [[0, 4, 6], [3, 0, 2], [1, 5, 0]],
];

/// The seven-outcome qutrit conditional SIC-POVM for known diagonal:
/// `E_i` has entries `ε^k/7` with ε = exp(2πi/7).
pub fn example_qutrit_csic<T: Real>() -> Povm<T> {
    let seventh = T::one() / T::lit(7.0);
    let first: Vec<HermitianMatrix<T>> = QUTRIT_EXPONENTS
        .iter()
        .map(|rows| {
            let entries = rows
                .iter()
                .flatten()
                .map(|&k| Complex::from_polar(seventh, T::lit(2.0 * PI * f64::from(k) / 7.0)))
                .collect();
            HermitianMatrix::new(ComplexMatrix::from_entries(3, entries).expect("3x3")).expect("Hermitian")
        })
        .collect();
    let mut elements = first.clone();
    elements.extend(first[1..].iter().map(HermitianMatrix::conj));
    Povm::new(elements).expect("analytic qutrit POVM is valid")
}

/// Trine projections `P_k = (I + cos(2πk/3) X + sin(2πk/3) Y)/2`.
pub fn theorem1_projections<T: Real>() -> Vec<HermitianMatrix<T>> {
    (0..3)
        .map(|k| {
            let ang = 2.0 * PI * k as f64 / 3.0;
            let m = ComplexMatrix::<T>::identity(2);
            let x = pauli::<T>(1).scale(Complex::new(T::lit(ang.cos()), T::zero()));
            let y = pauli::<T>(2).scale(Complex::new(T::lit(ang.sin()), T::zero()));
            let entries: Vec<Complex<T>> = m
                .entries()
                .iter()
                .zip(x.entries())
                .zip(y.entries())
                .map(|((a, b), c)| (*a + *b + *c) * T::lit(0.5))
                .collect();
            HermitianMatrix::new(ComplexMatrix::from_entries(2, entries).expect("2x2")).expect("Hermitian")
        })
        .collect()
}

/// Optimal qubit POVM with the z coordinate known: `E_k = (2/3) P_k`.
pub fn theorem1_qubit<T: Real>() -> Povm<T> {
    let two_thirds = T::lit(2.0) / T::lit(3.0);
    Povm::new(theorem1_projections().iter().map(|p| p.scale(two_thirds)).collect())
        .expect("trine POVM is valid")
}

/// The four diagonal matrix units of `M_4`.
pub fn diag_units_dim4<T: Real>() -> Povm<T> {
    let elements = (0..4)
        .map(|i| {
            let mut d = [T::zero(); 4];
            d[i] = T::one();
            HermitianMatrix::from_real_diagonal(&d)
        })
        .collect();
    Povm::new(elements).expect("matrix units form a POVM")
}

/// Unit tetrahedron directions of the qubit SIC-POVM used here.
pub const TETRAHEDRON: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];

/// Qubit SIC-POVM `F_i = (I + t_i·σ)/4` for the fixed tetrahedron.
pub fn qubit_sic<T: Real>() -> Povm<T> {
    let r = 1.0 / 3f64.sqrt();
    let elements = TETRAHEDRON
        .iter()
        .map(|t| {
            let mut acc = ComplexMatrix::<T>::identity(2);
            for (k, &tk) in t.iter().enumerate() {
                let s = pauli::<T>(k + 1);
                let coeff = Complex::new(T::lit(tk * r), T::zero());
                let entries = acc
                    .entries()
                    .iter()
                    .zip(s.entries())
                    .map(|(a, b)| *a + *b * coeff)
                    .collect();
                acc = ComplexMatrix::from_entries(2, entries).expect("2x2");
            }
            HermitianMatrix::new(acc).expect("Hermitian").scale(T::lit(0.25))
        })
        .collect();
    Povm::new(elements).expect("tetrahedron POVM is valid")
}

/// `E_i = F_i ⊗ I` for the qubit SIC-POVM `F`: optimal in dimension 4 when
/// only the `σ_k ⊗ I` parameters are unknown.
pub fn sic_tensor_identity_dim4<T: Real>() -> Povm<T> {
    let id = ComplexMatrix::<T>::identity(2);
    let elements = qubit_sic::<T>()
        .elements()
        .iter()
        .map(|f| HermitianMatrix::new(f.as_matrix().kron(&id)).expect("Hermitian"))
        .collect();
    Povm::new(elements).expect("tensor POVM is valid")
}

/// Certification of conditions (1)–(3) above at a given tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalSicReport<T> {
    pub ranks: Vec<usize>,
    /// Condition (1): all nonzero eigenvalues of all elements coincide.
    pub is_rank_constant_multiple: bool,
    /// Mean largest eigenvalue, the common multiplier when (1) holds.
    pub c: T,
    pub max_multiplier_deviation: T,
    /// Mean cross-overlap over ordered pairs.
    pub d: T,
    pub max_pairwise_overlap_deviation: T,
    /// Largest `|Tr(σ_k E_i)|` over known directions k.
    pub max_quasi_orthogonality_violation: T,
    pub tolerance: T,
    pub verdict: bool,
}

pub fn conditional_sic_report<T: Real>(
    povm: &Povm<T>,
    pattern: &ParameterPattern<T>,
    basis: &OrthonormalBasis<T>,
    tol: T,
) -> Result<ConditionalSicReport<T>> {
    let m = povm.len();
    let rank_tol = T::tol(RANK_TOL);
    let mut ranks = Vec::with_capacity(m);
    let mut nonzero = Vec::new();
    let mut largest = Vec::with_capacity(m);
    for e in povm.elements() {
        let ev = hermitian_eigenvalues(e)?;
        let top = ev[0];
        let cut = rank_tol * top.abs().max(T::min_positive_value());
        let kept: Vec<T> = ev.iter().copied().filter(|&l| l > cut).collect();
        ranks.push(kept.len());
        largest.push(top);
        nonzero.extend(kept);
    }
    let c = largest.iter().copied().sum::<T>() / T::from_count(m);
    let max_multiplier_deviation = nonzero.iter().fold(T::zero(), |acc, &l| acc.max((l - c).abs()));
    let is_rank_constant_multiple = max_multiplier_deviation <= tol;

    let g = povm.overlaps();
    let pairs = m * (m - 1);
    let (d, max_pairwise_overlap_deviation) = if pairs == 0 {
        (T::zero(), T::zero())
    } else {
        let cross = || (0..m).flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)));
        let d = cross().map(|(i, j)| g[i][j]).sum::<T>() / T::from_count(pairs);
        let dev = cross().fold(T::zero(), |acc, (i, j)| acc.max((g[i][j] - d).abs()));
        (d, dev)
    };

    let mut qo = T::zero();
    for e in povm.elements() {
        for &k in pattern.known_indices() {
            qo = qo.max(hs_inner(e, basis.element(k))?.abs());
        }
    }

    let verdict = is_rank_constant_multiple && max_pairwise_overlap_deviation <= tol && qo <= tol;
    Ok(ConditionalSicReport {
        ranks,
        is_rank_constant_multiple,
        c,
        max_multiplier_deviation,
        d,
        max_pairwise_overlap_deviation,
        max_quasi_orthogonality_violation: qo,
        tolerance: tol,
        verdict,
    })
}

impl<T: Real> ConditionalSicReport<T> {
    fn fields(&self) -> Vec<(&'static str, String)> {
        let ranks: Vec<String> = self.ranks.iter().map(ToString::to_string).collect();
        vec![
            ("verdict", self.verdict.to_string()),
            ("tolerance", format!("{:e}", self.tolerance)),
            ("ranks", ranks.join(" ")),
            ("rank_constant_multiple", self.is_rank_constant_multiple.to_string()),
            ("c", self.c.to_string()),
            ("max_multiplier_deviation", format!("{:e}", self.max_multiplier_deviation)),
            ("d", self.d.to_string()),
            ("max_pairwise_overlap_deviation", format!("{:e}", self.max_pairwise_overlap_deviation)),
            (
                "max_quasi_orthogonality_violation",
                format!("{:e}", self.max_quasi_orthogonality_violation),
            ),
        ]
    }

    /// Aligned `key  value` lines.
    pub fn to_text(&self) -> String {
        let fields = self.fields();
        let width = fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in fields {
            writeln!(out, "{k:<width$}  {v}").expect("write to String");
        }
        out
    }

    /// Header line plus one data row.
    pub fn to_csv(&self) -> String {
        let fields = self.fields();
        let header: Vec<&str> = fields.iter().map(|(k, _)| *k).collect();
        let row: Vec<String> = fields.into_iter().map(|(_, v)| v).collect();
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}

/// Outcome of one oracle check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation from the expected value.
    pub deviation: f64,
}

fn check(name: &'static str, deviation: f64, tol: f64) -> Check {
    Check {
        name,
        passed: deviation.is_finite() && deviation <= tol,
        deviation,
    }
}

fn max_cross<T: Real>(g: &[Vec<T>], want: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in g.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if i != j {
                worst = worst.max((v.as_f64() - want).abs());
            }
        }
    }
    worst
}

/// Algebraic checks of every catalog entry against its closed-form
/// constants, at tolerance `tol`.
pub fn oracle_suite(tol: f64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let b2 = crate::basis::gell_mann_basis::<f64>(2)?;
    let b3 = crate::basis::gell_mann_basis::<f64>(3)?;
    let b4 = crate::basis::gell_mann_basis::<f64>(4)?;

    let q = example_qutrit_csic::<f64>();
    out.push(check(
        "qutrit: elements sum to I",
        q.sum().max_abs_diff(&HermitianMatrix::identity(3)),
        tol,
    ));
    let mut eig_dev: f64 = 0.0;
    let mut diag_dev: f64 = 0.0;
    for e in q.elements() {
        let ev = hermitian_eigenvalues(e)?;
        eig_dev = eig_dev.max((ev[0] - 3.0 / 7.0).abs()).max(ev[1].abs()).max(ev[2].abs());
        for k in 0..3 {
            diag_dev = diag_dev.max((e.get(k, k).re - 1.0 / 7.0).abs());
        }
    }
    out.push(check("qutrit: spectra are (3/7, 0, 0)", eig_dev, tol));
    out.push(check("qutrit: diagonals are 1/7", diag_dev, tol));
    out.push(check("qutrit: cross-overlaps are 2/49", max_cross(&q.overlaps(), 2.0 / 49.0), tol));
    let pattern3 = ParameterPattern::diagonal_known(&b3);
    let r = conditional_sic_report(&q, &pattern3, &b3, tol)?;
    out.push(check(
        "qutrit: orthogonal to diagonal basis",
        r.max_quasi_orthogonality_violation,
        tol,
    ));
    out.push(check("qutrit: certified", if r.verdict { 0.0 } else { f64::INFINITY }, tol));

    let ps = theorem1_projections::<f64>();
    let total = ps.iter().skip(1).fold(ps[0].clone(), |a, p| &a + p);
    out.push(check(
        "trine: projections sum to 3/2 I",
        total.max_abs_diff(&HermitianMatrix::identity(2).scale(1.5)),
        tol,
    ));
    let g: Vec<Vec<f64>> = ps
        .iter()
        .map(|a| ps.iter().map(|b| hs_inner(a, b).expect("2x2")).collect())
        .collect();
    out.push(check("trine: Tr(P_i P_j) = 1/4", max_cross(&g, 0.25), tol));
    let z = b2.element(3);
    let tz = ps.iter().map(|p| hs_inner(p, z).map(f64::abs)).collect::<Result<Vec<_>>>()?;
    out.push(check("trine: orthogonal to sigma_3", tz.into_iter().fold(0.0, f64::max), tol));
    let pattern2 = ParameterPattern::diagonal_known(&b2);
    let r = conditional_sic_report(&theorem1_qubit(), &pattern2, &b2, tol)?;
    out.push(check(
        "trine POVM: certified with c = 2/3, d = 1/9",
        if r.verdict { (r.c - 2.0 / 3.0).abs().max((r.d - 1.0 / 9.0).abs()) } else { f64::INFINITY },
        tol,
    ));

    // SIC constants k = n², λ = n, μ = 1/(n+1) for the qubit tetrahedron
    let sic: Vec<HermitianMatrix<f64>> = qubit_sic::<f64>().elements().iter().map(|f| f.scale(2.0)).collect();
    let total = sic.iter().skip(1).fold(sic[0].clone(), |a, p| &a + p);
    out.push(check("tetrahedron: four projections", (sic.len() as f64 - 4.0).abs(), tol));
    out.push(check(
        "tetrahedron: projections sum to 2 I",
        total.max_abs_diff(&HermitianMatrix::identity(2).scale(2.0)),
        tol,
    ));
    let g: Vec<Vec<f64>> = sic
        .iter()
        .map(|a| sic.iter().map(|b| hs_inner(a, b).expect("2x2")).collect())
        .collect();
    out.push(check("tetrahedron: Tr(P_i P_j) = 1/3", max_cross(&g, 1.0 / 3.0), tol));

    let d4 = diag_units_dim4::<f64>();
    let pattern_diag4 = ParameterPattern::with_unknown(4, &b4.diagonal_indices())?;
    let r = conditional_sic_report(&d4, &pattern_diag4, &b4, tol)?;
    out.push(check(
        "diagonal units: certified with c = 1, d = 0",
        if r.verdict { (r.c - 1.0).abs().max(r.d.abs()) } else { f64::INFINITY },
        tol,
    ));

    let st = sic_tensor_identity_dim4::<f64>();
    let pattern_local = ParameterPattern::with_unknown(4, &[4, 8, 12])?;
    let r = conditional_sic_report(&st, &pattern_local, &b4, tol)?;
    out.push(check(
        "SIC x I: certified with c = 1/2, d = 1/6",
        if r.verdict { (r.c - 0.5).abs().max((r.d - 1.0 / 6.0).abs()) } else { f64::INFINITY },
        tol,
    ));

    for (name, p) in [
        ("qutrit: valid POVM", &q),
        ("trine POVM: valid POVM", &theorem1_qubit()),
        ("diagonal units: valid POVM", &d4),
        ("SIC x I: valid POVM", &st),
    ] {
        out.push(check(name, if p.validate(tol).is_empty() { 0.0 } else { f64::INFINITY }, tol));
    }
    Ok(out)
}
