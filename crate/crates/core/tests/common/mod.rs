//! Property suites shared by the core invariant tests and the acceptance
//! target. Every suite runs a deterministically seeded proptest runner and
//! reports the first failure as a string instead of panicking.

#![allow(dead_code)]

use num_complex::Complex;
use povm_lab::annealer::{anneal, glauber_accept, random_interior_povm, restart_rng, AnnealConfig, AnnealContext};
use povm_lab::basis::{gell_mann_basis, BlochVector, OrthonormalBasis, ParameterPattern};
use povm_lab::catalog::{
    conditional_sic_report, diag_units_dim4, example_qutrit_csic, qubit_sic, sic_tensor_identity_dim4,
    theorem1_qubit, ConditionalSicReport,
};
use povm_lab::linalg::{determinant, hermitian_eigenvalues, hs_inner, solve_linear, ComplexMatrix, HermitianMatrix, RealMatrix};
use povm_lab::objective::{
    averaged_covariance, design_matrix_for_povm, estimate_state, multinomial_covariance, outcome_probabilities,
    sample_outcomes, DacmEvaluator,
};
use povm_lab::povm::{Povm, PovmElementCoords};
use povm_lab::rankone::{phases_to_povm, refine, PhaseConfiguration, RefineConfig};
use povm_lab::statespace::{cluster_states, generate_grid, select_cluster, Cluster, ClusterPolicy, GridSpec};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Outcome = Result<(), String>;

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Outcome
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn ok<T>(r: povm_lab::Result<T>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------- fixtures

fn complex_entries(n: usize) -> impl Strategy<Value = Vec<Complex<f64>>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n * n)
        .prop_map(|v| v.into_iter().map(|(re, im)| Complex::new(re, im)).collect())
}

fn hermitian_from(n: usize, z: &[Complex<f64>]) -> HermitianMatrix<f64> {
    let mut m = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m.set(i, j, (z[i * n + j] + z[j * n + i].conj()) * 0.5);
        }
    }
    HermitianMatrix::new(m).expect("hermitian by construction")
}

/// Hermitian matrix of dimension 2..=4 with entries in the unit box.
pub fn hermitian() -> impl Strategy<Value = HermitianMatrix<f64>> {
    (2usize..=4).prop_flat_map(|n| complex_entries(n).prop_map(move |z| hermitian_from(n, &z)))
}

/// Gram–Schmidt on the columns of a random complex matrix.
pub fn orthonormalize(n: usize, z: &[Complex<f64>]) -> Option<ComplexMatrix<f64>> {
    let mut cols: Vec<Vec<Complex<f64>>> = (0..n).map(|j| (0..n).map(|i| z[i * n + j]).collect()).collect();
    for j in 0..n {
        for k in 0..j {
            let proj: Complex<f64> = (0..n).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            for i in 0..n {
                let v = cols[k][i];
                cols[j][i] -= proj * v;
            }
        }
        let norm = cols[j].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            return None;
        }
        cols[j].iter_mut().for_each(|c| *c /= norm);
    }
    let mut u = ComplexMatrix::zeros(n);
    for (j, col) in cols.iter().enumerate() {
        for (i, &c) in col.iter().enumerate() {
            u.set(i, j, c);
        }
    }
    Some(u)
}

/// `V V† / Tr(V V†)` for a random complex `V`.
fn density_from(n: usize, z: &[Complex<f64>]) -> HermitianMatrix<f64> {
    let mut m = ComplexMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let s: Complex<f64> = (0..n).map(|k| z[i * n + k] * z[j * n + k].conj()).sum();
            m.set(i, j, s);
        }
    }
    let h = HermitianMatrix::new(m).unwrap();
    let t = h.trace();
    h.scale(1.0 / t)
}

pub fn density(n: usize) -> impl Strategy<Value = HermitianMatrix<f64>> {
    complex_entries(n)
        .prop_filter("nonzero", |z| z.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3)
        .prop_map(move |z| density_from(n, &z))
}

/// Random valid POVM with `m` elements around `I/m`, from a seed.
pub fn interior_povm(dim: usize, m: usize, seed: u64, radius: f64) -> Povm<f64> {
    let basis = gell_mann_basis::<f64>(dim).unwrap();
    random_interior_povm(&basis, m, radius, &mut ChaCha8Rng::seed_from_u64(seed)).expect("interior POVM")
}

/// Valid POVMs of every supported dimension: random interior ones plus
/// the rank-one catalog entries.
pub fn valid_povm() -> impl Strategy<Value = Povm<f64>> {
    prop_oneof![
        4 => (2usize..=4, any::<u64>(), 0.05..0.95f64)
            .prop_flat_map(|(n, seed, r)| (Just(n), n + 1..=n * n, Just(seed), Just(r)))
            .prop_map(|(n, m, seed, r)| interior_povm(n, m, seed, r)),
        1 => prop::sample::select(vec![0usize, 1, 2, 3, 4]).prop_map(|k| catalog_povms().swap_remove(k).1),
    ]
}

pub fn catalog_povms() -> Vec<(&'static str, Povm<f64>)> {
    vec![
        ("qutrit", example_qutrit_csic()),
        ("trine", theorem1_qubit()),
        ("qubit SIC", qubit_sic()),
        ("diagonal units", diag_units_dim4()),
        ("SIC x I", sic_tensor_identity_dim4()),
    ]
}

/// Qubit, z-coordinate known to be 0, 21×21 grid, largest cluster.
pub fn qubit_fixture() -> (OrthonormalBasis<f64>, ParameterPattern<f64>, Cluster<f64>) {
    let basis = gell_mann_basis::<f64>(2).unwrap();
    let pattern = ParameterPattern::new(2, vec![3], vec![0.0]).unwrap();
    let cluster = largest_cluster(&basis, &pattern, 21);
    (basis, pattern, cluster)
}

/// Qutrit, diagonal known to be 0, the default grid and largest cluster.
pub fn qutrit_fixture() -> (OrthonormalBasis<f64>, ParameterPattern<f64>, Cluster<f64>) {
    let basis = gell_mann_basis::<f64>(3).unwrap();
    let pattern = ParameterPattern::diagonal_known(&basis);
    let cluster = largest_cluster(&basis, &pattern, 7);
    (basis, pattern, cluster)
}

/// Dimension 4 with the diagonal generators unknown.
pub fn dim4_fixture() -> (OrthonormalBasis<f64>, ParameterPattern<f64>, Cluster<f64>) {
    let basis = gell_mann_basis::<f64>(4).unwrap();
    let pattern = ParameterPattern::with_unknown(4, &basis.diagonal_indices()).unwrap();
    let cluster = largest_cluster(&basis, &pattern, 7);
    (basis, pattern, cluster)
}

pub fn largest_cluster(basis: &OrthonormalBasis<f64>, pattern: &ParameterPattern<f64>, g: usize) -> Cluster<f64> {
    let spec = GridSpec::with_default_bound(g, pattern.clone(), basis);
    let states = generate_grid(&spec, basis).unwrap();
    let clusters = cluster_states(&states, 10, basis).unwrap();
    select_cluster(&clusters, &ClusterPolicy::Largest, basis).unwrap().clone()
}

// ------------------------------------------------------------------ linalg

pub fn linalg_spectrum_unitary_invariance() -> Outcome {
    let strat = (2usize..=4).prop_flat_map(|n| (Just(n), complex_entries(n), complex_entries(n)));
    check(256, strat, |(n, h, u)| {
        let h = hermitian_from(n, &h);
        let Some(u) = orthonormalize(n, &u) else {
            return Ok(());
        };
        let a = ok(hermitian_eigenvalues(&h))?;
        let b = ok(hermitian_eigenvalues(&h.conjugate_by(&u)))?;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9, "{a:?} vs {b:?}");
        }
        Ok(())
    })
}

pub fn linalg_eigenvalue_sum_is_trace() -> Outcome {
    check(1000, hermitian(), |h| {
        let s: f64 = ok(hermitian_eigenvalues(&h))?.iter().sum();
        prop_assert!((s - h.trace()).abs() < 1e-10 * h.dim() as f64);
        Ok(())
    })
}

pub fn linalg_hs_inner_symmetric_bilinear() -> Outcome {
    let strat = (2usize..=4).prop_flat_map(|n| {
        (
            complex_entries(n),
            complex_entries(n),
            complex_entries(n),
            -3.0..3.0f64,
            -3.0..3.0f64,
        )
            .prop_map(move |(a, b, c, x, y)| (hermitian_from(n, &a), hermitian_from(n, &b), hermitian_from(n, &c), x, y))
    });
    check(256, strat, |(a, b, c, x, y)| {
        prop_assert_eq!(ok(hs_inner(&a, &b))?, ok(hs_inner(&b, &a))?);
        let combo = &a.scale(x) + &b.scale(y);
        let lhs = ok(hs_inner(&combo, &c))?;
        let rhs = x * ok(hs_inner(&a, &c))? + y * ok(hs_inner(&b, &c))?;
        prop_assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        let lhs = ok(hs_inner(&c, &combo))?;
        prop_assert!((lhs - rhs).abs() < 1e-12);
        Ok(())
    })
}

/// Diagonally dominant 6×6 matrices, so both factors are well conditioned.
fn well_conditioned_6x6() -> impl Strategy<Value = RealMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, 36).prop_map(|v| {
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..6).map(|j| v[i * 6 + j] + if i == j { 4.0 } else { 0.0 }).collect())
            .collect();
        RealMatrix::from_rows(&rows).unwrap()
    })
}

pub fn linalg_determinant_multiplicative() -> Outcome {
    check(256, (well_conditioned_6x6(), well_conditioned_6x6()), |(a, b)| {
        let lhs = ok(determinant(&a.matmul(&b)))?;
        let rhs = ok(determinant(&a))? * ok(determinant(&b))?;
        prop_assert!(rel_diff(lhs, rhs) < 1e-8, "{lhs} vs {rhs}");
        Ok(())
    })
}

// ------------------------------------------------------------------- basis

pub fn basis_gram_is_identity() -> Outcome {
    for n in 2..=4 {
        let basis = gell_mann_basis::<f64>(n).map_err(|e| e.to_string())?;
        let els = basis.elements();
        for (i, a) in els.iter().enumerate() {
            for (j, b) in els.iter().enumerate() {
                let g = hs_inner(a, b).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                if (g - want).abs() > 1e-12 {
                    return Err(format!("n = {n}: Gram[{i}][{j}] = {g}"));
                }
            }
        }
    }
    Ok(())
}

pub fn basis_bloch_round_trip() -> Outcome {
    let strat = (2usize..=4).prop_flat_map(|n| (Just(n), density(n)));
    check(256, strat, |(n, rho)| {
        let basis = gell_mann_basis::<f64>(n).unwrap();
        let theta = ok(basis.state_to_bloch(&rho))?;
        let back = ok(basis.bloch_to_state(&theta))?;
        prop_assert!(back.max_abs_diff(&rho) < 1e-12);
        let purity = ok(hs_inner(&rho, &rho))?;
        prop_assert!((theta.norm_sq() - (purity - 1.0 / n as f64)).abs() < 1e-10);
        Ok(())
    })
}

// -------------------------------------------------------------------- povm

pub fn povm_trace_and_overlap_identities() -> Outcome {
    check(256, valid_povm(), |p| {
        let n = p.dim() as f64;
        let total: f64 = p.elements().iter().map(|e| e.trace()).sum();
        prop_assert!((total - n).abs() < 1e-9);
        let g = p.overlaps();
        for (i, e) in p.elements().iter().enumerate() {
            let row: f64 = g[i].iter().sum();
            prop_assert!((row - e.trace()).abs() < 1e-9, "row {i}: {row} vs {}", e.trace());
        }
        Ok(())
    })
}

pub fn povm_metrics_permutation_invariant() -> Outcome {
    let strat = valid_povm().prop_flat_map(|p| {
        let idx: Vec<usize> = (0..p.len()).collect();
        (Just(p), Just(idx).prop_shuffle())
    });
    check(256, strat, |(p, perm)| {
        let shuffled = ok(Povm::new(perm.iter().map(|&i| p.elements()[i].clone()).collect()))?;
        let a = ok(p.metrics())?;
        let b = ok(shuffled.metrics())?;
        for (x, y) in [(a.sigma, b.sigma), (a.delta, b.delta), (a.big_delta, b.big_delta)] {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{a:?} vs {b:?}");
        }
        Ok(())
    })
}

pub fn povm_coords_linear_in_a0() -> Outcome {
    let strat = (2usize..=4).prop_flat_map(|n| {
        (
            Just(n),
            0.01..2.0f64,
            0.01..5.0f64,
            prop::collection::vec(-1.0..1.0f64, n * n - 1),
        )
    });
    check(256, strat, |(n, a0, lambda, a)| {
        let basis = gell_mann_basis::<f64>(n).unwrap();
        let e = ok(PovmElementCoords::new(a0, a.clone()).to_element(&basis))?;
        let scaled = ok(PovmElementCoords::new(lambda * a0, a).to_element(&basis))?;
        prop_assert!(scaled.max_abs_diff(&e.scale(lambda)) < 1e-12);
        Ok(())
    })
}

// -------------------------------------------------------------- statespace

fn qubit_states(count: usize) -> impl Strategy<Value = Vec<BlochVector<f64>>> {
    let basis = gell_mann_basis::<f64>(2).unwrap();
    prop::collection::vec(density(2), 1..count).prop_map(move |rhos| {
        rhos.iter().map(|r| basis.state_to_bloch(r).unwrap()).collect()
    })
}

pub fn statespace_partition_and_permutation() -> Outcome {
    let strat = (qubit_states(60), 1usize..=12)
        .prop_flat_map(|(s, cells)| {
            let idx: Vec<usize> = (0..s.len()).collect();
            (Just(s), Just(cells), Just(idx).prop_shuffle())
        });
    check(128, strat, |(states, cells, perm)| {
        let basis = gell_mann_basis::<f64>(2).unwrap();
        let a = ok(cluster_states(&states, cells, &basis))?;
        let total: usize = a.values().map(|c| c.len()).sum();
        prop_assert_eq!(total, states.len());

        let shuffled: Vec<BlochVector<f64>> = perm.iter().map(|&i| states[i].clone()).collect();
        let b = ok(cluster_states(&shuffled, cells, &basis))?;
        prop_assert_eq!(a.len(), b.len());
        for (key, ca) in &a {
            let cb = b.get(key).ok_or_else(|| TestCaseError::fail(format!("key {key:?} lost")))?;
            let mut xa: Vec<Vec<u64>> = ca.members.iter().map(|t| t.coords().iter().map(|x| x.to_bits()).collect()).collect();
            let mut xb: Vec<Vec<u64>> = cb.members.iter().map(|t| t.coords().iter().map(|x| x.to_bits()).collect()).collect();
            xa.sort();
            xb.sort();
            prop_assert_eq!(xa, xb);
        }
        Ok(())
    })
}

pub fn statespace_members_psd_with_known_values() -> Outcome {
    let strat = prop_oneof![
        (3usize..=15, -0.4..0.4f64).prop_map(|(g, z)| (2usize, vec![3usize], vec![z], g)),
        (3usize..=5, -0.2..0.2f64, -0.2..0.2f64).prop_map(|(g, a, b)| (3usize, vec![3usize, 8], vec![a, b], g)),
    ];
    check(32, strat, |(n, known, values, g)| {
        let basis = gell_mann_basis::<f64>(n).unwrap();
        let pattern = ok(ParameterPattern::new(n, known.clone(), values.clone()))?;
        let states = ok(generate_grid(&GridSpec::with_default_bound(g, pattern, &basis), &basis))?;
        let clusters = ok(cluster_states(&states, 10, &basis))?;
        for c in clusters.values() {
            for theta in &c.members {
                let ev = ok(hermitian_eigenvalues(&ok(basis.bloch_to_state(theta))?))?;
                prop_assert!(*ev.last().unwrap() >= -1e-10);
                for (&k, &v) in known.iter().zip(&values) {
                    prop_assert_eq!(theta.at(k), v);
                }
            }
        }
        Ok(())
    })
}

// --------------------------------------------------------------- objective

pub fn objective_probability_simplex() -> Outcome {
    let strat = valid_povm().prop_flat_map(|p| {
        let n = p.dim();
        (Just(p), density(n))
    });
    check(256, strat, |(p, rho)| {
        let probs = ok(outcome_probabilities(&p, &rho))?;
        let s: f64 = probs.as_slice().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-9);
        Ok(())
    })
}

fn min_eig(m: &RealMatrix<f64>) -> povm_lab::Result<f64> {
    let h = m.to_hermitian()?;
    Ok(*hermitian_eigenvalues(&h)?.last().unwrap())
}

pub fn objective_covariances_symmetric_psd() -> Outcome {
    let (b2, p2, c2) = qubit_fixture();
    let (b3, p3, c3) = qutrit_fixture();
    check(64, (any::<bool>(), any::<u64>(), 0.05..0.9f64), |(qutrit, seed, r)| {
        let (basis, pattern, cluster) = if qutrit { (&b3, &p3, &c3) } else { (&b2, &p2, &c2) };
        let m = pattern.unknown_count() + 1;
        let povm = interior_povm(basis.dim(), m, seed, r);
        for theta in cluster.members.iter().take(5) {
            let p = ok(outcome_probabilities(&povm, &ok(basis.bloch_to_state(theta))?))?;
            let w = multinomial_covariance(&p, m - 1);
            prop_assert_eq!(w.max_asymmetry(), 0.0);
            prop_assert!(ok(min_eig(&w))? >= -1e-9);
        }
        let w0 = ok(averaged_covariance(&povm, cluster, basis, pattern))?.w0;
        prop_assert!(w0.max_asymmetry() <= 1e-12 * w0.max_abs());
        prop_assert!(ok(min_eig(&w0))? >= -1e-9);
        Ok(())
    })
}

/// `det(T⁻¹ W0 T⁻ᵀ)` assembled explicitly from the direct member sum.
pub fn assembled_dacm(
    povm: &Povm<f64>,
    cluster: &Cluster<f64>,
    basis: &OrthonormalBasis<f64>,
    pattern: &ParameterPattern<f64>,
) -> povm_lab::Result<f64> {
    let t = design_matrix_for_povm(povm, basis, pattern)?.t;
    let w0 = averaged_covariance(povm, cluster, basis, pattern)?.w0;
    let n = t.rows();
    // X = T⁻¹ W0, column by column
    let mut x = RealMatrix::zeros(n, n);
    for c in 0..n {
        let col: Vec<f64> = (0..n).map(|r| w0.get(r, c)).collect();
        for (r, v) in solve_linear(&t, &col)?.into_iter().enumerate() {
            x.set(r, c, v);
        }
    }
    // Y = X T⁻ᵀ, whose row r solves T y = X[r, :]
    let mut y = RealMatrix::zeros(n, n);
    for r in 0..n {
        for (c, v) in solve_linear(&t, x.row(r))?.into_iter().enumerate() {
            y.set(r, c, v);
        }
    }
    determinant(&y)
}

/// 100 seeded random POVMs, half qubit (N = 2) and half qutrit (N = 6):
/// the production DACM against the explicitly assembled matrix. Returns
/// the worst relative deviation.
pub fn dacm_oracle_worst_deviation() -> Result<f64, String> {
    let fixtures = [qubit_fixture(), qutrit_fixture()];
    let mut worst: f64 = 0.0;
    for (k, (basis, pattern, cluster)) in fixtures.iter().enumerate() {
        let evaluator = DacmEvaluator::new(cluster, pattern.clone()).map_err(|e| e.to_string())?;
        let m = pattern.unknown_count() + 1;
        for i in 0..50u64 {
            let seed = 10_000 * (k as u64 + 1) + i;
            let radius = 0.2 + 0.7 * (i as f64 / 49.0);
            let povm = interior_povm(basis.dim(), m, seed, radius);
            let fast = evaluator.evaluate(&povm, basis).map_err(|e| format!("seed {seed}: {e}"))?;
            let slow = assembled_dacm(&povm, cluster, basis, pattern).map_err(|e| format!("seed {seed}: {e}"))?;
            worst = worst.max(rel_diff(fast, slow));
        }
    }
    Ok(worst)
}

pub fn objective_dacm_oracle() -> Outcome {
    let worst = dacm_oracle_worst_deviation()?;
    if worst <= 1e-10 {
        Ok(())
    } else {
        Err(format!("worst relative deviation {worst:e}"))
    }
}

pub fn objective_dacm_member_permutation() -> Outcome {
    let (basis, pattern, cluster) = qutrit_fixture();
    let idx: Vec<usize> = (0..cluster.len()).collect();
    check(32, (Just(idx).prop_shuffle(), any::<u64>()), |(perm, seed)| {
        let povm = interior_povm(3, 7, seed, 0.5);
        let shuffled = Cluster {
            key: cluster.key.clone(),
            members: perm.iter().map(|&i| cluster.members[i].clone()).collect(),
            cell_count: cluster.cell_count,
        };
        let a = ok(ok(DacmEvaluator::new(&cluster, pattern.clone()))?.evaluate(&povm, &basis))?;
        let b = ok(ok(DacmEvaluator::new(&shuffled, pattern.clone()))?.evaluate(&povm, &basis))?;
        prop_assert!(rel_diff(a, b) < 1e-12, "{a} vs {b}");
        Ok(())
    })
}

/// Single-shot estimates from the trine at θ = (0.3, 0.1).
pub struct UnbiasednessRun {
    pub theta: [f64; 2],
    pub mean: [f64; 2],
    pub standard_error: [f64; 2],
    /// `Σ_j p_j θ̂(j) − θ`, computed exactly.
    pub exact_bias: [f64; 2],
}

pub fn unbiasedness_run(shots: usize, seed: u64) -> povm_lab::Result<UnbiasednessRun> {
    let basis = gell_mann_basis::<f64>(2)?;
    let pattern = ParameterPattern::new(2, vec![3], vec![0.0])?;
    let povm = theorem1_qubit::<f64>();
    let theta = [0.3, 0.1];
    let rho = basis.bloch_to_state(&BlochVector::new(vec![theta[0], theta[1], 0.0]))?;
    let p = outcome_probabilities(&povm, &rho)?;
    let design = design_matrix_for_povm(&povm, &basis, &pattern)?;
    // θ̂ for a single shot landing on outcome j
    let per_outcome: Vec<Vec<f64>> = (0..povm.len())
        .map(|j| {
            let nu: Vec<f64> = (0..2).map(|k| if k == j { 1.0 } else { 0.0 }).collect();
            estimate_state(&nu, &design)
        })
        .collect::<povm_lab::Result<_>>()?;

    let mut exact_bias = [0.0; 2];
    for (j, est) in per_outcome.iter().enumerate() {
        for k in 0..2 {
            exact_bias[k] += p.as_slice()[j] * est[k];
        }
    }
    for k in 0..2 {
        exact_bias[k] -= theta[k];
    }

    let outcomes = sample_outcomes(&p, shots, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let mut sum = [0.0; 2];
    let mut sum_sq = [0.0; 2];
    for &j in &outcomes {
        for k in 0..2 {
            let v = per_outcome[j][k];
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let m = shots as f64;
    let mean = [sum[0] / m, sum[1] / m];
    let se = |k: usize| ((sum_sq[k] / m - mean[k] * mean[k]) * m / (m - 1.0) / m).sqrt();
    Ok(UnbiasednessRun {
        theta,
        mean,
        standard_error: [se(0), se(1)],
        exact_bias,
    })
}

pub fn objective_unbiasedness() -> Outcome {
    let run = unbiasedness_run(100_000, 2024).map_err(|e| e.to_string())?;
    for k in 0..2 {
        let err = (run.mean[k] - run.theta[k]).abs();
        if err > 5.0 * run.standard_error[k] || err > 0.02 {
            return Err(format!("coordinate {k}: mean {} vs {}, SE {}", run.mean[k], run.theta[k], run.standard_error[k]));
        }
        if run.exact_bias[k].abs() > 1e-12 {
            return Err(format!("coordinate {k}: exact bias {}", run.exact_bias[k]));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- annealer

pub fn annealer_held_povms_valid_and_best_monotone() -> Outcome {
    let (basis, pattern, cluster) = qubit_fixture();
    check(24, (any::<u64>(), 1usize..300, any::<bool>()), |(seed, steps, perturb_a0)| {
        let initial = ok(random_interior_povm(&basis, 3, 0.5, &mut restart_rng(seed)))?;
        let config = AnnealConfig {
            total_steps: steps,
            rng_seed: seed,
            trace_every: 7,
            perturb_a0,
            ..AnnealConfig::default()
        };
        let out = ok(anneal(
            &config,
            AnnealContext {
                initial: &initial,
                cluster: &cluster,
                basis: &basis,
                pattern: &pattern,
            },
        ))?;
        prop_assert!(out.best.validate(1e-9).is_empty(), "best: {:?}", out.best.validate(1e-9));
        prop_assert!(out.final_povm.validate(1e-9).is_empty());
        prop_assert!(out.best_dacm <= out.final_dacm);
        for w in out.best_log_dacm.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        for r in &out.trace {
            for v in [r.log_dacm, r.sigma, r.delta, r.big_delta, r.temperature, r.s] {
                prop_assert!(v.is_finite(), "{r:?}");
            }
        }
        Ok(())
    })
}

pub fn annealer_equal_objective_acceptance_half() -> Outcome {
    check(8, (any::<u64>(), 1e-3..10.0f64, 1e-3..1e3f64), |(seed, temperature, dacm)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws = 10_000;
        let mut accepted = 0usize;
        for _ in 0..draws {
            if ok(glauber_accept(dacm, dacm, temperature, &mut rng))? {
                accepted += 1;
            }
        }
        let freq = accepted as f64 / draws as f64;
        prop_assert!((freq - 0.5).abs() <= 0.02, "frequency {freq}");
        Ok(())
    })
}

// ----------------------------------------------------------------- rankone

fn raw_vectors(dim: usize, raw: &[f64]) -> Vec<Vec<Complex<f64>>> {
    let r = 1.0 / (dim as f64).sqrt();
    raw.chunks(dim).map(|row| row.iter().map(|&p| Complex::from_polar(r, p)).collect()).collect()
}

pub fn rankone_gauge_invariance() -> Outcome {
    let strat = (2usize..=4, 2usize..=8).prop_flat_map(|(n, m)| {
        (
            Just(n),
            Just(m),
            prop::collection::vec(0.0..std::f64::consts::TAU, (n - 1) * (m - 1)),
            1..m,
            -10.0..10.0f64,
        )
    });
    check(256, strat, |(n, m, free, row, shift)| {
        let phi = ok(PhaseConfiguration::from_free(n, m, &free))?;
        let mut raw: Vec<f64> = (0..m).flat_map(|i| (0..n).map(move |k| (i, k))).map(|(i, k)| phi.get(i, k)).collect();
        for k in 0..n {
            raw[row * n + k] += shift;
        }
        let (base, _) = phases_to_povm(&phi);
        // the shifted vector gives the same projector
        let c = n as f64 / m as f64;
        let h = raw_vectors(n, &raw);
        let direct = HermitianMatrix::outer(&h[row], c);
        prop_assert!(direct.max_abs_diff(&base.elements()[row]) < 1e-12);
        // and gauge-fixing the shifted table recovers the same POVM
        let (fixed, _) = phases_to_povm(&ok(PhaseConfiguration::from_unfixed(n, m, &raw))?);
        for (a, b) in fixed.elements().iter().zip(base.elements()) {
            prop_assert!(a.max_abs_diff(b) < 1e-12);
        }
        Ok(())
    })
}

pub fn rankone_diagonal_quasi_orthogonality() -> Outcome {
    let strat = (2usize..=4, 2usize..=8).prop_flat_map(|(n, m)| {
        (
            Just(n),
            Just(m),
            prop::collection::vec(0.0..std::f64::consts::TAU, (n - 1) * (m - 1)),
            prop::collection::vec(-2.0..2.0f64, n),
        )
    });
    check(256, strat, |(n, m, free, diag)| {
        let phi = ok(PhaseConfiguration::from_free(n, m, &free))?;
        let (povm, _) = phases_to_povm(&phi);
        let d = HermitianMatrix::from_real_diagonal(&diag);
        let want = d.trace() / m as f64;
        for e in povm.elements() {
            prop_assert!((ok(hs_inner(e, &d))? - want).abs() < 1e-14);
        }
        Ok(())
    })
}

pub fn rankone_polish_monotone() -> Outcome {
    check(6, (any::<u64>(), 2usize..=3), |(seed, n)| {
        let m = n * n - n + 1;
        let init = ok(PhaseConfiguration::<f64>::random(n, m, &mut restart_rng(seed)))?;
        let config = RefineConfig {
            anneal: AnnealConfig {
                total_steps: 500,
                rng_seed: seed,
                ..AnnealConfig::default()
            },
            max_evaluations: 20_000,
            ..RefineConfig::default()
        };
        let out = ok(refine(&init, &config))?;
        let polish = &out.objective_trace[out.objective_trace.len() - out.polish_sweeps..];
        for w in polish.windows(2) {
            prop_assert!(w[1] <= w[0], "{polish:?}");
        }
        if let (Some(first), Some(&last)) = (out.objective_trace.first(), out.objective_trace.last()) {
            prop_assert!(last <= *first);
            prop_assert_eq!(last, out.objective);
        }
        prop_assert!(out.evaluations <= config.max_evaluations);
        Ok(())
    })
}

// ----------------------------------------------------------------- catalog

pub fn catalog_all_valid() -> Outcome {
    for (name, p) in catalog_povms() {
        let v = p.validate(1e-12);
        if !v.is_empty() {
            return Err(format!("{name}: {v:?}"));
        }
    }
    Ok(())
}

fn report_for(name: &str, p: &Povm<f64>) -> Result<ConditionalSicReport<f64>, String> {
    let (basis, pattern) = match name {
        "qutrit" => {
            let b = gell_mann_basis(3).unwrap();
            let p = ParameterPattern::diagonal_known(&b);
            (b, p)
        }
        "trine" | "mixed trine" => (gell_mann_basis(2).unwrap(), ParameterPattern::new(2, vec![3], vec![0.0]).unwrap()),
        "diagonal units" => {
            let b = gell_mann_basis(4).unwrap();
            let p = ParameterPattern::with_unknown(4, &b.diagonal_indices()).unwrap();
            (b, p)
        }
        "SIC x I" => (gell_mann_basis(4).unwrap(), ParameterPattern::with_unknown(4, &[4, 8, 12]).unwrap()),
        other => return Err(format!("no pattern for {other}")),
    };
    conditional_sic_report(p, &pattern, &basis, 1e-10).map_err(|e| e.to_string())
}

pub fn catalog_verdicts() -> Outcome {
    let expected = [
        ("qutrit", example_qutrit_csic(), 3.0 / 7.0, 2.0 / 49.0),
        ("trine", theorem1_qubit(), 2.0 / 3.0, 1.0 / 9.0),
        ("diagonal units", diag_units_dim4(), 1.0, 0.0),
        ("SIC x I", sic_tensor_identity_dim4(), 0.5, 1.0 / 6.0),
    ];
    for (name, p, c, d) in expected {
        let r = report_for(name, &p)?;
        if !r.verdict || (r.c - c).abs() > 1e-12 || (r.d - d).abs() > 1e-12 {
            return Err(format!("{name}: {r:?}"));
        }
    }
    // Half the trine plus a multiple of the identity is not built from
    // projections.
    let trine: Povm<f64> = theorem1_qubit();
    let mixed = Povm::new(
        trine
            .elements()
            .iter()
            .map(|e| &e.scale(0.5) + &HermitianMatrix::identity(2).scale(1.0 / 6.0))
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let r = report_for("mixed trine", &mixed)?;
    if r.verdict || r.is_rank_constant_multiple {
        return Err(format!("mixed trine certified: {r:?}"));
    }
    Ok(())
}

fn reports_match(a: &ConditionalSicReport<f64>, b: &ConditionalSicReport<f64>) -> Result<(), TestCaseError> {
    let mut ra = a.ranks.clone();
    let mut rb = b.ranks.clone();
    ra.sort_unstable();
    rb.sort_unstable();
    prop_assert_eq!(ra, rb);
    prop_assert_eq!(a.verdict, b.verdict);
    prop_assert_eq!(a.is_rank_constant_multiple, b.is_rank_constant_multiple);
    for (x, y) in [
        (a.c, b.c),
        (a.d, b.d),
        (a.max_multiplier_deviation, b.max_multiplier_deviation),
        (a.max_pairwise_overlap_deviation, b.max_pairwise_overlap_deviation),
        (a.max_quasi_orthogonality_violation, b.max_quasi_orthogonality_violation),
    ] {
        prop_assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
    }
    Ok(())
}

pub fn catalog_report_symmetries() -> Outcome {
    let base: Povm<f64> = example_qutrit_csic();
    let basis = gell_mann_basis::<f64>(3).unwrap();
    let pattern = ParameterPattern::diagonal_known(&basis);
    let reference = conditional_sic_report(&base, &pattern, &basis, 1e-10).map_err(|e| e.to_string())?;
    let idx: Vec<usize> = (0..7).collect();
    let strat = (Just(idx).prop_shuffle(), prop::collection::vec(0.0..std::f64::consts::TAU, 3));
    check(64, strat, |(perm, phases)| {
        let mut u = ComplexMatrix::zeros(3);
        for (k, &a) in phases.iter().enumerate() {
            u.set(k, k, Complex::from_polar(1.0, a));
        }
        let permuted = ok(Povm::new(perm.iter().map(|&i| base.elements()[i].clone()).collect()))?;
        let rotated = ok(Povm::new(base.elements().iter().map(|e| e.conjugate_by(&u)).collect()))?;
        for p in [&permuted, &rotated] {
            let r = ok(conditional_sic_report(p, &pattern, &basis, 1e-10))?;
            reports_match(&reference, &r)?;
        }
        Ok(())
    })
}

/// Every core suite, by name.
pub type Suite = (&'static str, fn() -> Outcome);

pub const SUITES: &[Suite] = &[
    ("linalg: spectrum invariant under unitary conjugation", linalg_spectrum_unitary_invariance),
    ("linalg: eigenvalues sum to the trace", linalg_eigenvalue_sum_is_trace),
    ("linalg: hs_inner symmetric and bilinear", linalg_hs_inner_symmetric_bilinear),
    ("linalg: determinant is multiplicative", linalg_determinant_multiplicative),
    ("basis: Gram matrix is the identity", basis_gram_is_identity),
    ("basis: Bloch round trip and purity", basis_bloch_round_trip),
    ("povm: trace and overlap identities", povm_trace_and_overlap_identities),
    ("povm: metrics invariant under relabeling", povm_metrics_permutation_invariant),
    ("povm: element linear in a0", povm_coords_linear_in_a0),
    ("statespace: partition and permutation invariance", statespace_partition_and_permutation),
    ("statespace: members PSD with known values", statespace_members_psd_with_known_values),
    ("objective: probabilities on the simplex", objective_probability_simplex),
    ("objective: W and W0 symmetric PSD", objective_covariances_symmetric_psd),
    ("objective: DACM ratio equals assembled form", objective_dacm_oracle),
    ("objective: DACM invariant under member order", objective_dacm_member_permutation),
    ("objective: estimator unbiased", objective_unbiasedness),
    ("annealer: held POVMs valid, best monotone, trace finite", annealer_held_povms_valid_and_best_monotone),
    ("annealer: equal-objective acceptance is 1/2", annealer_equal_objective_acceptance_half),
    ("rankone: gauge invariance", rankone_gauge_invariance),
    ("rankone: diagonal quasi-orthogonality", rankone_diagonal_quasi_orthogonality),
    ("rankone: polish descends monotonically", rankone_polish_monotone),
    ("catalog: entries are valid POVMs", catalog_all_valid),
    ("catalog: verdicts and constants", catalog_verdicts),
    ("catalog: report symmetries", catalog_report_symmetries),
];
