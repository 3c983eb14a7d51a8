//! Linear-inversion estimator and the DACM objective.
//!
//! For a POVM with elements `E_j = a0_j (I + a_j·σ)` and a state
//! `ρ = I/n + θ·σ`, outcome j has probability `p_j = a0_j (1 + a_j·θ)`.
//! Restricted to the first N outcomes and the N unknown coordinates this is
//! `p = offsets + T θ_unknown`, which the estimator inverts. The objective is
//!
//! ```text
//! DACM = det(T⁻¹ W0 T⁻ᵀ) = det(W0) / det(T)²
//! ```
//!
//! where `W0` sums the multinomial covariance of the first N outcome
//! frequencies over the states of one cluster. The repetition count in the
//! covariance is set to 1: it rescales DACM by a positive constant and does
//! not move the minimizer. The sum is not normalized for the same reason.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;

use crate::basis::{BlochVector, OrthonormalBasis, ParameterPattern};
use crate::error::{Error, Result};
use crate::linalg::{hs_inner, HermitianMatrix, Lu, RealMatrix};
use crate::povm::{Povm, PovmElementCoords};
use crate::scalar::Real;
use crate::statespace::Cluster;

/// Outcome probabilities `p_j = Tr(E_j ρ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeProbabilities<T>(pub Vec<T>);

impl<T: Real> OutcomeProbabilities<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    fn check(&self) -> std::result::Result<(), String> {
        let tol = T::tol(1e-10);
        if let Some((j, p)) = self
            .0
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p >= -tol && p <= T::one() + tol))
        {
            return Err(format!("p[{j}] = {p} outside [0, 1]"));
        }
        let total: T = self.0.iter().copied().sum();
        if (total - T::one()).abs() > T::tol(1e-9) {
            return Err(format!("probabilities sum to {total}"));
        }
        Ok(())
    }
}

pub fn outcome_probabilities<T: Real>(povm: &Povm<T>, rho: &HermitianMatrix<T>) -> Result<OutcomeProbabilities<T>> {
    let p = povm
        .elements()
        .iter()
        .map(|e| hs_inner(e, rho))
        .collect::<Result<Vec<T>>>()?;
    let p = OutcomeProbabilities(p);
    p.check()
        .map_err(|detail| Error::InvalidProbabilities { member: 0, detail })?;
    Ok(p)
}

/// The N×N matrix `T` with `T[j][k] = a0_j · a_j[unknown_k]`, plus the
/// offsets of the affine map from unknown coordinates to probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix<T> {
    pub t: RealMatrix<T>,
    pub a0s: Vec<T>,
    /// `a0_j (1 + Σ_known a_j[k] θ_k)`; equals `a0s` when the known values
    /// are all zero.
    pub offsets: Vec<T>,
}

pub fn design_matrix<T: Real>(coords: &[PovmElementCoords<T>], pattern: &ParameterPattern<T>) -> Result<DesignMatrix<T>> {
    let big_n = pattern.unknown_count();
    if coords.len() != big_n {
        return Err(Error::ContractViolation(format!(
            "design matrix needs coordinates for {big_n} elements, got {}",
            coords.len()
        )));
    }
    let full_len = pattern.dim() * pattern.dim() - 1;
    let mut t = RealMatrix::zeros(big_n, big_n);
    let mut a0s = Vec::with_capacity(big_n);
    let mut offsets = Vec::with_capacity(big_n);
    for (j, c) in coords.iter().enumerate() {
        if c.a.len() != full_len {
            return Err(Error::DimensionMismatch {
                expected: full_len,
                found: c.a.len(),
            });
        }
        for (k, &idx) in pattern.unknown_indices().iter().enumerate() {
            t.set(j, k, c.a0 * c.a[idx - 1]);
        }
        let known_shift: T = pattern
            .known_indices()
            .iter()
            .zip(pattern.known_values())
            .map(|(&idx, &v)| c.a[idx - 1] * v)
            .sum();
        a0s.push(c.a0);
        offsets.push(c.a0 * (T::one() + known_shift));
    }
    Ok(DesignMatrix { t, a0s, offsets })
}

/// Coordinate form of the first N elements of a matrix-only POVM.
pub fn design_matrix_for_povm<T: Real>(
    povm: &Povm<T>,
    basis: &OrthonormalBasis<T>,
    pattern: &ParameterPattern<T>,
) -> Result<DesignMatrix<T>> {
    let big_n = pattern.unknown_count();
    if povm.len() < big_n + 1 {
        return Err(Error::ContractViolation(format!(
            "POVM with {} elements cannot estimate {big_n} parameters",
            povm.len()
        )));
    }
    design_matrix(&povm.coords(basis, big_n)?, pattern)
}

/// Multinomial covariance of the first N outcome frequencies (one shot):
/// `p_j(1 − p_j)` on the diagonal and `−p_j p_k` off it.
pub fn multinomial_covariance<T: Real>(p: &OutcomeProbabilities<T>, big_n: usize) -> RealMatrix<T> {
    assert!(big_n <= p.0.len(), "N exceeds the number of outcomes");
    let mut w = RealMatrix::zeros(big_n, big_n);
    for j in 0..big_n {
        for k in 0..big_n {
            let v = if j == k {
                p.0[j] * (T::one() - p.0[j])
            } else {
                -p.0[j] * p.0[k]
            };
            w.set(j, k, v);
        }
    }
    w
}

#[derive(Clone, Debug, PartialEq)]
pub struct AveragedCovariance<T> {
    pub w0: RealMatrix<T>,
    pub member_count: usize,
}

/// `W0 = Σ_members W(p(ρ_member))`, summed in member order.
pub fn averaged_covariance<T: Real>(
    povm: &Povm<T>,
    cluster: &Cluster<T>,
    basis: &OrthonormalBasis<T>,
    pattern: &ParameterPattern<T>,
) -> Result<AveragedCovariance<T>> {
    if cluster.is_empty() {
        return Err(Error::ContractViolation("cluster has no members".into()));
    }
    let big_n = pattern.unknown_count();
    let per_member: Vec<RealMatrix<T>> = cluster
        .members
        .par_iter()
        .enumerate()
        .map(|(i, theta)| {
            let rho = basis.bloch_to_state(theta)?;
            let p = outcome_probabilities(povm, &rho).map_err(|e| match e {
                Error::InvalidProbabilities { detail, .. } => Error::InvalidProbabilities { member: i, detail },
                other => other,
            })?;
            Ok(multinomial_covariance(&p, big_n))
        })
        .collect::<Result<_>>()?;
    let w0 = per_member
        .iter()
        .skip(1)
        .fold(per_member[0].clone(), |acc, w| acc.add(w));
    Ok(AveragedCovariance {
        w0,
        member_count: cluster.len(),
    })
}

/// Count, first and second moments of a cluster's full Bloch vectors.
///
/// Since probabilities are affine in θ, `W0` depends on the cluster only
/// through these moments; [`ClusterMoments::averaged_covariance`] is the
/// closed form of [`averaged_covariance`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterMoments<T> {
    pub count: usize,
    pub first: Vec<T>,
    pub second: RealMatrix<T>,
}

impl<T: Real> ClusterMoments<T> {
    pub fn from_members(members: &[BlochVector<T>]) -> Result<Self> {
        let len = members
            .first()
            .map(BlochVector::len)
            .ok_or_else(|| Error::ContractViolation("cluster has no members".into()))?;
        let mut first = vec![T::zero(); len];
        let mut second = RealMatrix::zeros(len, len);
        for theta in members {
            let c = theta.coords();
            if c.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: c.len(),
                });
            }
            for i in 0..len {
                first[i] += c[i];
                if c[i] == T::zero() {
                    continue;
                }
                for j in 0..len {
                    second.set(i, j, second.get(i, j) + c[i] * c[j]);
                }
            }
        }
        Ok(ClusterMoments {
            count: members.len(),
            first,
            second,
        })
    }

    pub fn from_cluster(cluster: &Cluster<T>) -> Result<Self> {
        Self::from_members(&cluster.members)
    }

    /// `W0` from the coordinate form of the first N elements:
    /// with `p = c + Bθ`, `W0 = diag(Kc + B s1) − (K c cᵀ + c (B s1)ᵀ + (B s1) cᵀ + B S2 Bᵀ)`.
    pub fn averaged_covariance(&self, coords: &[PovmElementCoords<T>]) -> Result<AveragedCovariance<T>> {
        let big_n = coords.len();
        let len = self.first.len();
        let k = T::from_count(self.count);
        let c: Vec<T> = coords.iter().map(|e| e.a0).collect();
        let mut b = RealMatrix::zeros(big_n, len);
        for (j, e) in coords.iter().enumerate() {
            if e.a.len() != len {
                return Err(Error::DimensionMismatch {
                    expected: len,
                    found: e.a.len(),
                });
            }
            for (l, &x) in e.a.iter().enumerate() {
                b.set(j, l, e.a0 * x);
            }
        }
        let bs1 = b.mul_vec(&self.first);
        let bs2bt = b.matmul(&self.second).matmul(&b.transpose());
        let mut w0 = RealMatrix::zeros(big_n, big_n);
        for i in 0..big_n {
            for j in 0..big_n {
                let mut v = -(k * c[i] * c[j] + c[i] * bs1[j] + bs1[i] * c[j] + bs2bt.get(i, j));
                if i == j {
                    v += k * c[i] + bs1[i];
                }
                w0.set(i, j, v);
            }
        }
        // exact symmetry
        for i in 0..big_n {
            for j in (i + 1)..big_n {
                let avg = (w0.get(i, j) + w0.get(j, i)) * T::lit(0.5);
                w0.set(i, j, avg);
                w0.set(j, i, avg);
            }
        }
        Ok(AveragedCovariance {
            w0,
            member_count: self.count,
        })
    }
}

/// `det(W0) / det(T)²`.
pub fn dacm<T: Real>(design: &DesignMatrix<T>, w0: &AveragedCovariance<T>) -> Result<T> {
    let lu_t = Lu::factor(&design.t)?;
    if lu_t.is_singular() {
        return Err(Error::SingularDesign(lu_t.min_rel_pivot().as_f64()));
    }
    let lu_w = Lu::factor(&w0.w0)?;
    let det_w = lu_w.determinant();
    if det_w <= T::zero() || lu_w.is_singular() {
        return Err(Error::NonPositiveObjective(det_w.as_f64()));
    }
    let det_t = lu_t.determinant();
    Ok(det_w / (det_t * det_t))
}

/// `θ̂ = T⁻¹ (ν − offsets)` for the first N relative frequencies `ν`.
pub fn estimate_state<T: Real>(nu: &[T], design: &DesignMatrix<T>) -> Result<Vec<T>> {
    if nu.len() != design.offsets.len() {
        return Err(Error::DimensionMismatch {
            expected: design.offsets.len(),
            found: nu.len(),
        });
    }
    let rhs: Vec<T> = nu.iter().zip(&design.offsets).map(|(&v, &o)| v - o).collect();
    Lu::factor(&design.t)?.solve(&rhs)
}

/// Draws `shots` outcomes from the categorical distribution `p` and returns
/// the outcome index of every shot.
pub fn sample_outcomes<T: Real, R: Rng + ?Sized>(p: &OutcomeProbabilities<T>, shots: usize, rng: &mut R) -> Result<Vec<usize>> {
    let weights: Vec<f64> = p.0.iter().map(|x| x.as_f64().max(0.0)).collect();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::InvalidProbabilities {
        member: 0,
        detail: e.to_string(),
    })?;
    Ok((0..shots).map(|_| dist.sample(rng)).collect())
}

/// Evaluates DACM for candidate POVMs against a fixed cluster.
#[derive(Clone, Debug)]
pub struct DacmEvaluator<T> {
    pub moments: ClusterMoments<T>,
    pub pattern: ParameterPattern<T>,
}

impl<T: Real> DacmEvaluator<T> {
    pub fn new(cluster: &Cluster<T>, pattern: ParameterPattern<T>) -> Result<Self> {
        Ok(DacmEvaluator {
            moments: ClusterMoments::from_cluster(cluster)?,
            pattern,
        })
    }

    /// DACM from the coordinate form of the first N elements.
    pub fn evaluate_coords(&self, coords: &[PovmElementCoords<T>]) -> Result<T> {
        let design = design_matrix(coords, &self.pattern)?;
        let w0 = self.moments.averaged_covariance(coords)?;
        dacm(&design, &w0)
    }

    pub fn evaluate(&self, povm: &Povm<T>, basis: &OrthonormalBasis<T>) -> Result<T> {
        let big_n = self.pattern.unknown_count();
        if povm.len() < big_n + 1 {
            return Err(Error::ContractViolation(format!(
                "POVM with {} elements cannot estimate {big_n} parameters",
                povm.len()
            )));
        }
        self.evaluate_coords(&povm.coords(basis, big_n)?)
    }
}
