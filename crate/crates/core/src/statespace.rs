//! Finite grid over the states compatible with the known parameters,
//! positivity filtering, and clustering by eigenvalue cells.
//!
//! A cluster collects grid states whose sorted spectra fall into the same
//! cells of a uniform partition of `[0, 1]`; it stands in for the unitary
//! orbit of a state restricted to the known-parameter slice.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::basis::{BlochVector, OrthonormalBasis, ParameterPattern};
use crate::error::{Error, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::povm::CONSTRUCTION_TOL;
use crate::scalar::Real;

/// Largest number of candidate points a grid may enumerate.
pub const GRID_BUDGET: f64 = 1e7;
pub const DEFAULT_CELLS: usize = 10;

#[derive(Clone, Debug)]
pub struct GridSpec<T> {
    pub points_per_axis: usize,
    /// Half-width of the symmetric interval sampled on every unknown axis.
    pub bound: T,
    pub pattern: ParameterPattern<T>,
}

impl<T: Real> GridSpec<T> {
    /// Grid with the pure-state radius `√((n−1)/n)` as bound.
    pub fn with_default_bound(points_per_axis: usize, pattern: ParameterPattern<T>, basis: &OrthonormalBasis<T>) -> Self {
        GridSpec {
            points_per_axis,
            bound: basis.pure_state_radius(),
            pattern,
        }
    }

    pub fn candidate_count(&self) -> f64 {
        (self.points_per_axis as f64).powi(self.pattern.unknown_count() as i32)
    }

    /// Axis values `−bound..=bound`; for odd counts the midpoint is exactly 0.
    pub fn axis_values(&self) -> Vec<T> {
        let g = self.points_per_axis;
        let span = T::from_count(g - 1);
        (0..g)
            .map(|k| {
                let num = T::from_count(2 * k) - span;
                self.bound * num / span
            })
            .collect()
    }

    fn check(&self) -> Result<()> {
        if self.points_per_axis < 2 {
            return Err(Error::ContractViolation("points_per_axis must be at least 2".into()));
        }
        if !(self.bound > T::zero() && self.bound.is_finite()) {
            return Err(Error::ContractViolation("grid bound must be positive and finite".into()));
        }
        let points = self.candidate_count();
        if points > GRID_BUDGET {
            return Err(Error::BudgetExceeded {
                points,
                limit: GRID_BUDGET,
            });
        }
        Ok(())
    }
}

/// Enumerates all `g^N` candidates in lexicographic order of the unknown
/// coordinates and keeps those whose state is positive semidefinite.
pub fn generate_grid<T: Real>(spec: &GridSpec<T>, basis: &OrthonormalBasis<T>) -> Result<Vec<BlochVector<T>>> {
    spec.check()?;
    if spec.pattern.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: spec.pattern.dim(),
        });
    }
    let axis = spec.axis_values();
    let g = spec.points_per_axis;
    let big_n = spec.pattern.unknown_count();
    let total = g.pow(big_n as u32);
    let tol = T::tol(CONSTRUCTION_TOL);

    let kept: Vec<Option<BlochVector<T>>> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut coords = vec![T::zero(); big_n];
            for slot in coords.iter_mut().rev() {
                *slot = axis[idx % g];
                idx /= g;
            }
            let theta = spec.pattern.assemble_full_vector(&coords)?;
            let rho = basis.bloch_to_state(&theta)?;
            let ev = hermitian_eigenvalues(&rho)?;
            Ok((*ev.last().expect("nonempty") >= -tol).then_some(theta))
        })
        .collect::<Result<_>>()?;
    Ok(kept.into_iter().flatten().collect())
}

/// Eigenvalue cell signature: `floor(λ·B)` clamped to `[0, B−1]`, over the
/// descending spectrum. `λ = 1` lands in the top cell.
pub fn cell_key<T: Real>(eigenvalues: &[T], cells: usize) -> Vec<usize> {
    let b = T::from_count(cells);
    eigenvalues
        .iter()
        .map(|&l| {
            let c = (l * b).floor();
            if c <= T::zero() {
                0
            } else {
                c.to_usize().unwrap_or(cells - 1).min(cells - 1)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster<T> {
    pub key: Vec<usize>,
    pub members: Vec<BlochVector<T>>,
    pub cell_count: usize,
}

impl<T: Real> Cluster<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

pub type Clusters<T> = BTreeMap<Vec<usize>, Cluster<T>>;

/// Groups states by eigenvalue cell signature. Members keep input order.
pub fn cluster_states<T: Real>(
    states: &[BlochVector<T>],
    cells: usize,
    basis: &OrthonormalBasis<T>,
) -> Result<Clusters<T>> {
    if cells == 0 {
        return Err(Error::ContractViolation("cell count must be at least 1".into()));
    }
    let keys: Vec<Vec<usize>> = states
        .par_iter()
        .map(|theta| {
            let rho = basis.bloch_to_state(theta)?;
            Ok(cell_key(&hermitian_eigenvalues(&rho)?, cells))
        })
        .collect::<Result<_>>()?;

    let mut out: Clusters<T> = BTreeMap::new();
    for (theta, key) in states.iter().zip(keys) {
        out.entry(key.clone())
            .or_insert_with(|| Cluster {
                key,
                members: Vec::new(),
                cell_count: cells,
            })
            .members
            .push(theta.clone());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClusterPolicy<T> {
    /// The cluster sharing the reference state's eigenvalue cells.
    Reference(BlochVector<T>),
    /// The most populated cluster; ties go to the smallest key.
    Largest,
}

pub fn select_cluster<'a, T: Real>(
    clusters: &'a Clusters<T>,
    policy: &ClusterPolicy<T>,
    basis: &OrthonormalBasis<T>,
) -> Result<&'a Cluster<T>> {
    let first = clusters
        .values()
        .next()
        .ok_or_else(|| Error::ContractViolation("no clusters to select from".into()))?;
    match policy {
        ClusterPolicy::Largest => {
            // BTreeMap iterates keys ascending; keep the first maximum.
            let mut best = first;
            for c in clusters.values() {
                if c.len() > best.len() {
                    best = c;
                }
            }
            Ok(best)
        }
        ClusterPolicy::Reference(theta) => {
            let rho = basis.bloch_to_state(theta)?;
            let key = cell_key(&hermitian_eigenvalues(&rho)?, first.cell_count);
            clusters.get(&key).ok_or(Error::EmptyClusterSelection(key))
        }
    }
}
