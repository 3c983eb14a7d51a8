//! Search for optimal quantum measurements in state estimation.
//!
//! A measurement (POVM) is scored by DACM, the determinant of the averaged
//! covariance of the linear-inversion estimator over a cluster of states
//! that share a spectrum. [`annealer`] minimizes it by simulated annealing,
//! [`rankone`] refines rank-one candidates over phases, and [`catalog`]
//! holds the analytic optima together with their certification.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the precision for callers that do not care.

pub mod annealer;
pub mod basis;
pub mod catalog;
pub mod error;
pub mod linalg;
pub mod objective;
pub mod povm;
pub mod rankone;
pub mod scalar;
pub mod statespace;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Povm64 = povm::Povm<f64>;
pub type Povm32 = povm::Povm<f32>;
pub type Hermitian64 = linalg::HermitianMatrix<f64>;
pub type Hermitian32 = linalg::HermitianMatrix<f32>;
pub type Basis64 = basis::OrthonormalBasis<f64>;
pub type Basis32 = basis::OrthonormalBasis<f32>;
pub type Pattern64 = basis::ParameterPattern<f64>;
pub type Pattern32 = basis::ParameterPattern<f32>;
pub type Bloch64 = basis::BlochVector<f64>;
pub type Bloch32 = basis::BlochVector<f32>;
pub type Cluster64 = statespace::Cluster<f64>;
pub type Cluster32 = statespace::Cluster<f32>;
pub type AnnealConfig64 = annealer::AnnealConfig<f64>;
pub type AnnealConfig32 = annealer::AnnealConfig<f32>;
pub type Phases64 = rankone::PhaseConfiguration<f64>;
pub type Phases32 = rankone::PhaseConfiguration<f32>;
