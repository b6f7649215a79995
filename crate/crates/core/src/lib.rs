//! Approximate degrees of functions on `[-1, 1]`, zero-diagonal tridiagonal
//! witness matrices whose `f(A)` entries realize best-approximation errors,
//! and estimators for entries `<i|f(A)|j>` of sparse Hermitian matrices
//! accessed only through position/entry oracles.
//!
//! Module map:
//!
//! - [`funcspace`]: target functions, Chebyshev polynomials, parity parts.
//! - [`approxdeg`]: Remez exchange, `Val(f, d)`, approximate degree, dual weights.
//! - [`tridiag`]: tridiagonal eigensolver, closed-form entries, inverse
//!   eigenvalue reconstruction.
//! - [`witness`]: witness matrices and lower-bound certificates.
//! - [`sparsemat`]: oracle-access sparse Hermitian matrices with query tallies.
//! - [`estimators`]: exact expansion, random-walk and contour estimators.
//! - [`hardness`]: parity graphs, clock Hamiltonians and Forrelation instances.
//!
//! Data-parallel loops go through [`exec::Exec`]; with the `parallel` feature
//! disabled every path runs sequentially and produces identical output.

pub mod approxdeg;
pub mod dense;
pub mod estimators;
pub mod exec;
pub mod funcspace;
pub mod hardness;
pub mod sparsemat;
pub mod tridiag;
pub mod witness;

pub use approxdeg::{approx_degree, best_approx, dual_weights, BestApprox, DualWeights};
pub use estimators::{EstimateReport, PolySpec};
pub use exec::Exec;
pub use funcspace::{ChebPoly, Parity, TargetFunction};
pub use sparsemat::{QueryCounter, SparseHermitian, SparseOracle, Tally};
pub use tridiag::{SymSpectrum, TridiagMatrix};
pub use witness::WitnessCertificate;

/// Version tag written into every JSON document produced by the crate.
pub const SCHEMA_VERSION: u32 = 1;
