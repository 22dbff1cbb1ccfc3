//! Numerical tolerances shared across the crate.
//!
//! All norms are absolute. Matrix dimensions are assumed desk-scale (a few
//! blocks of size at most 16), where double-precision eigensolvers sit many
//! orders of magnitude below these thresholds.

/// Structural identities (reconstruction of `x` from its spectral data,
/// idempotency of projections, Hermiticity), in operator norm.
pub const TOL_EQ: f64 = 1e-9;

/// Orthogonality of projections, `‖pq‖ ≤ TOL_ZERO`, and PSD slack.
pub const TOL_ZERO: f64 = 1e-10;

/// Eigenvalues closer than this are merged into one eigenprojection.
pub const TOL_CLUSTER: f64 = 1e-8;

/// Support rank cut-off, relative to the largest eigenvalue of a density.
pub const EPS_RANK: f64 = 1e-10;

/// Slack added to the large side of every inequality check.
pub const TOL_INEQ: f64 = 1e-9;

/// Threshold for "this transition probability vanishes".
pub const ZERO_TEST: f64 = 1e-8;

/// Reconstruction residual thresholds (well-definedness, Jordan, pairing).
pub const RESIDUAL: f64 = 1e-7;

/// Two Jordan isomorphisms are equal when their actions on the standard
/// basis agree to this.
pub const ISO_EQ: f64 = 1e-8;
