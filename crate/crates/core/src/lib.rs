//! Transition probabilities on the normal state space of a finite direct
//! sum of matrix algebras, and reconstruction of Jordan *-isomorphisms from
//! state maps that preserve them.
//!
//! ```
//! use transprob::{make_algebra, p_r, p_u, NormalState};
//! use num_complex::Complex64;
//! use nalgebra::DMatrix;
//!
//! let a = make_algebra(&[2]).unwrap();
//! let c = |x: f64| Complex64::new(x, 0.0);
//! let mixed = NormalState::new(&a, vec![DMatrix::from_diagonal_element(2, 2, c(0.5))]).unwrap();
//! let pure = NormalState::new(&a, vec![DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)])]).unwrap();
//! assert!((p_u(&mixed, &pure).unwrap() - 0.5).abs() < 1e-12);
//! assert!((p_r(&mixed, &pure).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
//! ```

pub mod algebra;
pub mod cli;
pub mod error;
pub mod io;
pub mod jordan;
pub(crate) mod linalg;
pub mod linear_map;
pub mod reconstruct;
pub mod selftest;
pub mod standard_form;
pub mod states;
pub mod tol;
pub mod transition;

pub use algebra::{
    are_orthogonal, jordan_product, make_algebra, minimal_central_projections, spectral_decompose, AlgebraElement,
    BlockAlgebra, Projection, SpectralDecomposition, SpectralTerm,
};
pub use error::{Error, Result};
pub use io::{parse_algebra, parse_cone_vector, parse_element, parse_jordan_iso, parse_map_spec, parse_state, MapSpec};
pub use jordan::{canonicalize, verify_jordan, JordanIso, JordanReport};
pub use linalg::CMatrix;
pub use linear_map::LinearMap;
pub use reconstruct::{
    audit_preserver, classify, counterexample_map, ortho_lift, reconstruct_from_p0, reconstruct_from_pr,
    reconstruct_wigner, PreserverReport, ReconstructionReport, StateMapOracle, Verdict,
};
pub use standard_form::{
    cone_decompose, embed, extend_cone_isometry, hs_inner, j_operator, ConeDecomposition, ConeVector,
};
pub use states::{d1, evaluate, in_face_f0, pure_state, random_state, support_projection, NormalState};
pub use transition::{audit_pair, d2, d_b, p0, p_r, p_u, PairReport};
