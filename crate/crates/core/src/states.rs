//! Normal states as block density matrices.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, BlockAlgebra, Projection};
use crate::error::{invalid, Error, Result};
use crate::io::StateWire;
use crate::linalg::{self, CMatrix};
use crate::tol::{EPS_RANK, TOL_EQ, TOL_ZERO};

/// A density matrix `ρ = ⊕ ρ_k` acting as `μ(x) = Σ_k tr(ρ_k x_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateWire", into = "StateWire")]
pub struct NormalState {
    density: AlgebraElement,
}

impl NormalState {
    /// Validates Hermiticity, positivity and normalization, reporting the
    /// first violated condition.
    pub fn new(algebra: &BlockAlgebra, blocks: Vec<CMatrix>) -> Result<Self> {
        Self::from_density(AlgebraElement::new(algebra, blocks)?)
    }

    pub fn from_density(density: AlgebraElement) -> Result<Self> {
        for (k, b) in density.blocks().iter().enumerate() {
            let skew = linalg::op_norm(&(b - b.adjoint()));
            if skew > TOL_EQ {
                return Err(Error::InvalidState(format!(
                    "block {k} is not Hermitian (defect {skew:.3e})"
                )));
            }
        }
        for (k, b) in density.blocks().iter().enumerate() {
            let min = linalg::min_eigenvalue(b);
            if min < -TOL_ZERO {
                return Err(Error::InvalidState(format!(
                    "block {k} is not positive semidefinite (min eigenvalue {min:.3e})"
                )));
            }
        }
        let tr = density.trace();
        if (tr.re - 1.0).abs() > TOL_EQ || tr.im.abs() > TOL_EQ {
            return Err(Error::InvalidState(format!("trace is {} instead of 1", tr.re)));
        }
        Ok(Self {
            density: density.real_part(),
        })
    }

    /// Normalizes a nonzero PSD element to unit trace.
    pub fn from_positive(x: &AlgebraElement) -> Result<Self> {
        let tr = x.trace().re;
        if tr.is_nan() || tr <= 0.0 {
            return Err(invalid("cannot normalize an element with nonpositive trace"));
        }
        Self::from_density(x.scale(1.0 / tr))
    }

    pub(crate) fn from_density_unchecked(density: AlgebraElement) -> Self {
        Self { density }
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        self.density.algebra()
    }

    pub fn density(&self) -> &AlgebraElement {
        &self.density
    }

    pub fn blocks(&self) -> &[CMatrix] {
        self.density.blocks()
    }

    /// Convex combination `Σ t_i μ_i`; weights must be nonnegative and sum to 1.
    pub fn mixture(parts: &[(f64, &NormalState)]) -> Result<Self> {
        let (_, first) = parts.first().ok_or_else(|| invalid("empty mixture"))?;
        let algebra = first.algebra().clone();
        let mut acc = algebra.zero();
        for (t, s) in parts {
            algebra.ensure_same(s.algebra())?;
            if *t < 0.0 {
                return Err(invalid("negative mixture weight"));
            }
            acc = &acc + &s.density.scale(*t);
        }
        Self::from_density(acc)
    }
}

/// `μ(x) = Σ_k tr(ρ_k x_k)`.
pub fn evaluate(state: &NormalState, x: &AlgebraElement) -> Result<Complex64> {
    state.algebra().ensure_same(x.algebra())?;
    Ok(state
        .blocks()
        .iter()
        .zip(x.blocks())
        .map(|(rho, b)| (rho * b).trace())
        .sum())
}

/// Per-block eigen-decompositions of the density and the kernel cut-off
/// `EPS_RANK · λ_max` (global over blocks).
fn spectral_data(state: &NormalState) -> (Vec<(Vec<f64>, CMatrix)>, f64) {
    let decomps: Vec<(Vec<f64>, CMatrix)> = state.blocks().iter().map(linalg::hermitian_eigen).collect();
    let lambda_max = decomps.iter().flat_map(|(v, _)| v.first().copied()).fold(0.0, f64::max);
    (decomps, EPS_RANK * lambda_max)
}

/// `ρ^{1/2}` per block, with the kernel (as seen by [`support_projection`])
/// mapped exactly to zero.
pub(crate) fn sqrt_density(state: &NormalState) -> Vec<CMatrix> {
    let (decomps, cut) = spectral_data(state);
    decomps
        .iter()
        .map(|(values, vectors)| linalg::spectral_function(values, vectors, |l| if l > cut { l.sqrt() } else { 0.0 }))
        .collect()
}

/// Range projection of the density, with eigenvalues below
/// `EPS_RANK · λ_max` treated as kernel.
pub fn support_projection(state: &NormalState) -> Projection {
    let algebra = state.algebra();
    let (decomps, cut) = spectral_data(state);
    let blocks = decomps
        .iter()
        .map(|(values, vectors)| {
            let n = vectors.nrows();
            let mut p = CMatrix::zeros(n, n);
            for (i, &l) in values.iter().enumerate() {
                if l > cut {
                    let v = vectors.column(i);
                    p += v * v.adjoint();
                }
            }
            p
        })
        .collect();
    Projection::new_unchecked(AlgebraElement::from_parts_unchecked(algebra.clone(), blocks))
}

/// Vector state `ω_ξ` supported on one block.
pub fn pure_state(algebra: &BlockAlgebra, block: usize, xi: &[Complex64]) -> Result<NormalState> {
    let n = *algebra
        .block_dims()
        .get(block)
        .ok_or_else(|| invalid(format!("block index {block} out of range")))?;
    if xi.len() != n {
        return Err(invalid(format!(
            "vector has length {}, block has dimension {n}",
            xi.len()
        )));
    }
    let v = DVector::from_column_slice(xi);
    let norm = v.norm();
    if (norm - 1.0).abs() > TOL_EQ {
        return Err(invalid(format!("vector is not a unit vector (norm {norm})")));
    }
    let density = algebra.embed_block(block, linalg::outer(&v))?;
    Ok(NormalState::from_density_unchecked(density))
}

/// Trace-norm distance `‖μ − ν‖`.
pub fn d1(mu: &NormalState, nu: &NormalState) -> Result<f64> {
    mu.algebra().ensure_same(nu.algebra())?;
    Ok(mu
        .blocks()
        .iter()
        .zip(nu.blocks())
        .map(|(a, b)| linalg::hermitian_trace_norm(&(a - b)))
        .sum())
}

/// Membership in the face `F₀(p) = {ν : ν(p) = 0}`.
pub fn in_face_f0(state: &NormalState, p: &Projection) -> Result<bool> {
    Ok(evaluate(state, p.as_element())?.re <= TOL_ZERO)
}

/// Random state `GG*/tr(GG*)` with Ginibre `G`; `rank` defaults to full.
///
/// The requested rank is spread over the blocks at random, so `rank = 1`
/// gives a pure state on one block.
pub fn random_state<R: Rng + ?Sized>(algebra: &BlockAlgebra, rank: Option<usize>, rng: &mut R) -> Result<NormalState> {
    let total = algebra.unit_rank();
    let rank = rank.unwrap_or(total);
    if rank == 0 || rank > total {
        return Err(invalid(format!("rank {rank} outside 1..={total}")));
    }
    let dims = algebra.block_dims();
    let mut block_ranks = vec![0usize; dims.len()];
    for _ in 0..rank {
        let open: Vec<usize> = (0..dims.len()).filter(|&k| block_ranks[k] < dims[k]).collect();
        let k = open[rng.random_range(0..open.len())];
        block_ranks[k] += 1;
    }
    let blocks: Vec<CMatrix> = dims
        .iter()
        .zip(&block_ranks)
        .map(|(&n, &r)| {
            if r == 0 {
                CMatrix::zeros(n, n)
            } else {
                let g = linalg::complex_gaussian(rng, n, r);
                &g * g.adjoint()
            }
        })
        .collect();
    let x = AlgebraElement::from_parts_unchecked(algebra.clone(), blocks);
    NormalState::from_positive(&x)
}

/// Random state whose rank is itself uniform on `1..=Σ n_k`.
pub fn random_state_any_rank<R: Rng + ?Sized>(algebra: &BlockAlgebra, rng: &mut R) -> NormalState {
    let rank = rng.random_range(1..=algebra.unit_rank());
    random_state(algebra, Some(rank), rng).expect("rank in range")
}

/// Random state supported under the projection `p` (`p ≠ 0`).
pub fn random_state_under<R: Rng + ?Sized>(p: &Projection, rng: &mut R) -> Result<NormalState> {
    let algebra = p.algebra();
    let mut frames = Vec::new();
    for (k, b) in p.as_element().blocks().iter().enumerate() {
        let (values, vectors) = linalg::hermitian_eigen(b);
        let r = values.iter().filter(|&&l| l > 0.5).count();
        if r > 0 {
            frames.push((k, vectors.columns(0, r).into_owned()));
        }
    }
    if frames.is_empty() {
        return Err(invalid("cannot place a state under the zero projection"));
    }
    let mut x = algebra.zero();
    let total: usize = frames.iter().map(|(_, f)| f.ncols()).sum();
    let rank = rng.random_range(1..=total);
    for (k, frame) in &frames {
        let g = linalg::complex_gaussian(rng, frame.ncols(), rank.min(frame.ncols()));
        let inner = &g * g.adjoint();
        let m = frame * inner * frame.adjoint();
        x = &x + &algebra.embed_block(*k, m)?;
    }
    NormalState::from_positive(&x)
}

/// Pair of states with orthogonal supports, built from a random orthonormal
/// frame split into two disjoint nonempty pieces. Needs `Σ n_k ≥ 2`.
pub fn random_orthogonal_pair<R: Rng + ?Sized>(
    algebra: &BlockAlgebra,
    rng: &mut R,
) -> Result<(NormalState, NormalState)> {
    let total = algebra.unit_rank();
    if total < 2 {
        return Err(invalid("orthogonal pairs need at least two dimensions"));
    }
    let frames: Vec<CMatrix> = algebra
        .block_dims()
        .iter()
        .map(|&n| linalg::haar_unitary(rng, n))
        .collect();
    let mut slots: Vec<(usize, usize)> = algebra
        .block_dims()
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| (0..n).map(move |i| (k, i)))
        .collect();
    slots.shuffle(rng);
    let size_a = rng.random_range(1..total);
    let size_b = rng.random_range(1..=total - size_a);
    let build = |chosen: &[(usize, usize)], rng: &mut R| -> Result<NormalState> {
        let mut x = algebra.zero();
        for &(k, i) in chosen {
            let w: f64 = rng.random_range(0.05..1.0);
            let v = frames[k].column(i).into_owned();
            x = &x + &algebra.embed_block(k, linalg::outer(&v).scale(w))?;
        }
        NormalState::from_positive(&x)
    };
    let mu = build(&slots[..size_a], rng)?;
    let nu = build(&slots[size_a..size_a + size_b], rng)?;
    Ok((mu, nu))
}
