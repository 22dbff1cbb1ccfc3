//! Jordan *-isomorphisms between block algebras.
//!
//! Every such map is a block permutation followed, on each block, by
//! `x ↦ u x u*` or `x ↦ u xᵀ u*`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{jordan_product, make_algebra, AlgebraElement, BlockAlgebra};
use crate::error::{invalid, Error, Result};
use crate::io::JordanWire;
use crate::linalg::{self, CMatrix};
use crate::linear_map::LinearMap;
use crate::states::{random_state_any_rank, NormalState};
use crate::tol::{ISO_EQ, RESIDUAL, TOL_EQ};

/// `perm[k]` is the target block receiving source block `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JordanWire", into = "JordanWire")]
pub struct JordanIso {
    source: BlockAlgebra,
    target: BlockAlgebra,
    perm: Vec<usize>,
    unitaries: Vec<CMatrix>,
    transposed: Vec<bool>,
}

fn unitary_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    linalg::op_norm(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

impl JordanIso {
    /// Source dimensions are read off the unitaries; the target is
    /// `M_{n_{π⁻¹(0)}} ⊕ …`.
    pub fn from_parts(perm: Vec<usize>, unitaries: Vec<CMatrix>, transposed: Vec<bool>) -> Result<Self> {
        let m = perm.len();
        if unitaries.len() != m || transposed.len() != m {
            return Err(invalid(format!(
                "perm, unitaries and transposed must have equal lengths ({m}, {}, {})",
                unitaries.len(),
                transposed.len()
            )));
        }
        let mut seen = vec![false; m];
        for &p in &perm {
            if p >= m || seen[p] {
                return Err(invalid(format!("{perm:?} is not a permutation of 0..{m}")));
            }
            seen[p] = true;
        }
        let dims: Vec<usize> = unitaries.iter().map(|u| u.nrows()).collect();
        for (k, u) in unitaries.iter().enumerate() {
            if !u.is_square() {
                return Err(invalid(format!("unitary {k} is not square")));
            }
            let defect = unitary_defect(u);
            if defect > TOL_EQ {
                return Err(invalid(format!(
                    "block {k} matrix is not unitary (defect {defect:.3e})"
                )));
            }
        }
        let mut target_dims = vec![0; m];
        for (k, &p) in perm.iter().enumerate() {
            target_dims[p] = dims[k];
        }
        let transposed = transposed.iter().zip(&dims).map(|(&t, &n)| t && n > 1).collect();
        Ok(Self {
            source: make_algebra(&dims)?,
            target: make_algebra(&target_dims)?,
            perm,
            unitaries,
            transposed,
        })
    }

    pub fn identity(algebra: &BlockAlgebra) -> Self {
        let dims = algebra.block_dims();
        Self {
            source: algebra.clone(),
            target: algebra.clone(),
            perm: (0..dims.len()).collect(),
            unitaries: dims.iter().map(|&n| CMatrix::identity(n, n)).collect(),
            transposed: vec![false; dims.len()],
        }
    }

    /// Haar unitaries, random transpose flags, and a random permutation
    /// among blocks of equal dimension (so the target equals the source).
    pub fn random<R: Rng + ?Sized>(algebra: &BlockAlgebra, rng: &mut R) -> Self {
        let dims = algebra.block_dims();
        let mut perm: Vec<usize> = (0..dims.len()).collect();
        let mut classes: Vec<usize> = dims.to_vec();
        classes.sort_unstable();
        classes.dedup();
        for n in classes {
            let slots: Vec<usize> = (0..dims.len()).filter(|&k| dims[k] == n).collect();
            let mut shuffled = slots.clone();
            shuffled.shuffle(rng);
            for (a, b) in slots.iter().zip(shuffled) {
                perm[*a] = b;
            }
        }
        Self {
            source: algebra.clone(),
            target: algebra.clone(),
            perm,
            unitaries: dims.iter().map(|&n| linalg::haar_unitary(rng, n)).collect(),
            transposed: dims.iter().map(|&n| n > 1 && rng.random_bool(0.5)).collect(),
        }
    }

    pub fn source(&self) -> &BlockAlgebra {
        &self.source
    }

    pub fn target(&self) -> &BlockAlgebra {
        &self.target
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn unitaries(&self) -> &[CMatrix] {
        &self.unitaries
    }

    pub fn transposed(&self) -> &[bool] {
        &self.transposed
    }

    /// `x_k ↦ u_k x_k u_k*` (or `u_k x_kᵀ u_k*`) placed in block `perm[k]`.
    pub fn apply(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        self.source.ensure_same(x.algebra())?;
        let mut blocks: Vec<CMatrix> = self.target.block_dims().iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for (k, xk) in x.blocks().iter().enumerate() {
            let u = &self.unitaries[k];
            let inner = if self.transposed[k] { xk.transpose() } else { xk.clone() };
            blocks[self.perm[k]] = u * inner * u.adjoint();
        }
        Ok(AlgebraElement::from_parts_unchecked(self.target.clone(), blocks))
    }

    /// The state `x ↦ μ(Θ(x))` on the source, for `μ` on the target.
    pub fn predual(&self, mu: &NormalState) -> Result<NormalState> {
        self.target.ensure_same(mu.algebra())?;
        let blocks = (0..self.perm.len())
            .map(|k| {
                let u = &self.unitaries[k];
                let rho = u.adjoint() * &mu.blocks()[self.perm[k]] * u;
                if self.transposed[k] {
                    rho.transpose()
                } else {
                    rho
                }
            })
            .collect();
        Ok(NormalState::from_density_unchecked(
            AlgebraElement::from_parts_unchecked(self.source.clone(), blocks).real_part(),
        ))
    }

    /// `predual(inverse(Θ), μ)`, for `μ` on the source.
    pub fn push(&self, mu: &NormalState) -> Result<NormalState> {
        self.inverse().predual(mu)
    }

    pub fn inverse(&self) -> Self {
        let m = self.perm.len();
        let mut perm = vec![0; m];
        let mut unitaries = vec![CMatrix::zeros(0, 0); m];
        let mut transposed = vec![false; m];
        for k in 0..m {
            let j = self.perm[k];
            perm[j] = k;
            // y = u x u*  ⇒ x = u* y u;   y = u xᵀ u*  ⇒ x = uᵀ yᵀ (uᵀ)*
            unitaries[j] = if self.transposed[k] {
                self.unitaries[k].transpose()
            } else {
                self.unitaries[k].adjoint()
            };
            transposed[j] = self.transposed[k];
        }
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
            perm,
            unitaries,
            transposed,
        }
    }

    /// `self ∘ other`, i.e. `x ↦ self(other(x))`.
    pub fn compose(&self, other: &JordanIso) -> Result<JordanIso> {
        self.source.ensure_same(&other.target)?;
        let m = other.perm.len();
        let mut perm = vec![0; m];
        let mut unitaries = Vec::with_capacity(m);
        let mut transposed = Vec::with_capacity(m);
        for (k, &j) in other.perm.iter().enumerate() {
            perm[k] = self.perm[j];
            let (u, s) = (&self.unitaries[j], self.transposed[j]);
            let (v, t) = (&other.unitaries[k], other.transposed[k]);
            // u (v x^t v*)^s u*: transposing v x v* gives v̄ xᵀ vᵀ.
            let w = if s { u * linalg::conj_entries(v) } else { u * v };
            unitaries.push(w);
            transposed.push(s != t);
        }
        Ok(Self {
            source: other.source.clone(),
            target: self.target.clone(),
            perm,
            unitaries,
            transposed,
        })
    }

    /// Equality of actions on all matrix units, within [`ISO_EQ`].
    pub fn approx_eq(&self, other: &JordanIso) -> bool {
        self.action_distance(other).is_some_and(|d| d <= ISO_EQ)
    }

    /// Largest entrywise difference of the two actions on the matrix units;
    /// `None` when the source or target algebras differ.
    pub fn action_distance(&self, other: &JordanIso) -> Option<f64> {
        if self.source != other.source || self.target != other.target {
            return None;
        }
        let mut worst: f64 = 0.0;
        for (k, &n) in self.source.block_dims().iter().enumerate() {
            for j in 0..n {
                for l in 0..n {
                    let e = self.source.matrix_unit(k, j, l);
                    let a = self.apply(&e).ok()?;
                    let b = other.apply(&e).ok()?;
                    for (x, y) in a.blocks().iter().zip(b.blocks()) {
                        worst = worst.max(linalg::max_abs_entry(&(x - y)));
                    }
                }
            }
        }
        Some(worst)
    }

    pub fn to_linear_map(&self) -> LinearMap {
        LinearMap::from_fn(&self.source, &self.target, |x| {
            self.apply(x).expect("basis lies in the source")
        })
        .expect("one image per basis element")
    }

    /// On a single block, the vector map implementing [`predual`](Self::predual)
    /// on pure states: `ξ ↦ u*ξ`, or its entrywise conjugate when transposed.
    pub fn predual_vector(&self, xi: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if self.perm.len() != 1 {
            return Err(invalid("vector maps need a single-block algebra"));
        }
        let u = &self.unitaries[0];
        if xi.len() != u.nrows() {
            return Err(invalid("vector length does not match the block dimension"));
        }
        let v = u.adjoint() * xi;
        Ok(if self.transposed[0] { v.map(|z| z.conj()) } else { v })
    }
}

/// What [`verify_jordan`] found.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JordanReport {
    pub dimension_match: bool,
    pub linear_bijective: bool,
    pub unital: bool,
    pub star_preserving: bool,
    pub squares_preserved: bool,
    pub order_preserving: bool,
    pub min_singular_value: f64,
    pub unital_residual: f64,
    pub star_residual: f64,
    pub square_residual: f64,
    pub order_residual: f64,
    pub samples: usize,
}

impl JordanReport {
    pub fn passed(&self) -> bool {
        self.dimension_match
            && self.linear_bijective
            && self.unital
            && self.star_preserving
            && self.squares_preserved
            && self.order_preserving
    }

    /// Largest algebraic defect (unit, adjoint, squares).
    pub fn residual(&self) -> f64 {
        self.unital_residual.max(self.star_residual).max(self.square_residual)
    }
}

/// Check `L` with [`TOL_EQ`] on 200 random self-adjoint samples.
pub fn verify_jordan<R: Rng + ?Sized>(map: &LinearMap, rng: &mut R) -> Result<JordanReport> {
    verify_jordan_with(map, TOL_EQ, 200, rng)
}

/// [`verify_jordan`] with an explicit tolerance and sample count.
pub fn verify_jordan_with<R: Rng + ?Sized>(
    map: &LinearMap,
    tol: f64,
    samples: usize,
    rng: &mut R,
) -> Result<JordanReport> {
    let a1 = map.source();
    let a2 = map.target();
    let mut report = JordanReport {
        samples,
        ..JordanReport::default()
    };
    if a1.complex_dim() != a2.complex_dim() || a1.unit_rank() != a2.unit_rank() {
        return Ok(report);
    }
    report.dimension_match = true;

    report.min_singular_value = map.singular_values().into_iter().fold(f64::INFINITY, f64::min);
    report.linear_bijective = report.min_singular_value > tol;

    report.unital_residual = map.apply(&a1.identity())?.distance(&a2.identity());
    report.unital = report.unital_residual <= tol;

    report.star_residual = map
        .images()
        .iter()
        .map(|y| y.distance(&y.adjoint()))
        .fold(0.0, f64::max);
    report.star_preserving = report.star_residual <= tol;

    let mut square: f64 = 0.0;
    let mut order: f64 = 0.0;
    for i in 0..samples {
        let x = a1.random_self_adjoint(rng);
        let lx = map.apply(&x)?;
        let lx2 = map.apply(&jordan_product(&x, &x)?)?;
        square = square.max(lx2.distance(&jordan_product(&lx, &lx)?));
        if i % 4 == 0 {
            let rho = random_state_any_rank(a1, rng);
            let image = map.apply(rho.density())?;
            order = order.max(-image.real_part().min_eigenvalue());
        }
    }
    report.square_residual = square;
    report.squares_preserved = square <= tol;
    report.order_residual = order.max(0.0);
    report.order_preserving = report.order_residual <= tol;
    Ok(report)
}

/// Nearest unitary (polar factor) of a square matrix.
fn polar_unitary(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => u * v_t,
        _ => m.clone(),
    }
}

fn fix_phase(u: &mut CMatrix) {
    let pivot = if u.nrows() > 0 && u[(0, 0)].norm() > 1e-8 {
        Some(u[(0, 0)])
    } else {
        (0..u.nrows())
            .flat_map(|r| (0..u.ncols()).map(move |c| (r, c)))
            .map(|(r, c)| u[(r, c)])
            .find(|z| z.norm() > 1e-8)
    };
    if let Some(z) = pivot {
        let phase = z.conj() / z.norm();
        *u *= phase;
    }
}

/// Read a [`JordanIso`] off a map that passed [`verify_jordan`].
///
/// Blocks are matched through the images of the minimal central
/// projections; a block is transposed when `L(E₁₂)L(E₂₁)` is closer to
/// `L(E₂₂)` than to `L(E₁₁)`. The unitary is assembled column by column from
/// the images of `E_a1` (or `E_1a`) and its phase fixed so that the first
/// non-negligible entry in row-major order is real and positive.
pub fn canonicalize(map: &LinearMap) -> Result<JordanIso> {
    let a1 = map.source();
    let a2 = map.target();
    let fail = |msg: String| Error::Canonicalization(msg);
    let m = a1.num_blocks();
    if a2.num_blocks() != m {
        return Err(fail(format!("{a1} and {a2} have different numbers of blocks")));
    }

    let mut perm = vec![usize::MAX; m];
    let mut taken = vec![false; m];
    for (k, c) in a1.minimal_central_projections().iter().enumerate() {
        let image = map.apply(c.as_element())?;
        let n = a1.block_dims()[k];
        let mut found = None;
        for (j, b) in image.blocks().iter().enumerate() {
            let nj = b.nrows();
            let near_one = nj == n && linalg::max_abs_entry(&(b - CMatrix::identity(nj, nj))) <= RESIDUAL;
            let near_zero = linalg::max_abs_entry(b) <= RESIDUAL;
            if near_one && found.is_none() && !taken[j] {
                found = Some(j);
            } else if !near_zero {
                return Err(fail(format!(
                    "image of central projection {k} is not a central projection"
                )));
            }
        }
        let j = found.ok_or_else(|| fail(format!("no target block matches source block {k}")))?;
        taken[j] = true;
        perm[k] = j;
    }

    let mut unitaries = Vec::with_capacity(m);
    let mut transposed = Vec::with_capacity(m);
    for (k, &n) in a1.block_dims().iter().enumerate() {
        let j = perm[k];
        let unit =
            |r: usize, c: usize| -> Result<CMatrix> { Ok(map.apply(&a1.matrix_unit(k, r, c))?.blocks()[j].clone()) };
        if n == 1 {
            unitaries.push(CMatrix::identity(1, 1));
            transposed.push(false);
            continue;
        }
        let e11 = unit(0, 0)?;
        let e22 = unit(1, 1)?;
        let prod = unit(0, 1)? * unit(1, 0)?;
        let t = linalg::max_abs_entry(&(&prod - &e22)) < linalg::max_abs_entry(&(&prod - &e11));

        // L(E₁₁) = u₁u₁*: take its largest column and normalize.
        let col = (0..n)
            .max_by(|&a, &b| e11.column(a).norm().total_cmp(&e11.column(b).norm()))
            .expect("n ≥ 2");
        let norm = e11.column(col).norm();
        if norm <= RESIDUAL {
            return Err(fail(format!("image of E11 in block {k} vanishes")));
        }
        let u1: DVector<Complex64> = e11.column(col) / Complex64::new(norm, 0.0);
        let mut u = CMatrix::zeros(n, n);
        for a in 0..n {
            let e = if t { unit(0, a)? } else { unit(a, 0)? };
            u.set_column(a, &(e * &u1));
        }
        let mut u = polar_unitary(&u);
        fix_phase(&mut u);
        unitaries.push(u);
        transposed.push(t);
    }

    let iso = JordanIso::from_parts(perm, unitaries, transposed)?;
    if iso.target() != a2 {
        return Err(fail("recovered target algebra differs from the map's target".into()));
    }
    let defect = a1
        .hermitian_basis()
        .iter()
        .zip(map.images())
        .map(|(x, y)| iso.apply(x).map(|ix| ix.distance(y)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if defect > RESIDUAL {
        return Err(fail(format!("canonical form misses the map by {defect:.3e}")));
    }
    Ok(iso)
}
