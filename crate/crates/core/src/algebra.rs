//! Finite-dimensional von Neumann algebras `M_{n_1}(ℂ) ⊕ … ⊕ M_{n_K}(ℂ)`.
//!
//! Elements are stored densely, one complex matrix per block. All values are
//! immutable once built; every operation returns a new value.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::ElementWire;
use crate::linalg::{self, CMatrix, I, ONE};
use crate::tol::{TOL_CLUSTER, TOL_EQ, TOL_ZERO};

/// Block structure of a finite-dimensional von Neumann algebra.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawAlgebra")]
pub struct BlockAlgebra {
    block_dims: Vec<usize>,
}

#[derive(Deserialize)]
struct RawAlgebra {
    block_dims: Vec<i64>,
}

impl TryFrom<RawAlgebra> for BlockAlgebra {
    type Error = Error;

    fn try_from(raw: RawAlgebra) -> Result<Self> {
        let dims = raw
            .block_dims
            .into_iter()
            .map(|d| usize::try_from(d).map_err(|_| invalid(format!("block dimension {d} is negative"))))
            .collect::<Result<Vec<_>>>()?;
        make_algebra(&dims)
    }
}

/// Build a block algebra from its block dimensions.
pub fn make_algebra(block_dims: &[usize]) -> Result<BlockAlgebra> {
    if block_dims.is_empty() {
        return Err(invalid("block_dims must be nonempty"));
    }
    if let Some(k) = block_dims.iter().position(|&n| n == 0) {
        return Err(invalid(format!("block {k} has dimension 0")));
    }
    Ok(BlockAlgebra {
        block_dims: block_dims.to_vec(),
    })
}

impl BlockAlgebra {
    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Complex vector-space dimension `Σ n_k²`.
    pub fn complex_dim(&self) -> usize {
        self.block_dims.iter().map(|n| n * n).sum()
    }

    /// Rank of the identity, `Σ n_k`.
    pub fn unit_rank(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub(crate) fn ensure_same(&self, other: &BlockAlgebra) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch {
                left: self.block_dims.clone(),
                right: other.block_dims.clone(),
            })
        }
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self.block_dims.iter().map(|&n| CMatrix::zeros(n, n)).collect(),
        }
    }

    pub fn identity(&self) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self.block_dims.iter().map(|&n| CMatrix::identity(n, n)).collect(),
        }
    }

    /// Matrix unit `E_{row,col}` inside `block`.
    pub fn matrix_unit(&self, block: usize, row: usize, col: usize) -> AlgebraElement {
        let mut x = self.zero();
        x.blocks[block][(row, col)] = ONE;
        x
    }

    /// Element supported on a single block.
    pub fn embed_block(&self, block: usize, m: CMatrix) -> Result<AlgebraElement> {
        let n = *self
            .block_dims
            .get(block)
            .ok_or_else(|| invalid(format!("block index {block} out of range")))?;
        if m.shape() != (n, n) {
            return Err(invalid(format!("block {block} expects {n}x{n}, got {:?}", m.shape())));
        }
        let mut x = self.zero();
        x.blocks[block] = m;
        Ok(x)
    }

    /// Real orthonormal basis (Hilbert–Schmidt) of the self-adjoint part.
    ///
    /// Per block: `E_jj`, then for `j < l` the pair `(E_jl + E_lj)/√2`,
    /// `i(E_jl − E_lj)/√2`. Its length is `complex_dim()`.
    pub fn hermitian_basis(&self) -> Vec<AlgebraElement> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut basis = Vec::with_capacity(self.complex_dim());
        for (k, &n) in self.block_dims.iter().enumerate() {
            for j in 0..n {
                basis.push(self.matrix_unit(k, j, j));
            }
            for j in 0..n {
                for l in (j + 1)..n {
                    let mut re = self.zero();
                    re.blocks[k][(j, l)] = Complex64::new(s, 0.0);
                    re.blocks[k][(l, j)] = Complex64::new(s, 0.0);
                    basis.push(re);
                    let mut im = self.zero();
                    im.blocks[k][(j, l)] = I * s;
                    im.blocks[k][(l, j)] = -I * s;
                    basis.push(im);
                }
            }
        }
        basis
    }

    /// Coordinates of a self-adjoint element in [`hermitian_basis`](Self::hermitian_basis).
    pub fn hermitian_coords(&self, x: &AlgebraElement) -> Vec<f64> {
        let s = std::f64::consts::SQRT_2;
        let mut out = Vec::with_capacity(self.complex_dim());
        for (k, &n) in self.block_dims.iter().enumerate() {
            let b = &x.blocks[k];
            for j in 0..n {
                out.push(b[(j, j)].re);
            }
            for j in 0..n {
                for l in (j + 1)..n {
                    let z = (b[(j, l)] + b[(l, j)].conj()) * 0.5;
                    out.push(s * z.re);
                    out.push(s * z.im);
                }
            }
        }
        out
    }

    /// Inverse of [`hermitian_coords`](Self::hermitian_coords).
    pub fn from_hermitian_coords(&self, coords: &[f64]) -> AlgebraElement {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut x = self.zero();
        let mut it = coords.iter().copied();
        for (k, &n) in self.block_dims.iter().enumerate() {
            let b = &mut x.blocks[k];
            for j in 0..n {
                b[(j, j)] = Complex64::new(it.next().unwrap_or(0.0), 0.0);
            }
            for j in 0..n {
                for l in (j + 1)..n {
                    let re = it.next().unwrap_or(0.0);
                    let im = it.next().unwrap_or(0.0);
                    let z = Complex64::new(re, im) * s;
                    b[(j, l)] = z;
                    b[(l, j)] = z.conj();
                }
            }
        }
        x
    }

    /// One projection per block: the identity on block `k`, zero elsewhere.
    pub fn minimal_central_projections(&self) -> Vec<Projection> {
        (0..self.num_blocks())
            .map(|k| {
                let n = self.block_dims[k];
                Projection(self.embed_block(k, CMatrix::identity(n, n)).expect("block in range"))
            })
            .collect()
    }

    /// Self-adjoint element with independent Gaussian entries (GUE-like per block).
    pub fn random_self_adjoint<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self
                .block_dims
                .iter()
                .map(|&n| linalg::hermitian_part(&linalg::complex_gaussian(rng, n, n)))
                .collect(),
        }
    }

    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        AlgebraElement {
            algebra: self.clone(),
            blocks: self
                .block_dims
                .iter()
                .map(|&n| linalg::complex_gaussian(rng, n, n))
                .collect(),
        }
    }
}

impl fmt::Display for BlockAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.block_dims.iter().map(|n| format!("M{n}")).collect();
        write!(f, "{}", parts.join("⊕"))
    }
}

/// Block-diagonal complex matrix living in a [`BlockAlgebra`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElementWire", into = "ElementWire")]
pub struct AlgebraElement {
    algebra: BlockAlgebra,
    blocks: Vec<CMatrix>,
}

impl AlgebraElement {
    pub fn new(algebra: &BlockAlgebra, blocks: Vec<CMatrix>) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(invalid(format!(
                "expected {} blocks, got {}",
                algebra.num_blocks(),
                blocks.len()
            )));
        }
        for (k, (b, &n)) in blocks.iter().zip(algebra.block_dims()).enumerate() {
            if b.shape() != (n, n) {
                return Err(invalid(format!("block {k} expects {n}x{n}, got {:?}", b.shape())));
            }
            if b.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(invalid(format!("block {k} has a non-finite entry")));
            }
        }
        Ok(Self {
            algebra: algebra.clone(),
            blocks,
        })
    }

    /// Build an element, inferring the algebra from the block shapes.
    pub fn from_blocks(blocks: Vec<CMatrix>) -> Result<Self> {
        let dims = blocks
            .iter()
            .enumerate()
            .map(|(k, b)| {
                if b.is_square() {
                    Ok(b.nrows())
                } else {
                    Err(invalid(format!("block {k} is not square: {:?}", b.shape())))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let algebra = make_algebra(&dims)?;
        Self::new(&algebra, blocks)
    }

    pub(crate) fn from_parts_unchecked(algebra: BlockAlgebra, blocks: Vec<CMatrix>) -> Self {
        Self { algebra, blocks }
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CMatrix {
        &self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<CMatrix> {
        self.blocks
    }

    pub fn map_blocks(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(f).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        self.map_blocks(|b| b.adjoint())
    }

    pub fn transpose(&self) -> Self {
        self.map_blocks(|b| b.transpose())
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_blocks(|b| b.scale(c))
    }

    pub fn scale_complex(&self, c: Complex64) -> Self {
        self.map_blocks(|b| b * c)
    }

    /// Operator norm: the largest singular value over all blocks.
    pub fn op_norm(&self) -> f64 {
        self.blocks.iter().map(linalg::op_norm).fold(0.0, f64::max)
    }

    /// Hilbert–Schmidt norm.
    pub fn hs_norm(&self) -> f64 {
        self.blocks.iter().map(|b| b.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        self.blocks.iter().map(linalg::trace).sum()
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| linalg::op_norm(&(b - b.adjoint())) <= tol)
    }

    /// `(x + x*)/2`.
    pub fn real_part(&self) -> Self {
        self.map_blocks(linalg::hermitian_part)
    }

    /// `(x − x*)/(2i)`, so that `x = re + i·im` with both parts self-adjoint.
    pub fn imag_part(&self) -> Self {
        self.map_blocks(|b| (b - b.adjoint()) * Complex64::new(0.0, -0.5))
    }

    /// Minimum eigenvalue over all blocks of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(linalg::min_eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }

    /// Distance to `other` in operator norm; panics on algebra mismatch.
    pub fn distance(&self, other: &Self) -> f64 {
        (self - other).op_norm()
    }
}

fn zip_blocks(a: &AlgebraElement, b: &AlgebraElement, f: impl Fn(&CMatrix, &CMatrix) -> CMatrix) -> AlgebraElement {
    assert_eq!(a.algebra, b.algebra, "algebra mismatch in element arithmetic");
    AlgebraElement {
        algebra: a.algebra.clone(),
        blocks: a.blocks.iter().zip(&b.blocks).map(|(x, y)| f(x, y)).collect(),
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: Self) -> AlgebraElement {
        zip_blocks(self, rhs, |x, y| x + y)
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: Self) -> AlgebraElement {
        zip_blocks(self, rhs, |x, y| x - y)
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: Self) -> AlgebraElement {
        zip_blocks(self, rhs, |x, y| x * y)
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.map_blocks(|b| -b)
    }
}

/// Symmetrized product `(ab + ba)/2`.
pub fn jordan_product(a: &AlgebraElement, b: &AlgebraElement) -> Result<AlgebraElement> {
    a.algebra.ensure_same(&b.algebra)?;
    Ok(zip_blocks(a, b, |x, y| (x * y + y * x).scale(0.5)))
}

/// A self-adjoint idempotent.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection(AlgebraElement);

impl Projection {
    /// Validates `p = p*` and `p² = p` within [`TOL_EQ`].
    pub fn new(p: AlgebraElement) -> Result<Self> {
        if !p.is_self_adjoint(TOL_EQ) {
            return Err(invalid("projection is not self-adjoint"));
        }
        let defect = (&(&p * &p) - &p).op_norm();
        if defect > TOL_EQ {
            return Err(invalid(format!("projection is not idempotent (defect {defect:.3e})")));
        }
        Ok(Self(p))
    }

    pub(crate) fn new_unchecked(p: AlgebraElement) -> Self {
        Self(p)
    }

    pub fn zero(algebra: &BlockAlgebra) -> Self {
        Self(algebra.zero())
    }

    /// Projection onto the span of the given orthonormal columns of `block`.
    #[cfg(test)]
    pub(crate) fn from_columns(algebra: &BlockAlgebra, block: usize, cols: &CMatrix) -> Self {
        Self(
            algebra
                .embed_block(block, cols * cols.adjoint())
                .expect("block in range"),
        )
    }

    pub fn as_element(&self) -> &AlgebraElement {
        &self.0
    }

    pub fn into_element(self) -> AlgebraElement {
        self.0
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        self.0.algebra()
    }

    /// Rank, read off the trace.
    pub fn rank(&self) -> usize {
        self.0.trace().re.round().max(0.0) as usize
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }
}

/// `true` iff `‖pq‖ ≤ TOL_ZERO`.
pub fn are_orthogonal(p: &Projection, q: &Projection) -> Result<bool> {
    orthogonal_within(p, q, TOL_ZERO)
}

/// Orthogonality test with an explicit threshold on `‖pq‖`.
pub fn orthogonal_within(p: &Projection, q: &Projection, tol: f64) -> Result<bool> {
    p.algebra().ensure_same(q.algebra())?;
    Ok((p.as_element() * q.as_element()).op_norm() <= tol)
}

/// Free-function form of [`BlockAlgebra::minimal_central_projections`].
pub fn minimal_central_projections(algebra: &BlockAlgebra) -> Vec<Projection> {
    algebra.minimal_central_projections()
}

/// One term `r · p` of a spectral decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralTerm {
    pub value: f64,
    pub projection: Projection,
}

/// `x = Σ r_k p_k` with strictly decreasing `r_k` and orthogonal `p_k` summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    terms: Vec<SpectralTerm>,
}

impl SpectralDecomposition {
    pub fn terms(&self) -> &[SpectralTerm] {
        &self.terms
    }

    pub fn resum(&self, algebra: &BlockAlgebra) -> AlgebraElement {
        self.terms.iter().fold(algebra.zero(), |acc, t| {
            &acc + &t.projection.as_element().scale(t.value)
        })
    }
}

/// Spectral decomposition of a self-adjoint element.
///
/// Eigenvalues of all blocks are pooled and sorted; neighbours closer than
/// [`TOL_CLUSTER`] are merged, and the cluster mean becomes the eigenvalue.
pub fn spectral_decompose(x: &AlgebraElement) -> Result<SpectralDecomposition> {
    if !x.is_self_adjoint(TOL_EQ) {
        return Err(invalid("spectral_decompose needs a self-adjoint element"));
    }
    let algebra = x.algebra();
    // (eigenvalue, block, eigenvector)
    let mut pooled: Vec<(f64, usize, DVector<Complex64>)> = Vec::new();
    for (k, b) in x.blocks().iter().enumerate() {
        let (values, vectors) = linalg::hermitian_eigen(b);
        for (i, v) in values.into_iter().enumerate() {
            pooled.push((v, k, vectors.column(i).into_owned()));
        }
    }
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut terms = Vec::new();
    let mut start = 0;
    while start < pooled.len() {
        let mut end = start + 1;
        while end < pooled.len() && pooled[end - 1].0 - pooled[end].0 <= TOL_CLUSTER {
            end += 1;
        }
        let cluster = &pooled[start..end];
        let value = cluster.iter().map(|c| c.0).sum::<f64>() / cluster.len() as f64;
        let mut blocks: Vec<CMatrix> = algebra.block_dims().iter().map(|&n| CMatrix::zeros(n, n)).collect();
        for (_, k, v) in cluster {
            blocks[*k] += v * v.adjoint();
        }
        terms.push(SpectralTerm {
            value,
            projection: Projection(AlgebraElement::from_parts_unchecked(algebra.clone(), blocks)),
        });
        start = end;
    }
    Ok(SpectralDecomposition { terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_iterator(values.len(), values.iter().map(|&v| c(v))))
    }

    fn single(m: CMatrix) -> AlgebraElement {
        AlgebraElement::from_blocks(vec![m]).unwrap()
    }

    #[test]
    fn make_algebra_examples() {
        assert_eq!(make_algebra(&[2]).unwrap().complex_dim(), 4);
        assert_eq!(make_algebra(&[1, 1]).unwrap().num_blocks(), 2);
        assert_eq!(make_algebra(&[2, 3]).unwrap().complex_dim(), 13);
        assert!(matches!(make_algebra(&[]), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_algebra(&[2, 0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn algebra_json_rejects_negative_dims() {
        assert!(serde_json::from_str::<BlockAlgebra>(r#"{"block_dims":[2,-1]}"#).is_err());
        let a: BlockAlgebra = serde_json::from_str(r#"{"block_dims":[2,3]}"#).unwrap();
        assert_eq!(a.block_dims(), &[2, 3]);
    }

    #[test]
    fn jordan_product_examples() {
        let a = make_algebra(&[2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = a.random_element(&mut rng);
        assert!(jordan_product(&a.identity(), &b).unwrap().distance(&b) < 1e-14);

        let d = single(diag(&[1.0, 2.0]));
        assert_eq!(jordan_product(&d, &d).unwrap(), single(diag(&[1.0, 4.0])));

        // E12 E21 = E11, E21 E12 = E22
        let e12 = a.matrix_unit(0, 0, 1);
        let e21 = a.matrix_unit(0, 1, 0);
        assert_eq!(jordan_product(&e12, &e21).unwrap(), single(diag(&[0.5, 0.5])));
    }

    #[test]
    fn jordan_product_rejects_mismatch() {
        let a = make_algebra(&[2]).unwrap();
        let b = make_algebra(&[1, 1]).unwrap();
        assert!(matches!(
            jordan_product(&a.identity(), &b.identity()),
            Err(Error::AlgebraMismatch { .. })
        ));
    }

    #[test]
    fn spectral_examples() {
        let x = single(diag(&[3.0, 3.0, -1.0]));
        let sd = spectral_decompose(&x).unwrap();
        assert_eq!(sd.terms().len(), 2);
        assert_eq!(sd.terms()[0].value, 3.0);
        assert_eq!(sd.terms()[0].projection.as_element(), &single(diag(&[1.0, 1.0, 0.0])));
        assert_eq!(sd.terms()[1].value, -1.0);
        assert_eq!(sd.terms()[1].projection.as_element(), &single(diag(&[0.0, 0.0, 1.0])));

        let id = make_algebra(&[3]).unwrap().identity();
        let sd = spectral_decompose(&id).unwrap();
        assert_eq!(sd.terms().len(), 1);
        assert_eq!(sd.terms()[0].value, 1.0);
        assert_eq!(sd.terms()[0].projection.as_element(), &id);

        // [[0,1],[1,0]]: ±1 with projections ½[[1,±1],[±1,1]]
        let x = single(CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]));
        let sd = spectral_decompose(&x).unwrap();
        let plus = single(CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.5), c(0.5), c(0.5)]));
        let minus = single(CMatrix::from_row_slice(2, 2, &[c(0.5), c(-0.5), c(-0.5), c(0.5)]));
        assert!((sd.terms()[0].value - 1.0).abs() < 1e-14);
        assert!((sd.terms()[1].value + 1.0).abs() < 1e-14);
        assert!(sd.terms()[0].projection.as_element().distance(&plus) < 1e-12);
        assert!(sd.terms()[1].projection.as_element().distance(&minus) < 1e-12);
    }

    #[test]
    fn spectral_rejects_non_self_adjoint() {
        let a = make_algebra(&[2]).unwrap();
        assert!(matches!(
            spectral_decompose(&a.matrix_unit(0, 0, 1)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn spectral_merges_across_blocks() {
        let x = AlgebraElement::from_blocks(vec![diag(&[2.0, 1.0]), diag(&[2.0 + 1e-12])]).unwrap();
        let sd = spectral_decompose(&x).unwrap();
        assert_eq!(sd.terms().len(), 2);
        assert_eq!(sd.terms()[0].projection.rank(), 2);
    }

    #[test]
    fn orthogonality_examples() {
        let a = make_algebra(&[2]).unwrap();
        let p = Projection::new(single(diag(&[1.0, 0.0]))).unwrap();
        let q = Projection::new(single(diag(&[0.0, 1.0]))).unwrap();
        assert!(are_orthogonal(&p, &q).unwrap());
        assert!(!are_orthogonal(&p, &p).unwrap());

        let r = Projection::new(single(CMatrix::from_row_slice(2, 2, &[c(0.5), c(0.5), c(0.5), c(0.5)]))).unwrap();
        // ‖p r‖ = ½·√2
        let prod = (p.as_element() * r.as_element()).op_norm();
        assert!((prod - 0.5 * 2f64.sqrt()).abs() < 1e-14);
        assert!(!are_orthogonal(&p, &r).unwrap());

        let other = Projection::zero(&make_algebra(&[1, 1]).unwrap());
        assert!(are_orthogonal(&p, &other).is_err());
        assert!(Projection::new(a.matrix_unit(0, 0, 1)).is_err());
    }

    #[test]
    fn central_projection_examples() {
        let a = make_algebra(&[2, 3]).unwrap();
        let c = minimal_central_projections(&a);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].rank(), 2);
        assert_eq!(c[1].rank(), 3);
        assert_eq!(
            minimal_central_projections(&make_algebra(&[4]).unwrap())[0].as_element(),
            &make_algebra(&[4]).unwrap().identity()
        );
        let c3 = minimal_central_projections(&make_algebra(&[1, 1, 1]).unwrap());
        assert_eq!(c3.len(), 3);
    }

    #[test]
    fn hermitian_basis_is_orthonormal_and_coords_roundtrip() {
        let a = make_algebra(&[2, 3]).unwrap();
        let basis = a.hermitian_basis();
        assert_eq!(basis.len(), a.complex_dim());
        for (i, x) in basis.iter().enumerate() {
            assert!(x.is_self_adjoint(0.0));
            for (j, y) in basis.iter().enumerate() {
                let ip: Complex64 = x
                    .blocks()
                    .iter()
                    .zip(y.blocks())
                    .map(|(p, q)| linalg::hs_dot(p, q))
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip.re - expect).abs() < 1e-14 && ip.im.abs() < 1e-14);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = a.random_self_adjoint(&mut rng);
        let back = a.from_hermitian_coords(&a.hermitian_coords(&x));
        assert!(back.distance(&x) < 1e-13);
    }

    fn shapes() -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(1usize..4, 1..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn spectral_resum_reproduces(dims in shapes(), seed in any::<u64>()) {
            let a = make_algebra(&dims).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = a.random_self_adjoint(&mut rng);
            let sd = spectral_decompose(&x).unwrap();
            prop_assert!(sd.resum(&a).distance(&x) <= TOL_EQ);
            prop_assert!(sd.terms().windows(2).all(|w| w[0].value > w[1].value));
            for (i, s) in sd.terms().iter().enumerate() {
                for t in &sd.terms()[i + 1..] {
                    prop_assert!((s.projection.as_element() * t.projection.as_element()).op_norm() <= TOL_EQ);
                }
            }
            let total = sd.terms().iter().fold(a.zero(), |acc, t| &acc + t.projection.as_element());
            prop_assert!(total.distance(&a.identity()) <= TOL_EQ);
        }

        #[test]
        fn jordan_square_is_matrix_square(dims in shapes(), seed in any::<u64>()) {
            let a = make_algebra(&dims).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = a.random_self_adjoint(&mut rng);
            prop_assert!(jordan_product(&x, &x).unwrap().distance(&(&x * &x)) <= 1e-12);
        }

        #[test]
        fn orthogonality_is_symmetric(n in 2usize..6, split in 1usize..5, seed in any::<u64>()) {
            let split = split.min(n - 1);
            let a = make_algebra(&[n]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = linalg::haar_unitary(&mut rng, n);
            let p = Projection::from_columns(&a, 0, &u.columns(0, split).into_owned());
            let q = Projection::from_columns(&a, 0, &u.columns(split, n - split).into_owned());
            prop_assert!(are_orthogonal(&p, &q).unwrap());
            prop_assert!(are_orthogonal(&q, &p).unwrap());
        }

        #[test]
        fn central_projections_partition_unity(dims in shapes()) {
            let a = make_algebra(&dims).unwrap();
            let c = a.minimal_central_projections();
            let sum = c.iter().fold(a.zero(), |acc, p| &acc + p.as_element());
            prop_assert_eq!(sum, a.identity());
            for i in 0..c.len() {
                for j in 0..c.len() {
                    if i != j {
                        prop_assert!(are_orthogonal(&c[i], &c[j]).unwrap());
                    }
                }
            }
        }
    }
}
