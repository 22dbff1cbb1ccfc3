//! The Hilbert–Schmidt standard form of a block algebra.
//!
//! `ℌ = ⊕_k HS(ℂ^{n_k})` with `⟨ξ, η⟩ = Σ_k tr(η_k* ξ_k)`, the cone `𝔓` of
//! positive semidefinite blocks, `J = ` blockwise adjoint, and the algebra
//! acting by left multiplication. A state `μ` with density `ρ` is
//! represented by `ξ_μ = ρ^{1/2}`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{AlgebraElement, BlockAlgebra};
use crate::error::{invalid, Error, Result};
use crate::io::ConeWire;
use crate::linalg::{self, CMatrix};
use crate::linear_map::LinearMap;
use crate::states::{self, random_state_any_rank, NormalState};
use crate::tol::{TOL_EQ, TOL_ZERO};

/// A vector of `ℌ`, with a cached cone-membership flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConeWire", into = "ConeWire")]
pub struct ConeVector {
    element: AlgebraElement,
    in_cone: bool,
}

fn is_psd_element(x: &AlgebraElement) -> bool {
    x.blocks()
        .iter()
        .all(|b| linalg::max_abs_entry(&(b - b.adjoint())) <= TOL_ZERO && linalg::min_eigenvalue(b) >= -TOL_ZERO)
}

impl ConeVector {
    pub fn from_element(element: AlgebraElement) -> Self {
        let in_cone = is_psd_element(&element);
        Self { element, in_cone }
    }

    pub fn in_cone(&self) -> bool {
        self.in_cone
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        self.element.algebra()
    }

    pub fn blocks(&self) -> &[CMatrix] {
        self.element.blocks()
    }

    pub fn as_element(&self) -> &AlgebraElement {
        &self.element
    }

    pub fn into_element(self) -> AlgebraElement {
        self.element
    }

    pub fn norm(&self) -> f64 {
        self.element.hs_norm()
    }

    /// The vector functional `x ↦ ⟨xξ, ξ⟩`.
    pub fn vector_functional(&self, x: &AlgebraElement) -> Result<Complex64> {
        hs_inner(&ConeVector::from_element(x * &self.element), self)
    }

    /// `ω_ξ / ‖ξ‖²`, i.e. the state with density `ξξ*/‖ξ‖²`.
    pub fn normalized_state(&self) -> Result<NormalState> {
        let density = &self.element * &self.element.adjoint();
        NormalState::from_positive(&density.real_part())
    }
}

/// `ξ_μ = ρ^{1/2}`.
pub fn embed(mu: &NormalState) -> ConeVector {
    let blocks = states::sqrt_density(mu);
    ConeVector {
        element: AlgebraElement::from_parts_unchecked(mu.algebra().clone(), blocks),
        in_cone: true,
    }
}

/// `⟨ξ, η⟩ = Σ_k tr(η_k* ξ_k)`, linear in `ξ`.
pub fn hs_inner(xi: &ConeVector, eta: &ConeVector) -> Result<Complex64> {
    xi.algebra().ensure_same(eta.algebra())?;
    Ok(xi
        .blocks()
        .iter()
        .zip(eta.blocks())
        .map(|(a, b)| linalg::hs_dot(b, a))
        .sum())
}

/// Modular conjugation `J`: blockwise adjoint.
pub fn j_operator(xi: &ConeVector) -> ConeVector {
    ConeVector {
        element: xi.element.adjoint(),
        in_cone: xi.in_cone,
    }
}

/// `ξ = ξ⁺ − ξ⁻` with `ξ^±` in the cone and orthogonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeDecomposition {
    pub positive_part: ConeVector,
    pub negative_part: ConeVector,
}

impl ConeDecomposition {
    pub fn recompose(&self) -> ConeVector {
        ConeVector::from_element(self.positive_part.as_element() - self.negative_part.as_element())
    }
}

/// Positive and negative spectral parts of a Hermitian vector.
pub fn cone_decompose(xi: &ConeVector) -> Result<ConeDecomposition> {
    if !xi.as_element().is_self_adjoint(TOL_EQ) {
        return Err(invalid("cone_decompose needs Hermitian blocks"));
    }
    let mut pos = Vec::with_capacity(xi.blocks().len());
    let mut neg = Vec::with_capacity(xi.blocks().len());
    for b in xi.blocks() {
        let (values, vectors) = linalg::hermitian_eigen(b);
        pos.push(linalg::spectral_function(&values, &vectors, |l| l.max(0.0)));
        neg.push(linalg::spectral_function(&values, &vectors, |l| (-l).max(0.0)));
    }
    let algebra = xi.algebra().clone();
    let part = |blocks| ConeVector {
        element: AlgebraElement::from_parts_unchecked(algebra.clone(), blocks),
        in_cone: true,
    };
    Ok(ConeDecomposition {
        positive_part: part(pos),
        negative_part: part(neg),
    })
}

/// For a Hermitian vector outside the cone, a rank-one cone vector `η`
/// (an eigenprojection) with `⟨ξ, η⟩ < −TOL_ZERO`. `None` when every
/// eigenprojection pairs nonnegatively, i.e. `ξ` is in the cone.
pub fn duality_witness(xi: &ConeVector) -> Result<Option<ConeVector>> {
    if !xi.as_element().is_self_adjoint(TOL_EQ) {
        return Err(invalid("duality_witness needs Hermitian blocks"));
    }
    let algebra = xi.algebra();
    for (k, b) in xi.blocks().iter().enumerate() {
        let (values, vectors) = linalg::hermitian_eigen(b);
        for (i, &l) in values.iter().enumerate() {
            if l < -TOL_ZERO {
                let v = vectors.column(i).into_owned();
                let eta = ConeVector::from_element(algebra.embed_block(k, linalg::outer(&v))?);
                return Ok(Some(eta));
            }
        }
    }
    Ok(None)
}

/// Random cone vector: `c·ξ_μ` for a random state of random rank and a
/// scale `c ∈ (0, 2]`.
pub fn random_cone_vector<R: Rng + ?Sized>(algebra: &BlockAlgebra, rng: &mut R) -> ConeVector {
    let mu = random_state_any_rank(algebra, rng);
    let c = 2.0 * (1.0 - rng.random::<f64>());
    let xi = embed(&mu);
    ConeVector {
        element: xi.element.scale(c),
        in_cone: true,
    }
}

/// Outcome of [`extend_cone_isometry`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtensionReport {
    pub dimension_match: bool,
    pub isometric: bool,
    pub max_metric_defect: f64,
    pub decomposition_consistent: bool,
    pub max_decomposition_defect: f64,
    pub samples: usize,
    pub surjectivity_checked: bool,
}

impl ExtensionReport {
    pub fn ok(&self) -> bool {
        self.dimension_match && self.isometric && self.decomposition_consistent
    }
}

/// The real-linear extension `φ̃` together with its report. `map` is `None`
/// when the dimensions differ.
#[derive(Clone, Debug)]
pub struct ConeExtension {
    pub map: Option<LinearMap>,
    pub report: ExtensionReport,
}

impl ConeExtension {
    /// Complexification `φ̄(ξ) = φ̃(Re ξ) + i·φ̃(Im ξ)`.
    pub fn complexified(&self, xi: &ConeVector) -> Result<ConeVector> {
        let map = self
            .map
            .as_ref()
            .ok_or_else(|| invalid("no extension was constructed"))?;
        Ok(ConeVector::from_element(map.apply(xi.as_element())?))
    }
}

fn checked_call(
    phi: &mut impl FnMut(&ConeVector) -> Result<ConeVector>,
    xi: ConeVector,
    target: &BlockAlgebra,
) -> Result<AlgebraElement> {
    let out = phi(&xi)?;
    target.ensure_same(out.algebra())?;
    if !is_psd_element(out.as_element()) {
        return Err(Error::ContractViolation(
            "cone map returned a vector outside the cone".into(),
        ));
    }
    Ok(out.into_element())
}

/// Extend a map `φ: 𝔓₁ → 𝔓₂` to a real-linear map on self-adjoint vectors
/// by evaluating it on a PSD spanning set, then measure on `samples` random
/// inputs whether the extension is isometric and agrees with
/// `φ(ξ⁺) − φ(ξ⁻)`.
pub fn extend_cone_isometry<R: Rng + ?Sized>(
    mut phi: impl FnMut(&ConeVector) -> Result<ConeVector>,
    a1: &BlockAlgebra,
    a2: &BlockAlgebra,
    samples: usize,
    rng: &mut R,
) -> Result<ConeExtension> {
    let mut report = ExtensionReport {
        samples,
        ..ExtensionReport::default()
    };
    if a1.complex_dim() != a2.complex_dim() {
        return Ok(ConeExtension { map: None, report });
    }
    report.dimension_match = true;

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let half = Complex64::new(0.5, 0.0);
    let mut images = Vec::with_capacity(a1.complex_dim());
    for (k, &n) in a1.block_dims().iter().enumerate() {
        let psd = |m: CMatrix| -> Result<ConeVector> { Ok(ConeVector::from_element(a1.embed_block(k, m)?)) };
        for j in 0..n {
            images.push(checked_call(
                &mut phi,
                psd(unit(n, j, j, Complex64::new(1.0, 0.0)))?,
                a2,
            )?);
        }
        for j in 0..n {
            for l in (j + 1)..n {
                let diag = unit(n, j, j, half) + unit(n, l, l, half);
                for off in [Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.5)] {
                    // ½(E_jj + E_ll) ± ½(c E_jl + c̄ E_lj), c ∈ {1, i}
                    let sym = unit(n, j, l, off) + unit(n, l, j, off.conj());
                    let plus = checked_call(&mut phi, psd(&diag + &sym)?, a2)?;
                    let minus = checked_call(&mut phi, psd(&diag - &sym)?, a2)?;
                    images.push((&plus - &minus).scale(s));
                }
            }
        }
    }
    let map = LinearMap::new(a1, a2, images)?;

    let mut metric: f64 = 0.0;
    let mut decomposition: f64 = 0.0;
    for _ in 0..samples {
        let xi = random_cone_vector(a1, rng);
        let eta = random_cone_vector(a1, rng);
        let fxi = checked_call(&mut phi, xi.clone(), a2)?;
        let feta = checked_call(&mut phi, eta.clone(), a2)?;
        let d_in = (xi.as_element() - eta.as_element()).hs_norm();
        let d_out = (&fxi - &feta).hs_norm();
        metric = metric.max((d_in - d_out).abs()).max((xi.norm() - fxi.hs_norm()).abs());

        let h = a1.random_self_adjoint(rng);
        let lh = map.apply(&h)?;
        metric = metric.max((lh.hs_norm() - h.hs_norm()).abs());

        decomposition = decomposition.max(map.apply(xi.as_element())?.distance(&fxi));
        let parts = cone_decompose(&ConeVector::from_element(h))?;
        let fp = checked_call(&mut phi, parts.positive_part, a2)?;
        let fm = checked_call(&mut phi, parts.negative_part, a2)?;
        decomposition = decomposition.max(lh.distance(&(&fp - &fm)));
    }
    report.max_metric_defect = metric;
    report.isometric = metric <= TOL_EQ;
    report.max_decomposition_defect = decomposition;
    report.decomposition_consistent = decomposition <= TOL_EQ;
    Ok(ConeExtension { map: Some(map), report })
}

fn unit(n: usize, j: usize, l: usize, c: Complex64) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(j, l)] = c;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::make_algebra;
    use crate::linalg::I;
    use crate::transition::p_r;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| Complex64::new(v, 0.0)),
        ))
    }

    fn vector(m: CMatrix) -> ConeVector {
        ConeVector::from_element(AlgebraElement::from_blocks(vec![m]).unwrap())
    }

    fn state(m: CMatrix) -> NormalState {
        NormalState::from_density(AlgebraElement::from_blocks(vec![m]).unwrap()).unwrap()
    }

    #[test]
    fn embed_diagonal() {
        let xi = embed(&state(diag(&[0.25, 0.75])));
        assert!(xi.in_cone());
        assert!((xi.blocks()[0][(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((xi.blocks()[0][(1, 1)].re - 0.75f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn embed_fixes_projections() {
        let rho = CMatrix::from_element(2, 2, Complex64::new(0.5, 0.0));
        // oracle: ρ² = ρ, so ρ^{1/2} = ρ
        assert!(linalg::max_abs_entry(&(&rho * &rho - &rho)) < 1e-15);
        let xi = embed(&state(rho.clone()));
        assert!(linalg::max_abs_entry(&(&xi.blocks()[0] - &rho)) < 1e-12);
    }

    #[test]
    fn embed_reproduces_state() {
        let a = make_algebra(&[2, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mu = random_state_any_rank(&a, &mut rng);
            let xi = embed(&mu);
            assert!((xi.norm() - 1.0).abs() < TOL_EQ);
            let x = a.random_element(&mut rng);
            let lhs = xi.vector_functional(&x).unwrap();
            let rhs = states::evaluate(&mu, &x).unwrap();
            assert!((lhs - rhs).norm() < TOL_EQ);
        }
    }

    #[test]
    fn inner_product_examples() {
        let e1 = vector(diag(&[1.0, 0.0]));
        let e2 = vector(diag(&[0.0, 1.0]));
        assert_eq!(hs_inner(&e1, &e1).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(hs_inner(&e1, &e2).unwrap(), Complex64::new(0.0, 0.0));
        let v = hs_inner(&embed(&state(diag(&[0.5, 0.5]))), &embed(&state(diag(&[1.0, 0.0])))).unwrap();
        assert!((v.re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let other = ConeVector::from_element(make_algebra(&[3]).unwrap().identity());
        assert!(hs_inner(&e1, &other).is_err());
    }

    #[test]
    fn j_examples() {
        let mut e12 = CMatrix::zeros(2, 2);
        e12[(0, 1)] = Complex64::new(1.0, 0.0);
        let j = j_operator(&vector(e12.clone()));
        assert_eq!(j.blocks()[0], e12.transpose());
        let i_id = vector(CMatrix::identity(2, 2) * I);
        assert_eq!(j_operator(&i_id).blocks()[0], CMatrix::identity(2, 2) * -I);
        let xi = embed(&state(diag(&[0.3, 0.7])));
        assert_eq!(j_operator(&xi), xi);
    }

    #[test]
    fn decompose_examples() {
        let d = cone_decompose(&vector(diag(&[3.0, -4.0]))).unwrap();
        assert!(linalg::max_abs_entry(&(&d.positive_part.blocks()[0] - diag(&[3.0, 0.0]))) < 1e-14);
        assert!(linalg::max_abs_entry(&(&d.negative_part.blocks()[0] - diag(&[0.0, 4.0]))) < 1e-14);
        assert!((d.positive_part.norm().powi(2) + d.negative_part.norm().powi(2) - 25.0).abs() < 1e-12);

        let x = CMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0].map(|v| Complex64::new(v, 0.0)));
        let d = cone_decompose(&vector(x)).unwrap();
        let plus = CMatrix::from_element(2, 2, Complex64::new(0.5, 0.0));
        let minus = CMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5].map(|v| Complex64::new(v, 0.0)));
        assert!(linalg::max_abs_entry(&(&d.positive_part.blocks()[0] - plus)) < 1e-12);
        assert!(linalg::max_abs_entry(&(&d.negative_part.blocks()[0] - minus)) < 1e-12);

        let xi = embed(&state(diag(&[0.3, 0.7])));
        let d = cone_decompose(&xi).unwrap();
        assert_eq!(d.positive_part.as_element(), xi.as_element());
        assert_eq!(d.negative_part.norm(), 0.0);

        let mut skew = CMatrix::zeros(2, 2);
        skew[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(cone_decompose(&vector(skew)).is_err());
    }

    #[test]
    fn axiom_four_on_samples() {
        // a·ξ·a* stays in the cone: a a^t (𝔓) ⊆ 𝔓 with a^t = J a J.
        let a = make_algebra(&[2, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let x = a.random_element(&mut rng);
            let xi = random_cone_vector(&a, &mut rng);
            let image = ConeVector::from_element(&(&x * xi.as_element()) * &x.adjoint());
            assert!(image.in_cone());
        }
    }

    #[test]
    fn extension_of_identity_and_transpose() {
        let a = make_algebra(&[2, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ext = extend_cone_isometry(|x: &ConeVector| Ok(x.clone()), &a, &a, 30, &mut rng).unwrap();
        assert!(ext.report.ok(), "{:?}", ext.report);
        assert!(!ext.report.surjectivity_checked);
        let x = a.random_element(&mut rng);
        assert!(ext.map.as_ref().unwrap().apply(&x).unwrap().distance(&x) < 1e-12);

        let ext = extend_cone_isometry(
            |x: &ConeVector| Ok(ConeVector::from_element(x.as_element().transpose())),
            &a,
            &a,
            30,
            &mut rng,
        )
        .unwrap();
        assert!(ext.report.ok(), "{:?}", ext.report);
        let x = a.random_element(&mut rng);
        let xi = ConeVector::from_element(x.clone());
        assert!(ext.complexified(&xi).unwrap().as_element().distance(&x.transpose()) < 1e-12);
    }

    #[test]
    fn extension_rejects_scaling_and_bad_maps() {
        let a = make_algebra(&[2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ext = extend_cone_isometry(
            |x: &ConeVector| Ok(ConeVector::from_element(x.as_element().scale(2.0))),
            &a,
            &a,
            10,
            &mut rng,
        )
        .unwrap();
        assert!(!ext.report.isometric);
        assert!(ext.report.max_metric_defect > 0.1);

        let neg = extend_cone_isometry(
            |x: &ConeVector| Ok(ConeVector::from_element(x.as_element().scale(-1.0))),
            &a,
            &a,
            10,
            &mut rng,
        );
        assert!(matches!(neg, Err(Error::ContractViolation(_))));

        let b = make_algebra(&[3]).unwrap();
        let ext = extend_cone_isometry(|x: &ConeVector| Ok(x.clone()), &a, &b, 10, &mut rng).unwrap();
        assert!(ext.map.is_none());
        assert!(!ext.report.dimension_match);
    }

    #[test]
    fn isometric_extension_is_affine() {
        let a = make_algebra(&[1, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ext = extend_cone_isometry(
            |x: &ConeVector| Ok(ConeVector::from_element(x.as_element().transpose())),
            &a,
            &a,
            10,
            &mut rng,
        )
        .unwrap();
        let map = ext.map.unwrap();
        for _ in 0..20 {
            let t: f64 = rng.random();
            let xi = random_cone_vector(&a, &mut rng);
            let eta = random_cone_vector(&a, &mut rng);
            let mix = &xi.as_element().scale(t) + &eta.as_element().scale(1.0 - t);
            let lhs = map.apply(&mix).unwrap();
            let rhs =
                &map.apply(xi.as_element()).unwrap().scale(t) + &map.apply(eta.as_element()).unwrap().scale(1.0 - t);
            assert!(lhs.distance(&rhs) < TOL_EQ);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn embed_matches_p_r(seed in any::<u64>(), shape in 0usize..3) {
            let dims: &[usize] = [&[2][..], &[1, 2][..], &[3, 2][..]][shape];
            let a = make_algebra(dims).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = random_state_any_rank(&a, &mut rng);
            let nu = random_state_any_rank(&a, &mut rng);
            let ip = hs_inner(&embed(&mu), &embed(&nu)).unwrap();
            prop_assert!((ip.re - p_r(&mu, &nu).unwrap()).abs() <= 1e-10);
            prop_assert!(ip.im.abs() <= 1e-10);
        }

        #[test]
        fn pythagoras_and_idempotence(seed in any::<u64>()) {
            let a = make_algebra(&[3, 2]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xi = ConeVector::from_element(a.random_self_adjoint(&mut rng));
            let d = cone_decompose(&xi).unwrap();
            let split = xi.norm().powi(2) - d.positive_part.norm().powi(2) - d.negative_part.norm().powi(2);
            prop_assert!(split.abs() <= 1e-9);
            prop_assert!(hs_inner(&d.positive_part, &d.negative_part).unwrap().norm() <= TOL_ZERO);
            prop_assert!(d.recompose().as_element().distance(xi.as_element()) <= TOL_EQ);
            let again = cone_decompose(&d.recompose()).unwrap();
            prop_assert!(again.positive_part.as_element().distance(d.positive_part.as_element()) <= TOL_EQ);
            prop_assert!(again.negative_part.as_element().distance(d.negative_part.as_element()) <= TOL_EQ);
        }

        #[test]
        fn self_duality(seed in any::<u64>()) {
            let a = make_algebra(&[2, 3]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let xi = random_cone_vector(&a, &mut rng);
            let eta = random_cone_vector(&a, &mut rng);
            let v = hs_inner(&xi, &eta).unwrap();
            prop_assert!(v.re >= -TOL_ZERO && v.im.abs() <= TOL_ZERO);
            prop_assert!(duality_witness(&xi).unwrap().is_none());
            let h = ConeVector::from_element(a.random_self_adjoint(&mut rng));
            if !h.in_cone() {
                let w = duality_witness(&h).unwrap().expect("witness for a non-PSD vector");
                prop_assert!(w.in_cone());
                prop_assert!(hs_inner(&h, &w).unwrap().re < -TOL_ZERO);
            }
        }

        #[test]
        fn j_is_involutive_and_antilinear(seed in any::<u64>(), re in -2.0f64..2.0, im in -2.0f64..2.0) {
            let a = make_algebra(&[2, 2]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = ConeVector::from_element(a.random_element(&mut rng));
            let twice = j_operator(&j_operator(&x));
            prop_assert_eq!(twice.as_element(), x.as_element());
            let c = Complex64::new(re, im);
            let lhs = j_operator(&ConeVector::from_element(x.as_element().scale_complex(c)));
            let rhs = j_operator(&x).as_element().scale_complex(c.conj());
            prop_assert!(lhs.as_element().distance(&rhs) <= 1e-12);
        }
    }
}
