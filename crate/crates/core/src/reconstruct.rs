//! Recovering a Jordan *-isomorphism from a state bijection, plus the
//! segment-swapping counterexample and property audits of state maps.
//!
//! Convention: for `Φ: 𝔖(M₁) → 𝔖(M₂)` the reconstructed `Θ: M₂ → M₁`
//! satisfies `Φ = predual(Θ, ·)`. The report also carries
//! `forward_map = Θ⁻¹: M₁ → M₂`, which acts on densities the way `Φ` does.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{orthogonal_within, spectral_decompose, AlgebraElement, BlockAlgebra, Projection};
use crate::error::{invalid, Error, Result};
use crate::jordan::{canonicalize, verify_jordan_with, JordanIso, JordanReport};
use crate::linalg::{self, CMatrix};
use crate::linear_map::LinearMap;
use crate::standard_form::{embed, extend_cone_isometry, ConeVector, ExtensionReport};
use crate::states::{
    self, d1, evaluate, random_orthogonal_pair, random_state_any_rank, random_state_under, support_projection,
    NormalState,
};
use crate::tol::{EPS_RANK, ISO_EQ, RESIDUAL, TOL_CLUSTER, ZERO_TEST};
use crate::transition::{p0, p_r, p_u};

pub type StateFn = dyn Fn(&NormalState) -> Result<NormalState> + Send + Sync;
pub type VectorFn = dyn Fn(&DVector<Complex64>) -> Result<DVector<Complex64>> + Send + Sync;

/// A state map `Φ: 𝔖(source) → 𝔖(target)`, optionally with its inverse.
///
/// `reentrant` declares that `forward` may be called from several threads
/// at once; audits only parallelize when it is set.
#[derive(Clone)]
pub struct StateMapOracle {
    source: BlockAlgebra,
    target: BlockAlgebra,
    forward: Arc<StateFn>,
    backward: Option<Arc<StateFn>>,
    label: String,
    reentrant: bool,
}

impl fmt::Debug for StateMapOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateMapOracle")
            .field("source", &self.source)
            .field("target", &self.target)
            .field("label", &self.label)
            .field("has_backward", &self.backward.is_some())
            .field("reentrant", &self.reentrant)
            .finish()
    }
}

impl StateMapOracle {
    pub fn new(
        source: &BlockAlgebra,
        target: &BlockAlgebra,
        label: impl Into<String>,
        forward: impl Fn(&NormalState) -> Result<NormalState> + Send + Sync + 'static,
    ) -> Self {
        Self {
            source: source.clone(),
            target: target.clone(),
            forward: Arc::new(forward),
            backward: None,
            label: label.into(),
            reentrant: false,
        }
    }

    pub fn with_backward(
        mut self,
        backward: impl Fn(&NormalState) -> Result<NormalState> + Send + Sync + 'static,
    ) -> Self {
        self.backward = Some(Arc::new(backward));
        self
    }

    pub fn reentrant(mut self, yes: bool) -> Self {
        self.reentrant = yes;
        self
    }

    pub fn identity(algebra: &BlockAlgebra) -> Self {
        Self::new(algebra, algebra, "identity", |mu| Ok(mu.clone()))
            .with_backward(|mu| Ok(mu.clone()))
            .reentrant(true)
    }

    /// `Φ = predual(Θ, ·): 𝔖(Θ.target) → 𝔖(Θ.source)`, with `push` as inverse.
    pub fn from_jordan_predual(theta: &JordanIso) -> Self {
        let fwd = theta.clone();
        let bwd = theta.clone();
        Self::new(theta.target(), theta.source(), "jordan predual", move |mu| {
            fwd.predual(mu)
        })
        .with_backward(move |mu| bwd.push(mu))
        .reentrant(true)
    }

    pub fn source(&self) -> &BlockAlgebra {
        &self.source
    }

    pub fn target(&self) -> &BlockAlgebra {
        &self.target
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_backward(&self) -> bool {
        self.backward.is_some()
    }

    pub fn is_reentrant(&self) -> bool {
        self.reentrant
    }

    fn call(f: &StateFn, mu: &NormalState, from: &BlockAlgebra, to: &BlockAlgebra, what: &str) -> Result<NormalState> {
        from.ensure_same(mu.algebra())?;
        let out = f(mu)?;
        if out.algebra() != to {
            return Err(Error::ContractViolation(format!(
                "{what} map returned a state on {} instead of {to}",
                out.algebra()
            )));
        }
        NormalState::from_density(out.density().clone())
            .map_err(|e| Error::ContractViolation(format!("{what} map returned an invalid state: {e}")))
    }

    /// `Φ(μ)`, with the output validated as a state on the target.
    pub fn forward(&self, mu: &NormalState) -> Result<NormalState> {
        Self::call(&*self.forward, mu, &self.source, &self.target, "forward")
    }

    /// `Φ⁻¹(ν)` when an inverse was supplied.
    pub fn backward(&self, nu: &NormalState) -> Option<Result<NormalState>> {
        self.backward
            .as_ref()
            .map(|b| Self::call(&**b, nu, &self.target, &self.source, "backward"))
    }

    /// Largest `‖Φ⁻¹(Φ(μ)) − μ‖₁` over `samples` random states.
    pub fn inverse_defect<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<Option<f64>> {
        if self.backward.is_none() {
            return Ok(None);
        }
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let mu = random_state_any_rank(&self.source, rng);
            let back = self.backward(&self.forward(&mu)?).expect("checked above")?;
            worst = worst.max(d1(&back, &mu)?);
        }
        Ok(Some(worst))
    }
}

/// `Φ̌(p) = s_{Φ(p / tr p)}`, and `Φ̌(0) = 0`.
pub fn ortho_lift(phi: &StateMapOracle, p: &Projection) -> Result<Projection> {
    phi.source.ensure_same(p.algebra())?;
    let tr = p.as_element().trace().re;
    if tr < 0.5 {
        return Ok(Projection::zero(&phi.target));
    }
    let mu = NormalState::from_density_unchecked(p.as_element().scale(1.0 / tr));
    Ok(support_projection(&phi.forward(&mu)?))
}

/// Knobs shared by the reconstruction routines.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructOptions {
    /// Seeds every sampled check.
    pub seed: u64,
    /// Threshold for all three residuals.
    pub residual_tol: f64,
    /// Number of `(state, observable)` probes per residual.
    pub samples: usize,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            residual_tol: RESIDUAL,
            samples: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub mode: String,
    /// `Θ` with `Φ = predual(Θ, ·)`.
    pub result: Option<JordanIso>,
    /// `Θ⁻¹`, the map acting on densities like `Φ`.
    pub forward_map: Option<JordanIso>,
    pub well_definedness_residual: Option<f64>,
    pub jordan_residual: Option<f64>,
    pub pairing_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_audit_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension_consistency_residual: Option<f64>,
    pub failure_reason: Option<String>,
    pub caveats: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jordan_check: Option<JordanReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cone_extension: Option<ExtensionReport>,
}

impl ReconstructionReport {
    fn new(mode: &str) -> Self {
        Self {
            mode: mode.to_string(),
            ..Self::default()
        }
    }

    fn fail(mut self, reason: impl Into<String>) -> Self {
        self.result = None;
        self.forward_map = None;
        if self.failure_reason.is_none() {
            self.failure_reason = Some(reason.into());
        }
        self
    }

    pub fn succeeded(&self) -> bool {
        self.result.is_some()
    }
}

fn sorted_dims(a: &BlockAlgebra) -> Vec<usize> {
    let mut d = a.block_dims().to_vec();
    d.sort_unstable();
    d
}

/// Probe states: random states of every rank interleaved with diagonal
/// mixtures `t·e_a + (1−t)·e_b` of two unit coordinates. The latter matter
/// because maps that only misbehave on such segments leave a random sample
/// untouched.
fn probe_states<R: Rng + ?Sized>(algebra: &BlockAlgebra, count: usize, rng: &mut R) -> Vec<NormalState> {
    const GRID: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
    (0..count)
        .map(|i| {
            if i % 2 == 0 {
                return random_state_any_rank(algebra, rng);
            }
            let t = if i / 2 < GRID.len() {
                GRID[i / 2]
            } else {
                rng.random_range(0.01..0.99)
            };
            coordinate_mixture(algebra, t, rng).unwrap_or_else(|| random_state_any_rank(algebra, rng))
        })
        .collect()
}

/// `(block, index)` of every diagonal coordinate.
fn coordinates(algebra: &BlockAlgebra) -> Vec<(usize, usize)> {
    algebra
        .block_dims()
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| (0..n).map(move |j| (k, j)))
        .collect()
}

/// Pick two diagonal coordinates: half of the time the first two of a block
/// of dimension ≥ 2, otherwise any two distinct ones.
fn coordinate_pair<R: Rng + ?Sized>(algebra: &BlockAlgebra, rng: &mut R) -> Option<((usize, usize), (usize, usize))> {
    let coords = coordinates(algebra);
    if coords.len() < 2 {
        return None;
    }
    let big: Vec<usize> = (0..algebra.num_blocks())
        .filter(|&k| algebra.block_dims()[k] >= 2)
        .collect();
    if !big.is_empty() && rng.random_bool(0.5) {
        let k = big[rng.random_range(0..big.len())];
        return Some(((k, 0), (k, 1)));
    }
    let a = rng.random_range(0..coords.len());
    let mut b = rng.random_range(0..coords.len() - 1);
    if b >= a {
        b += 1;
    }
    Some((coords[a], coords[b]))
}

fn diagonal_state(algebra: &BlockAlgebra, weights: &[((usize, usize), f64)]) -> NormalState {
    let mut blocks: Vec<CMatrix> = algebra.block_dims().iter().map(|&n| CMatrix::zeros(n, n)).collect();
    for &((k, j), w) in weights {
        blocks[k][(j, j)] += Complex64::new(w, 0.0);
    }
    NormalState::from_density_unchecked(AlgebraElement::from_parts_unchecked(algebra.clone(), blocks))
}

fn coordinate_mixture<R: Rng + ?Sized>(algebra: &BlockAlgebra, t: f64, rng: &mut R) -> Option<NormalState> {
    let (a, b) = coordinate_pair(algebra, rng)?;
    Some(diagonal_state(algebra, &[(a, t), (b, 1.0 - t)]))
}

/// Random self-adjoint observables of operator norm 1, interleaved with
/// diagonal matrix units.
fn probe_observable<R: Rng + ?Sized>(algebra: &BlockAlgebra, i: usize, rng: &mut R) -> AlgebraElement {
    if i % 3 == 2 {
        let coords = coordinates(algebra);
        let (k, j) = coords[rng.random_range(0..coords.len())];
        return algebra.matrix_unit(k, j, j);
    }
    let x = algebra.random_self_adjoint(rng);
    let n = x.op_norm();
    if n > 0.0 {
        x.scale(1.0 / n)
    } else {
        x
    }
}

/// Residual checks of a candidate `Λ: M₁ → M₂` against `Φ`, then inversion,
/// Jordan verification and canonicalization.
fn finish_from_lambda(
    phi: &StateMapOracle,
    lambda: &LinearMap,
    mut report: ReconstructionReport,
    options: &ReconstructOptions,
    rng: &mut ChaCha8Rng,
) -> Result<ReconstructionReport> {
    let (a1, a2) = (&phi.source, &phi.target);

    // ν(Λx) = Φ⁻¹(ν)(x)
    if phi.has_backward() {
        let mut worst: f64 = 0.0;
        for (i, nu) in probe_states(a2, options.samples, rng).into_iter().enumerate() {
            let x = probe_observable(a1, i, rng);
            let lhs = evaluate(&nu, &lambda.apply(&x)?)?;
            let back = phi.backward(&nu).expect("has backward")?;
            worst = worst.max((lhs - evaluate(&back, &x)?).norm());
        }
        report.well_definedness_residual = Some(worst);
    } else {
        report
            .caveats
            .push("well-definedness not checked: no inverse map supplied".to_string());
    }

    // Φ(μ)(Λx) = μ(x)
    let mut worst: f64 = 0.0;
    for (i, mu) in probe_states(a1, options.samples, rng).into_iter().enumerate() {
        let x = probe_observable(a1, i, rng);
        let lhs = evaluate(&phi.forward(&mu)?, &lambda.apply(&x)?)?;
        worst = worst.max((lhs - evaluate(&mu, &x)?).norm());
    }
    report.pairing_residual = Some(worst);

    let Some(theta) = lambda.inverse(options.residual_tol) else {
        return Ok(report.fail("not injective on self-adjoints"));
    };
    let check = verify_jordan_with(&theta, options.residual_tol, 200, rng)?;
    report.jordan_residual = Some(check.residual());
    let passed = check.passed();
    report.jordan_check = Some(check);
    if !passed {
        return Ok(report.fail("extension not Jordan"));
    }
    let iso = match canonicalize(&theta) {
        Ok(iso) => iso,
        Err(e) => return Ok(report.fail(format!("canonicalization failed: {e}"))),
    };

    let tol = options.residual_tol;
    let checks = [
        ("well-definedness", report.well_definedness_residual),
        ("jordan", report.jordan_residual),
        ("pairing", report.pairing_residual),
    ];
    for (name, value) in checks {
        if let Some(v) = value {
            if v.is_nan() || v > tol {
                return Ok(report.fail(format!("{name} residual {v:.3e} exceeds {tol:.1e}")));
            }
        }
    }
    report.forward_map = Some(iso.inverse());
    report.result = Some(iso);
    Ok(report)
}

fn profile_mismatch(phi: &StateMapOracle, mode: &str) -> Option<ReconstructionReport> {
    (sorted_dims(&phi.source) != sorted_dims(&phi.target)).then(|| {
        ReconstructionReport::new(mode).fail(format!("dimension profiles differ: {} vs {}", phi.source, phi.target))
    })
}

/// Reconstruction from a `P₀`-preserving bijection, with default options.
pub fn reconstruct_from_p0(phi: &StateMapOracle) -> Result<ReconstructionReport> {
    reconstruct_from_p0_with(phi, &ReconstructOptions::default())
}

/// Lift `Φ` to projections, extend by `Φ̌(x) = Σ r_k Φ̌(p_k)` over the
/// Hermitian basis, and read off `Θ = Φ̌⁻¹`.
pub fn reconstruct_from_p0_with(phi: &StateMapOracle, options: &ReconstructOptions) -> Result<ReconstructionReport> {
    if let Some(r) = profile_mismatch(phi, "p0") {
        return Ok(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut images = Vec::with_capacity(phi.source.complex_dim());
    for x in phi.source.hermitian_basis() {
        let mut y = phi.target.zero();
        for term in spectral_decompose(&x)?.terms() {
            if term.value.abs() > TOL_CLUSTER {
                y = &y + &ortho_lift(phi, &term.projection)?.as_element().scale(term.value);
            }
        }
        images.push(y);
    }
    let lambda = LinearMap::new(&phi.source, &phi.target, images)?;
    finish_from_lambda(phi, &lambda, ReconstructionReport::new("p0"), options, &mut rng)
}

/// Reconstruction from a `P_R`-preserving bijection, with default options.
pub fn reconstruct_from_pr(phi: &StateMapOracle) -> Result<ReconstructionReport> {
    reconstruct_from_pr_with(phi, &ReconstructOptions::default())
}

/// Cone map `φ(c·ξ_μ) = c·ξ_{Φ(μ)}`, extended linearly and complexified.
/// In the Hilbert–Schmidt model that extension is itself `Θ⁻¹`.
pub fn reconstruct_from_pr_with(phi: &StateMapOracle, options: &ReconstructOptions) -> Result<ReconstructionReport> {
    if let Some(r) = profile_mismatch(phi, "pr") {
        return Ok(r);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let cone_map = |xi: &ConeVector| -> Result<ConeVector> {
        let norm = xi.norm();
        if norm <= f64::EPSILON {
            return Ok(ConeVector::from_element(phi.target.zero()));
        }
        let mu = xi.normalized_state()?;
        Ok(ConeVector::from_element(
            embed(&phi.forward(&mu)?).as_element().scale(norm),
        ))
    };
    let extension = extend_cone_isometry(cone_map, &phi.source, &phi.target, 32, &mut rng)?;
    let mut report = ReconstructionReport::new("pr");
    report.cone_extension = Some(extension.report.clone());
    report
        .caveats
        .push("surjectivity of the cone map is not checked".to_string());
    let Some(lambda) = extension.map.filter(|_| extension.report.ok()) else {
        return Ok(report.fail("P_R not preserved"));
    };
    finish_from_lambda(phi, &lambda, report, options, &mut rng)
}

/// Orthonormal basis of `range(P)` (rank `r`) obtained by Gram–Schmidt on
/// `P e_j`, in index order or reversed.
fn deterministic_basis(p: &CMatrix, rank: usize, reverse: bool) -> Vec<DVector<Complex64>> {
    let n = p.nrows();
    let order: Vec<usize> = if reverse {
        (0..n).rev().collect()
    } else {
        (0..n).collect()
    };
    let mut basis: Vec<DVector<Complex64>> = Vec::with_capacity(rank);
    let mut used = vec![false; n];
    for threshold in [0.5, 1e-3, 1e-9] {
        for &j in &order {
            if basis.len() == rank {
                return basis;
            }
            if used[j] {
                continue;
            }
            let mut v: DVector<Complex64> = p.column(j).into_owned();
            for w in &basis {
                let c = w.dotc(&v);
                v -= w * c;
            }
            let norm = v.norm();
            if norm > threshold {
                used[j] = true;
                basis.push(v / Complex64::new(norm, 0.0));
            }
        }
    }
    basis
}

/// `Φ̄(ρ) = Σ t_i ω_{Φp(ξ_i)}` over a spectral decomposition of `ρ`.
fn wigner_extend(phi: &VectorFn, rho: &CMatrix, reverse: bool) -> Result<CMatrix> {
    let n = rho.nrows();
    let (values, vectors) = linalg::hermitian_eigen(rho);
    let cut = EPS_RANK * values.first().copied().unwrap_or(0.0).max(0.0);
    let mut out = CMatrix::zeros(n, n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end - 1] - values[end] <= TOL_CLUSTER {
            end += 1;
        }
        let t = values[start..end].iter().sum::<f64>() / (end - start) as f64;
        if t > cut {
            let cols = vectors.columns(start, end - start);
            let p = cols * cols.adjoint();
            for xi in deterministic_basis(&p, end - start, reverse) {
                let w = phi(&xi)?;
                if w.len() != n {
                    return Err(Error::ContractViolation("pure-state map changed the dimension".into()));
                }
                out += linalg::outer(&w) * Complex64::new(t, 0.0);
            }
        }
        start = end;
    }
    Ok(out)
}

/// Largest `| |⟨Φξ,Φη⟩|² − |⟨ξ,η⟩|² |` (and norm defect of `Φξ`) over
/// random, orthogonal and coincident pairs of unit vectors.
fn transition_audit<R: Rng + ?Sized>(phi: &VectorFn, n: usize, pairs: usize, rng: &mut R) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let basis = |j: usize| {
        let mut e = DVector::zeros(n);
        e[j] = Complex64::new(1.0, 0.0);
        e
    };
    for i in 0..pairs {
        let (xi, eta) = match i % 4 {
            0 => (basis(i / 4 % n), basis((i / 4 + 1) % n)),
            1 => {
                let u = linalg::haar_unitary(rng, n);
                (u.column(0).into_owned(), u.column(1).into_owned())
            }
            2 => {
                let v = linalg::random_unit_vector(rng, n);
                (v.clone(), v)
            }
            _ => (linalg::random_unit_vector(rng, n), linalg::random_unit_vector(rng, n)),
        };
        let (fx, fe) = (phi(&xi)?, phi(&eta)?);
        if fx.len() != n || fe.len() != n {
            return Err(Error::ContractViolation("pure-state map changed the dimension".into()));
        }
        worst = worst
            .max((fx.norm() - 1.0).abs())
            .max((fe.norm() - 1.0).abs())
            .max((fx.dotc(&fe).norm_sqr() - xi.dotc(&eta).norm_sqr()).abs());
    }
    Ok(worst)
}

/// States used for the two-ordering re-check: random full-rank states,
/// normalized projections and states with a repeated eigenvalue.
fn degenerate_probe<R: Rng + ?Sized>(n: usize, i: usize, rng: &mut R) -> CMatrix {
    let u = linalg::haar_unitary(rng, n);
    let mut d = vec![0.0; n];
    match i % 3 {
        0 => d.iter_mut().for_each(|x| *x = rng.random::<f64>() + 0.05),
        1 => {
            let r = 1 + i / 3 % n;
            d[..r].iter_mut().for_each(|x| *x = 1.0);
        }
        _ => {
            let a = rng.random::<f64>() + 0.1;
            d.iter_mut()
                .enumerate()
                .for_each(|(j, x)| *x = if j < 2 { a } else { rng.random::<f64>() });
        }
    }
    let total: f64 = d.iter().sum();
    let diag = CMatrix::from_diagonal(&DVector::from_iterator(
        n,
        d.iter().map(|&x| Complex64::new(x / total, 0.0)),
    ));
    &u * diag * u.adjoint()
}

/// Wigner-type reconstruction on `M_n` from a map of unit vectors (any
/// phase convention) preserving `|⟨ξ,η⟩|²`.
pub fn reconstruct_wigner(phi: Arc<VectorFn>, n: usize) -> Result<ReconstructionReport> {
    reconstruct_wigner_with(phi, n, &ReconstructOptions::default())
}

pub fn reconstruct_wigner_with(
    phi: Arc<VectorFn>,
    n: usize,
    options: &ReconstructOptions,
) -> Result<ReconstructionReport> {
    if n < 2 {
        return Err(invalid("reconstruct_wigner needs n ≥ 2"));
    }
    let algebra = crate::algebra::make_algebra(&[n])?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let audit = transition_audit(&*phi, n, 64, &mut rng)?;
    if audit.is_nan() || audit > 1e-8 {
        let mut report = ReconstructionReport::new("wigner");
        report.transition_audit_residual = Some(audit);
        return Ok(report.fail("not a symmetry"));
    }

    let mut consistency: f64 = 0.0;
    for i in 0..24 {
        let rho = degenerate_probe(n, i, &mut rng);
        let a = wigner_extend(&*phi, &rho, false)?;
        let b = wigner_extend(&*phi, &rho, true)?;
        consistency = consistency.max(linalg::max_abs_entry(&(a - b)));
    }

    let f = phi.clone();
    let target = algebra.clone();
    let oracle = StateMapOracle::new(&algebra, &algebra, "wigner extension", move |mu| {
        let rho = wigner_extend(&*f, &mu.blocks()[0], false)?;
        NormalState::new(&target, vec![rho])
    });
    let mut report = if consistency <= options.residual_tol {
        reconstruct_from_p0_with(&oracle, options)?
    } else {
        ReconstructionReport::new("wigner").fail("extension depends on the eigenbasis choice")
    };
    report.mode = "wigner".to_string();
    report.transition_audit_residual = Some(audit);
    report.extension_consistency_residual = Some(consistency);
    Ok(report)
}

/// Restriction of a single-block state map to pure states, as a vector map:
/// `ξ ↦` the top eigenvector of `Φ(ω_ξ)` (phase arbitrary).
pub fn pure_state_map(phi: &StateMapOracle) -> Result<Arc<VectorFn>> {
    if phi.source.num_blocks() != 1 || phi.source != phi.target {
        return Err(invalid("pure-state maps need the same single-block source and target"));
    }
    let phi = phi.clone();
    Ok(Arc::new(move |xi: &DVector<Complex64>| {
        let mu = states::pure_state(&phi.source, 0, xi.as_slice())?;
        let out = phi.forward(&mu)?;
        let (values, vectors) = linalg::hermitian_eigen(&out.blocks()[0]);
        if values.len() > 1 && values[1] > EPS_RANK {
            return Err(Error::ContractViolation(
                "map sends a pure state to a mixed state".into(),
            ));
        }
        Ok(vectors.column(0).into_owned())
    }))
}

/// Segment-swapping map on `M_n`: a density `t·E₁₁ + (1−t)·E₂₂` with
/// `0 < t < 1` goes to `(1−t)·E₁₁ + t·E₂₂`; every other state is fixed.
pub fn counterexample_map(n: usize) -> Result<StateMapOracle> {
    if n < 2 {
        return Err(invalid("counterexample_map needs n ≥ 2"));
    }
    let algebra = crate::algebra::make_algebra(&[n])?;
    let swap = |mu: &NormalState| -> Result<NormalState> {
        let rho = &mu.blocks()[0];
        let n = rho.nrows();
        let tiny = 1e-12;
        let on_segment = (0..n).all(|r| {
            (0..n).all(|c| {
                let z = rho[(r, c)];
                if r == c && r < 2 {
                    z.re > tiny && z.im.abs() <= tiny
                } else {
                    z.norm() <= tiny
                }
            })
        });
        if !on_segment {
            return Ok(mu.clone());
        }
        let mut out = CMatrix::zeros(n, n);
        out[(0, 0)] = rho[(1, 1)];
        out[(1, 1)] = rho[(0, 0)];
        Ok(NormalState::from_density_unchecked(AlgebraElement::new(
            mu.algebra(),
            vec![out],
        )?))
    };
    Ok(
        StateMapOracle::new(&algebra, &algebra, format!("counterexample M{n}"), swap)
            .with_backward(swap)
            .reentrant(true),
    )
}

/// A state pair and the values of the audited quantity before and after `Φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub mu: NormalState,
    pub nu: NormalState,
    pub before: f64,
    pub after: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyTally {
    pub passed: usize,
    pub failed: usize,
    pub worst_violation: f64,
    pub witness: Option<Witness>,
}

impl PropertyTally {
    fn record(&mut self, violation: f64, tol: f64, witness: impl FnOnce() -> Witness) {
        if violation <= tol {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        if violation > self.worst_violation {
            self.worst_violation = violation;
            if violation > tol {
                self.witness = Some(witness());
            }
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

/// Audit of a state map over `sample_size` state pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PreserverReport {
    pub label: String,
    pub sample_size: usize,
    pub seed: u64,
    pub d1_isometry: PropertyTally,
    pub p0_preserved: PropertyTally,
    pub p_r_preserved: PropertyTally,
    pub p_u_preserved: PropertyTally,
    pub zero_pairs_p0: PropertyTally,
    pub zero_pairs_p_r: PropertyTally,
    pub zero_pairs_p_u: PropertyTally,
    pub biorthogonality_preserved: PropertyTally,
    pub verdict: Verdict,
}

/// What an audit licenses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// `P₀` preserved: [`reconstruct_from_p0`] applies.
    ReconstructFromP0,
    /// `P_R` preserved: [`reconstruct_from_pr`] applies.
    ReconstructFromPr,
    /// Only zero pairs (and biorthogonality) preserved: the algebras are
    /// Jordan-isomorphic, but no constructive map is attempted.
    JordanIsomorphicNoConstruction,
    #[default]
    NoConclusion,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ReconstructFromP0 => "P0 preserved: constructive reconstruction via reconstruct_from_p0",
            Verdict::ReconstructFromPr => "P_R preserved: constructive reconstruction via reconstruct_from_pr",
            Verdict::JordanIsomorphicNoConstruction => {
                "Jordan-isomorphic (zero-pair preservation); no constructive map attempted"
            }
            Verdict::NoConclusion => "no preservation property holds on the sample",
        })
    }
}

pub fn classify(report: &PreserverReport) -> Verdict {
    if report.p0_preserved.all_passed() {
        Verdict::ReconstructFromP0
    } else if report.p_r_preserved.all_passed() {
        Verdict::ReconstructFromPr
    } else if report.zero_pairs_p0.all_passed()
        && report.zero_pairs_p_r.all_passed()
        && report.zero_pairs_p_u.all_passed()
        && report.biorthogonality_preserved.all_passed()
    {
        Verdict::JordanIsomorphicNoConstruction
    } else {
        Verdict::NoConclusion
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditOptions {
    pub sample_size: usize,
    pub seed: u64,
    /// Worker threads; only used when the oracle is re-entrant.
    pub jobs: usize,
    /// Tolerance on `|P(Φμ,Φν) − P(μ,ν)|` and on the `d₁` defect.
    pub preserve_tol: f64,
    /// Threshold below which a transition probability counts as zero.
    pub zero_tol: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            sample_size: 1000,
            seed: 0,
            jobs: 1,
            preserve_tol: ISO_EQ,
            zero_tol: ZERO_TEST,
        }
    }
}

/// Pair `i` of an audit with the given seed. Each pair has its own RNG
/// stream, so the sample does not depend on how pairs are split over
/// workers. Index classes: 50% independent random pairs, 25% orthogonal
/// supports, 25% pairs on a shared face (half of them diagonal mixtures of
/// two coordinates against a coordinate pure state).
pub fn audit_pair_sample(algebra: &BlockAlgebra, seed: u64, i: usize) -> Result<(NormalState, NormalState)> {
    const GRID: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    match i % 4 {
        0 | 1 => Ok((
            random_state_any_rank(algebra, &mut rng),
            random_state_any_rank(algebra, &mut rng),
        )),
        2 => random_orthogonal_pair(algebra, &mut rng),
        _ if i % 8 == 3 => {
            let t = GRID[(i / 8) % GRID.len()];
            match coordinate_pair(algebra, &mut rng) {
                Some((a, b)) => {
                    let pure = diagonal_state(algebra, &[(a, 1.0)]);
                    let mix = diagonal_state(algebra, &[(a, t), (b, 1.0 - t)]);
                    Ok((pure, mix))
                }
                None => Ok((
                    random_state_any_rank(algebra, &mut rng),
                    random_state_any_rank(algebra, &mut rng),
                )),
            }
        }
        _ => {
            let total = algebra.unit_rank();
            let rank = if total > 1 { rng.random_range(1..total) } else { 1 };
            let face = support_projection(&states::random_state(algebra, Some(rank), &mut rng)?);
            Ok((
                random_state_under(&face, &mut rng)?,
                random_state_under(&face, &mut rng)?,
            ))
        }
    }
}

#[derive(Clone, Debug)]
struct PairOutcome {
    mu: NormalState,
    nu: NormalState,
    // (before, after) for d1, p0 fwd, p0 bwd, p_r, p_u
    values: [(f64, f64); 5],
    orth: (bool, bool),
}

fn evaluate_pair(phi: &StateMapOracle, seed: u64, i: usize, zero_tol: f64) -> Result<PairOutcome> {
    let (mu, nu) = audit_pair_sample(&phi.source, seed, i)?;
    let (fm, fn_) = (phi.forward(&mu)?, phi.forward(&nu)?);
    let values = [
        (d1(&mu, &nu)?, d1(&fm, &fn_)?),
        (p0(&mu, &nu)?, p0(&fm, &fn_)?),
        (p0(&nu, &mu)?, p0(&fn_, &fm)?),
        (p_r(&mu, &nu)?, p_r(&fm, &fn_)?),
        (p_u(&mu, &nu)?, p_u(&fm, &fn_)?),
    ];
    let orth_before = orthogonal_within(&support_projection(&mu), &support_projection(&nu), zero_tol)?;
    let orth_after = orthogonal_within(&support_projection(&fm), &support_projection(&fn_), zero_tol)?;
    Ok(PairOutcome {
        mu,
        nu,
        values,
        orth: (orth_before, orth_after),
    })
}

/// Audit with default tolerances on one thread.
pub fn audit_preserver(phi: &StateMapOracle, sample_size: usize, seed: u64) -> Result<PreserverReport> {
    audit_preserver_with(
        phi,
        &AuditOptions {
            sample_size,
            seed,
            ..AuditOptions::default()
        },
    )
}

/// Sample pairs, push them through `Φ`, and tally each property.
/// Deterministic for a fixed seed regardless of `jobs`.
pub fn audit_preserver_with(phi: &StateMapOracle, options: &AuditOptions) -> Result<PreserverReport> {
    let n = options.sample_size;
    let jobs = if phi.reentrant {
        options.jobs.max(1).min(n.max(1))
    } else {
        1
    };
    let outcomes: Vec<PairOutcome> = if jobs == 1 {
        (0..n)
            .map(|i| evaluate_pair(phi, options.seed, i, options.zero_tol))
            .collect::<Result<_>>()?
    } else {
        let chunk = n.div_ceil(jobs);
        let parts: Vec<Result<Vec<PairOutcome>>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..jobs)
                .map(|w| {
                    let range = (w * chunk)..((w + 1) * chunk).min(n);
                    s.spawn(move || {
                        range
                            .map(|i| evaluate_pair(phi, options.seed, i, options.zero_tol))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(invalid("audit worker panicked"))))
                .collect()
        });
        let mut all = Vec::with_capacity(n);
        for part in parts {
            all.extend(part?);
        }
        all
    };

    let mut report = PreserverReport {
        label: phi.label.clone(),
        sample_size: n,
        seed: options.seed,
        ..PreserverReport::default()
    };
    let (ptol, ztol) = (options.preserve_tol, options.zero_tol);
    for o in &outcomes {
        let witness = |(before, after): (f64, f64)| {
            move || Witness {
                mu: o.mu.clone(),
                nu: o.nu.clone(),
                before,
                after,
            }
        };
        let diff = |(b, a): (f64, f64)| (a - b).abs();
        let [d, p0f, p0b, pr, pu] = o.values;
        report.d1_isometry.record(diff(d), ptol, witness(d));
        let p0_worst = if diff(p0f) >= diff(p0b) { p0f } else { p0b };
        report.p0_preserved.record(diff(p0_worst), ptol, witness(p0_worst));
        report.p_r_preserved.record(diff(pr), ptol, witness(pr));
        report.p_u_preserved.record(diff(pu), ptol, witness(pu));

        // A zero pair is preserved when "is zero" agrees before and after;
        // the violation is the larger of the two values when it does not.
        let zero = |(b, a): (f64, f64)| if (b <= ztol) == (a <= ztol) { 0.0 } else { b.max(a) };
        report.zero_pairs_p0.record(zero(p0f).max(zero(p0b)), 0.0, witness(p0f));
        report.zero_pairs_p_r.record(zero(pr), 0.0, witness(pr));
        report.zero_pairs_p_u.record(zero(pu), 0.0, witness(pu));
        let orth = if o.orth.0 == o.orth.1 { 0.0 } else { 1.0 };
        let as_num = |b: bool| if b { 1.0 } else { 0.0 };
        report
            .biorthogonality_preserved
            .record(orth, 0.0, witness((as_num(o.orth.0), as_num(o.orth.1))));
    }
    report.verdict = classify(&report);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::make_algebra;
    use crate::states::random_state;

    fn diag_state(values: &[f64]) -> NormalState {
        let a = make_algebra(&[values.len()]).unwrap();
        diagonal_state(
            &a,
            &values.iter().enumerate().map(|(j, &v)| ((0, j), v)).collect::<Vec<_>>(),
        )
    }

    #[test]
    fn ortho_lift_examples() {
        let a = make_algebra(&[3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = support_projection(&random_state(&a, Some(2), &mut rng).unwrap());
        let id = StateMapOracle::identity(&a);
        assert!(ortho_lift(&id, &p).unwrap().as_element().distance(p.as_element()) < 1e-12);
        assert!(ortho_lift(&id, &Projection::zero(&a)).unwrap().is_zero());

        let t = JordanIso::from_parts(vec![0], vec![CMatrix::identity(3, 3)], vec![true]).unwrap();
        let phi = StateMapOracle::from_jordan_predual(&t);
        let lifted = ortho_lift(&phi, &p).unwrap();
        assert!(lifted.as_element().distance(&p.as_element().transpose()) < 1e-12);
    }

    #[test]
    fn p0_round_trip_and_identity() {
        let a = make_algebra(&[2, 1, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta = JordanIso::random(&a, &mut rng);
        let report = reconstruct_from_p0(&StateMapOracle::from_jordan_predual(&theta)).unwrap();
        assert!(report.succeeded(), "{report:?}");
        assert!(report.result.as_ref().unwrap().approx_eq(&theta));
        for r in [
            report.well_definedness_residual,
            report.jordan_residual,
            report.pairing_residual,
        ] {
            assert!(r.unwrap() <= 1e-8);
        }

        let report = reconstruct_from_p0(&StateMapOracle::identity(&a)).unwrap();
        assert!(report.result.unwrap().approx_eq(&JordanIso::identity(&a)));
    }

    #[test]
    fn p0_fails_on_counterexample() {
        let report = reconstruct_from_p0(&counterexample_map(2).unwrap()).unwrap();
        assert!(report.result.is_none());
        assert!(report.failure_reason.is_some());
        assert!(report.pairing_residual.unwrap() > 0.1);
    }

    #[test]
    fn pr_round_trip_and_failure() {
        let a = make_algebra(&[3, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta = JordanIso::random(&a, &mut rng);
        let report = reconstruct_from_pr(&StateMapOracle::from_jordan_predual(&theta)).unwrap();
        assert!(report.succeeded(), "{report:?}");
        assert!(report.result.unwrap().approx_eq(&theta));

        let report = reconstruct_from_pr(&StateMapOracle::identity(&a)).unwrap();
        assert!(report.result.unwrap().approx_eq(&JordanIso::identity(&a)));

        // Conjugate rank-one states by a fixed unitary, fix everything else.
        let b = make_algebra(&[3]).unwrap();
        let v = JordanIso::from_parts(vec![0], vec![linalg::haar_unitary(&mut rng, 3)], vec![false]).unwrap();
        let twist = StateMapOracle::new(&b, &b, "rank-one twist", move |mu| {
            if support_projection(mu).rank() == 1 {
                v.push(mu)
            } else {
                Ok(mu.clone())
            }
        });
        let report = reconstruct_from_pr(&twist).unwrap();
        assert_eq!(report.failure_reason.as_deref(), Some("P_R not preserved"));
    }

    #[test]
    fn mismatched_profiles_fail_immediately() {
        let a = make_algebra(&[2]).unwrap();
        let b = make_algebra(&[1, 1]).unwrap();
        let phi = StateMapOracle::new(&a, &b, "bogus", |_| unreachable!());
        let report = reconstruct_from_p0(&phi).unwrap();
        assert!(report.failure_reason.unwrap().contains("dimension profiles"));
    }

    #[test]
    fn wigner_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = linalg::haar_unitary(&mut rng, 3);
        let uu = u.clone();
        let report = reconstruct_wigner(Arc::new(move |v: &DVector<Complex64>| Ok(&uu * v)), 3).unwrap();
        assert!(report.succeeded(), "{report:?}");
        let expected = JordanIso::from_parts(vec![0], vec![u], vec![false]).unwrap();
        assert!(report.forward_map.as_ref().unwrap().approx_eq(&expected));
        assert_eq!(report.result.unwrap().transposed(), &[false]);

        let report = reconstruct_wigner(Arc::new(|v: &DVector<Complex64>| Ok(v.map(|z| z.conj()))), 3).unwrap();
        let iso = report.result.unwrap();
        assert_eq!(iso.transposed(), &[true]);
        assert!(linalg::max_abs_entry(&(&iso.unitaries()[0] - CMatrix::identity(3, 3))) < 1e-9);

        let report = reconstruct_wigner(Arc::new(|v: &DVector<Complex64>| Ok(v.clone())), 2).unwrap();
        assert!(report
            .result
            .unwrap()
            .approx_eq(&JordanIso::identity(&make_algebra(&[2]).unwrap())));
    }

    #[test]
    fn wigner_rejects_non_symmetries() {
        // ξ ↦ normalized (ξ + e₁) does not preserve |⟨ξ,η⟩|².
        let bad = |v: &DVector<Complex64>| {
            let mut w = v.clone();
            w[0] += Complex64::new(1.0, 0.0);
            let n = w.norm();
            Ok(if n > 1e-9 {
                w / Complex64::new(n, 0.0)
            } else {
                v.clone()
            })
        };
        let report = reconstruct_wigner(Arc::new(bad), 2).unwrap();
        assert_eq!(report.failure_reason.as_deref(), Some("not a symmetry"));
        assert!(reconstruct_wigner(Arc::new(|v: &DVector<Complex64>| Ok(v.clone())), 1).is_err());
    }

    #[test]
    fn deterministic_basis_spans_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = linalg::haar_unitary(&mut rng, 4);
        let cols = u.columns(0, 2);
        let p = cols * cols.adjoint();
        for reverse in [false, true] {
            let b = deterministic_basis(&p, 2, reverse);
            assert_eq!(b.len(), 2);
            let q = b.iter().fold(CMatrix::zeros(4, 4), |acc, v| acc + linalg::outer(v));
            assert!(linalg::max_abs_entry(&(q - &p)) < 1e-12);
        }
    }

    #[test]
    fn counterexample_examples() {
        let phi = counterexample_map(3).unwrap();
        let out = phi.forward(&diag_state(&[0.25, 0.75, 0.0])).unwrap();
        assert_eq!(out, diag_state(&[0.75, 0.25, 0.0]));

        let a = make_algebra(&[3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let faithful = random_state(&a, None, &mut rng).unwrap();
        assert_eq!(phi.forward(&faithful).unwrap(), faithful);
        assert_eq!(
            phi.forward(&diag_state(&[1.0, 0.0, 0.0])).unwrap(),
            diag_state(&[1.0, 0.0, 0.0])
        );
        assert_eq!(
            phi.forward(&diag_state(&[0.2, 0.3, 0.5])).unwrap(),
            diag_state(&[0.2, 0.3, 0.5])
        );

        for _ in 0..50 {
            let mu = random_state_any_rank(&a, &mut rng);
            let s = support_projection(&mu);
            assert!(
                support_projection(&phi.forward(&mu).unwrap())
                    .as_element()
                    .distance(s.as_element())
                    < 1e-12
            );
        }
        assert_eq!(phi.inverse_defect(20, &mut rng).unwrap(), Some(0.0));
        assert!(counterexample_map(1).is_err());
    }

    #[test]
    fn counterexample_d1_witness_is_exact() {
        let phi = counterexample_map(2).unwrap();
        let pure = diag_state(&[1.0, 0.0]);
        for t in [0.1, 0.25, 0.5] {
            let mu_t = diag_state(&[t, 1.0 - t]);
            assert!((d1(&pure, &mu_t).unwrap() - (2.0 - 2.0 * t)).abs() <= 1e-12);
            let after = d1(&phi.forward(&pure).unwrap(), &phi.forward(&mu_t).unwrap()).unwrap();
            assert!((after - 2.0 * t).abs() <= 1e-12);
        }
    }

    #[test]
    fn audit_examples() {
        let a = make_algebra(&[2, 2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let theta = JordanIso::random(&a, &mut rng);
        let report = audit_preserver(&StateMapOracle::from_jordan_predual(&theta), 200, 1).unwrap();
        for t in [
            &report.d1_isometry,
            &report.p0_preserved,
            &report.p_r_preserved,
            &report.p_u_preserved,
            &report.zero_pairs_p0,
            &report.zero_pairs_p_r,
            &report.zero_pairs_p_u,
            &report.biorthogonality_preserved,
        ] {
            assert_eq!(t.failed, 0, "{report:?}");
            assert_eq!(t.passed, 200);
        }
        assert_eq!(report.verdict, Verdict::ReconstructFromP0);

        let id = audit_preserver(&StateMapOracle::identity(&a), 100, 1).unwrap();
        assert_eq!(id.d1_isometry.worst_violation, 0.0);
    }

    #[test]
    fn audit_separates_counterexample() {
        let report = audit_preserver(&counterexample_map(2).unwrap(), 400, 0).unwrap();
        assert_eq!(report.biorthogonality_preserved.failed, 0);
        assert_eq!(report.zero_pairs_p0.failed, 0);
        assert_eq!(report.zero_pairs_p_r.failed, 0);
        assert_eq!(report.zero_pairs_p_u.failed, 0);
        assert!(report.d1_isometry.failed > 0);
        assert!(report.d1_isometry.worst_violation >= 0.9);
        let w = report.d1_isometry.witness.as_ref().unwrap();
        assert!(((w.before - w.after).abs() - report.d1_isometry.worst_violation).abs() < 1e-15);
        assert_eq!(report.verdict, Verdict::JordanIsomorphicNoConstruction);
    }

    #[test]
    fn audit_is_deterministic_across_jobs() {
        let a = make_algebra(&[3]).unwrap();
        let phi = counterexample_map(3).unwrap();
        let one = audit_preserver_with(
            &phi,
            &AuditOptions {
                sample_size: 120,
                seed: 9,
                ..AuditOptions::default()
            },
        )
        .unwrap();
        let four = audit_preserver_with(
            &phi,
            &AuditOptions {
                sample_size: 120,
                seed: 9,
                jobs: 4,
                ..AuditOptions::default()
            },
        )
        .unwrap();
        assert_eq!(one, four);
        assert_eq!(
            audit_pair_sample(&a, 9, 17).unwrap(),
            audit_pair_sample(&a, 9, 17).unwrap()
        );
    }

    #[test]
    fn forward_output_is_validated() {
        let a = make_algebra(&[2]).unwrap();
        let b = make_algebra(&[3]).unwrap();
        let wrong_algebra = StateMapOracle::new(&a, &a, "bad", move |_| {
            Ok(random_state(&b, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap())
        });
        let mu = diag_state(&[0.5, 0.5]);
        assert!(matches!(wrong_algebra.forward(&mu), Err(Error::ContractViolation(_))));
        let aa = a.clone();
        let not_state = StateMapOracle::new(&a, &a, "bad", move |_| {
            Ok(NormalState::from_density_unchecked(aa.identity()))
        });
        assert!(matches!(not_state.forward(&mu), Err(Error::ContractViolation(_))));
    }
}
