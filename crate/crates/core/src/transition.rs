//! The three transition probabilities on a normal state space and the
//! metrics derived from them.
//!
//! * `p0(μ, ν) = μ(s_ν)`, asymmetric.
//! * `p_r(μ, ν) = ⟨ξ_μ, ξ_ν⟩ = tr(ρ^{1/2} σ^{1/2})`.
//! * `p_u(μ, ν) = (tr |ρ^{1/2} σ^{1/2}|)²`, the squared fidelity.
//!
//! They satisfy `p_u ≤ p_r ≤ √p_u`, and all three vanish exactly when the
//! supports are orthogonal.

use serde::{Deserialize, Serialize};

use crate::algebra::{orthogonal_within, AlgebraElement};
use crate::error::Result;
use crate::linalg::{self, CMatrix};
use crate::standard_form::{embed, hs_inner};
use crate::states::{self, evaluate, support_projection, NormalState};
use crate::tol::{TOL_INEQ, ZERO_TEST};

fn sqrt_blocks(state: &NormalState) -> Vec<CMatrix> {
    states::sqrt_density(state)
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `P₀(μ, ν) = μ(s_ν)`.
pub fn p0(mu: &NormalState, nu: &NormalState) -> Result<f64> {
    let s = support_projection(nu);
    Ok(clamp_unit(evaluate(mu, s.as_element())?.re))
}

/// Raggio transition probability `tr(ρ^{1/2} σ^{1/2})`.
pub fn p_r(mu: &NormalState, nu: &NormalState) -> Result<f64> {
    mu.algebra().ensure_same(nu.algebra())?;
    let value: f64 = sqrt_blocks(mu)
        .iter()
        .zip(sqrt_blocks(nu))
        .map(|(a, b)| linalg::hs_dot(a, &b).re)
        .sum();
    Ok(clamp_unit(value))
}

/// Uhlmann transition probability, computed as the squared sum of the
/// singular values of `ρ^{1/2} σ^{1/2}` (blockwise).
pub fn p_u(mu: &NormalState, nu: &NormalState) -> Result<f64> {
    mu.algebra().ensure_same(nu.algebra())?;
    let fidelity: f64 = sqrt_blocks(mu)
        .iter()
        .zip(sqrt_blocks(nu))
        .map(|(a, b)| linalg::singular_values(&(a * b)).iter().sum::<f64>())
        .sum();
    Ok(clamp_unit(fidelity * fidelity))
}

/// Bures distance `√(2 − 2√P_U)`.
///
/// Evaluated as `min_U ‖ρ^{1/2} − σ^{1/2} U‖_HS` with `U` the polar factor
/// from the SVD of `ρ^{1/2} σ^{1/2}`, which avoids the cancellation in
/// `2 − 2√P_U` for nearby states.
pub fn d_b(mu: &NormalState, nu: &NormalState) -> Result<f64> {
    mu.algebra().ensure_same(nu.algebra())?;
    let squared: f64 = sqrt_blocks(mu)
        .iter()
        .zip(sqrt_blocks(nu))
        .map(|(a, b)| {
            if a.is_empty() {
                return 0.0;
            }
            let svd = (a * &b).svd(true, true);
            let (w, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
            let u = vt.adjoint() * w.adjoint();
            (a - &b * u).norm_squared()
        })
        .sum();
    Ok(squared.sqrt())
}

/// `d₂(μ, ν) = √(2 − 2 P_R)`, evaluated as `(Σ_k ‖ρ_k^{1/2} − σ_k^{1/2}‖²)^{1/2}`
/// so that nearby states do not lose digits to cancellation.
pub fn d2(mu: &NormalState, nu: &NormalState) -> Result<f64> {
    mu.algebra().ensure_same(nu.algebra())?;
    let squared: f64 = sqrt_blocks(mu)
        .iter()
        .zip(sqrt_blocks(nu))
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok(squared.sqrt())
}

/// `d₂` through the standard-form vectors: `‖ξ_μ − ξ_ν‖_HS`.
pub fn d2_hilbert(mu: &NormalState, nu: &NormalState) -> Result<f64> {
    mu.algebra().ensure_same(nu.algebra())?;
    let diff: AlgebraElement = embed(mu).as_element() - embed(nu).as_element();
    Ok(diff.hs_norm())
}

/// Everything [`audit_pair`] computes for one pair of states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    #[serde(rename = "p0_fwd")]
    pub p0_forward: f64,
    #[serde(rename = "p0_bwd")]
    pub p0_backward: f64,
    pub p_r: f64,
    pub p_u: f64,
    pub d1: f64,
    pub d2: f64,
    pub d_b: f64,
    pub chain_ok: bool,
    pub zero_consistent: bool,
}

impl PairReport {
    /// How far `p_u ≤ p_r ≤ √p_u` is from holding (0 when it holds exactly).
    pub fn chain_violation(&self) -> f64 {
        (self.p_u - self.p_r).max(self.p_r - self.p_u.sqrt()).max(0.0)
    }
}

/// Compute all quantities for `(μ, ν)` and check the inequality chain and
/// the agreement of the zero tests.
pub fn audit_pair(mu: &NormalState, nu: &NormalState) -> Result<PairReport> {
    let p0_forward = p0(mu, nu)?;
    let p0_backward = p0(nu, mu)?;
    let pr = p_r(mu, nu)?;
    let pu = p_u(mu, nu)?;
    let mut report = PairReport {
        p0_forward,
        p0_backward,
        p_r: pr,
        p_u: pu,
        d1: states::d1(mu, nu)?,
        d2: d2(mu, nu)?,
        d_b: d_b(mu, nu)?,
        chain_ok: false,
        zero_consistent: false,
    };
    report.chain_ok = pu <= pr + TOL_INEQ && pr <= pu.sqrt() + TOL_INEQ;
    let zeros = zero_tests(mu, nu, &report)?;
    report.zero_consistent = zeros.iter().all(|&z| z == zeros[0]);
    Ok(report)
}

/// `[s_μ s_ν = 0, P_U = 0, P_R = 0, P₀(μ,ν) = 0, P₀(ν,μ) = 0]`, each at [`ZERO_TEST`].
pub fn zero_tests(mu: &NormalState, nu: &NormalState, report: &PairReport) -> Result<[bool; 5]> {
    let orth = orthogonal_within(&support_projection(mu), &support_projection(nu), ZERO_TEST)?;
    Ok([
        orth,
        report.p_u <= ZERO_TEST,
        report.p_r <= ZERO_TEST,
        report.p0_forward <= ZERO_TEST,
        report.p0_backward <= ZERO_TEST,
    ])
}

/// Aggregate of many [`PairReport`]s. `merge` is associative and
/// commutative, so batches can be split across workers.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub pairs: usize,
    pub chain_failures: usize,
    pub max_chain_violation: f64,
    pub zero_inconsistencies: usize,
    pub zero_pairs: usize,
}

impl PairStats {
    pub fn record(&mut self, report: &PairReport) {
        self.pairs += 1;
        if !report.chain_ok {
            self.chain_failures += 1;
        }
        self.max_chain_violation = self.max_chain_violation.max(report.chain_violation());
        if !report.zero_consistent {
            self.zero_inconsistencies += 1;
        }
        if report.p_u <= ZERO_TEST && report.zero_consistent {
            self.zero_pairs += 1;
        }
    }

    pub fn merge(mut self, other: &PairStats) -> PairStats {
        self.pairs += other.pairs;
        self.chain_failures += other.chain_failures;
        self.max_chain_violation = self.max_chain_violation.max(other.max_chain_violation);
        self.zero_inconsistencies += other.zero_inconsistencies;
        self.zero_pairs += other.zero_pairs;
        self
    }
}

/// Cross-check used by tests and the self-test: `⟨embed μ, embed ν⟩ − p_r`.
pub fn embed_consistency(mu: &NormalState, nu: &NormalState) -> Result<f64> {
    let ip = hs_inner(&embed(mu), &embed(nu))?;
    Ok((ip.re - p_r(mu, nu)?).abs().max(ip.im.abs()))
}
