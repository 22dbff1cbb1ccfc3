//! Invariant suites across all modules, run by `tp selftest`.

use std::sync::Arc;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{make_algebra, BlockAlgebra};
use crate::error::Result;
use crate::jordan::JordanIso;
use crate::linalg::{self, CMatrix};
use crate::reconstruct::{
    audit_preserver, counterexample_map, reconstruct_from_p0, reconstruct_from_pr, reconstruct_wigner, StateMapOracle,
};
use crate::standard_form::{cone_decompose, ConeVector};
use crate::states::{d1, random_orthogonal_pair, random_state_any_rank, NormalState};
use crate::transition::{audit_pair, d2, d2_hilbert, d_b, embed_consistency, p0, p_r, p_u, zero_tests};

/// Algebra shapes exercised by the suites.
pub const SHAPES: &[&[usize]] = &[&[2], &[3], &[4], &[1, 1], &[2, 2], &[1, 2], &[3, 2]];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub checks: usize,
    pub failures: usize,
    pub worst_residual: f64,
    pub tolerance: f64,
}

impl SuiteResult {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            checks: 0,
            failures: 0,
            worst_residual: 0.0,
            tolerance,
        }
    }

    fn check(&mut self, residual: f64) {
        self.checks += 1;
        if residual > self.worst_residual || residual.is_nan() {
            self.worst_residual = residual;
        }
        if residual.is_nan() || residual > self.tolerance {
            self.failures += 1;
            self.passed = false;
        }
    }

    fn check_bool(&mut self, ok: bool) {
        self.check(if ok { 0.0 } else { 1.0 });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelftestSummary {
    pub seed: u64,
    pub samples: usize,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn algebras() -> Vec<BlockAlgebra> {
    SHAPES.iter().map(|d| make_algebra(d).expect("valid shape")).collect()
}

/// Pair suites: inequality chain, zero-predicate agreement, the
/// `d₂² ≤ d₁ ≤ √(4 − 4P_R²)` sandwich and standard-form consistency.
fn pair_suites(seed: u64, samples: usize) -> Result<Vec<SuiteResult>> {
    let mut chain = SuiteResult::new("chain", 1e-9);
    let mut zero = SuiteResult::new("zero_equivalence", 0.0);
    let mut sandwich = SuiteResult::new("sandwich", 1e-9);
    let mut embed = SuiteResult::new("embed_consistency", 1e-10);
    let mut d2_agree = SuiteResult::new("d2_vector_norm", 1e-9);
    let mut pythagoras = SuiteResult::new("cone_pythagoras", 1e-9);
    for (s, a) in algebras().iter().enumerate() {
        let mut rng = rng_for(seed, s as u64);
        for i in 0..samples {
            let (mu, nu) = if i % 6 == 5 {
                random_orthogonal_pair(a, &mut rng)?
            } else {
                (random_state_any_rank(a, &mut rng), random_state_any_rank(a, &mut rng))
            };
            let r = audit_pair(&mu, &nu)?;
            chain.check(r.chain_violation());
            let z = zero_tests(&mu, &nu, &r)?;
            zero.check_bool(z.iter().all(|&b| b == z[0]));
            sandwich.check((r.d2 * r.d2 - r.d1).max(r.d1 - (4.0 - 4.0 * r.p_r * r.p_r).max(0.0).sqrt()));
            embed.check(embed_consistency(&mu, &nu)?);
            d2_agree.check((d2(&mu, &nu)? - d2_hilbert(&mu, &nu)?).abs());
            let xi = ConeVector::from_element(a.random_self_adjoint(&mut rng));
            let parts = cone_decompose(&xi)?;
            pythagoras.check(
                (xi.norm().powi(2) - parts.positive_part.norm().powi(2) - parts.negative_part.norm().powi(2)).abs(),
            );
        }
    }
    Ok(vec![chain, zero, sandwich, embed, d2_agree, pythagoras])
}

fn jordan_invariance(seed: u64, samples: usize) -> Result<SuiteResult> {
    let mut suite = SuiteResult::new("jordan_invariance", 1e-9);
    let quantities: [fn(&NormalState, &NormalState) -> Result<f64>; 6] = [p0, p_r, p_u, d1, d2, d_b];
    for (s, a) in algebras().iter().enumerate() {
        let mut rng = rng_for(seed, 100 + s as u64);
        for _ in 0..(samples / 20).max(5) {
            let theta = JordanIso::random(a, &mut rng);
            let mu = random_state_any_rank(a, &mut rng);
            let nu = random_state_any_rank(a, &mut rng);
            let (pm, pn) = (theta.push(&mu)?, theta.push(&nu)?);
            for f in quantities {
                suite.check((f(&pm, &pn)? - f(&mu, &nu)?).abs());
            }
            suite.check((p0(&pn, &pm)? - p0(&nu, &mu)?).abs());
        }
    }
    Ok(suite)
}

fn reconstruction(seed: u64, mode: &str) -> Result<SuiteResult> {
    let mut suite = SuiteResult::new(&format!("reconstruct_{mode}"), 1e-7);
    for (s, a) in algebras().iter().enumerate() {
        let mut rng = rng_for(seed, 200 + s as u64);
        for _ in 0..2 {
            let theta = JordanIso::random(a, &mut rng);
            let phi = StateMapOracle::from_jordan_predual(&theta);
            let report = if mode == "p0" {
                reconstruct_from_p0(&phi)?
            } else {
                reconstruct_from_pr(&phi)?
            };
            match &report.result {
                Some(iso) => suite.check(iso.action_distance(&theta).unwrap_or(f64::INFINITY)),
                None => suite.check(f64::INFINITY),
            }
            for r in [
                report.well_definedness_residual,
                report.jordan_residual,
                report.pairing_residual,
            ] {
                suite.check(r.unwrap_or(f64::INFINITY));
            }
        }
    }
    Ok(suite)
}

fn wigner(seed: u64) -> Result<SuiteResult> {
    let mut suite = SuiteResult::new("wigner", 1e-7);
    let mut rng = rng_for(seed, 300);
    for n in 2..=4 {
        let u = linalg::haar_unitary(&mut rng, n);
        let uu = u.clone();
        let report = reconstruct_wigner(Arc::new(move |v: &DVector<Complex64>| Ok(&uu * v)), n)?;
        let expected = JordanIso::from_parts(vec![0], vec![u], vec![false])?;
        suite.check(
            report
                .forward_map
                .as_ref()
                .and_then(|f| f.action_distance(&expected))
                .unwrap_or(f64::INFINITY),
        );
        let report = reconstruct_wigner(Arc::new(|v: &DVector<Complex64>| Ok(v.map(|z| z.conj()))), n)?;
        suite.check_bool(report.result.as_ref().is_some_and(|r| r.transposed() == [true]));
    }
    Ok(suite)
}

fn counterexample(seed: u64) -> Result<SuiteResult> {
    let mut suite = SuiteResult::new("counterexample", 1e-12);
    let phi = counterexample_map(2)?;
    let a = phi.source().clone();
    let diag = |t: f64| -> Result<NormalState> {
        NormalState::new(
            &a,
            vec![CMatrix::from_diagonal(&DVector::from_vec(vec![
                Complex64::new(t, 0.0),
                Complex64::new(1.0 - t, 0.0),
            ]))],
        )
    };
    let pure = diag(1.0)?;
    for t in [0.1, 0.25, 0.5] {
        let mu_t = diag(t)?;
        suite.check((d1(&pure, &mu_t)? - (2.0 - 2.0 * t)).abs());
        suite.check((d1(&phi.forward(&pure)?, &phi.forward(&mu_t)?)? - 2.0 * t).abs());
    }
    let report = audit_preserver(&phi, 200, seed)?;
    for t in [
        &report.zero_pairs_p0,
        &report.zero_pairs_p_r,
        &report.zero_pairs_p_u,
        &report.biorthogonality_preserved,
    ] {
        suite.check(t.failed as f64);
    }
    suite.check_bool(report.d1_isometry.worst_violation >= 0.9);
    let rec = reconstruct_from_p0(&phi)?;
    suite.check_bool(rec.result.is_none() && rec.failure_reason.is_some());
    Ok(suite)
}

/// Run every suite. `samples` is the number of random pairs per algebra
/// shape in the pair suites.
pub fn run_selftest(seed: u64, samples: usize) -> Result<SelftestSummary> {
    let mut suites = pair_suites(seed, samples)?;
    suites.push(jordan_invariance(seed, samples)?);
    suites.push(reconstruction(seed, "p0")?);
    suites.push(reconstruction(seed, "pr")?);
    suites.push(wigner(seed)?);
    suites.push(counterexample(seed)?);
    Ok(SelftestSummary {
        seed,
        samples,
        passed: suites.iter().all(|s| s.passed),
        suites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_selftest_passes() {
        let summary = run_selftest(3, 40).unwrap();
        assert!(summary.passed, "{summary:#?}");
        let chain = summary.suites.iter().find(|s| s.name == "chain").unwrap();
        assert!(chain.worst_residual <= 1e-9);
        assert_eq!(chain.checks, 40 * SHAPES.len());
    }

    #[test]
    fn failing_check_marks_suite() {
        let mut s = SuiteResult::new("x", 1e-9);
        s.check(0.0);
        s.check(f64::NAN);
        assert!(!s.passed);
        assert_eq!(s.failures, 1);
    }
}
