//! Fuzzers and exact checks for the matrix and potential lemmas.
//!
//! Every check returns a [`LemmaCheck`]: how many instances ran, the worst
//! violation seen and the tolerance it was judged against. Instance `i` of
//! a check draws from its own ChaCha stream, so results do not depend on
//! how rayon schedules the work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::trace_cauchy_schwarz_check;
use crate::distributions::{NoiseSpec, PriorSpec};
use crate::harness::derive_seed;
use crate::kernel::{
    logdet_potential, psd_order_gap, psd_order_holds, random_psd, random_psd_with_rank,
    rank_one_shrink, Cholesky, Matrix, PsdMatrix, Vector,
};
use crate::posterior::{EngineConfig, PosteriorState};
use crate::potential::{random_unit, verify_thm23, ActionRule, ClassicalPrecision, Thm23Config};
use crate::{Error, Result, Tolerances};

/// Outcome of one lemma check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    pub instances: usize,
    /// Largest amount by which an inequality was exceeded (0 if never).
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Draws rejected as outside the lemma's domain.
    #[serde(default)]
    pub skipped: usize,
}

impl LemmaCheck {
    fn new(name: &str, violations: &[f64], tolerance: f64, skipped: usize) -> Self {
        let max_violation = violations.iter().copied().fold(0.0, f64::max);
        let all_finite = violations.iter().all(|v| v.is_finite());
        Self {
            name: name.to_string(),
            instances: violations.len(),
            max_violation,
            tolerance,
            pass: all_finite && max_violation <= tolerance,
            skipped,
        }
    }
}

/// Instance counts for the full lemma suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSuiteConfig {
    pub seed: u64,
    pub eq1_sequences: usize,
    pub concavity: usize,
    pub variational: usize,
    pub lambdas_per_sigma: usize,
    pub eq3: usize,
    pub lemma21: usize,
    pub lemma31: usize,
    pub thm23_exact: usize,
    pub tolerances: Tolerances,
}

impl Default for LemmaSuiteConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            eq1_sequences: 1_000,
            concavity: 2_000,
            variational: 2_000,
            lambdas_per_sigma: 50,
            eq3: 2_000,
            lemma21: 500,
            lemma31: 1_000,
            thm23_exact: 100,
            tolerances: Tolerances::DEFAULT,
        }
    }
}

impl LemmaSuiteConfig {
    /// Sets every instance count to `n`.
    pub fn with_instances(mut self, n: usize) -> Self {
        self.eq1_sequences = n;
        self.concavity = n;
        self.variational = n;
        self.eq3 = n;
        self.lemma21 = n;
        self.lemma31 = n;
        self.thm23_exact = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("eq1_sequences", self.eq1_sequences),
            ("concavity", self.concavity),
            ("variational", self.variational),
            ("lambdas_per_sigma", self.lambdas_per_sigma),
            ("eq3", self.eq3),
            ("lemma21", self.lemma21),
            ("lemma31", self.lemma31),
            ("thm23_exact", self.thm23_exact),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(Error::InvalidSpec(format!("{name} must be ≥ 1")));
            }
        }
        Ok(())
    }
}

/// Runs every check in the suite.
pub fn run_lemma_suite(cfg: &LemmaSuiteConfig) -> Result<Vec<LemmaCheck>> {
    cfg.validate()?;
    let tol = &cfg.tolerances;
    Ok(vec![
        check_eq1(cfg.eq1_sequences, cfg.seed, tol.classical)?,
        check_concavity(cfg.concavity, cfg.seed, tol.inequality)?,
        check_variational(
            cfg.variational,
            cfg.lambdas_per_sigma,
            cfg.seed,
            tol.inequality,
        )?,
        check_eq3(cfg.eq3, cfg.seed, tol.inequality)?,
        check_lemma21(cfg.lemma21, cfg.seed, LikelihoodMode::Exact, tol.order)?,
        check_lemma31(cfg.lemma31, cfg.seed, tol.inequality)?,
        check_thm23_exact(cfg.thm23_exact, cfg.seed, tol.inequality)?,
    ])
}

fn instance_rng(seed: u64, salt: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed ^ salt, index as u64))
}

fn log_uniform<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

/// Runs `f` on instances `0..n` in parallel and returns results in index order.
fn per_instance<T: Send>(
    n: usize,
    seed: u64,
    salt: u64,
    f: impl Fn(&mut ChaCha8Rng, usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..n)
        .into_par_iter()
        .map(|i| f(&mut instance_rng(seed, salt, i), i))
        .collect()
}

// ── Classical potential ─────────────────────────────────────────────────

pub const EQ1_DIMS: [usize; 4] = [1, 2, 4, 8];
pub const EQ1_HORIZONS: [usize; 2] = [50, 500];
pub const EQ1_LAMBDAS: [f64; 3] = [1.0, 2.0, 10.0];

/// `Σ aᵀΣ_t a ≤ 2 log(det Σ₁/det Σ_{T+1}) ≤ 2d log(1 + T/(λd))` over random
/// sequences cycling through the (d, T, λ) grid. Sequences mix random
/// directions, unit-norm random directions and a single repeated action.
pub fn check_eq1(sequences: usize, seed: u64, tolerance: f64) -> Result<LemmaCheck> {
    let cells = EQ1_DIMS.len() * EQ1_HORIZONS.len() * EQ1_LAMBDAS.len();
    let violations = per_instance(sequences, seed, 0xE1, |rng, i| {
        let cell = i % cells;
        let dim = EQ1_DIMS[cell % EQ1_DIMS.len()];
        let horizon = EQ1_HORIZONS[(cell / EQ1_DIMS.len()) % EQ1_HORIZONS.len()];
        let lambda = EQ1_LAMBDAS[cell / (EQ1_DIMS.len() * EQ1_HORIZONS.len())];
        let mut state = ClassicalPrecision::new(dim, lambda)?;
        let repeated = random_unit(dim, false, rng);
        let mut sum = 0.0;
        for _ in 0..horizon {
            let a = match (i / cells) % 3 {
                0 => random_unit(dim, false, rng).scaled(rng.random::<f64>()),
                1 => random_unit(dim, false, rng),
                _ => repeated.clone(),
            };
            sum += state.step(&a)?;
        }
        let middle = state.log_det_ratio_bound()?;
        let outer = crate::potential::classical_bound(dim, horizon, lambda);
        Ok((sum - middle).max(middle - outer).max(0.0))
    })?;
    Ok(LemmaCheck::new(
        "eq1_classical_potential",
        &violations,
        tolerance,
        0,
    ))
}

// ── Log-det potential ───────────────────────────────────────────────────

fn random_sigma<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PsdMatrix {
    let scale = log_uniform(1e-2, 1e1, rng);
    if rng.random_bool(0.3) {
        let rank = rng.random_range(0..dim.max(1));
        random_psd_with_rank(dim, rank, scale, rng)
    } else {
        random_psd(dim, scale, rng)
    }
}

/// `f(αΣ₁ + (1−α)Σ₂, x) ≥ α f(Σ₁, x) + (1−α) f(Σ₂, x)`.
pub fn check_concavity(instances: usize, seed: u64, tolerance: f64) -> Result<LemmaCheck> {
    let violations = per_instance(instances, seed, 0xCC, |rng, _| {
        let dim = rng.random_range(1..=6);
        let s1 = random_sigma(dim, rng);
        let s2 = random_sigma(dim, rng);
        let alpha = rng.random::<f64>();
        let x = log_uniform(1e-2, 1e2, rng);
        let mix = s1.convex_combination(&s2, alpha)?;
        let lhs = logdet_potential(&mix, x)?;
        let rhs = alpha * logdet_potential(&s1, x)? + (1.0 - alpha) * logdet_potential(&s2, x)?;
        Ok((rhs - lhs).max(0.0))
    })?;
    Ok(LemmaCheck::new(
        "lemma22_concavity",
        &violations,
        tolerance,
        0,
    ))
}

/// `log det(Σ^{1/2}(Σ⁻¹ + Λ)Σ^{1/2})` evaluated literally, or `None` when the
/// middle matrix is not positive definite (outside the log-det domain).
pub fn variational_objective(sigma: &PsdMatrix, lambda: &Matrix) -> Result<Option<f64>> {
    let chol = Cholesky::factor(sigma)
        .ok_or_else(|| Error::NotPsd("variational form needs an invertible Σ".into()))?;
    let root = sigma.sqrt();
    let mut m = root.matmul(&chol.inverse().add(lambda)).matmul(&root);
    m.symmetrize();
    Ok(Cholesky::factor(&m).map(|c| c.logdet()))
}

/// Variational form: every `Λ ⪯ xI` gives at most `f(Σ, x)` and `Λ = xI` attains it.
/// Σ is kept invertible by adding `δI` with `δ ∈ [1e-3, 1]`; Λ is `xI − B`
/// with `B` random PSD of log-uniform scale.
pub fn check_variational(
    instances: usize,
    lambdas: usize,
    seed: u64,
    tolerance: f64,
) -> Result<LemmaCheck> {
    let results = per_instance(instances, seed, 0x2A, |rng, _| {
        let dim = rng.random_range(1..=5);
        let delta = log_uniform(1e-3, 1.0, rng);
        let mut base = random_psd(dim, log_uniform(1e-2, 1e1, rng), rng).into_matrix();
        base.add_identity(delta);
        let sigma = PsdMatrix::new(base)?;
        let x = log_uniform(1e-2, 1e2, rng);
        let f = logdet_potential(&sigma, x)?;
        let at_max = variational_objective(&sigma, &Matrix::scaled_identity(dim, x))?
            .ok_or_else(|| Error::NotPsd("Λ = xI left the domain".into()))?;
        let mut worst = (at_max - f).abs();
        let mut skipped = 0;
        for _ in 0..lambdas {
            let b = random_psd(dim, log_uniform(1e-3, 1e1, rng), rng);
            let lambda = Matrix::scaled_identity(dim, x).sub(&b);
            match variational_objective(&sigma, &lambda)? {
                Some(v) => worst = worst.max(v - f),
                None => skipped += 1,
            }
        }
        Ok((worst.max(0.0), skipped))
    })?;
    let violations: Vec<f64> = results.iter().map(|r| r.0).collect();
    let skipped = results.iter().map(|r| r.1).sum();
    Ok(LemmaCheck::new(
        "lemma22_variational",
        &violations,
        tolerance,
        skipped,
    ))
}

/// Rank-one step inequality: `log(1 + VᵀΣV) + f(Σ′, x) ≤ f(Σ, x + VᵀV)`, with singular Σ in
/// about a third of the draws.
pub fn check_eq3(instances: usize, seed: u64, tolerance: f64) -> Result<LemmaCheck> {
    let violations = per_instance(instances, seed, 0xE3, |rng, _| {
        let dim = rng.random_range(1..=6);
        let sigma = random_sigma(dim, rng);
        let v = Vector::standard_normal(dim, rng)
            .scaled(log_uniform(1e-2, 3.0, rng) / (dim as f64).sqrt());
        let x = if rng.random_bool(0.1) {
            0.0
        } else {
            log_uniform(1e-2, 1e2, rng)
        };
        let shrunk = rank_one_shrink(&sigma, &v)?;
        let lhs = sigma.quad_form(&v).max(0.0).ln_1p() + logdet_potential(&shrunk, x)?;
        let rhs = logdet_potential(&sigma, x + v.norm_sq())?;
        Ok((lhs - rhs).max(0.0))
    })?;
    Ok(LemmaCheck::new("lemma22_eq3", &violations, tolerance, 0))
}

// ── Stochastic variance reduction ───────────────────────────────────────

/// How the one-step posteriors in the variance-reduction check are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LikelihoodMode {
    /// Exact Bayes.
    Exact,
    /// Conditions on the complemented likelihood `1 − p(y | m)`. A deliberately
    /// wrong update used to show the check can fail.
    Complemented,
}

/// Random finite-support prior with Bernoulli-compatible atoms: nonnegative
/// coordinates and norm at most 1.
pub fn random_bernoulli_prior<R: Rng + ?Sized>(dim: usize, atoms: usize, rng: &mut R) -> PriorSpec {
    let points: Vec<Vector> = (0..atoms)
        .map(|_| random_unit(dim, true, rng).scaled(rng.random::<f64>()))
        .collect();
    let raw: Vec<f64> = (0..atoms)
        .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3)
        .collect();
    let total: f64 = raw.iter().sum();
    PriorSpec::FiniteSupport {
        atoms: points,
        weights: raw.iter().map(|w| w / total).collect(),
    }
}

/// `E[Γ_{t+1} | F_t]` under the chosen likelihood, and the right-hand side
/// `Γ − ΓaaᵀΓ/(σ² + aᵀΓa)`.
pub fn variance_reduction_sides(
    state: &PosteriorState,
    action: &Vector,
    mode: LikelihoodMode,
) -> Result<(PsdMatrix, PsdMatrix)> {
    let noise = *state.noise();
    let outcomes = match mode {
        LikelihoodMode::Exact => state.enumerate_posterior_outcomes(action)?,
        LikelihoodMode::Complemented => {
            state.enumerate_outcomes_with(action, |y, m| Ok(1.0 - noise.likelihood(y, m)?))?
        }
    };
    let dim = state.dim();
    let mut expected = Matrix::zeros(dim);
    for o in &outcomes {
        expected = expected.add(&o.posterior.covariance().scaled(o.probability));
    }
    let gamma = state.covariance();
    let ga = gamma.matvec(action);
    let denom = noise.sigma_sq_bound() + ga.dot(action);
    let mut rhs = gamma.as_matrix().clone();
    rhs.add_outer(-1.0 / denom, &ga);
    Ok((PsdMatrix::new(expected)?, PsdMatrix::new(rhs)?))
}

/// Expected covariance contraction on random finite-support priors with Bernoulli rewards.
/// Each instance first advances the posterior through up to three sampled
/// rounds, then compares both sides by exact outcome enumeration. The
/// violation is `max(0, −λ_min(RHS − E[Γ_{t+1} | F_t]))`.
pub fn check_lemma21(
    instances: usize,
    seed: u64,
    mode: LikelihoodMode,
    tolerance: f64,
) -> Result<LemmaCheck> {
    let violations = per_instance(instances, seed, 0x21, |rng, _| {
        let dim = rng.random_range(1..=3);
        let atoms = rng.random_range(2..=8);
        let prior = random_bernoulli_prior(dim, atoms, rng);
        let noise = NoiseSpec::BernoulliMean;
        let theta = prior.sample(rng);
        let mut state = PosteriorState::init(&prior, &noise, &EngineConfig::FiniteSupport, rng)?;
        for _ in 0..rng.random_range(0..=3) {
            let a = random_unit(dim, true, rng);
            let y = noise.sample_reward(theta.dot(&a), rng)?;
            state.update(&a, y, rng)?;
        }
        let action = random_unit(dim, true, rng).scaled(rng.random_range(0.25..=1.0));
        let (expected, rhs) = variance_reduction_sides(&state, &action, mode)?;
        Ok((-psd_order_gap(&expected, &rhs)?).max(0.0))
    })?;
    let name = match mode {
        LikelihoodMode::Exact => "lemma21_variance_reduction",
        LikelihoodMode::Complemented => "lemma21_variance_reduction_complemented",
    };
    Ok(LemmaCheck::new(name, &violations, tolerance, 0))
}

// ── Trace Cauchy–Schwarz ────────────────────────────────────────────────

/// Trace Cauchy-Schwarz on paired sample sets of five kinds: independent, linearly
/// correlated, `X = Z`, `X = −Z` and one-hot.
pub fn check_lemma31(sets: usize, seed: u64, tolerance: f64) -> Result<LemmaCheck> {
    let violations = per_instance(sets, seed, 0x31, |rng, i| {
        let dim = rng.random_range(1..=6);
        let n = rng.random_range(1..=200);
        let scale = 1.0 / (dim as f64).sqrt();
        let mix = random_psd(dim, 1.0, rng).into_matrix();
        let mut xs = Vec::with_capacity(n);
        let mut zs = Vec::with_capacity(n);
        for _ in 0..n {
            let x = Vector::standard_normal(dim, rng).scaled(scale);
            let z = match i % 5 {
                0 => Vector::standard_normal(dim, rng).scaled(scale),
                1 => mix
                    .matvec(&x)
                    .add(&Vector::standard_normal(dim, rng).scaled(0.1 * scale)),
                2 => x.clone(),
                3 => x.scaled(-1.0),
                _ => Vector::basis(dim, rng.random_range(0..dim)),
            };
            let x = if i % 5 == 4 { z.clone() } else { x };
            xs.push(x);
            zs.push(z);
        }
        Ok(trace_cauchy_schwarz_check(&xs, &zs, tolerance)?.violation)
    })?;
    Ok(LemmaCheck::new(
        "lemma31_trace_cauchy_schwarz",
        &violations,
        tolerance,
        0,
    ))
}

// ── General potential, exact ────────────────────────────────────────────

/// One-dimensional prior on 2 to 4 atoms in `[0, 1]`. Every other instance is
/// the three-atom non-monotone family.
pub fn random_scalar_prior<R: Rng + ?Sized>(rng: &mut R, index: usize) -> Result<PriorSpec> {
    if index.is_multiple_of(2) {
        return PriorSpec::non_monotone_example(rng.random_range(0.005..0.245));
    }
    let k = rng.random_range(2..=4);
    let atoms = (0..k)
        .map(|_| Vector::new(vec![rng.random::<f64>()]))
        .collect();
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    Ok(PriorSpec::FiniteSupport {
        atoms,
        weights: raw.iter().map(|w| w / total).collect(),
    })
}

/// Full outcome-tree expectation of the potential sum with the adversarial
/// rule, against `2 max(σ², 1) log det(I + TΓ₁)` with no statistical slack.
pub fn check_thm23_exact(instances: usize, seed: u64, tolerance: f64) -> Result<LemmaCheck> {
    let violations = per_instance(instances, seed, 0x23, |rng, i| {
        let prior = random_scalar_prior(rng, i)?;
        let report = verify_thm23(&Thm23Config {
            prior,
            noise: NoiseSpec::BernoulliMean,
            horizon: rng.random_range(1..=10),
            rule: ActionRule::Adversarial,
            replications: 1,
            master_seed: 0,
            engine: None,
        })?;
        if !report.exact {
            return Err(Error::InvalidSpec("exact path was not taken".into()));
        }
        Ok((report.mean - report.bound).max(0.0))
    })?;
    Ok(LemmaCheck::new(
        "thm23_exact_tree",
        &violations,
        tolerance,
        0,
    ))
}

// ── Non-monotone posterior covariance ───────────────────────────────────

/// Value of `Γ₂` after `Y₁ = 1` as printed in the original derivation.
pub const REFERENCE_GAMMA2: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub p: f64,
    pub y1: u8,
    pub atoms: Vec<f64>,
    pub prior_weights: Vec<f64>,
    pub gamma_1: f64,
    pub posterior_weights: Vec<f64>,
    pub gamma_2: f64,
    /// `Γ₂ ⋠ Γ₁`.
    pub non_monotone: bool,
    /// `P(1/4 | Y₁)/P(3/4 | Y₁)`.
    pub posterior_ratio: f64,
    /// Only for `y1 = 1`: whether the posterior is uniform on `{1/4, 3/4}`.
    pub posterior_uniform: Option<bool>,
    /// Only for `y1 = 1`: the printed reference value for `Γ₂`.
    pub reference_gamma_2: Option<f64>,
    /// Only for `y1 = 1`: whether `Γ₂` equals the reference exactly.
    pub matches_reference: Option<bool>,
}

impl CounterexampleReport {
    /// True when every assertion attached to this observation holds.
    pub fn assertions_hold(&self) -> bool {
        self.posterior_uniform.unwrap_or(true) && self.matches_reference.unwrap_or(true)
    }
}

/// Exact Bayes on the prior `{0: 1−4p, 1/4: 3p, 3/4: p}` with action 1 and
/// Bernoulli rewards.
pub fn counterexample(p: f64, y1: u8) -> Result<CounterexampleReport> {
    if y1 > 1 {
        return Err(Error::InvalidSpec(format!("y1 must be 0 or 1, got {y1}")));
    }
    let prior = PriorSpec::non_monotone_example(p)?;
    let noise = NoiseSpec::BernoulliMean;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut state = PosteriorState::init(&prior, &noise, &EngineConfig::FiniteSupport, &mut rng)?;
    let gamma1 = state.covariance();
    let prior_weights = state.weights().map(<[f64]>::to_vec).unwrap_or_default();
    let atoms: Vec<f64> = state
        .atoms()
        .map(|a| a.iter().map(|v| v[0]).collect())
        .unwrap_or_default();
    state.update(&Vector::new(vec![1.0]), f64::from(y1), &mut rng)?;
    let gamma2 = state.covariance();
    let posterior_weights = state.weights().map(<[f64]>::to_vec).unwrap_or_default();
    let tol = Tolerances::DEFAULT;
    let non_monotone = !psd_order_holds(&gamma2, &gamma1, tol.order)?;
    let posterior_ratio = posterior_weights[1] / posterior_weights[2];
    let gamma_2 = gamma2[(0, 0)];
    let (posterior_uniform, reference_gamma_2, matches_reference) = if y1 == 1 {
        let uniform = posterior_weights[0].abs() <= tol.exact
            && (posterior_weights[1] - 0.5).abs() <= tol.exact
            && (posterior_weights[2] - 0.5).abs() <= tol.exact;
        (
            Some(uniform),
            Some(REFERENCE_GAMMA2),
            Some((gamma_2 - REFERENCE_GAMMA2).abs() <= tol.exact),
        )
    } else {
        (None, None, None)
    };
    Ok(CounterexampleReport {
        p,
        y1,
        atoms,
        prior_weights,
        gamma_1: gamma1[(0, 0)],
        posterior_weights,
        gamma_2,
        non_monotone,
        posterior_ratio,
        posterior_uniform,
        reference_gamma_2,
        matches_reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eq1_small_run_passes() {
        let c = check_eq1(48, 1, 1e-8).unwrap();
        assert_eq!(c.instances, 48);
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn concavity_and_eq3_pass() {
        assert!(check_concavity(200, 2, 1e-9).unwrap().pass);
        assert!(check_eq3(200, 3, 1e-9).unwrap().pass);
        assert!(check_eq3(200, 3, 1e-11).unwrap().pass);
    }

    #[test]
    fn variational_equality_at_x_identity() {
        let sigma = PsdMatrix::diagonal(&[2.0, 0.5]).unwrap();
        let v = variational_objective(&sigma, &Matrix::scaled_identity(2, 3.0))
            .unwrap()
            .unwrap();
        assert!((v - (7.0f64.ln() + 2.5f64.ln())).abs() < 1e-12);
        let c = check_variational(100, 10, 4, 1e-9).unwrap();
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn variational_rejects_non_pd_middle() {
        let sigma = PsdMatrix::identity(1);
        let lambda = Matrix::scaled_identity(1, -2.0);
        assert_eq!(variational_objective(&sigma, &lambda).unwrap(), None);
    }

    #[test]
    fn lemma21_exact_passes_and_complemented_fails() {
        assert!(
            check_lemma21(100, 5, LikelihoodMode::Exact, 1e-9)
                .unwrap()
                .pass
        );
        let bad = check_lemma21(100, 5, LikelihoodMode::Complemented, 1e-9).unwrap();
        assert!(!bad.pass);
        assert!(bad.max_violation > 1e-6);
    }

    #[test]
    fn lemma31_includes_equality_cases() {
        let c = check_lemma31(100, 6, 1e-9).unwrap();
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn thm23_exact_small() {
        let c = check_thm23_exact(20, 7, 1e-9).unwrap();
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn counterexample_values() {
        let r = counterexample(0.05, 1).unwrap();
        assert!((r.gamma_1 - 0.031875).abs() < 1e-15);
        assert_eq!(r.posterior_weights[0], 0.0);
        assert!((r.posterior_weights[1] - 0.5).abs() < 1e-15);
        assert!((r.posterior_ratio - 1.0).abs() < 1e-12);
        assert_eq!(r.posterior_uniform, Some(true));
        assert!((r.gamma_2 - 0.0625).abs() < 1e-15);
        assert!(r.non_monotone);
        assert_eq!(r.matches_reference, Some(false));
        assert!(!r.assertions_hold());
    }

    #[test]
    fn counterexample_y0_has_no_assertions() {
        let r = counterexample(0.05, 0).unwrap();
        // P(y=0 | θ) = 1 − θ: weights ∝ {0.8, 0.1125, 0.0125}.
        let total = 0.8 + 0.1125 + 0.0125;
        assert!((r.posterior_weights[0] - 0.8 / total).abs() < 1e-14);
        assert!(r.matches_reference.is_none());
        assert!(r.assertions_hold());
    }

    #[test]
    fn counterexample_rejects_bad_inputs() {
        assert!(counterexample(0.3, 1).is_err());
        assert!(counterexample(0.05, 2).is_err());
    }

    #[test]
    fn zero_instances_rejected() {
        let cfg = LemmaSuiteConfig::default().with_instances(0);
        assert!(run_lemma_suite(&cfg).is_err());
    }
}
