//! Elliptical potential tracking.
//!
//! Two sums are tracked side by side along a trajectory of actions:
//!
//! ```text
//!   classical:  Σ_t a_tᵀ Σ_t a_t,   Σ_t⁻¹ = λI + Σ_{τ<t} a_τ a_τᵀ
//!   posterior:  Σ_t a_tᵀ Γ_t a_t,   Γ_t = Var(Θ* | history)
//! ```
//!
//! The first is bounded deterministically by `2 log(det Σ₁ / det Σ_{T+1}) ≤
//! 2d log(1 + T/(λd))`; the second in expectation by
//! `2 max(σ², 1) log det(I + T Γ₁)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{NoiseSpec, PriorSpec};
use crate::harness::{derive_seed, mean_stderr};
use crate::kernel::{logdet_potential, Cholesky, Matrix, PsdMatrix, SymmetricEigen, Vector};
use crate::posterior::{EngineConfig, PosteriorState};
use crate::{Error, Result, Tolerances};

// ── Classical recursion ─────────────────────────────────────────────────

/// Precision `λI + Σ a aᵀ` of the classical (Gaussian, ridge) recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalPrecision {
    lambda: f64,
    precision: Matrix,
}

impl ClassicalPrecision {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda >= 1.0 && lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "ridge λ = {lambda} must be ≥ 1"
            )));
        }
        Ok(Self {
            lambda,
            precision: Matrix::scaled_identity(dim, lambda),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.precision.dim()
    }

    /// Returns `aᵀ Σ_t a` and advances to `Σ_{t+1}`.
    pub fn step(&mut self, a: &Vector) -> Result<f64> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: a.dim(),
            });
        }
        let chol =
            Cholesky::factor(&self.precision).ok_or(Error::CholeskyFailure { retries: 0 })?;
        let w = chol.solve_lower(a);
        let quad = w.norm_sq();
        self.precision.add_outer(1.0, a);
        Ok(quad)
    }

    /// `log det Σ_t⁻¹` of the current precision.
    pub fn logdet_precision(&self) -> Result<f64> {
        Ok(Cholesky::factor(&self.precision)
            .ok_or(Error::CholeskyFailure { retries: 0 })?
            .logdet())
    }

    /// `2 log(det Σ₁ / det Σ_now)`.
    pub fn log_det_ratio_bound(&self) -> Result<f64> {
        Ok(2.0 * (self.logdet_precision()? - self.dim() as f64 * self.lambda.ln()))
    }
}

/// `2d log(1 + T/(λd))`.
pub fn classical_bound(dim: usize, horizon: usize, lambda: f64) -> f64 {
    let d = dim as f64;
    2.0 * d * (1.0 + horizon as f64 / (lambda * d)).ln()
}

/// `2 max(σ², 1) log det(I + T Γ₁)`.
pub fn general_bound(gamma1: &PsdMatrix, sigma_sq: f64, horizon: usize) -> Result<f64> {
    Ok(2.0 * sigma_sq.max(1.0) * logdet_potential(gamma1, horizon as f64)?)
}

// ── Trajectory trace ────────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialRecord {
    pub t: usize,
    pub action: Vector,
    /// `a_tᵀ Γ_t a_t`.
    pub gamma_quad: f64,
    /// `a_tᵀ Σ_t a_t` under the classical recursion.
    pub sigma_quad: f64,
    pub gamma_sum: f64,
    pub sigma_sum: f64,
}

/// Both potential sums along one trajectory.
#[derive(Debug, Clone)]
pub struct PotentialTrace {
    records: Vec<PotentialRecord>,
    classical: ClassicalPrecision,
    gamma1: PsdMatrix,
    sigma_sq: f64,
    horizon: usize,
}

impl PotentialTrace {
    pub fn new(gamma1: PsdMatrix, sigma_sq: f64, lambda: f64, horizon: usize) -> Result<Self> {
        Ok(Self {
            classical: ClassicalPrecision::new(gamma1.dim(), lambda)?,
            records: Vec::with_capacity(horizon),
            gamma1,
            sigma_sq,
            horizon,
        })
    }

    /// Records round `t = len + 1`: adds `aᵀ Γ_t a` and the classical term.
    pub fn general_step(&mut self, gamma_t: &PsdMatrix, a: &Vector) -> Result<f64> {
        if gamma_t.dim() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: gamma_t.dim(),
                actual: a.dim(),
            });
        }
        let gamma_quad = gamma_t.quad_form(a).max(0.0);
        let sigma_quad = self.classical.step(a)?;
        let (gamma_sum, sigma_sum) = self
            .records
            .last()
            .map_or((0.0, 0.0), |r| (r.gamma_sum, r.sigma_sum));
        self.records.push(PotentialRecord {
            t: self.records.len() + 1,
            action: a.clone(),
            gamma_quad,
            sigma_quad,
            gamma_sum: gamma_sum + gamma_quad,
            sigma_sum: sigma_sum + sigma_quad,
        });
        Ok(gamma_quad)
    }

    pub fn records(&self) -> &[PotentialRecord] {
        &self.records
    }

    pub fn gamma_sum(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.gamma_sum)
    }

    pub fn sigma_sum(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.sigma_sum)
    }

    pub fn lambda(&self) -> f64 {
        self.classical.lambda()
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn classical(&self) -> &ClassicalPrecision {
        &self.classical
    }

    /// `2 max(σ², 1) log det(I + T Γ₁)` at the configured horizon.
    pub fn gamma1_logdet_bound(&self) -> Result<f64> {
        general_bound(&self.gamma1, self.sigma_sq, self.horizon)
    }

    /// Whether the classical sums satisfy both inequalities so far, with slack.
    pub fn classical_holds(&self, slack: f64) -> Result<bool> {
        let middle = self.classical.log_det_ratio_bound()?;
        let rhs = classical_bound(self.classical.dim(), self.records.len(), self.lambda());
        Ok(self.sigma_sum() <= middle + slack && middle <= rhs + slack)
    }
}

// ── Action rules ────────────────────────────────────────────────────────

/// Unit leading eigenvector of `Γ`, the action that maximizes `aᵀ Γ a`.
///
/// Ties inside the top eigenspace go to the lowest-index basis vector with a
/// nonzero projection; the sign makes the first nonzero entry positive.
pub fn adversarial_action(gamma: &PsdMatrix) -> Vector {
    let dim = gamma.dim();
    let eig = SymmetricEigen::new(gamma);
    let top = eig.max();
    let cut = top - 1e-10 * top.abs().max(1e-300);
    let space: Vec<Vector> = (0..dim)
        .filter(|&k| eig.values[k] >= cut)
        .map(|k| eig.vectors.column(k))
        .collect();
    for i in 0..dim {
        let mut proj = Vector::zeros(dim);
        for v in &space {
            proj.axpy(v[i], v);
        }
        if proj.norm() > 1e-8 {
            return canonical_sign(proj.normalized().expect("nonzero projection"));
        }
    }
    Vector::basis(dim, 0)
}

fn canonical_sign(v: Vector) -> Vector {
    match v.iter().find(|x| x.abs() > 1e-12) {
        Some(&x) if x < 0.0 => v.scaled(-1.0),
        _ => v,
    }
}

/// How the potential verifier picks `A_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionRule {
    /// Leading eigenvector of the current posterior covariance.
    Adversarial,
    Fixed {
        action: Vector,
    },
    /// Uniform on the unit sphere (nonnegative orthant under Bernoulli noise).
    RandomUnit,
}

impl ActionRule {
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, ActionRule::RandomUnit)
    }

    pub fn choose<R: Rng + ?Sized>(
        &self,
        gamma: &PsdMatrix,
        nonnegative: bool,
        rng: &mut R,
    ) -> Vector {
        match self {
            ActionRule::Adversarial => adversarial_action(gamma),
            ActionRule::Fixed { action } => action.clone(),
            ActionRule::RandomUnit => random_unit(gamma.dim(), nonnegative, rng),
        }
    }
}

pub(crate) fn random_unit<R: Rng + ?Sized>(dim: usize, nonnegative: bool, rng: &mut R) -> Vector {
    loop {
        let mut g = Vector::standard_normal(dim, rng);
        if nonnegative {
            for i in 0..dim {
                g[i] = g[i].abs();
            }
        }
        if let Some(u) = g.normalized() {
            return u;
        }
    }
}

// ── Verification of the general bound ───────────────────────────────────

/// Above this horizon the exact outcome tree is not used.
pub const MAX_EXACT_HORIZON: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thm23Config {
    pub prior: PriorSpec,
    pub noise: NoiseSpec,
    pub horizon: usize,
    pub rule: ActionRule,
    pub replications: usize,
    pub master_seed: u64,
    /// Engine for Monte Carlo runs; the exact engine for the prior if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub config: Thm23Config,
    /// True when the expectation came from full outcome enumeration.
    pub exact: bool,
    pub mean: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
    pub replications: usize,
    pub failed_replications: usize,
    /// Largest single-round `aᵀ Γ_t a` seen (exact path: over the whole tree).
    pub max_gamma_quad: f64,
}

/// Checks `E[Σ A_tᵀ Γ_t A_t] ≤ 2 max(σ², 1) log det(I + T Γ₁)`.
///
/// Finite-support priors with Bernoulli rewards, a deterministic rule and
/// `T ≤ 12` take the exact path; everything else is Monte Carlo with a
/// one-sided `mean ≤ bound + 3·stderr` test.
pub fn verify_thm23(cfg: &Thm23Config) -> Result<VerificationReport> {
    cfg.prior.validate(&Tolerances::DEFAULT)?;
    cfg.noise.validate()?;
    if cfg.horizon == 0 {
        return Err(Error::InvalidSpec("horizon must be ≥ 1".into()));
    }
    let (_, gamma1) = cfg.prior.moments();
    let sigma_sq = cfg.noise.sigma_sq_bound();
    let bound = general_bound(&gamma1, sigma_sq, cfg.horizon)?;
    let tol = Tolerances::DEFAULT;

    let exact_ok = matches!(cfg.prior, PriorSpec::FiniteSupport { .. })
        && cfg.noise.is_bernoulli()
        && cfg.rule.is_deterministic()
        && cfg.horizon <= MAX_EXACT_HORIZON;

    if exact_ok {
        let state = PosteriorState::init(
            &cfg.prior,
            &cfg.noise,
            &EngineConfig::FiniteSupport,
            &mut ChaCha8Rng::seed_from_u64(cfg.master_seed),
        )?;
        let mut max_quad: f64 = 0.0;
        let mean = exact_potential_expectation(&state, &cfg.rule, cfg.horizon, &mut max_quad)?;
        return Ok(VerificationReport {
            config: cfg.clone(),
            exact: true,
            mean,
            stderr: 0.0,
            bound,
            pass: mean <= bound + tol.inequality,
            replications: 1,
            failed_replications: 0,
            max_gamma_quad: max_quad,
        });
    }

    if cfg.replications == 0 {
        return Err(Error::InvalidSpec("replications must be ≥ 1".into()));
    }
    let engine = cfg
        .engine
        .unwrap_or_else(|| EngineConfig::exact_for(&cfg.prior, &cfg.noise));
    let results: Vec<Result<(f64, f64)>> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.master_seed, i as u64));
            potential_trajectory(cfg, &engine, &mut rng)
        })
        .collect();
    let mut sums = Vec::with_capacity(results.len());
    let mut failed = 0;
    let mut max_quad: f64 = 0.0;
    for r in results {
        match r {
            Ok((sum, mq)) => {
                sums.push(sum);
                max_quad = max_quad.max(mq);
            }
            Err(_) => failed += 1,
        }
    }
    if sums.is_empty() {
        return Err(Error::TooManyFailures {
            failed,
            total: cfg.replications,
            first: "every replication failed".into(),
        });
    }
    let (mean, stderr) = mean_stderr(&sums);
    Ok(VerificationReport {
        config: cfg.clone(),
        exact: false,
        mean,
        stderr,
        bound,
        pass: mean <= bound + 3.0 * stderr,
        replications: cfg.replications,
        failed_replications: failed,
        max_gamma_quad: max_quad,
    })
}

/// One trajectory: returns `(Σ aᵀ Γ_t a, max single term)`.
fn potential_trajectory<R: Rng + ?Sized>(
    cfg: &Thm23Config,
    engine: &EngineConfig,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let theta = cfg.prior.sample(rng);
    let mut state = PosteriorState::init(&cfg.prior, &cfg.noise, engine, rng)?;
    let nonneg = cfg.noise.is_bernoulli();
    let mut sum = 0.0;
    let mut max_quad: f64 = 0.0;
    for _ in 0..cfg.horizon {
        let gamma = state.covariance();
        let a = cfg.rule.choose(&gamma, nonneg, rng);
        let q = gamma.quad_form(&a).max(0.0);
        sum += q;
        max_quad = max_quad.max(q);
        let y = cfg.noise.sample_reward(theta.dot(&a), rng)?;
        state.update(&a, y, rng)?;
    }
    Ok((sum, max_quad))
}

/// `E[Σ_{t ≤ remaining} A_tᵀ Γ_t A_t | current state]` by walking the full
/// Bernoulli outcome tree. Exponential in the horizon.
pub fn exact_potential_expectation(
    state: &PosteriorState,
    rule: &ActionRule,
    remaining: usize,
    max_quad: &mut f64,
) -> Result<f64> {
    if remaining == 0 {
        return Ok(0.0);
    }
    let gamma = state.covariance();
    // Deterministic rules never touch the RNG.
    let mut unused = ChaCha8Rng::seed_from_u64(0);
    let a = rule.choose(&gamma, true, &mut unused);
    let q = gamma.quad_form(&a).max(0.0);
    *max_quad = max_quad.max(q);
    let mut rest = 0.0;
    for o in state.enumerate_posterior_outcomes(&a)? {
        rest += o.probability
            * exact_potential_expectation(&o.posterior, rule, remaining - 1, max_quad)?;
    }
    Ok(q + rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> Vector {
        Vector::new(vec![x])
    }

    #[test]
    fn classical_scalar_recursion() {
        let mut c = ClassicalPrecision::new(1, 1.0).unwrap();
        let sum: f64 = (0..3).map(|_| c.step(&scalar(1.0)).unwrap()).sum();
        // Σ_t = 1/t: 1 + 1/2 + 1/3.
        assert!((sum - 11.0 / 6.0).abs() < 1e-15);
        let rhs = classical_bound(1, 3, 1.0);
        assert!((rhs - 2.0 * 4f64.ln()).abs() < 1e-15);
        assert!((rhs - 2.772588722239781).abs() < 1e-12);
        assert!(sum <= rhs);
        // Middle term: 2 log(4 / 1).
        assert!((c.log_det_ratio_bound().unwrap() - 2.0 * 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn classical_zero_action() {
        let mut c = ClassicalPrecision::new(3, 2.0).unwrap();
        let before = c.clone();
        assert_eq!(c.step(&Vector::zeros(3)).unwrap(), 0.0);
        assert_eq!(c, before);
    }

    #[test]
    fn classical_rejects_small_lambda() {
        assert!(ClassicalPrecision::new(2, 0.5).is_err());
    }

    #[test]
    fn general_step_with_zero_covariance() {
        let mut tr = PotentialTrace::new(PsdMatrix::zeros(2), 1.0, 1.0, 5).unwrap();
        let q = tr
            .general_step(&PsdMatrix::zeros(2), &Vector::basis(2, 1))
            .unwrap();
        assert_eq!(q, 0.0);
        assert_eq!(tr.gamma_sum(), 0.0);
        assert_eq!(tr.sigma_sum(), 1.0);
    }

    #[test]
    fn general_bound_scaled_identity() {
        let (c, d, t, s2) = (0.3, 4, 50, 2.5);
        let g = PsdMatrix::scaled_identity(d, c).unwrap();
        let b = general_bound(&g, s2, t).unwrap();
        let want = 2.0 * s2 * d as f64 * (1.0 + t as f64 * c).ln();
        assert!((b - want).abs() < 1e-12);
    }

    #[test]
    fn adversarial_examples() {
        let a = adversarial_action(&PsdMatrix::diagonal(&[3.0, 1.0]).unwrap());
        assert!((a.sub(&Vector::basis(2, 0))).norm() < 1e-12);
        let b = adversarial_action(&PsdMatrix::scaled_identity(3, 0.7).unwrap());
        assert_eq!(b, Vector::basis(3, 0));
        let z = adversarial_action(&PsdMatrix::zeros(2));
        assert_eq!(z, Vector::basis(2, 0));
        let tilted = Matrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let t = adversarial_action(&PsdMatrix::new(tilted).unwrap());
        let h = 0.5f64.sqrt();
        assert!(t.sub(&Vector::new(vec![h, h])).norm() < 1e-12);
        let flipped = Matrix::from_rows(vec![vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let f = adversarial_action(&PsdMatrix::new(flipped).unwrap());
        assert!(f.sub(&Vector::new(vec![h, -h])).norm() < 1e-12);
    }

    #[test]
    fn non_monotone_two_round_tree() {
        let p = 0.05;
        let prior = PriorSpec::non_monotone_example(p).unwrap();
        let cfg = Thm23Config {
            prior,
            noise: NoiseSpec::BernoulliMean,
            horizon: 2,
            rule: ActionRule::Fixed {
                action: scalar(1.0),
            },
            replications: 1,
            master_seed: 0,
            engine: None,
        };
        let report = verify_thm23(&cfg).unwrap();
        assert!(report.exact);

        // Hand enumeration: P(Y₁ = 1) = 3p/4 + 3p/4; after Y₁ = 1 the law is
        // uniform on {1/4, 3/4} (variance 1/16); after Y₁ = 0 weights are
        // ∝ {1 − 4p, 9p/4, p/4}.
        let p1 = 1.5 * p;
        let w0 = [1.0 - 4.0 * p, 2.25 * p, 0.25 * p];
        let z: f64 = w0.iter().sum();
        let atoms = [0.0, 0.25, 0.75];
        let m: f64 = atoms.iter().zip(&w0).map(|(a, w)| a * w / z).sum();
        let v0: f64 = atoms
            .iter()
            .zip(&w0)
            .map(|(a, w)| w / z * (a - m).powi(2))
            .sum();
        let gamma1 = 0.75 * p - 2.25 * p * p;
        let want = gamma1 + p1 * 0.0625 + (1.0 - p1) * v0;
        assert!((report.mean - want).abs() < 1e-15);
        assert!((report.bound - 2.0 * (1.0 + 2.0 * gamma1).ln()).abs() < 1e-15);
        assert!(report.pass);
    }

    #[test]
    fn single_atom_has_zero_potential() {
        let prior = PriorSpec::FiniteSupport {
            atoms: vec![Vector::new(vec![0.1, 0.2])],
            weights: vec![1.0],
        };
        let cfg = Thm23Config {
            prior,
            noise: NoiseSpec::Gaussian { sd: 1.0 },
            horizon: 20,
            rule: ActionRule::Adversarial,
            replications: 10,
            master_seed: 3,
            engine: None,
        };
        let r = verify_thm23(&cfg).unwrap();
        assert_eq!(r.mean, 0.0);
        assert!(r.pass);
    }
}
