//! The acceptance matrix: eleven criteria, each with a tolerance and,
//! where one is stated, a runtime limit that is part of the pass condition.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{ActionSetGenerator, Policy};
use crate::distributions::{NoiseSpec, PriorSpec};
use crate::harness::{
    bound_values, derive_seed, run_experiment, BoundCheck, ExperimentConfig, RunSettings,
};
use crate::kernel::{PsdMatrix, Vector};
use crate::posterior::{EngineConfig, PosteriorState, DEFAULT_PARTICLES};
use crate::potential::{random_unit, verify_thm23, ActionRule, Thm23Config};
use crate::report::{parse_summary_json, render_run_artifacts};
use crate::verify::{
    check_concavity, check_eq1, check_eq3, check_lemma21, check_lemma31, check_thm23_exact,
    check_variational, counterexample, random_bernoulli_prior, LikelihoodMode, REFERENCE_GAMMA2,
};
use crate::{Result, Tolerances};

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    /// The headline measured quantity (a violation, a gap or a margin).
    pub measured: f64,
    pub detail: String,
    pub runtime_secs: f64,
    pub runtime_limit_secs: Option<f64>,
}

impl CriterionResult {
    fn finish(
        id: u8,
        name: &str,
        start: Instant,
        limit: Option<f64>,
        outcome: Result<(bool, f64, String)>,
    ) -> Self {
        let runtime_secs = start.elapsed().as_secs_f64();
        let (ok, measured, mut detail) = match outcome {
            Ok(v) => v,
            Err(e) => (false, f64::NAN, format!("error: {e}")),
        };
        let in_time = limit.is_none_or(|l| runtime_secs <= l);
        if !in_time {
            detail.push_str(&format!(
                "; runtime {runtime_secs:.1}s over the {:.0}s limit",
                limit.unwrap_or(0.0)
            ));
        }
        Self {
            id,
            name: name.to_string(),
            pass: ok && in_time,
            measured,
            detail,
            runtime_secs,
            runtime_limit_secs: limit,
        }
    }

    /// `PASS [3] lemma21_exact  measured=…  (12.3s / 60s)  detail`.
    pub fn line(&self) -> String {
        let limit = self
            .runtime_limit_secs
            .map(|l| format!(" / {l:.0}s"))
            .unwrap_or_default();
        format!(
            "{} [{:>2}] {:<28} measured={:<12.6e} ({:.2}s{})  {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.runtime_secs,
            limit,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub all_pass: bool,
}

/// Per-criterion seed, kept below 2⁶³ so it fits a TOML integer.
pub fn seed_for(seed: u64, id: u8) -> u64 {
    derive_seed(seed, u64::from(id)) >> 1
}

// ── Configurations ──────────────────────────────────────────────────────

/// Eight atoms drawn uniformly from the unit ball.
pub fn random_ball_prior<R: Rng + ?Sized>(dim: usize, atoms: usize, rng: &mut R) -> PriorSpec {
    let points = (0..atoms)
        .map(|_| random_unit(dim, false, rng).scaled(rng.random::<f64>().powf(1.0 / dim as f64)))
        .collect();
    PriorSpec::FiniteSupport {
        atoms: points,
        weights: vec![1.0 / atoms as f64; atoms],
    }
}

fn run_settings(horizon: usize, replications: usize, master_seed: u64) -> RunSettings {
    RunSettings {
        horizon,
        replications,
        master_seed,
        lambda: 1.0,
        policy: Policy::Lints,
        workers: None,
        bound_checks: BoundCheck::ALL.to_vec(),
    }
}

/// N(0, I₅) prior, Gaussian noise σ = 1, 20 fresh arms per round.
pub fn gaussian_regret_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        prior: PriorSpec::Gaussian {
            mean: Vector::zeros(5),
            cov: PsdMatrix::identity(5),
        },
        noise: NoiseSpec::Gaussian { sd: 1.0 },
        engine: Some(EngineConfig::Conjugate),
        actions: ActionSetGenerator::KarmedRandom { k: 20 },
        run: run_settings(1_000, 200, seed),
    }
}

/// Eight nonnegative atoms in the unit ball of R³ with Bernoulli rewards.
pub fn bernoulli_regret_config(seed: u64) -> ExperimentConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xB));
    let mut prior = random_bernoulli_prior(3, 8, &mut rng);
    if let PriorSpec::FiniteSupport { weights, .. } = &mut prior {
        *weights = vec![1.0 / 8.0; 8];
    }
    ExperimentConfig {
        prior,
        noise: NoiseSpec::BernoulliMean,
        engine: Some(EngineConfig::FiniteSupport),
        actions: ActionSetGenerator::KarmedRandom { k: 10 },
        run: run_settings(500, 500, seed),
    }
}

/// Eight atoms in the unit ball of R³, Student-t noise with 3 degrees of
/// freedom and scale 0.5 (variance 0.75).
pub fn student_t_regret_config(seed: u64) -> ExperimentConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xC));
    ExperimentConfig {
        prior: random_ball_prior(3, 8, &mut rng),
        noise: NoiseSpec::StudentT {
            dof: 3.0,
            scale: 0.5,
        },
        engine: Some(EngineConfig::FiniteSupport),
        actions: ActionSetGenerator::KarmedRandom { k: 10 },
        run: run_settings(500, 500, seed),
    }
}

pub const THM23_MC_PRIORS: usize = 4;

/// Monte Carlo potential configs: d = 3, eight atoms in the unit ball,
/// T = 200, 500 replications, adversarial actions, Gaussian noise σ = 1.
pub fn thm23_mc_configs(seed: u64) -> Vec<Thm23Config> {
    (0..THM23_MC_PRIORS)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x600 + k as u64));
            Thm23Config {
                prior: random_ball_prior(3, 8, &mut rng),
                noise: NoiseSpec::Gaussian { sd: 1.0 },
                horizon: 200,
                rule: ActionRule::Adversarial,
                replications: 500,
                master_seed: derive_seed(seed, k as u64) >> 1,
                engine: Some(EngineConfig::FiniteSupport),
            }
        })
        .collect()
}

// ── Criteria ────────────────────────────────────────────────────────────

pub fn criterion_1(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let tol = Tolerances::DEFAULT.classical;
    let out = check_eq1(1_000, seed_for(seed, 1), tol).map(|c| {
        (
            c.pass,
            c.max_violation,
            format!("{} sequences, tolerance {tol:e}", c.instances),
        )
    });
    CriterionResult::finish(1, "eq1_classical_potential", start, Some(30.0), out)
}

pub fn criterion_2(seed: u64) -> CriterionResult {
    criterion_2_with(seed, Tolerances::DEFAULT.inequality)
}

/// Criterion 2 with the fuzz tolerance overridden.
pub fn criterion_2_with(seed: u64, tol: f64) -> CriterionResult {
    let start = Instant::now();
    let s = seed_for(seed, 2);
    let out = (|| {
        let checks = [
            check_concavity(2_000, s, tol)?,
            check_variational(2_000, 50, s, tol)?,
            check_eq3(2_000, s, tol)?,
        ];
        let worst = checks.iter().map(|c| c.max_violation).fold(0.0, f64::max);
        let detail = checks
            .iter()
            .map(|c| {
                format!(
                    "{}: {:.2e} over {} (skipped {})",
                    c.name, c.max_violation, c.instances, c.skipped
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        Ok((
            checks.iter().all(|c| c.pass),
            worst,
            format!("{detail}; tolerance {tol:e}"),
        ))
    })();
    CriterionResult::finish(2, "lemma22_fuzz", start, Some(60.0), out)
}

pub fn criterion_3(seed: u64) -> CriterionResult {
    criterion_3_with(seed, LikelihoodMode::Exact)
}

/// Criterion 3 with a chosen posterior update, so a corrupted update can be
/// shown to fail.
pub fn criterion_3_with(seed: u64, mode: LikelihoodMode) -> CriterionResult {
    let start = Instant::now();
    let tol = Tolerances::DEFAULT.order;
    let out = check_lemma21(500, seed_for(seed, 3), mode, tol).map(|c| {
        (
            c.pass,
            c.max_violation,
            format!(
                "{} priors, worst −λ_min {:.3e}, tolerance {tol:e}",
                c.instances, c.max_violation
            ),
        )
    });
    CriterionResult::finish(3, "lemma21_exact", start, Some(60.0), out)
}

pub const GAMMA1_ORACLE: f64 = 0.031875;

pub fn criterion_4(_seed: u64) -> CriterionResult {
    let start = Instant::now();
    let out = counterexample(0.05, 1).map(|r| {
        let exact = Tolerances::DEFAULT.exact;
        let gamma1_ok = (r.gamma_1 - GAMMA1_ORACLE).abs() <= exact;
        let pass = r.posterior_uniform == Some(true)
            && r.matches_reference == Some(true)
            && gamma1_ok
            && r.non_monotone;
        (
            pass,
            r.gamma_2,
            format!(
                "posterior {:?}, Γ₁ = {} (oracle {GAMMA1_ORACLE}), Γ₂ = {} (reference {REFERENCE_GAMMA2}), non-monotone {}",
                r.posterior_weights, r.gamma_1, r.gamma_2, r.non_monotone
            ),
        )
    });
    CriterionResult::finish(4, "counterexample_exact", start, Some(1.0), out)
}

pub fn criterion_5(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let tol = Tolerances::DEFAULT.inequality;
    let out = check_thm23_exact(100, seed_for(seed, 5), tol).map(|c| {
        (
            c.pass,
            c.max_violation,
            format!(
                "{} outcome trees, T ≤ 10, zero statistical slack",
                c.instances
            ),
        )
    });
    CriterionResult::finish(5, "thm23_exact_tree", start, Some(120.0), out)
}

pub fn criterion_6(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let mut pass = true;
        let mut worst_margin = f64::NEG_INFINITY;
        let mut parts = Vec::new();
        for cfg in thm23_mc_configs(seed_for(seed, 6)) {
            let r = verify_thm23(&cfg)?;
            pass &= r.pass && r.failed_replications == 0;
            let margin = r.mean - r.bound - 3.0 * r.stderr;
            worst_margin = worst_margin.max(margin);
            parts.push(format!("{:.4}±{:.4} vs {:.4}", r.mean, r.stderr, r.bound));
        }
        Ok((
            pass,
            worst_margin,
            format!("mean±se vs bound: {}", parts.join(", ")),
        ))
    })();
    CriterionResult::finish(6, "thm23_monte_carlo", start, Some(180.0), out)
}

pub fn criterion_7(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let tol = Tolerances::DEFAULT.inequality;
    let out = check_lemma31(1_000, seed_for(seed, 7), tol).map(|c| {
        (
            c.pass,
            c.max_violation,
            format!("{} paired sets incl. X = ±Z", c.instances),
        )
    });
    CriterionResult::finish(7, "lemma31_trace_cs", start, Some(10.0), out)
}

/// Regret check for one configuration: `mean + 3·stderr ≤ bound`.
pub fn criterion_8_config(id_suffix: &str, cfg: &ExperimentConfig) -> CriterionResult {
    let start = Instant::now();
    let out = run_experiment(cfg).map(|o| {
        let s = o.summary;
        let upper = s.final_regret.mean + 3.0 * s.final_regret.stderr;
        (
            s.pass_eq4 == Some(true) && s.failed_replications == 0,
            upper - s.bounds.eq4_rhs,
            format!(
                "regret {:.3} ± {:.3} vs bound {:.3} (failed {})",
                s.final_regret.mean, s.final_regret.stderr, s.bounds.eq4_rhs, s.failed_replications
            ),
        )
    });
    CriterionResult::finish(
        8,
        &format!("eq4_regret_{id_suffix}"),
        start,
        Some(300.0),
        out,
    )
}

pub fn criterion_8(seed: u64) -> Vec<CriterionResult> {
    let s = seed_for(seed, 8);
    vec![
        criterion_8_config("gaussian", &gaussian_regret_config(s)),
        criterion_8_config("bernoulli", &bernoulli_regret_config(s)),
        criterion_8_config("student_t", &student_t_regret_config(s)),
    ]
}

/// `log det(I + TΓ₁) ≤ d log(1 + T)` for every acceptance configuration with
/// `Γ₁ ⪯ I`.
pub fn criterion_9(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let out = (|| {
        let tol = Tolerances::DEFAULT.inequality;
        let s8 = seed_for(seed, 8);
        let mut cases: Vec<(PriorSpec, f64, usize)> = [
            gaussian_regret_config(s8),
            bernoulli_regret_config(s8),
            student_t_regret_config(s8),
        ]
        .into_iter()
        .map(|c| (c.prior, c.noise.sigma_sq_bound(), c.run.horizon))
        .collect();
        for c in thm23_mc_configs(seed_for(seed, 6)) {
            cases.push((c.prior, c.noise.sigma_sq_bound(), c.horizon));
        }
        let mut worst = f64::NEG_INFINITY;
        let mut checked = 0;
        let mut pass = true;
        for (prior, sigma_sq, horizon) in &cases {
            let (_, gamma1) = prior.moments();
            let b = bound_values(&gamma1, *sigma_sq, *horizon, 1.0)?;
            if b.gamma1_below_identity {
                checked += 1;
                let gap = b.logdet_gamma1 - b.trivial_logdet;
                worst = worst.max(gap);
                pass &= gap <= tol;
            }
        }
        pass &= checked > 0;
        Ok((
            pass,
            worst,
            format!("{checked} of {} configurations have Γ₁ ⪯ I", cases.len()),
        ))
    })();
    CriterionResult::finish(9, "remark33_trivial_bound", start, None, out)
}

pub const CROSS_EPISODES: usize = 20;
pub const CROSS_DIM: usize = 3;
pub const CROSS_HORIZON: usize = 100;

/// Terminal `(‖Δμ‖₂, ‖ΔΓ‖_F)` between particle and conjugate posteriors fed
/// the same action and reward stream.
pub fn engine_cross_check(seed: u64, episode: usize, particles: usize) -> Result<(f64, f64)> {
    let prior = PriorSpec::Gaussian {
        mean: Vector::zeros(CROSS_DIM),
        cov: PsdMatrix::identity(CROSS_DIM),
    };
    let noise = NoiseSpec::Gaussian { sd: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, episode as u64));
    let mut engine_rng = ChaCha8Rng::seed_from_u64(derive_seed(!seed, episode as u64));
    let theta = prior.sample(&mut rng);
    let mut exact =
        PosteriorState::init(&prior, &noise, &EngineConfig::Conjugate, &mut engine_rng)?;
    let mut approx = PosteriorState::init(
        &prior,
        &noise,
        &EngineConfig::particle(particles),
        &mut engine_rng,
    )?;
    for _ in 0..CROSS_HORIZON {
        let a = random_unit(CROSS_DIM, false, &mut rng);
        let y = noise.sample_reward(theta.dot(&a), &mut rng)?;
        exact.update(&a, y, &mut engine_rng)?;
        approx.update(&a, y, &mut engine_rng)?;
    }
    let dm = exact.mean().sub(&approx.mean()).norm();
    let dc = exact.covariance().sub(&approx.covariance()).frobenius();
    Ok((dm, dc))
}

pub fn criterion_10(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let s = seed_for(seed, 10);
    let out = (0..CROSS_EPISODES)
        .into_par_iter()
        .map(|e| engine_cross_check(s, e, DEFAULT_PARTICLES))
        .collect::<Result<Vec<_>>>()
        .map(|gaps| {
            let dm = gaps.iter().map(|g| g.0).fold(0.0, f64::max);
            let dc = gaps.iter().map(|g| g.1).fold(0.0, f64::max);
            (
                dm <= 0.02 && dc <= 0.05,
                dm,
                format!("max mean gap {dm:.4} (≤ 0.02), max covariance gap {dc:.4} (≤ 0.05)"),
            )
        });
    CriterionResult::finish(10, "engine_cross_validation", start, None, out)
}

/// Renders a configuration twice from scratch and compares the bytes of
/// every deterministic artifact. Also checks that the JSON re-parses to the
/// same summary.
pub fn determinism_check(cfg: &ExperimentConfig) -> Result<(bool, String)> {
    let first = run_experiment(cfg)?.summary;
    let second = run_experiment(cfg)?.summary;
    let a = render_run_artifacts(&first)?;
    let b = render_run_artifacts(&second)?;
    let mut mismatched = Vec::new();
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        if x != y {
            mismatched.push(*name);
        }
    }
    let reparsed = parse_summary_json(&a[0].1)? == first;
    let bytes: usize = a.iter().map(|(_, s)| s.len()).sum();
    Ok((
        mismatched.is_empty() && reparsed,
        format!("{bytes} bytes compared, mismatched {mismatched:?}, summary re-parses exactly: {reparsed}"),
    ))
}

pub fn criterion_11(seed: u64) -> CriterionResult {
    let start = Instant::now();
    let cfg = bernoulli_regret_config(seed_for(seed, 8));
    let out = determinism_check(&cfg).map(|(ok, detail)| (ok, if ok { 0.0 } else { 1.0 }, detail));
    CriterionResult::finish(11, "determinism", start, None, out)
}

/// Runs every criterion in order.
pub fn run_acceptance_suite(seed: u64) -> SuiteReport {
    run_acceptance_with(seed, |_| {})
}

/// Runs every criterion, handing each result to `on_result` as it lands.
pub fn run_acceptance_with(seed: u64, mut on_result: impl FnMut(&CriterionResult)) -> SuiteReport {
    let mut criteria = Vec::new();
    let mut push = |r: CriterionResult| {
        on_result(&r);
        criteria.push(r);
    };
    push(criterion_1(seed));
    push(criterion_2(seed));
    push(criterion_3(seed));
    push(criterion_4(seed));
    push(criterion_5(seed));
    push(criterion_6(seed));
    push(criterion_7(seed));
    for r in criterion_8(seed) {
        push(r);
    }
    push(criterion_9(seed));
    push(criterion_10(seed));
    push(criterion_11(seed));
    let all_pass = criteria.iter().all(|c| c.pass);
    SuiteReport {
        seed,
        criteria,
        all_pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_validate() {
        for cfg in [
            gaussian_regret_config(1),
            bernoulli_regret_config(1),
            student_t_regret_config(1),
        ] {
            cfg.validate().unwrap();
        }
        for cfg in thm23_mc_configs(1) {
            cfg.prior.validate(&Tolerances::DEFAULT).unwrap();
        }
    }

    #[test]
    fn student_t_variance_matches() {
        assert!((student_t_regret_config(1).noise.sigma_sq_bound() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn runtime_limit_is_enforced() {
        let start = Instant::now() - std::time::Duration::from_secs(2);
        let r = CriterionResult::finish(4, "x", start, Some(1.0), Ok((true, 0.0, String::new())));
        assert!(!r.pass);
        assert!(r.detail.contains("limit"));
    }

    #[test]
    fn errors_become_failures() {
        let r = CriterionResult::finish(
            1,
            "x",
            Instant::now(),
            None,
            Err(crate::Error::EmptyActionSet),
        );
        assert!(!r.pass);
        assert!(r.detail.starts_with("error"));
    }

    #[test]
    fn cross_check_single_episode() {
        let (dm, dc) = engine_cross_check(3, 0, DEFAULT_PARTICLES).unwrap();
        assert!(dm <= 0.02 && dc <= 0.05, "{dm} {dc}");
    }
}
