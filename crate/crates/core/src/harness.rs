//! Monte Carlo orchestration: seeded replications, aggregation, bound checks.
//!
//! Replication `i` always draws from a ChaCha stream seeded with
//! `derive_seed(master_seed, i)`, and aggregation walks results in index
//! order, so a summary depends only on the config, never on scheduling.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{run_episode, ActionSetGenerator, EpisodeConfig, EpisodeResult, Policy};
use crate::distributions::{NoiseSpec, PriorSpec};
use crate::kernel::{logdet_potential, psd_order_holds, PsdMatrix};
use crate::posterior::EngineConfig;
use crate::potential::classical_bound;
use crate::{Error, Result, Tolerances};

/// Curves are stored at every round up to this horizon.
pub const FULL_CURVE_LIMIT: usize = 10_000;
/// Points kept when a curve is subsampled.
pub const SUBSAMPLED_POINTS: usize = 1_000;
/// Fraction of replications allowed to fail before a run is aborted.
pub const FAILURE_BUDGET: f64 = 0.01;

/// SplitMix64 finalizer over `(master, index)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(master) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Sizes the process-wide worker pool used when a run does not set its own
/// worker count. Must be called before any parallel work starts.
pub fn configure_workers(workers: usize) -> Result<()> {
    if workers == 0 {
        return Err(Error::InvalidSpec("workers must be ≥ 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

pub fn replication_rng(master: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index as u64))
}

/// Sample mean and `sd / √n` (zero for a single sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

// ── Configuration ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundCheck {
    /// Classical potential inequality on every replication.
    Eq1,
    /// `E[Σ Aᵀ Γ_t A] ≤ 2 max(σ², 1) log det(I + T Γ₁)`.
    Thm23,
    /// Bayes regret `≤ √(2 max(σ², 1) d T log det(I + T Γ₁))`.
    Eq4,
    /// `log det(I + T Γ₁) ≤ d log(1 + T)` and the matching regret bound.
    Remark33,
}

impl BoundCheck {
    pub const ALL: [BoundCheck; 4] = [
        BoundCheck::Eq1,
        BoundCheck::Thm23,
        BoundCheck::Eq4,
        BoundCheck::Remark33,
    ];
}

fn all_checks() -> Vec<BoundCheck> {
    BoundCheck::ALL.to_vec()
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub horizon: usize,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "all_checks")]
    pub bound_checks: Vec<BoundCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub prior: PriorSpec,
    pub noise: NoiseSpec,
    /// Defaults to the exact engine for the prior/noise pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<EngineConfig>,
    pub actions: ActionSetGenerator,
    pub run: RunSettings,
}

impl ExperimentConfig {
    pub fn engine(&self) -> EngineConfig {
        self.engine
            .unwrap_or_else(|| EngineConfig::exact_for(&self.prior, &self.noise))
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            prior: self.prior.clone(),
            noise: self.noise,
            actions: self.actions.clone(),
            engine: self.engine(),
            horizon: self.run.horizon,
            lambda: self.run.lambda,
            policy: self.run.policy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.run.replications == 0 {
            return Err(Error::InvalidSpec("replications must be ≥ 1".into()));
        }
        if self.run.workers == Some(0) {
            return Err(Error::InvalidSpec("workers must be ≥ 1".into()));
        }
        self.episode().validate()
    }

    fn checks(&self, check: BoundCheck) -> bool {
        self.run.bound_checks.contains(&check)
    }
}

// ── Summary ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub t: usize,
    pub mean_regret: f64,
    pub stderr: f64,
    pub eq4_bound: f64,
    pub remark33_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialPoint {
    pub t: usize,
    pub mean_gamma_quad: f64,
    pub running_sum: f64,
    pub thm23_bound: f64,
}

/// Right-hand sides at the full horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundValues {
    /// `log det(I + T Γ₁)`.
    pub logdet_gamma1: f64,
    /// `d log(1 + T)`.
    pub trivial_logdet: f64,
    /// Whether `Γ₁ ⪯ I`, the premise of the trivial bound.
    pub gamma1_below_identity: bool,
    /// `2d log(1 + T/(λd))`.
    pub eq1_rhs: f64,
    /// `2 max(σ², 1) log det(I + T Γ₁)`.
    pub thm23_rhs: f64,
    /// `√(2 max(σ², 1) d T log det(I + T Γ₁))`.
    pub eq4_rhs: f64,
    /// `d √(2 max(σ², 1) T log(1 + T))`.
    pub remark33_rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub engine: EngineConfig,
    pub dim: usize,
    pub sigma_sq_bound: f64,
    pub norm_bound_violated: bool,
    pub completed_replications: usize,
    pub failed_replications: usize,
    pub final_regret: Estimate,
    pub potential_sum: Estimate,
    pub classical_sum: Estimate,
    pub bounds: BoundValues,
    pub pass_eq1: Option<bool>,
    pub pass_thm23: Option<bool>,
    pub pass_eq4: Option<bool>,
    pub pass_remark33: Option<bool>,
    pub regret_curve: Vec<RegretPoint>,
    pub potential_curve: Vec<PotentialPoint>,
}

impl RunSummary {
    /// True when every enabled check passed.
    pub fn all_pass(&self) -> bool {
        [
            self.pass_eq1,
            self.pass_thm23,
            self.pass_eq4,
            self.pass_remark33,
        ]
        .iter()
        .all(|p| p.unwrap_or(true))
    }
}

/// A summary plus the one non-deterministic measurement.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub wall_time_secs: f64,
}

/// What the aggregator keeps from one episode.
#[derive(Debug, Clone)]
pub struct EpisodeDigest {
    cumulative_regret: Vec<f64>,
    gamma_quad: Vec<f64>,
    gamma_running: Vec<f64>,
    final_regret: f64,
    gamma_sum: f64,
    sigma_sum: f64,
    classical_holds: bool,
}

impl EpisodeDigest {
    pub fn from_episode(ep: &EpisodeResult, times: &[usize], slack: f64) -> Result<Self> {
        let recs = ep.potential.records();
        Ok(Self {
            cumulative_regret: times
                .iter()
                .map(|&t| ep.rounds[t - 1].cumulative_regret)
                .collect(),
            gamma_quad: times.iter().map(|&t| recs[t - 1].gamma_quad).collect(),
            gamma_running: times.iter().map(|&t| recs[t - 1].gamma_sum).collect(),
            final_regret: ep.cumulative_regret(),
            gamma_sum: ep.potential.gamma_sum(),
            sigma_sum: ep.potential.sigma_sum(),
            classical_holds: ep.potential.classical_holds(slack)?,
        })
    }
}

/// Rounds at which curves are recorded.
pub fn curve_times(horizon: usize) -> Vec<usize> {
    if horizon <= FULL_CURVE_LIMIT {
        (1..=horizon).collect()
    } else {
        let mut ts: Vec<usize> = (1..=SUBSAMPLED_POINTS)
            .map(|k| ((k as f64 * horizon as f64) / SUBSAMPLED_POINTS as f64).round() as usize)
            .map(|t| t.clamp(1, horizon))
            .collect();
        ts.dedup();
        ts
    }
}

/// Runs `cfg.run.replications` episodes and aggregates them.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let episode = cfg.episode();
    let times = curve_times(cfg.run.horizon);
    let slack = Tolerances::DEFAULT.classical;
    let job = || -> Vec<(usize, Result<EpisodeDigest>)> {
        (0..cfg.run.replications)
            .into_par_iter()
            .map(|i| {
                let mut rng = replication_rng(cfg.run.master_seed, i);
                let digest = run_episode(&episode, &mut rng)
                    .and_then(|ep| EpisodeDigest::from_episode(&ep, &times, slack));
                (i, digest)
            })
            .collect()
    };
    let results = match cfg.run.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(job),
        None => job(),
    };
    let summary = aggregate(cfg, results)?;
    Ok(RunOutcome {
        summary,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Order-independent aggregation: results are sorted by replication index
/// before any floating-point reduction.
pub fn aggregate(
    cfg: &ExperimentConfig,
    mut results: Vec<(usize, Result<EpisodeDigest>)>,
) -> Result<RunSummary> {
    results.sort_by_key(|(i, _)| *i);
    let total = results.len();
    let mut digests = Vec::with_capacity(total);
    let mut failures = Vec::new();
    for (_, r) in results {
        match r {
            Ok(d) => digests.push(d),
            Err(e) => failures.push(e.to_string()),
        }
    }
    if failures.len() as f64 > FAILURE_BUDGET * total as f64 || digests.is_empty() {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total,
            first: failures.first().cloned().unwrap_or_default(),
        });
    }

    let horizon = cfg.run.horizon;
    let dim = cfg.prior.dim();
    let sigma_sq = cfg.noise.sigma_sq_bound();
    let scale = sigma_sq.max(1.0);
    let (_, gamma1) = cfg.prior.moments();
    let times = curve_times(horizon);

    let eq4_at = |t: usize, logdet: f64| (2.0 * scale * dim as f64 * t as f64 * logdet).sqrt();
    let remark33_at = |t: usize| {
        let t = t as f64;
        dim as f64 * (2.0 * scale * t * (1.0 + t).ln()).sqrt()
    };

    let column =
        |f: &dyn Fn(&EpisodeDigest) -> f64| -> Vec<f64> { digests.iter().map(f).collect() };

    let mut regret_curve = Vec::with_capacity(times.len());
    let mut potential_curve = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let logdet = logdet_potential(&gamma1, t as f64)?;
        let (mean_regret, stderr) = mean_stderr(&column(&|d| d.cumulative_regret[k]));
        let (mean_gamma_quad, _) = mean_stderr(&column(&|d| d.gamma_quad[k]));
        let (running_sum, _) = mean_stderr(&column(&|d| d.gamma_running[k]));
        regret_curve.push(RegretPoint {
            t,
            mean_regret,
            stderr,
            eq4_bound: eq4_at(t, logdet),
            remark33_bound: remark33_at(t),
        });
        potential_curve.push(PotentialPoint {
            t,
            mean_gamma_quad,
            running_sum,
            thm23_bound: 2.0 * scale * logdet,
        });
    }

    let final_regret = estimate(&column(&|d| d.final_regret));
    let potential_sum = estimate(&column(&|d| d.gamma_sum));
    let classical_sum = estimate(&column(&|d| d.sigma_sum));
    let bounds = bound_values(&gamma1, sigma_sq, horizon, cfg.run.lambda)?;
    let tol = Tolerances::DEFAULT;

    let pass_eq1 = cfg
        .checks(BoundCheck::Eq1)
        .then(|| digests.iter().all(|d| d.classical_holds));
    let pass_thm23 = cfg
        .checks(BoundCheck::Thm23)
        .then_some(potential_sum.mean <= bounds.thm23_rhs + 3.0 * potential_sum.stderr);
    let pass_eq4 = cfg
        .checks(BoundCheck::Eq4)
        .then_some(final_regret.mean + 3.0 * final_regret.stderr <= bounds.eq4_rhs);
    let pass_remark33 = cfg.checks(BoundCheck::Remark33).then_some(
        !bounds.gamma1_below_identity
            || (bounds.logdet_gamma1 <= bounds.trivial_logdet + tol.inequality
                && final_regret.mean + 3.0 * final_regret.stderr <= bounds.remark33_rhs),
    );

    Ok(RunSummary {
        config: cfg.clone(),
        engine: cfg.engine(),
        dim,
        sigma_sq_bound: sigma_sq,
        norm_bound_violated: cfg.prior.norm_bound_violated(),
        completed_replications: digests.len(),
        failed_replications: failures.len(),
        final_regret,
        potential_sum,
        classical_sum,
        bounds,
        pass_eq1,
        pass_thm23,
        pass_eq4,
        pass_remark33,
        regret_curve,
        potential_curve,
    })
}

fn estimate(xs: &[f64]) -> Estimate {
    let (mean, stderr) = mean_stderr(xs);
    Estimate { mean, stderr }
}

/// All bound right-hand sides at horizon `T`.
pub fn bound_values(
    gamma1: &PsdMatrix,
    sigma_sq: f64,
    horizon: usize,
    lambda: f64,
) -> Result<BoundValues> {
    let dim = gamma1.dim();
    let d = dim as f64;
    let t = horizon as f64;
    let scale = sigma_sq.max(1.0);
    let logdet = logdet_potential(gamma1, t)?;
    Ok(BoundValues {
        logdet_gamma1: logdet,
        trivial_logdet: d * (1.0 + t).ln(),
        gamma1_below_identity: psd_order_holds(
            gamma1,
            &PsdMatrix::identity(dim),
            Tolerances::DEFAULT.order,
        )?,
        eq1_rhs: classical_bound(dim, horizon, lambda),
        thm23_rhs: 2.0 * scale * logdet,
        eq4_rhs: (2.0 * scale * d * t * logdet).sqrt(),
        remark33_rhs: d * (2.0 * scale * t * (1.0 + t).ln()).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Vector;

    fn single_atom_config(replications: usize) -> ExperimentConfig {
        ExperimentConfig {
            prior: PriorSpec::FiniteSupport {
                atoms: vec![Vector::new(vec![0.2, -0.1])],
                weights: vec![1.0],
            },
            noise: NoiseSpec::Gaussian { sd: 1.0 },
            engine: None,
            actions: ActionSetGenerator::KarmedRandom { k: 4 },
            run: RunSettings {
                horizon: 25,
                replications,
                master_seed: 5,
                lambda: 1.0,
                policy: Policy::Lints,
                workers: None,
                bound_checks: all_checks(),
            },
        }
    }

    fn ball_config() -> ExperimentConfig {
        ExperimentConfig {
            prior: PriorSpec::FiniteSupport {
                atoms: vec![
                    Vector::new(vec![0.5, 0.1]),
                    Vector::new(vec![-0.3, 0.6]),
                    Vector::new(vec![0.0, -0.9]),
                ],
                weights: vec![0.3, 0.3, 0.4],
            },
            noise: NoiseSpec::Gaussian { sd: 0.5 },
            engine: None,
            actions: ActionSetGenerator::KarmedRandom { k: 6 },
            run: RunSettings {
                horizon: 40,
                replications: 30,
                master_seed: 77,
                lambda: 1.0,
                policy: Policy::Lints,
                workers: Some(3),
                bound_checks: all_checks(),
            },
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(derive_seed(1, 2), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
        assert_ne!(derive_seed(1, 2), derive_seed(2, 2));
        assert_ne!(derive_seed(0, 0), 0);
    }

    #[test]
    fn mean_stderr_basics() {
        assert_eq!(mean_stderr(&[4.0]), (4.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_atom_run_is_trivial() {
        let out = run_experiment(&single_atom_config(1)).unwrap();
        let s = out.summary;
        assert_eq!(s.final_regret.mean, 0.0);
        assert_eq!(s.final_regret.stderr, 0.0);
        assert!(s.all_pass());
        assert_eq!(s.regret_curve.len(), 25);
        assert!(s.regret_curve.iter().all(|p| p.mean_regret == 0.0));
    }

    #[test]
    fn identical_configs_give_identical_summaries() {
        let a = run_experiment(&ball_config()).unwrap().summary;
        let mut cfg = ball_config();
        cfg.run.workers = Some(1);
        let mut b = run_experiment(&cfg).unwrap().summary;
        b.config.run.workers = a.config.run.workers;
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn aggregation_ignores_completion_order() {
        let cfg = ball_config();
        let ep = cfg.episode();
        let times = curve_times(cfg.run.horizon);
        let digest = |i: usize| {
            let mut rng = replication_rng(cfg.run.master_seed, i);
            (
                i,
                EpisodeDigest::from_episode(&run_episode(&ep, &mut rng).unwrap(), &times, 1e-8),
            )
        };
        let forward: Vec<_> = (0..20).map(digest).collect();
        let mut shuffled: Vec<_> = (0..20).map(digest).collect();
        shuffled.reverse();
        shuffled.swap(3, 11);
        let a = aggregate(&cfg, forward).unwrap();
        let b = aggregate(&cfg, shuffled).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn failure_budget_aborts() {
        let cfg = single_atom_config(10);
        let mut results: Vec<(usize, Result<EpisodeDigest>)> = Vec::new();
        let ep = cfg.episode();
        let times = curve_times(cfg.run.horizon);
        for i in 0..10 {
            if i == 4 {
                results.push((i, Err(Error::DegenerateWeights { y: 1.0 })));
            } else {
                let mut rng = replication_rng(cfg.run.master_seed, i);
                let d =
                    EpisodeDigest::from_episode(&run_episode(&ep, &mut rng).unwrap(), &times, 1e-8);
                results.push((i, d));
            }
        }
        assert!(matches!(
            aggregate(&cfg, results),
            Err(Error::TooManyFailures {
                failed: 1,
                total: 10,
                ..
            })
        ));
    }

    #[test]
    fn curves_subsample_long_horizons() {
        assert_eq!(curve_times(10).len(), 10);
        let long = curve_times(123_457);
        assert_eq!(long.len(), SUBSAMPLED_POINTS);
        assert_eq!(*long.last().unwrap(), 123_457);
        assert!(long.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn gaussian_reference_bounds() {
        // d = 5, T = 1000, Γ₁ = I: both regret bounds collapse to
        // √(2·5·1000·5·log 1001).
        let b = bound_values(&PsdMatrix::identity(5), 1.0, 1000, 1.0).unwrap();
        let want = (2.0f64 * 5.0 * 1000.0 * 5.0 * 1001f64.ln()).sqrt();
        assert!((b.eq4_rhs - want).abs() < 1e-9);
        assert!((b.remark33_rhs - want).abs() < 1e-9);
        assert!((want - 587.7393).abs() < 1e-3);
        assert!(b.gamma1_below_identity);
    }

    #[test]
    fn config_validation() {
        let mut cfg = single_atom_config(0);
        assert!(cfg.validate().is_err());
        cfg.run.replications = 1;
        cfg.run.horizon = 0;
        assert!(cfg.validate().is_err());
    }
}
