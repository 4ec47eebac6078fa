//! Linear bandit environments with changing action sets and the LinTS policy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{NoiseSpec, PriorSpec};
use crate::kernel::{Matrix, Vector};
use crate::posterior::{EngineConfig, PosteriorState};
use crate::potential::{random_unit, PotentialTrace};
use crate::{Error, Result, Tolerances};

// ── Action sets ─────────────────────────────────────────────────────────

/// Produces the action set `𝒜_t` each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionSetGenerator {
    /// The same finite set every round.
    Fixed { actions: Vec<Vector> },
    /// `k` fresh iid unit vectors per round.
    KarmedRandom { k: usize },
    /// The whole unit sphere.
    UnitSphere,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSet {
    Finite(Vec<Vector>),
    UnitSphere { dim: usize },
}

impl ActionSetGenerator {
    /// Draws `𝒜_t`. With `nonnegative`, random arms are restricted to the
    /// nonnegative orthant so Bernoulli means stay in `[0, 1]`.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        dim: usize,
        nonnegative: bool,
        rng: &mut R,
    ) -> ActionSet {
        match self {
            ActionSetGenerator::Fixed { actions } => ActionSet::Finite(actions.clone()),
            ActionSetGenerator::KarmedRandom { k } => ActionSet::Finite(
                (0..*k)
                    .map(|_| random_unit(dim, nonnegative, rng))
                    .collect(),
            ),
            ActionSetGenerator::UnitSphere => ActionSet::UnitSphere { dim },
        }
    }

    /// Rejects generators that cannot work with this prior and noise.
    pub fn validate(&self, prior: &PriorSpec, noise: &NoiseSpec) -> Result<()> {
        let dim = prior.dim();
        match self {
            ActionSetGenerator::Fixed { actions } => {
                if actions.is_empty() {
                    return Err(Error::EmptyActionSet);
                }
                for a in actions {
                    if a.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            actual: a.dim(),
                        });
                    }
                    if a.norm() > 1.0 + Tolerances::DEFAULT.action_norm {
                        return Err(Error::InvalidSpec(format!(
                            "action norm {} exceeds 1",
                            a.norm()
                        )));
                    }
                }
            }
            ActionSetGenerator::KarmedRandom { k } => {
                if *k == 0 {
                    return Err(Error::EmptyActionSet);
                }
            }
            ActionSetGenerator::UnitSphere => {}
        }
        if noise.is_bernoulli() {
            bernoulli_compatible(self, prior)?;
        }
        Ok(())
    }
}

/// Bernoulli rewards need `⟨θ, a⟩ ∈ [0, 1]` for every reachable pair. Atoms
/// must sit in the nonnegative orthant of the unit ball; random arms are
/// drawn there too, and fixed arms are checked against every atom.
fn bernoulli_compatible(generator: &ActionSetGenerator, prior: &PriorSpec) -> Result<()> {
    let PriorSpec::FiniteSupport { atoms, .. } = prior else {
        return Err(Error::InvalidSpec(
            "bernoulli rewards need a finite-support prior in the nonnegative orthant".into(),
        ));
    };
    match generator {
        ActionSetGenerator::UnitSphere => Err(Error::InvalidSpec(
            "bernoulli rewards cannot use the full unit sphere".into(),
        )),
        ActionSetGenerator::KarmedRandom { .. } => {
            if atoms.iter().any(|a| a.iter().any(|&x| x < 0.0)) {
                return Err(Error::InvalidSpec(
                    "bernoulli rewards with random arms need nonnegative atoms".into(),
                ));
            }
            Ok(())
        }
        ActionSetGenerator::Fixed { actions } => {
            for atom in atoms {
                for a in actions {
                    let m = atom.dot(a);
                    if !(-1e-12..=1.0 + 1e-12).contains(&m) {
                        return Err(Error::MeanOutOfRange(m));
                    }
                }
            }
            Ok(())
        }
    }
}

/// `argmax_{a ∈ 𝒜} ⟨a, direction⟩`, lowest index on ties. On the sphere the
/// answer is `direction / ‖direction‖` (`e₁` for the zero vector).
pub fn argmax_action(direction: &Vector, set: &ActionSet) -> Result<Vector> {
    match set {
        ActionSet::Finite(actions) => {
            let mut best: Option<(f64, &Vector)> = None;
            for a in actions {
                let score = a.dot(direction);
                if best.is_none_or(|(b, _)| score > b) {
                    best = Some((score, a));
                }
            }
            best.map(|(_, a)| a.clone()).ok_or(Error::EmptyActionSet)
        }
        ActionSet::UnitSphere { dim } => Ok(direction
            .normalized()
            .unwrap_or_else(|| Vector::basis(*dim, 0))),
    }
}

/// One LinTS decision: sample `θ̃_t` from the posterior, play its argmax.
/// Returns the chosen action and the sample.
pub fn lints_step<R: Rng + ?Sized>(
    state: &PosteriorState,
    set: &ActionSet,
    rng: &mut R,
) -> Result<(Vector, Vector)> {
    if matches!(set, ActionSet::Finite(a) if a.is_empty()) {
        return Err(Error::EmptyActionSet);
    }
    let theta = state.sample(rng);
    Ok((argmax_action(&theta, set)?, theta))
}

/// Posterior-mean argmax. Only a sanity comparator.
pub fn greedy_step(state: &PosteriorState, set: &ActionSet) -> Result<Vector> {
    argmax_action(&state.mean(), set)
}

pub fn optimal_action(theta_star: &Vector, set: &ActionSet) -> Result<Vector> {
    argmax_action(theta_star, set)
}

// ── Episodes ────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    #[default]
    Lints,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub prior: PriorSpec,
    pub noise: NoiseSpec,
    pub actions: ActionSetGenerator,
    pub engine: EngineConfig,
    pub horizon: usize,
    /// Ridge parameter of the classical potential tracked alongside.
    pub lambda: f64,
    pub policy: Policy,
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate(&Tolerances::DEFAULT)?;
        self.noise.validate()?;
        self.actions.validate(&self.prior, &self.noise)?;
        if self.horizon == 0 {
            return Err(Error::InvalidSpec("horizon must be ≥ 1".into()));
        }
        if self.lambda.is_nan() || self.lambda < 1.0 {
            return Err(Error::InvalidSpec(format!(
                "λ = {} must be ≥ 1",
                self.lambda
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub chosen: Vector,
    pub optimal: Vector,
    pub reward: f64,
    pub regret: f64,
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub theta_star: Vector,
    pub rounds: Vec<RoundRecord>,
    pub potential: PotentialTrace,
}

impl EpisodeResult {
    pub fn cumulative_regret(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.cumulative_regret)
    }
}

/// Draws `Θ*` from the prior and plays `horizon` rounds.
pub fn run_episode<R: Rng + ?Sized>(cfg: &EpisodeConfig, rng: &mut R) -> Result<EpisodeResult> {
    cfg.validate()?;
    let dim = cfg.prior.dim();
    let nonneg = cfg.noise.is_bernoulli();
    let theta_star = cfg.prior.sample(rng);
    let mut state = PosteriorState::init(&cfg.prior, &cfg.noise, &cfg.engine, rng)?;
    let (_, gamma1) = cfg.prior.moments();
    let mut potential =
        PotentialTrace::new(gamma1, cfg.noise.sigma_sq_bound(), cfg.lambda, cfg.horizon)?;
    let mut rounds = Vec::with_capacity(cfg.horizon);
    let mut cumulative = 0.0;

    for t in 1..=cfg.horizon {
        let set = cfg.actions.generate(dim, nonneg, rng);
        let chosen = match cfg.policy {
            Policy::Lints => lints_step(&state, &set, rng)?.0,
            Policy::Greedy => greedy_step(&state, &set)?,
        };
        let optimal = optimal_action(&theta_star, &set)?;
        let gamma = state.covariance();
        potential.general_step(&gamma, &chosen)?;

        let mean = theta_star.dot(&chosen);
        let reward = cfg.noise.sample_reward(mean, rng)?;
        state.update(&chosen, reward, rng)?;

        let regret = theta_star.dot(&optimal) - mean;
        cumulative += regret;
        rounds.push(RoundRecord {
            t,
            chosen,
            optimal,
            reward,
            regret,
            cumulative_regret: cumulative,
        });
    }
    Ok(EpisodeResult {
        theta_star,
        rounds,
        potential,
    })
}

// ── Trace Cauchy–Schwarz ────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    /// `E[Xᵀ Z]²` under the empirical law.
    pub lhs: f64,
    /// `d · tr(E[X Xᵀ] E[Z Zᵀ])` under the empirical law.
    pub rhs: f64,
    pub holds: bool,
    /// `max(0, lhs − rhs)`.
    pub violation: f64,
}

/// Evaluates `E[XᵀZ]² ≤ d tr(E[XXᵀ] E[ZZᵀ])` on the empirical distribution of
/// paired samples. The pairs may be arbitrarily dependent.
pub fn trace_cauchy_schwarz_check(x: &[Vector], z: &[Vector], slack: f64) -> Result<CheckReport> {
    if x.is_empty() {
        return Err(Error::EmptyInput("no samples"));
    }
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: z.len(),
        });
    }
    let dim = x[0].dim();
    let n = x.len() as f64;
    let mut cross = 0.0;
    let mut mxx = Matrix::zeros(dim);
    let mut mzz = Matrix::zeros(dim);
    for (xi, zi) in x.iter().zip(z) {
        if xi.dim() != dim || zi.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: xi.dim().max(zi.dim()),
            });
        }
        cross += xi.dot(zi);
        mxx.add_outer(1.0 / n, xi);
        mzz.add_outer(1.0 / n, zi);
    }
    let lhs = (cross / n).powi(2);
    let rhs = dim as f64 * mxx.matmul(&mzz).trace();
    Ok(CheckReport {
        lhs,
        rhs,
        holds: lhs <= rhs + slack,
        violation: (lhs - rhs).max(0.0),
    })
}
