//! Posterior belief engines over the unknown parameter.
//!
//! Three engines share one interface (mean, covariance, sample, update):
//!
//! * `Conjugate`: Gaussian prior with Gaussian noise. Stores the precision
//!   `P = C₀⁻¹ + Σ a aᵀ / σ²` and the shift `h = C₀⁻¹ m₀ + Σ a y / σ²`; the
//!   mean and covariance are solved on demand.
//! * `FiniteSupport`: exact Bayes by reweighting fixed atoms. Works with any
//!   noise law.
//! * `Particle`: importance reweighting with systematic resampling when the
//!   effective sample size drops below `N/2`, followed by random-walk
//!   Metropolis moves against the exact posterior so the cloud does not
//!   collapse onto a handful of prior draws.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{sample_index, weighted_moments, NoiseSpec, PriorSpec};
use crate::kernel::{Cholesky, Matrix, PsdMatrix, Vector};
use crate::{Error, Result, Tolerances};

pub const DEFAULT_PARTICLES: usize = 20_000;

type SharedLogDensity = std::sync::Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;

/// Which engine to run, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EngineConfig {
    Conjugate,
    FiniteSupport,
    Particle {
        #[serde(default = "default_particles")]
        particles: usize,
        /// Metropolis sweeps after each resampling event; 0 disables moves.
        #[serde(default = "default_moves")]
        move_sweeps: usize,
    },
}

fn default_particles() -> usize {
    DEFAULT_PARTICLES
}

fn default_moves() -> usize {
    1
}

impl EngineConfig {
    pub fn particle(particles: usize) -> Self {
        EngineConfig::Particle {
            particles,
            move_sweeps: default_moves(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EngineConfig::Conjugate => "conjugate",
            EngineConfig::FiniteSupport => "finite_support",
            EngineConfig::Particle { .. } => "particle",
        }
    }

    /// The exact engine for a prior/noise pair when one exists, otherwise a
    /// default particle engine.
    pub fn exact_for(prior: &PriorSpec, noise: &NoiseSpec) -> Self {
        match (prior, noise) {
            (PriorSpec::FiniteSupport { .. }, _) => EngineConfig::FiniteSupport,
            (PriorSpec::Gaussian { .. }, NoiseSpec::Gaussian { .. }) => EngineConfig::Conjugate,
            _ => EngineConfig::particle(DEFAULT_PARTICLES),
        }
    }
}

/// Posterior of the parameter given the interaction history so far.
#[derive(Debug, Clone)]
pub struct PosteriorState {
    noise: NoiseSpec,
    belief: Belief,
}

#[derive(Debug, Clone)]
enum Belief {
    Conjugate {
        precision: Matrix,
        shift: Vector,
        noise_var: f64,
    },
    FiniteSupport {
        atoms: Vec<Vector>,
        weights: Vec<f64>,
    },
    Particle(ParticleCloud),
}

#[derive(Clone)]
struct ParticleCloud {
    particles: Vec<Vector>,
    weights: Vec<f64>,
    /// Unnormalized log posterior of each particle, for the Metropolis step.
    log_target: Vec<f64>,
    history: Vec<(Vector, f64)>,
    resample_count: usize,
    move_sweeps: usize,
    log_prior: Option<SharedLogDensity>,
}

impl std::fmt::Debug for ParticleCloud {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParticleCloud")
            .field("particles", &self.particles.len())
            .field("resample_count", &self.resample_count)
            .field("move_sweeps", &self.move_sweeps)
            .finish()
    }
}

/// One branch of an exact one-step lookahead.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub y: f64,
    pub probability: f64,
    pub posterior: PosteriorState,
}

impl PosteriorState {
    /// Builds the prior belief. The RNG is only used by the particle engine.
    pub fn init<R: Rng + ?Sized>(
        prior: &PriorSpec,
        noise: &NoiseSpec,
        engine: &EngineConfig,
        rng: &mut R,
    ) -> Result<Self> {
        prior.validate(&Tolerances::DEFAULT)?;
        noise.validate()?;
        let belief = match (engine, prior) {
            (EngineConfig::Conjugate, PriorSpec::Gaussian { mean, cov }) => {
                let NoiseSpec::Gaussian { sd } = noise else {
                    return Err(Error::IncompatibleEngine {
                        engine: engine.name(),
                        reason: "requires gaussian noise".into(),
                    });
                };
                let chol = Cholesky::factor(cov).ok_or_else(|| Error::IncompatibleEngine {
                    engine: engine.name(),
                    reason: "prior covariance is singular".into(),
                })?;
                let precision = chol.inverse();
                let shift = precision.matvec(mean);
                Belief::Conjugate {
                    precision,
                    shift,
                    noise_var: sd * sd,
                }
            }
            (EngineConfig::Conjugate, _) => {
                return Err(Error::IncompatibleEngine {
                    engine: engine.name(),
                    reason: "requires a gaussian prior".into(),
                })
            }
            (EngineConfig::FiniteSupport, PriorSpec::FiniteSupport { atoms, weights }) => {
                Belief::FiniteSupport {
                    atoms: atoms.clone(),
                    weights: weights.clone(),
                }
            }
            (EngineConfig::FiniteSupport, _) => {
                return Err(Error::IncompatibleEngine {
                    engine: engine.name(),
                    reason: "requires a finite-support prior".into(),
                })
            }
            (
                EngineConfig::Particle {
                    particles,
                    move_sweeps,
                },
                _,
            ) => {
                if *particles == 0 {
                    return Err(Error::InvalidSpec("particle count must be ≥ 1".into()));
                }
                let log_prior: Option<SharedLogDensity> =
                    prior.log_density_fn().map(std::sync::Arc::from);
                let particles: Vec<Vector> = (0..*particles).map(|_| prior.sample(rng)).collect();
                let log_target = match &log_prior {
                    Some(f) => particles.iter().map(|p| f(p)).collect(),
                    None => vec![0.0; particles.len()],
                };
                let n = particles.len();
                Belief::Particle(ParticleCloud {
                    particles,
                    weights: vec![1.0 / n as f64; n],
                    log_target,
                    history: Vec::new(),
                    resample_count: 0,
                    move_sweeps: *move_sweeps,
                    log_prior,
                })
            }
        };
        Ok(Self {
            noise: *noise,
            belief,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.belief {
            Belief::Conjugate { shift, .. } => shift.dim(),
            Belief::FiniteSupport { atoms, .. } => atoms[0].dim(),
            Belief::Particle(c) => c.particles[0].dim(),
        }
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn engine_name(&self) -> &'static str {
        match &self.belief {
            Belief::Conjugate { .. } => "conjugate",
            Belief::FiniteSupport { .. } => "finite_support",
            Belief::Particle(_) => "particle",
        }
    }

    /// Atom weights (finite support) or particle weights; `None` for the
    /// conjugate engine.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.belief {
            Belief::Conjugate { .. } => None,
            Belief::FiniteSupport { weights, .. } => Some(weights),
            Belief::Particle(c) => Some(&c.weights),
        }
    }

    pub fn atoms(&self) -> Option<&[Vector]> {
        match &self.belief {
            Belief::FiniteSupport { atoms, .. } => Some(atoms),
            Belief::Particle(c) => Some(&c.particles),
            Belief::Conjugate { .. } => None,
        }
    }

    pub fn resample_count(&self) -> usize {
        match &self.belief {
            Belief::Particle(c) => c.resample_count,
            _ => 0,
        }
    }

    pub fn mean(&self) -> Vector {
        match &self.belief {
            Belief::Conjugate {
                precision, shift, ..
            } => conjugate_factor(precision).solve(shift),
            Belief::FiniteSupport { atoms, weights } => weighted_moments(atoms, weights).0,
            Belief::Particle(c) => weighted_moments(&c.particles, &c.weights).0,
        }
    }

    pub fn covariance(&self) -> PsdMatrix {
        match &self.belief {
            Belief::Conjugate { precision, .. } => {
                PsdMatrix::from_construction(conjugate_factor(precision).inverse())
            }
            Belief::FiniteSupport { atoms, weights } => weighted_moments(atoms, weights).1,
            Belief::Particle(c) => weighted_moments(&c.particles, &c.weights).1,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        match &self.belief {
            Belief::Conjugate {
                precision, shift, ..
            } => {
                // P = L Lᵀ, so L⁻ᵀ z has covariance P⁻¹.
                let chol = conjugate_factor(precision);
                let mean = chol.solve(shift);
                let z = Vector::standard_normal(shift.dim(), rng);
                mean.add(&chol.solve_upper(&z))
            }
            Belief::FiniteSupport { atoms, weights } => atoms[sample_index(weights, rng)].clone(),
            Belief::Particle(c) => c.particles[sample_index(&c.weights, rng)].clone(),
        }
    }

    /// Conditions on observing reward `y` after playing `action`.
    ///
    /// On error the state is left unchanged.
    pub fn update<R: Rng + ?Sized>(&mut self, action: &Vector, y: f64, rng: &mut R) -> Result<()> {
        if action.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: action.dim(),
            });
        }
        if action.norm() > 1.0 + Tolerances::DEFAULT.action_norm {
            return Err(Error::InvalidSpec(format!(
                "action norm {} exceeds 1",
                action.norm()
            )));
        }
        let noise = self.noise;
        match &mut self.belief {
            Belief::Conjugate {
                precision,
                shift,
                noise_var,
            } => {
                precision.add_outer(1.0 / *noise_var, action);
                shift.axpy(y / *noise_var, action);
                Ok(())
            }
            Belief::FiniteSupport { atoms, weights } => {
                let lik = |a: &Vector| noise.likelihood(y, a.dot(action));
                *weights = reweight(atoms, weights, y, lik, |a| {
                    noise.log_likelihood(y, a.dot(action))
                })?;
                Ok(())
            }
            Belief::Particle(cloud) => cloud.update(&noise, action, y, rng),
        }
    }

    /// Exact one-step lookahead for Bernoulli rewards: both outcomes with
    /// their predictive probabilities and the resulting posteriors.
    ///
    /// Zero-probability outcomes are dropped.
    pub fn enumerate_posterior_outcomes(&self, action: &Vector) -> Result<Vec<Outcome>> {
        let noise = self.noise;
        self.enumerate_outcomes_with(action, |y, m| noise.likelihood(y, m))
    }

    /// Like [`enumerate_posterior_outcomes`](Self::enumerate_posterior_outcomes)
    /// but conditions with a caller-supplied likelihood while the outcome
    /// probabilities still come from the true noise law. Exists so tests
    /// can check that a corrupted update is caught.
    pub fn enumerate_outcomes_with(
        &self,
        action: &Vector,
        posterior_likelihood: impl Fn(f64, f64) -> Result<f64>,
    ) -> Result<Vec<Outcome>> {
        let Belief::FiniteSupport { atoms, weights } = &self.belief else {
            return Err(Error::IncompatibleEngine {
                engine: self.engine_name(),
                reason: "outcome enumeration needs a finite-support posterior".into(),
            });
        };
        if !self.noise.is_bernoulli() {
            return Err(Error::InvalidSpec(
                "outcome enumeration needs bernoulli rewards".into(),
            ));
        }
        let means: Vec<f64> = atoms.iter().map(|a| a.dot(action)).collect();
        let mut out = Vec::with_capacity(2);
        for y in [0.0, 1.0] {
            let mut probability = 0.0;
            for (&w, &m) in weights.iter().zip(&means) {
                probability += w * self.noise.likelihood(y, m)?;
            }
            if probability <= 0.0 {
                continue;
            }
            let mut new_weights = Vec::with_capacity(weights.len());
            for (&w, &m) in weights.iter().zip(&means) {
                new_weights.push(w * posterior_likelihood(y, m)?);
            }
            let total: f64 = new_weights.iter().sum();
            if total.is_nan() || total <= 0.0 {
                return Err(Error::DegenerateWeights { y });
            }
            new_weights.iter_mut().for_each(|w| *w /= total);
            out.push(Outcome {
                y,
                probability,
                posterior: PosteriorState {
                    noise: self.noise,
                    belief: Belief::FiniteSupport {
                        atoms: atoms.clone(),
                        weights: new_weights,
                    },
                },
            });
        }
        Ok(out)
    }
}

fn conjugate_factor(precision: &Matrix) -> Cholesky {
    // The precision only grows from a PD start.
    Cholesky::factor_jittered(precision, &Tolerances::DEFAULT).expect("precision stays PD")
}

/// `w_i ∝ w_i · lik_i`. Multiplies directly and only falls back to log space
/// when the direct product underflows.
fn reweight(
    atoms: &[Vector],
    weights: &[f64],
    y: f64,
    lik: impl Fn(&Vector) -> Result<f64>,
    log_lik: impl Fn(&Vector) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut direct = Vec::with_capacity(weights.len());
    for (a, &w) in atoms.iter().zip(weights) {
        direct.push(if w > 0.0 { w * lik(a)? } else { 0.0 });
    }
    let total: f64 = direct.iter().sum();
    if total > 1e-250 && total.is_finite() {
        direct.iter_mut().for_each(|w| *w /= total);
        return Ok(direct);
    }
    let mut logs = Vec::with_capacity(weights.len());
    for (a, &w) in atoms.iter().zip(weights) {
        logs.push(if w > 0.0 {
            w.ln() + log_lik(a)?
        } else {
            f64::NEG_INFINITY
        });
    }
    normalize_log_weights(&logs).ok_or(Error::DegenerateWeights { y })
}

fn normalize_log_weights(logs: &[f64]) -> Option<Vec<f64>> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Some(w)
}

fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling: one uniform offset, `n` evenly spaced pointers.
fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    let step = 1.0 / n as f64;
    let mut u = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut acc = weights[0];
    let mut i = 0;
    for _ in 0..n {
        while u > acc && i + 1 < n {
            i += 1;
            acc += weights[i];
        }
        out.push(i);
        u += step;
    }
    out
}

impl ParticleCloud {
    fn update<R: Rng + ?Sized>(
        &mut self,
        noise: &NoiseSpec,
        action: &Vector,
        y: f64,
        rng: &mut R,
    ) -> Result<()> {
        let mut incr = Vec::with_capacity(self.particles.len());
        for p in &self.particles {
            incr.push(noise.log_likelihood(y, p.dot(action))?);
        }
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(&incr)
            .map(|(w, l)| {
                if *w > 0.0 {
                    w.ln() + l
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let weights = normalize_log_weights(&logs).ok_or(Error::DegenerateWeights { y })?;
        self.weights = weights;
        for (t, l) in self.log_target.iter_mut().zip(&incr) {
            *t += l;
        }
        self.history.push((action.clone(), y));

        let n = self.particles.len();
        if effective_sample_size(&self.weights) < n as f64 / 2.0 {
            let idx = systematic_indices(&self.weights, rng);
            self.particles = idx.iter().map(|&i| self.particles[i].clone()).collect();
            self.log_target = idx.iter().map(|&i| self.log_target[i]).collect();
            self.weights = vec![1.0 / n as f64; n];
            self.resample_count += 1;
            for _ in 0..self.move_sweeps {
                self.metropolis_sweep(noise, rng);
            }
        }
        Ok(())
    }

    /// One random-walk Metropolis step per particle, proposal covariance
    /// `(2.38² / d) · Cov(cloud)`. Leaves the exact posterior invariant.
    fn metropolis_sweep<R: Rng + ?Sized>(&mut self, noise: &NoiseSpec, rng: &mut R) {
        let Some(log_prior) = self.log_prior.clone() else {
            return;
        };
        let dim = self.particles[0].dim();
        let (_, cov) = weighted_moments(&self.particles, &self.weights);
        let scale = 2.38 * 2.38 / dim as f64;
        let Ok(chol) = Cholesky::factor_jittered(&cov.scaled(scale), &Tolerances::DEFAULT) else {
            return;
        };
        for i in 0..self.particles.len() {
            let z = Vector::from(
                (0..dim)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect::<Vec<_>>(),
            );
            let proposal = self.particles[i].add(&chol.mul_lower(&z));
            let mut target = log_prior(&proposal);
            if target.is_finite() {
                for (a, y) in &self.history {
                    match noise.log_likelihood(*y, proposal.dot(a)) {
                        Ok(l) => target += l,
                        Err(_) => {
                            target = f64::NEG_INFINITY;
                            break;
                        }
                    }
                    if target == f64::NEG_INFINITY {
                        break;
                    }
                }
            }
            let log_u = rng.random::<f64>().ln();
            if target.is_finite() && log_u < target - self.log_target[i] {
                self.particles[i] = proposal;
                self.log_target[i] = target;
            }
        }
    }
}
