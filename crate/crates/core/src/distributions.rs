//! Priors over the unknown parameter and conditional reward-noise laws.
//!
//! Specs are immutable values. Sampling always takes a caller-owned RNG.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::kernel::{Cholesky, Matrix, PsdMatrix, Vector};
use crate::{Error, Result, Tolerances};

/// Unnormalized log prior density.
pub(crate) type LogDensity = Box<dyn Fn(&Vector) -> f64 + Send + Sync>;

/// Prior distribution of the unknown parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PriorSpec {
    /// `N(mean, cov)`. Cannot satisfy a norm bound almost surely; see
    /// [`PriorSpec::norm_bound_violated`].
    Gaussian { mean: Vector, cov: PsdMatrix },
    /// Discrete prior on finitely many atoms.
    FiniteSupport {
        atoms: Vec<Vector>,
        weights: Vec<f64>,
    },
    /// Uniform on the Euclidean ball of the given radius.
    UniformBall { dim: usize, radius: f64 },
}

impl PriorSpec {
    pub fn dim(&self) -> usize {
        match self {
            PriorSpec::Gaussian { mean, .. } => mean.dim(),
            PriorSpec::FiniteSupport { atoms, .. } => atoms.first().map_or(0, Vector::dim),
            PriorSpec::UniformBall { dim, .. } => *dim,
        }
    }

    /// The three-atom scalar prior `{0, 1/4, 3/4}` with masses
    /// `{1 − 4p, 3p, p}` under which the posterior variance can grow.
    pub fn non_monotone_example(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 0.25) {
            return Err(Error::InvalidSpec(format!("p = {p} must lie in (0, 1/4)")));
        }
        Ok(PriorSpec::FiniteSupport {
            atoms: vec![
                Vector::new(vec![0.0]),
                Vector::new(vec![0.25]),
                Vector::new(vec![0.75]),
            ],
            weights: vec![1.0 - 4.0 * p, 3.0 * p, p],
        })
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        match self {
            PriorSpec::Gaussian { mean, cov } => {
                if mean.dim() == 0 {
                    return Err(Error::InvalidSpec("gaussian prior needs dim ≥ 1".into()));
                }
                if cov.dim() != mean.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: mean.dim(),
                        actual: cov.dim(),
                    });
                }
                if !mean.is_finite() {
                    return Err(Error::InvalidSpec(
                        "gaussian prior mean is not finite".into(),
                    ));
                }
            }
            PriorSpec::FiniteSupport { atoms, weights } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidSpec(
                        "finite-support prior has no atoms".into(),
                    ));
                }
                if atoms.len() != weights.len() {
                    return Err(Error::InvalidSpec(format!(
                        "{} atoms but {} weights",
                        atoms.len(),
                        weights.len()
                    )));
                }
                let dim = atoms[0].dim();
                if dim == 0 {
                    return Err(Error::InvalidSpec("atoms must have dim ≥ 1".into()));
                }
                for atom in atoms {
                    if atom.dim() != dim {
                        return Err(Error::DimensionMismatch {
                            expected: dim,
                            actual: atom.dim(),
                        });
                    }
                    if atom.norm() > 1.0 + tol.action_norm {
                        return Err(Error::InvalidSpec(format!(
                            "atom with norm {} exceeds the unit ball",
                            atom.norm()
                        )));
                    }
                }
                if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
                    return Err(Error::InvalidSpec("prior weights must be ≥ 0".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > tol.prior_weight_sum {
                    return Err(Error::InvalidSpec(format!("prior weights sum to {total}")));
                }
            }
            PriorSpec::UniformBall { dim, radius } => {
                if *dim == 0 {
                    return Err(Error::InvalidSpec("uniform ball needs dim ≥ 1".into()));
                }
                if !(*radius > 0.0 && *radius <= 1.0 + tol.action_norm) {
                    return Err(Error::InvalidSpec(format!(
                        "uniform ball radius {radius} must lie in (0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when draws can leave the unit ball. Only the Gaussian variant
    /// does this; it is still accepted as the classical reference case.
    pub fn norm_bound_violated(&self) -> bool {
        matches!(self, PriorSpec::Gaussian { .. })
    }

    /// Exact prior mean and covariance.
    pub fn moments(&self) -> (Vector, PsdMatrix) {
        match self {
            PriorSpec::Gaussian { mean, cov } => (mean.clone(), cov.clone()),
            PriorSpec::FiniteSupport { atoms, weights } => weighted_moments(atoms, weights),
            PriorSpec::UniformBall { dim, radius } => {
                let var = radius * radius / (*dim as f64 + 2.0);
                (
                    Vector::zeros(*dim),
                    PsdMatrix::from_construction(Matrix::scaled_identity(*dim, var)),
                )
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        match self {
            PriorSpec::Gaussian { mean, cov } => {
                // Validated PSD input: the jittered factor only fails on
                // corrupted matrices.
                let chol = Cholesky::factor_jittered(cov, &Tolerances::DEFAULT)
                    .expect("prior covariance is PSD");
                let z = Vector::standard_normal(mean.dim(), rng);
                mean.add(&chol.mul_lower(&z))
            }
            PriorSpec::FiniteSupport { atoms, weights } => {
                atoms[sample_index(weights, rng)].clone()
            }
            PriorSpec::UniformBall { dim, radius } => {
                let dir = loop {
                    if let Some(u) = Vector::standard_normal(*dim, rng).normalized() {
                        break u;
                    }
                };
                let u: f64 = rng.random();
                dir.scaled(radius * u.powf(1.0 / *dim as f64))
            }
        }
    }

    /// Log prior density up to an additive constant; `−∞` off the support.
    /// `None` for discrete priors.
    pub(crate) fn log_density_fn(&self) -> Option<LogDensity> {
        match self {
            PriorSpec::Gaussian { mean, cov } => {
                let chol = Cholesky::factor_jittered(cov, &Tolerances::DEFAULT).ok()?;
                let mean = mean.clone();
                Some(Box::new(move |x: &Vector| {
                    let w = chol.solve_lower(&x.sub(&mean));
                    -0.5 * w.norm_sq()
                }))
            }
            PriorSpec::FiniteSupport { .. } => None,
            PriorSpec::UniformBall { radius, .. } => {
                let r2 = radius * radius;
                Some(Box::new(move |x: &Vector| {
                    if x.norm_sq() <= r2 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                }))
            }
        }
    }
}

/// Weighted mean and covariance of a discrete distribution.
pub fn weighted_moments(atoms: &[Vector], weights: &[f64]) -> (Vector, PsdMatrix) {
    let dim = atoms[0].dim();
    let mut mean = Vector::zeros(dim);
    for (a, &w) in atoms.iter().zip(weights) {
        mean.axpy(w, a);
    }
    let mut cov = Matrix::zeros(dim);
    for (a, &w) in atoms.iter().zip(weights) {
        if w > 0.0 {
            cov.add_outer(w, &a.sub(&mean));
        }
    }
    (mean, PsdMatrix::from_construction(cov))
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if target < acc {
            return i;
        }
    }
    // Rounding at the top end: return the last atom with positive mass.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Conditional law of a reward given its mean `⟨Θ*, A⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// `mean + N(0, sd²)`.
    Gaussian { sd: f64 },
    /// `Bernoulli(mean)`; the mean must lie in `[0, 1]`.
    BernoulliMean,
    /// `mean + U(−half_width, half_width)`.
    UniformCentered { half_width: f64 },
    /// `mean + scale · t_dof`, `dof > 2`. Finite variance, heavy tails.
    StudentT { dof: f64, scale: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseSpec::Gaussian { sd } => sd > 0.0 && sd.is_finite(),
            NoiseSpec::BernoulliMean => true,
            NoiseSpec::UniformCentered { half_width } => half_width > 0.0 && half_width.is_finite(),
            NoiseSpec::StudentT { dof, scale } => {
                dof > 2.0 && dof.is_finite() && scale > 0.0 && scale.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!(
                "invalid noise parameters: {self:?}"
            )))
        }
    }

    /// Upper bound σ² on the conditional reward variance.
    pub fn sigma_sq_bound(&self) -> f64 {
        match *self {
            NoiseSpec::Gaussian { sd } => sd * sd,
            NoiseSpec::BernoulliMean => 0.25,
            NoiseSpec::UniformCentered { half_width } => half_width * half_width / 3.0,
            NoiseSpec::StudentT { dof, scale } => scale * scale * dof / (dof - 2.0),
        }
    }

    /// Whether rewards only take the values 0 and 1.
    pub fn is_bernoulli(&self) -> bool {
        matches!(self, NoiseSpec::BernoulliMean)
    }

    pub fn sample_reward<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> Result<f64> {
        Ok(match *self {
            NoiseSpec::Gaussian { sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            NoiseSpec::BernoulliMean => {
                let p = bernoulli_mean(mean)?;
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            NoiseSpec::UniformCentered { half_width } => {
                mean + half_width * (2.0 * rng.random::<f64>() - 1.0)
            }
            NoiseSpec::StudentT { dof, scale } => {
                let t = StudentT::new(dof)
                    .map_err(|e| Error::InvalidSpec(format!("student-t: {e}")))?;
                mean + scale * t.sample(rng)
            }
        })
    }

    /// Density (continuous variants) or mass (Bernoulli) of `y`.
    pub fn likelihood(&self, y: f64, mean: f64) -> Result<f64> {
        Ok(self.log_likelihood(y, mean)?.exp())
    }

    pub fn log_likelihood(&self, y: f64, mean: f64) -> Result<f64> {
        Ok(match *self {
            NoiseSpec::Gaussian { sd } => {
                let z = (y - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
            }
            NoiseSpec::BernoulliMean => {
                let p = bernoulli_mean(mean)?;
                if y == 1.0 {
                    p.ln()
                } else if y == 0.0 {
                    (1.0 - p).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            NoiseSpec::UniformCentered { half_width } => {
                if (y - mean).abs() <= half_width {
                    -(2.0 * half_width).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            NoiseSpec::StudentT { dof, scale } => {
                let z = (y - mean) / scale;
                ln_gamma((dof + 1.0) / 2.0)
                    - ln_gamma(dof / 2.0)
                    - 0.5 * (dof * PI).ln()
                    - scale.ln()
                    - (dof + 1.0) / 2.0 * (1.0 + z * z / dof).ln()
            }
        })
    }
}

// Means a hair outside [0, 1] come from inner products of unit vectors.
fn bernoulli_mean(mean: f64) -> Result<f64> {
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=1.0 + SLACK).contains(&mean) {
        return Err(Error::MeanOutOfRange(mean));
    }
    Ok(mean.clamp(0.0, 1.0))
}
