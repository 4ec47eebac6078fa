use serde::{Deserialize, Serialize};

/// Numerical slack used across the crate.
///
/// Every comparison that is exact in real arithmetic but not in floating
/// point reads its slack from here, so a config file can tighten or loosen
/// all of them in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative asymmetry allowed in a `PsdMatrix`.
    pub symmetry: f64,
    /// Most negative eigenvalue still accepted as PSD.
    pub psd_slack: f64,
    /// Slack for `A ⪯ B` checks.
    pub order: f64,
    /// Slack for analytic matrix inequalities (log-det lemmas, variance reduction).
    pub inequality: f64,
    /// Slack for the deterministic classical potential inequality.
    pub classical: f64,
    /// Prior weights must sum to one within this.
    pub prior_weight_sum: f64,
    /// Posterior weights must sum to one within this.
    pub posterior_weight_sum: f64,
    /// Actions may exceed unit norm by this much.
    pub action_norm: f64,
    /// Base Cholesky jitter, relative to `trace / d`.
    pub jitter: f64,
    /// Jitter retries, each ten times the previous.
    pub jitter_retries: u32,
    /// Slack for values that are exact rationals in real arithmetic.
    pub exact: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        symmetry: 1e-12,
        psd_slack: 1e-9,
        order: 1e-9,
        inequality: 1e-9,
        classical: 1e-8,
        prior_weight_sum: 1e-12,
        posterior_weight_sum: 1e-10,
        action_norm: 1e-12,
        jitter: 1e-12,
        jitter_retries: 3,
        exact: 1e-12,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
