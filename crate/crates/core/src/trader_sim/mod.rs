//! Monte Carlo engine for a population of heterogeneous Merton traders.
//!
//! Trader `i` has a risk-adjusted price of risk `α_i = μ_α + σ_α ε_i` and a
//! risk aversion `γ_i = μ_γ + σ_γ φ_i`, with `ε_i`, `φ_i` independent,
//! zero-mean and unit-variance. Its optimal log-strategy increment over
//! `Δt` is
//!
//! ```text
//! ξ_i = (r + α_i²(1/2 − γ_i)) Δt + α_i ΔW_i
//! ```
//!
//! and as the population grows the cross-sectional moments of `ξ_i`
//! approach those of a single generator process with drift
//! `r + (μ_α² + σ_α²)(1/2 − μ_γ)` and volatility `√(μ_α² + σ_α²)`.
//!
//! All randomness comes from per-trader substreams (see [`crate::rng`]);
//! moment accumulation is compensated and runs in trader order, so reports
//! do not depend on the thread count.

mod paths;
mod xi;

pub use paths::{
    generator_log_increments, generator_path, simulate_trader_paths, simulate_trader_paths_with,
    Belief, GeneratorParams, PathSimulation, TraderParams, TraderPath,
};
pub use xi::{
    convergence_study, convergence_study_with, log_log_slope, residual_rate_study,
    residual_sq_by_dt, sample_population, simulate_xi, simulate_xi_with, xi_samples,
    AggregationReport, RateRow, XiSample,
};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::kv::{KvError, KvMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Config(#[from] KvError),
    #[error("trader {trader}: risk aversion is exactly 1, Merton fraction undefined")]
    RiskAversionUnity { trader: usize },
    #[error("trader {trader}: sigma must be positive, got {sigma}")]
    NonPositiveSigma { trader: usize, sigma: f64 },
    #[error("expected {expected} beliefs, got {got}")]
    BeliefCount { expected: usize, got: usize },
    #[error("trader grid must be strictly ascending")]
    NotAscending,
}

/// Zero-mean, unit-variance shock distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShockDistribution {
    #[default]
    Normal,
    /// Uniform on `[−√3, √3]`.
    ShiftedUniform,
}

impl ShockDistribution {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            ShockDistribution::Normal => rng.sample(StandardNormal),
            ShockDistribution::ShiftedUniform => {
                let u: f64 = rng.random();
                (2.0 * u - 1.0) * 3f64.sqrt()
            }
        }
    }
}

impl FromStr for ShockDistribution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(ShockDistribution::Normal),
            "shifted-uniform" => Ok(ShockDistribution::ShiftedUniform),
            other => Err(format!("unknown distribution `{other}`")),
        }
    }
}

impl fmt::Display for ShockDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShockDistribution::Normal => "normal",
            ShockDistribution::ShiftedUniform => "shifted-uniform",
        })
    }
}

/// Distributional parameters of the trader population.
#[derive(Debug, Clone, PartialEq)]
pub struct TraderPopulationSpec {
    pub n_traders: usize,
    pub mu_alpha: f64,
    pub sigma_alpha: f64,
    pub mu_gamma: f64,
    pub sigma_gamma: f64,
    /// Risk-free rate per year.
    pub r: f64,
    pub dt_years: f64,
    pub n_steps: usize,
    pub seed: u64,
    pub alpha_dist: ShockDistribution,
    pub gamma_dist: ShockDistribution,
    /// Redraw risk aversions at every step of a path instead of freezing
    /// them per trader.
    pub per_step_redraw: bool,
}

impl Default for TraderPopulationSpec {
    fn default() -> Self {
        TraderPopulationSpec {
            n_traders: 100_000,
            mu_alpha: 0.5,
            sigma_alpha: 0.1,
            mu_gamma: 0.5,
            sigma_gamma: 0.1,
            r: 0.02,
            dt_years: 1.0 / 252.0,
            n_steps: 252,
            seed: 1,
            alpha_dist: ShockDistribution::Normal,
            gamma_dist: ShockDistribution::Normal,
            per_step_redraw: false,
        }
    }
}

/// Keys understood by [`TraderPopulationSpec::from_kv`].
pub const SPEC_KEYS: [&str; 12] = [
    "n_traders",
    "mu_alpha",
    "sigma_alpha",
    "mu_gamma",
    "sigma_gamma",
    "r",
    "dt_years",
    "n_steps",
    "seed",
    "alpha_dist",
    "gamma_dist",
    "per_step_redraw",
];

impl TraderPopulationSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidSpec(msg));
        if self.n_traders == 0 {
            return bad("n_traders must be at least 1".into());
        }
        if self.n_steps == 0 {
            return bad("n_steps must be at least 1".into());
        }
        if !(self.dt_years > 0.0 && self.dt_years.is_finite()) {
            return bad(format!("dt_years must be positive, got {}", self.dt_years));
        }
        if !(self.sigma_alpha >= 0.0) || !(self.sigma_gamma >= 0.0) {
            return bad("sigma_alpha and sigma_gamma must be non-negative".into());
        }
        for (name, v) in [
            ("mu_alpha", self.mu_alpha),
            ("mu_gamma", self.mu_gamma),
            ("r", self.r),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if !self.sigma_alpha.is_finite() || !self.sigma_gamma.is_finite() {
            return bad("sigma_alpha and sigma_gamma must be finite".into());
        }
        Ok(())
    }

    /// Reads the spec keys from a parsed configuration. Required:
    /// `n_traders, mu_alpha, sigma_alpha, mu_gamma, sigma_gamma, r,
    /// dt_years, n_steps, seed`.
    pub fn from_kv(kv: &KvMap) -> Result<Self, SimError> {
        let spec = TraderPopulationSpec {
            n_traders: kv.require("n_traders")?,
            mu_alpha: kv.require("mu_alpha")?,
            sigma_alpha: kv.require("sigma_alpha")?,
            mu_gamma: kv.require("mu_gamma")?,
            sigma_gamma: kv.require("sigma_gamma")?,
            r: kv.require("r")?,
            dt_years: kv.require("dt_years")?,
            n_steps: kv.require("n_steps")?,
            seed: kv.require("seed")?,
            alpha_dist: kv.get_or("alpha_dist", ShockDistribution::Normal)?,
            gamma_dist: kv.get_or("gamma_dist", ShockDistribution::Normal)?,
            per_step_redraw: kv.get_or("per_step_redraw", false)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `E[α²] = μ_α² + σ_α²`
    pub fn alpha_second_moment(&self) -> f64 {
        self.mu_alpha * self.mu_alpha + self.sigma_alpha * self.sigma_alpha
    }

    /// Large-population mean and variance of `ξ` (variance to first order
    /// in `Δt`).
    pub fn theory_moments(&self) -> (f64, f64) {
        let a2 = self.alpha_second_moment();
        (
            (self.r + a2 * (0.5 - self.mu_gamma)) * self.dt_years,
            a2 * self.dt_years,
        )
    }

    /// The same moments with `(μ_α + σ_α)²` in place of `μ_α² + σ_α²`.
    /// This variant does not equal `E[α²]`; it is reported for comparison
    /// only.
    pub fn printed_form_moments(&self) -> (f64, f64) {
        let a2 = (self.mu_alpha + self.sigma_alpha).powi(2);
        (
            (self.r + a2 * (0.5 - self.mu_gamma)) * self.dt_years,
            a2 * self.dt_years,
        )
    }

    pub fn with_traders(&self, n_traders: usize) -> Self {
        TraderPopulationSpec {
            n_traders,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        TraderPopulationSpec {
            seed,
            ..self.clone()
        }
    }
}
