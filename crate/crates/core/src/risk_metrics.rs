//! Volume-implied risk quantities derived from windowed GBM estimates.
//!
//! Notation follows the model: price `dS/S = μ dt + σ dZ`, volume
//! `dn/n = η(ψ dt + σ dQ)` with `corr(dZ, dQ) = ρ`, so the wealth
//! invested in the asset, `π = nS`, has drift `μ + (ψ + ρσ²)η` and
//! volatility `σ√(1 + η² + 2ρη)`.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbm::{GbmEstimate, WindowedEstimates};
use crate::market_data::AlignedSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("price volatility is zero")]
    ZeroPriceVolatility,
    #[error("volatility must be positive, got {0}")]
    ZeroVolatility(f64),
    #[error("1 + eta² + 2·rho·eta = {0} is not positive")]
    DegenerateCombinedVolatility(f64),
    #[error("sigma_tilde must be positive, got {0}")]
    NonPositiveSigmaTilde(f64),
    #[error("trading rate must be positive, got {0}")]
    NonPositiveTradingRate(f64),
    #[error("{date}: {source}")]
    AtDate {
        date: NaiveDate,
        source: Box<MetricsError>,
    },
    #[error("estimate dated {0} is not in the series")]
    CoverageGap(NaiveDate),
}

impl MetricsError {
    fn at(self, date: NaiveDate) -> Self {
        MetricsError::AtDate {
            date,
            source: Box::new(self),
        }
    }
}

/// Whether the price/volume correlation enters the formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhoMode {
    #[default]
    Estimated,
    Zero,
}

/// All per-date derived quantities. Field order is the CSV column order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskMetricsPoint {
    pub date: NaiveDate,
    pub eta: f64,
    pub psi: f64,
    pub ratio_obs: f64,
    pub ratio_merton: f64,
    pub market_premium: f64,
    pub volume_premium: f64,
    pub market_por: f64,
    pub volume_por: f64,
    pub trading_por: f64,
    pub mu_gamma: f64,
    pub wealth_drift: f64,
    pub wealth_vol: f64,
}

/// Numeric columns of [`RiskMetricsPoint`], in CSV order.
pub const METRIC_NAMES: [&str; 12] = [
    "eta",
    "psi",
    "ratio_obs",
    "ratio_merton",
    "market_premium",
    "volume_premium",
    "market_por",
    "volume_por",
    "trading_por",
    "mu_gamma",
    "wealth_drift",
    "wealth_vol",
];

impl RiskMetricsPoint {
    pub fn values(&self) -> [f64; 12] {
        [
            self.eta,
            self.psi,
            self.ratio_obs,
            self.ratio_merton,
            self.market_premium,
            self.volume_premium,
            self.market_por,
            self.volume_por,
            self.trading_por,
            self.mu_gamma,
            self.wealth_drift,
            self.wealth_vol,
        ]
    }
}

/// Model inputs for one date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
    pub psi: f64,
    pub rho: f64,
    pub eta: f64,
}

impl ModelParams {
    fn combined_variance_factor(&self) -> Result<f64, MetricsError> {
        let k = 1.0 + self.eta * self.eta + 2.0 * self.rho * self.eta;
        if k > 0.0 {
            Ok(k)
        } else {
            Err(MetricsError::DegenerateCombinedVolatility(k))
        }
    }

    fn check_sigma(&self) -> Result<(), MetricsError> {
        if self.sigma > 0.0 {
            Ok(())
        } else {
            Err(MetricsError::ZeroVolatility(self.sigma))
        }
    }

    /// `ψ + ρσ²`
    pub fn volume_premium(&self) -> f64 {
        self.psi + self.rho * self.sigma * self.sigma
    }

    /// Excess drift of invested wealth, `μ − r + (ψ + ρσ²)η`.
    fn wealth_excess(&self) -> f64 {
        self.mu - self.r + self.volume_premium() * self.eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeDecomposition {
    pub eta: f64,
    pub psi: f64,
    /// Set when the volume volatility is zero (no trading).
    pub degenerate: bool,
}

/// Splits the volume fit into trading rate `η = σ_v/σ` and `ψ = μ_v/η`.
pub fn decompose_volume(
    vol_fit: &GbmEstimate,
    price_fit: &GbmEstimate,
) -> Result<VolumeDecomposition, MetricsError> {
    if !(price_fit.sigma > 0.0) {
        return Err(MetricsError::ZeroPriceVolatility);
    }
    let eta = vol_fit.sigma / price_fit.sigma;
    if eta > 0.0 {
        Ok(VolumeDecomposition {
            eta,
            psi: vol_fit.mu / eta,
            degenerate: false,
        })
    } else {
        Ok(VolumeDecomposition {
            eta: 0.0,
            psi: 0.0,
            degenerate: true,
        })
    }
}

/// Drift-to-volatility ratio of volume under frictionless Merton
/// optimality, `(μ − r − σ²)/σ`.
pub fn merton_ratio(mu: f64, r: f64, sigma: f64) -> Result<f64, MetricsError> {
    if !(sigma > 0.0) {
        return Err(MetricsError::ZeroVolatility(sigma));
    }
    Ok((mu - r - sigma * sigma) / sigma)
}

/// Observed drift-to-volatility ratio of volume, `μ_v/σ_v`.
pub fn observed_ratio(vol_fit: &GbmEstimate) -> Result<f64, MetricsError> {
    if !(vol_fit.sigma > 0.0) {
        return Err(MetricsError::ZeroVolatility(vol_fit.sigma));
    }
    Ok(vol_fit.mu / vol_fit.sigma)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricesOfRisk {
    pub market: f64,
    pub volume: f64,
    pub trading: f64,
}

/// Market, volume and trading prices of risk.
///
/// The trading price of risk is the Sharpe ratio of the invested wealth,
/// `(μ − r + (ψ + ρσ²)η) / (σ√(1 + η² + 2ρη))`; it equals the market price
/// of risk when `η = 0`.
pub fn prices_of_risk(p: &ModelParams) -> Result<PricesOfRisk, MetricsError> {
    p.check_sigma()?;
    let k = p.combined_variance_factor()?;
    Ok(PricesOfRisk {
        market: (p.mu - p.r) / p.sigma,
        volume: p.volume_premium() / p.sigma,
        trading: p.wealth_excess() / (p.sigma * k.sqrt()),
    })
}

/// Average risk aversion of the trader population,
/// `1 − (μ − r + (ψ + ρσ²)η) / (σ²(1 + η² + 2ρη))`.
pub fn risk_aversion(p: &ModelParams) -> Result<f64, MetricsError> {
    p.check_sigma()?;
    let k = p.combined_variance_factor()?;
    Ok(1.0 - p.wealth_excess() / (p.sigma * p.sigma * k))
}

/// Drift and volatility of the invested wealth `π = nS`.
pub fn wealth_dynamics(p: &ModelParams) -> Result<(f64, f64), MetricsError> {
    let k = p.combined_variance_factor()?;
    Ok((p.mu + p.volume_premium() * p.eta, p.sigma * k.sqrt()))
}

/// Drift of the impacted price for a chosen volatility `σ̃`:
/// `r + σ̃(1 − μ_γ)·α_rms`, where `α_rms = √(μ_α² + σ_α²)`.
pub fn impacted_drift(
    sigma_tilde: f64,
    r: f64,
    mu_gamma: f64,
    alpha_rms: f64,
) -> Result<f64, MetricsError> {
    if !(sigma_tilde > 0.0) {
        return Err(MetricsError::NonPositiveSigmaTilde(sigma_tilde));
    }
    Ok(r + sigma_tilde * (1.0 - mu_gamma) * alpha_rms)
}

/// Representative-agent parameters matching the observed wealth dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepresentativeAgent {
    pub mu_gamma: f64,
    /// `√(μ_α² + σ_α²)`
    pub alpha_rms: f64,
}

impl RepresentativeAgent {
    /// Drift of the generator process, `r + α_rms²(1 − μ_γ)`.
    pub fn generator_drift(&self, r: f64) -> f64 {
        r + self.alpha_rms * self.alpha_rms * (1.0 - self.mu_gamma)
    }

    /// Residuals of the matching system against the observed wealth
    /// dynamics: `(drift mismatch, volatility mismatch)`.
    pub fn matching_residuals(&self, p: &ModelParams) -> Result<(f64, f64), MetricsError> {
        let (drift, vol) = wealth_dynamics(p)?;
        Ok((self.generator_drift(p.r) - drift, self.alpha_rms - vol))
    }
}

/// Solves the drift/volatility matching system for `(μ_γ, α_rms)`.
pub fn calibrate_representative_agent(
    p: &ModelParams,
) -> Result<RepresentativeAgent, MetricsError> {
    let (_, vol) = wealth_dynamics(p)?;
    Ok(RepresentativeAgent {
        mu_gamma: risk_aversion(p)?,
        alpha_rms: vol,
    })
}

/// Girsanov kernels along the price and volume noises. The `η` factors of
/// the volume kernel cancel, leaving `(ψ + ρσ²)/σ`.
pub fn girsanov_kernels(p: &ModelParams) -> Result<(f64, f64), MetricsError> {
    p.check_sigma()?;
    if !(p.eta > 0.0) {
        return Err(MetricsError::NonPositiveTradingRate(p.eta));
    }
    let volume = (p.volume_premium() * p.eta) / (p.eta * p.sigma);
    Ok(((p.mu - p.r) / p.sigma, volume))
}

/// Drift and volatility of an impacted price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactedPriceParams {
    pub sigma_tilde: f64,
    pub mu_tilde: f64,
}

impl ImpactedPriceParams {
    pub fn new(p: &ModelParams, sigma_tilde: f64) -> Result<Self, MetricsError> {
        let agent = calibrate_representative_agent(p)?;
        let mu_tilde = impacted_drift(sigma_tilde, p.r, agent.mu_gamma, agent.alpha_rms)?;
        Ok(ImpactedPriceParams {
            sigma_tilde,
            mu_tilde,
        })
    }

    /// `(μ̃ − r)/σ̃`
    pub fn price_of_risk(&self, r: f64) -> f64 {
        (self.mu_tilde - r) / self.sigma_tilde
    }
}

/// Every metric for one date.
pub fn metrics_point(
    date: NaiveDate,
    price_fit: &GbmEstimate,
    vol_fit: &GbmEstimate,
    rho: f64,
    r: f64,
) -> Result<RiskMetricsPoint, MetricsError> {
    let dec = decompose_volume(vol_fit, price_fit)?;
    let p = ModelParams {
        mu: price_fit.mu,
        r,
        sigma: price_fit.sigma,
        psi: dec.psi,
        rho,
        eta: dec.eta,
    };
    let por = prices_of_risk(&p)?;
    let (wealth_drift, wealth_vol) = wealth_dynamics(&p)?;
    Ok(RiskMetricsPoint {
        date,
        eta: dec.eta,
        psi: dec.psi,
        ratio_obs: observed_ratio(vol_fit)?,
        ratio_merton: merton_ratio(p.mu, r, p.sigma)?,
        market_premium: p.mu - r,
        volume_premium: p.volume_premium(),
        market_por: por.market,
        volume_por: por.volume,
        trading_por: por.trading,
        mu_gamma: risk_aversion(&p)?,
        wealth_drift,
        wealth_vol,
    })
}

/// Metrics for every window, using the risk-free rate on the anchor date.
pub fn compute_metrics(
    series: &AlignedSeries,
    estimates: &WindowedEstimates,
    rho_mode: RhoMode,
) -> Result<Vec<RiskMetricsPoint>, MetricsError> {
    let mut cursor = 0usize;
    let mut out = Vec::with_capacity(estimates.len());
    for (k, &date) in estimates.dates.iter().enumerate() {
        // anchor dates are increasing, so a forward scan suffices
        while cursor < series.len() && series.dates[cursor] < date {
            cursor += 1;
        }
        if cursor == series.len() || series.dates[cursor] != date {
            return Err(MetricsError::CoverageGap(date));
        }
        let rho = match rho_mode {
            RhoMode::Estimated => estimates.rho[k],
            RhoMode::Zero => 0.0,
        };
        let point = metrics_point(
            date,
            &estimates.price_fit[k],
            &estimates.volume_fit[k],
            rho,
            series.risk_free[cursor],
        )
        .map_err(|e| e.at(date))?;
        out.push(point);
    }
    Ok(out)
}
