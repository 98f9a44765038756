//! One-day-ahead price forecasts from windowed GBM estimates.
//!
//! The estimate anchored at date `t` only uses data up to `t`, and is used
//! to forecast the close at `t + 1`.
//!
//! * [`ForecastMode::Reconstruction`] re-applies the realized shock of the
//!   `t → t+1` log return, so the forecast equals the observed price up to
//!   rounding. It checks that the estimated parameters and noises
//!   reproduce the series.
//! * [`ForecastMode::Point`] uses the conditional expectation
//!   `S_t exp(μ̂ Δt)` and is the out-of-sample test.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbm::WindowedEstimates;
use crate::market_data::AlignedSeries;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("estimate dated {0} is not in the series")]
    CoverageGap(NaiveDate),
    #[error("{0}: estimated price volatility is zero, realized shock undefined")]
    ZeroVolatility(NaiveDate),
    #[error("no forecast points")]
    Empty,
    #[error("hit rate needs at least 2 consecutive points, got {0}")]
    TooFew(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastMode {
    #[default]
    Reconstruction,
    Point,
}

impl FromStr for ForecastMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reconstruction" => Ok(ForecastMode::Reconstruction),
            "point" => Ok(ForecastMode::Point),
            other => Err(format!(
                "unknown forecast mode `{other}` (expected reconstruction or point)"
            )),
        }
    }
}

impl fmt::Display for ForecastMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ForecastMode::Reconstruction => "reconstruction",
            ForecastMode::Point => "point",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub date: NaiveDate,
    pub observed: f64,
    pub forecast: f64,
    pub mode: ForecastMode,
}

/// Forecasts for every anchor date that has a following observation.
pub fn one_day_ahead(
    series: &AlignedSeries,
    estimates: &WindowedEstimates,
    mode: ForecastMode,
    dt_years: f64,
) -> Result<Vec<ForecastPoint>, ForecastError> {
    let mut out = Vec::with_capacity(estimates.len());
    let mut cursor = 0usize;
    for (k, &date) in estimates.dates.iter().enumerate() {
        while cursor < series.len() && series.dates[cursor] < date {
            cursor += 1;
        }
        if cursor == series.len() || series.dates[cursor] != date {
            return Err(ForecastError::CoverageGap(date));
        }
        let t = cursor;
        if t + 1 >= series.len() {
            break;
        }
        let fit = &estimates.price_fit[k];
        let (s_t, s_next) = (series.prices[t], series.prices[t + 1]);
        let forecast = match mode {
            ForecastMode::Point => s_t * (fit.mu * dt_years).exp(),
            ForecastMode::Reconstruction => {
                if fit.sigma == 0.0 {
                    return Err(ForecastError::ZeroVolatility(date));
                }
                let drift = (fit.mu - 0.5 * fit.sigma * fit.sigma) * dt_years;
                let shock = ((s_next / s_t).ln() - drift) / fit.sigma;
                s_t * (drift + fit.sigma * shock).exp()
            }
        };
        out.push(ForecastPoint {
            date: series.dates[t + 1],
            observed: s_next,
            forecast,
            mode,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastDiagnostics {
    pub mae_rel: f64,
    pub rmse_rel: f64,
    pub hit_rate: f64,
}

/// Relative MAE/RMSE against the observed price, and the directional hit
/// rate against the previous point's observed close. A move is a hit when
/// forecast and observed move in the same direction; a flat forecast only
/// hits a flat close.
pub fn forecast_diagnostics(
    points: &[ForecastPoint],
) -> Result<ForecastDiagnostics, ForecastError> {
    if points.is_empty() {
        return Err(ForecastError::Empty);
    }
    if points.len() < 2 {
        return Err(ForecastError::TooFew(points.len()));
    }
    let n = points.len() as f64;
    let rel: Vec<f64> = points
        .iter()
        .map(|p| (p.forecast - p.observed) / p.observed)
        .collect();
    let mae_rel = rel.iter().map(|e| e.abs()).sum::<f64>() / n;
    let rmse_rel = (rel.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let hits = points
        .windows(2)
        .filter(|w| {
            let prev = w[0].observed;
            sign(w[1].forecast - prev) == sign(w[1].observed - prev)
        })
        .count();
    Ok(ForecastDiagnostics {
        mae_rel,
        rmse_rel,
        hit_rate: hits as f64 / (points.len() - 1) as f64,
    })
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}
