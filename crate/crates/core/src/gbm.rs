//! GBM drift/volatility estimation on price and volume series, one window
//! at a time or rolled along an [`AlignedSeries`].

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{mean, sample_variance, Execution};
use crate::market_data::{log_increments, AlignedSeries, DataError};
use crate::stat_tests::correlation_p_value;

/// Trading days per year.
pub const TRADING_DAYS: f64 = 252.0;

/// Smallest rolling window: four increments are needed for the correlation
/// t-test.
pub const MIN_ROLLING_WINDOW: usize = 5;

/// Anchors evaluated per sliding block. Fixed so that results do not depend
/// on the number of worker threads.
const BLOCK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("need at least {min} observations, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("value at index {index} must be > 0, got {value}")]
    NonPositive { index: usize, value: f64 },
    #[error("dt_years must be positive and finite, got {0}")]
    InvalidDt(f64),
    #[error("window {window} is below the minimum of {min}")]
    WindowTooSmall { window: usize, min: usize },
    #[error("window {window} needs at least {needed} observations, series has {len}")]
    WindowTooLarge {
        window: usize,
        needed: usize,
        len: usize,
    },
    #[error("window ending {date}: {series} increments have zero variance, correlation undefined")]
    ZeroVariance {
        date: NaiveDate,
        series: &'static str,
    },
}

impl From<DataError> for EstimationError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::NonPositive { index, value } => {
                EstimationError::NonPositive { index, value }
            }
            DataError::TooShort(got) => EstimationError::TooShort { min: 3, got },
            other => unreachable!("log_increments only fails on length or sign: {other}"),
        }
    }
}

/// Annualized GBM parameters of one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmEstimate {
    pub mu: f64,
    pub sigma: f64,
    /// Number of log increments used.
    pub n_obs: usize,
    pub window_start: Option<NaiveDate>,
    pub window_end: Option<NaiveDate>,
}

impl GbmEstimate {
    fn from_moments(m: f64, var: f64, n_obs: usize, dt: f64) -> Self {
        let sigma = (var.max(0.0) / dt).sqrt();
        GbmEstimate {
            mu: m / dt + 0.5 * sigma * sigma,
            sigma,
            n_obs,
            window_start: None,
            window_end: None,
        }
    }

    pub fn with_window(mut self, start: NaiveDate, end: NaiveDate) -> Self {
        self.window_start = Some(start);
        self.window_end = Some(end);
        self
    }
}

fn check_dt(dt_years: f64) -> Result<(), EstimationError> {
    if dt_years > 0.0 && dt_years.is_finite() {
        Ok(())
    } else {
        Err(EstimationError::InvalidDt(dt_years))
    }
}

/// Method-of-moments GBM fit: with `m`, `s` the mean and unbiased SD of the
/// log increments, `sigma = s/√dt` and `mu = m/dt + sigma²/2`.
pub fn fit_gbm(values: &[f64], dt_years: f64) -> Result<GbmEstimate, EstimationError> {
    check_dt(dt_years)?;
    if values.len() < 3 {
        return Err(EstimationError::TooShort {
            min: 3,
            got: values.len(),
        });
    }
    let inc = log_increments(values)?;
    Ok(GbmEstimate::from_moments(
        mean(&inc),
        sample_variance(&inc),
        inc.len(),
        dt_years,
    ))
}

/// Rolling estimates, one row per anchor date.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindowedEstimates {
    pub dates: Vec<NaiveDate>,
    pub price_fit: Vec<GbmEstimate>,
    pub volume_fit: Vec<GbmEstimate>,
    pub rho: Vec<f64>,
    pub rho_pvalue: Vec<f64>,
}

impl WindowedEstimates {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }
}

/// Shifted running sums over a sliding window of paired increments.
#[derive(Debug, Clone, Copy)]
struct WindowMoments {
    n: f64,
    shift_x: f64,
    shift_y: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl WindowMoments {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let mut m = WindowMoments {
            n: 0.0,
            shift_x: x[0],
            shift_y: y[0],
            sx: 0.0,
            sy: 0.0,
            sxx: 0.0,
            syy: 0.0,
            sxy: 0.0,
        };
        for (&a, &b) in x.iter().zip(y) {
            m.push(a, b);
        }
        m
    }

    fn push(&mut self, x: f64, y: f64) {
        let (dx, dy) = (x - self.shift_x, y - self.shift_y);
        self.n += 1.0;
        self.sx += dx;
        self.sy += dy;
        self.sxx += dx * dx;
        self.syy += dy * dy;
        self.sxy += dx * dy;
    }

    fn pop(&mut self, x: f64, y: f64) {
        let (dx, dy) = (x - self.shift_x, y - self.shift_y);
        self.n -= 1.0;
        self.sx -= dx;
        self.sy -= dy;
        self.sxx -= dx * dx;
        self.syy -= dy * dy;
        self.sxy -= dx * dy;
    }

    fn mean_x(&self) -> f64 {
        self.shift_x + self.sx / self.n
    }

    fn mean_y(&self) -> f64 {
        self.shift_y + self.sy / self.n
    }

    fn var_x(&self) -> f64 {
        ((self.sxx - self.sx * self.sx / self.n) / (self.n - 1.0)).max(0.0)
    }

    fn var_y(&self) -> f64 {
        ((self.syy - self.sy * self.sy / self.n) / (self.n - 1.0)).max(0.0)
    }

    fn cov(&self) -> f64 {
        (self.sxy - self.sx * self.sy / self.n) / (self.n - 1.0)
    }
}

struct Row {
    price: GbmEstimate,
    volume: GbmEstimate,
    rho: f64,
    rho_pvalue: f64,
}

/// Rolling GBM fits with the default [`Execution`].
pub fn rolling_fit(
    series: &AlignedSeries,
    window: usize,
    dt_years: f64,
) -> Result<WindowedEstimates, EstimationError> {
    rolling_fit_with(series, window, dt_years, Execution::default())
}

/// Fits price and volume on every window of `window` consecutive
/// observations ending at index `t = window, …, len − 1`, attributing the
/// estimate to `dates[t]`, and correlates the two increment sequences of the
/// same window.
///
/// The window slides by dropping its oldest increment and adding the newest.
pub fn rolling_fit_with(
    series: &AlignedSeries,
    window: usize,
    dt_years: f64,
    exec: Execution,
) -> Result<WindowedEstimates, EstimationError> {
    check_dt(dt_years)?;
    if window < MIN_ROLLING_WINDOW {
        return Err(EstimationError::WindowTooSmall {
            window,
            min: MIN_ROLLING_WINDOW,
        });
    }
    let len = series.len();
    if len < window + 1 {
        return Err(EstimationError::WindowTooLarge {
            window,
            needed: window + 1,
            len,
        });
    }
    let xp = log_increments(&series.prices)?;
    let xv = log_increments(&series.volumes)?;
    let n_anchors = len - window;
    let n_inc = window - 1;
    let n_blocks = n_anchors.div_ceil(BLOCK);

    let blocks = exec.try_map(0..n_blocks, |b| {
        let first = b * BLOCK;
        let last = (first + BLOCK).min(n_anchors);
        // anchor a uses increments [a + 1, a + window)
        let mut moments = WindowMoments::new(
            &xp[first + 1..first + window],
            &xv[first + 1..first + window],
        );
        let mut rows = Vec::with_capacity(last - first);
        for a in first..last {
            if a > first {
                moments.pop(xp[a], xv[a]);
                moments.push(xp[a + window - 1], xv[a + window - 1]);
            }
            let t = a + window;
            let start = series.dates[a + 1];
            let end = series.dates[t];
            let (vx, vy) = (moments.var_x(), moments.var_y());
            if !(vx > 0.0) {
                return Err(EstimationError::ZeroVariance {
                    date: end,
                    series: "price",
                });
            }
            if !(vy > 0.0) {
                return Err(EstimationError::ZeroVariance {
                    date: end,
                    series: "volume",
                });
            }
            let rho = (moments.cov() / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0);
            rows.push(Row {
                price: GbmEstimate::from_moments(moments.mean_x(), vx, n_inc, dt_years)
                    .with_window(start, end),
                volume: GbmEstimate::from_moments(moments.mean_y(), vy, n_inc, dt_years)
                    .with_window(start, end),
                rho,
                rho_pvalue: correlation_p_value(rho, n_inc),
            });
        }
        Ok(rows)
    })?;

    let mut out = WindowedEstimates {
        dates: Vec::with_capacity(n_anchors),
        price_fit: Vec::with_capacity(n_anchors),
        volume_fit: Vec::with_capacity(n_anchors),
        rho: Vec::with_capacity(n_anchors),
        rho_pvalue: Vec::with_capacity(n_anchors),
    };
    for (a, row) in blocks.into_iter().flatten().enumerate() {
        out.dates.push(series.dates[a + window]);
        out.price_fit.push(row.price);
        out.volume_fit.push(row.volume);
        out.rho.push(row.rho);
        out.rho_pvalue.push(row.rho_pvalue);
    }
    Ok(out)
}
