//! Run configuration for the `analyze` and `forecast` commands.
//!
//! Read from a flat `key = value` file; command-line flags override file
//! values. Recognized keys:
//!
//! | key | default |
//! |---|---|
//! | `prices` | required |
//! | `rates` | required |
//! | `window` | 125 |
//! | `annualization` | 252 |
//! | `rho_mode` | `estimated` (`estimated` or `zero`) |
//! | `segments` | none (comma-separated ISO dates) |
//! | `output_dir` | `.` |
//! | `seed` | 0 |
//! | `yield_percent` | false |
//! | `mode` | `reconstruction` (`reconstruction` or `point`) |
//! | `ks_mode` | `levels` (`levels` or `increments`) |
//! | `date_column`, `close_column`, `volume_column`, `yield_column`, `date_format` | `date`, `close`, `volume`, `yield`, `%Y-%m-%d` |

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;

use crate::forecast::ForecastMode;
use crate::kv::{KvError, KvMap};
use crate::market_data::{ColumnSchema, RiskFreeSchema};
use crate::risk_metrics::RhoMode;

pub const DEFAULT_WINDOW: usize = 125;
pub const MIN_WINDOW: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error(transparent)]
    Kv(#[from] KvError),
    #[error("window must be at least {MIN_WINDOW}, got {0}")]
    WindowTooSmall(usize),
    #[error("annualization must be positive, got {0}")]
    BadAnnualization(f64),
    #[error("segment breakpoints must be strictly increasing")]
    UnorderedSegments,
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
}

/// Which transform of a window is tested for normality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KsMode {
    /// Standardized log levels of the window.
    #[default]
    Levels,
    /// Log increments of the window.
    Increments,
}

impl FromStr for KsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "levels" => Ok(KsMode::Levels),
            "increments" => Ok(KsMode::Increments),
            other => Err(format!("unknown KS mode `{other}`")),
        }
    }
}

impl fmt::Display for KsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KsMode::Levels => "levels",
            KsMode::Increments => "increments",
        })
    }
}

struct Rho(RhoMode);

impl FromStr for Rho {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "estimated" => Ok(Rho(RhoMode::Estimated)),
            "zero" => Ok(Rho(RhoMode::Zero)),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub price_volume_path: PathBuf,
    pub risk_free_path: PathBuf,
    pub window: usize,
    /// Trading days per year.
    pub annualization: f64,
    pub rho_mode: RhoMode,
    /// Segment breakpoints; segment `k` runs from breakpoint `k − 1`
    /// (inclusive) to breakpoint `k` (exclusive).
    pub segments: Vec<NaiveDate>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub forecast_mode: ForecastMode,
    pub ks_mode: KsMode,
    pub columns: ColumnSchema,
    pub rates: RiskFreeSchema,
}

/// Partially specified configuration, as read from a file or flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub price_volume_path: Option<PathBuf>,
    pub risk_free_path: Option<PathBuf>,
    pub window: Option<usize>,
    pub annualization: Option<f64>,
    pub rho_zero: bool,
    pub segments: Option<Vec<NaiveDate>>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub yield_percent: bool,
    pub forecast_mode: Option<ForecastMode>,
}

const KEYS: [&str; 16] = [
    "prices",
    "rates",
    "window",
    "annualization",
    "rho_mode",
    "segments",
    "output_dir",
    "seed",
    "yield_percent",
    "mode",
    "ks_mode",
    "date_column",
    "close_column",
    "volume_column",
    "yield_column",
    "date_format",
];

impl RunConfig {
    /// Builds a configuration from an optional file and flag overrides.
    pub fn resolve(
        file: Option<&KvMap>,
        flags: &ConfigOverrides,
    ) -> Result<RunConfig, ConfigError> {
        let empty = KvMap::default();
        let kv = file.unwrap_or(&empty);
        kv.reject_unknown(&KEYS)?;

        let date_format: String = kv.get_or("date_format", "%Y-%m-%d".to_string())?;
        let columns = ColumnSchema {
            date: kv.get_or("date_column", "date".to_string())?,
            close: kv.get_or("close_column", "close".to_string())?,
            volume: kv.get_or("volume_column", "volume".to_string())?,
            date_format: date_format.clone(),
        };
        let rates = RiskFreeSchema {
            date: kv.get_or("date_column", "date".to_string())?,
            yield_column: kv.get_or("yield_column", "yield".to_string())?,
            date_format,
            percent: flags.yield_percent || kv.get_or("yield_percent", false)?,
        };
        let file_rho = kv.get::<Rho>("rho_mode")?.map(|r| r.0).unwrap_or_default();
        let segments = match &flags.segments {
            Some(s) => s.clone(),
            None => kv.get_list("segments")?.unwrap_or_default(),
        };
        let cfg = RunConfig {
            price_volume_path: flags
                .price_volume_path
                .clone()
                .or(kv.get("prices")?)
                .ok_or(ConfigError::Missing("prices"))?,
            risk_free_path: flags
                .risk_free_path
                .clone()
                .or(kv.get("rates")?)
                .ok_or(ConfigError::Missing("rates"))?,
            window: flags
                .window
                .map_or_else(|| kv.get_or("window", DEFAULT_WINDOW), Ok)?,
            annualization: flags
                .annualization
                .map_or_else(|| kv.get_or("annualization", 252.0), Ok)?,
            rho_mode: if flags.rho_zero {
                RhoMode::Zero
            } else {
                file_rho
            },
            segments,
            output_dir: flags
                .output_dir
                .clone()
                .map_or_else(|| kv.get_or("output_dir", PathBuf::from(".")), Ok)?,
            seed: flags.seed.map_or_else(|| kv.get_or("seed", 0), Ok)?,
            forecast_mode: flags
                .forecast_mode
                .map_or_else(|| kv.get_or("mode", ForecastMode::default()), Ok)?,
            ks_mode: kv.get_or("ks_mode", KsMode::default())?,
            columns,
            rates,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.window < MIN_WINDOW {
            return Err(ConfigError::WindowTooSmall(self.window));
        }
        if !(self.annualization > 0.0 && self.annualization.is_finite()) {
            return Err(ConfigError::BadAnnualization(self.annualization));
        }
        if self.segments.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::UnorderedSegments);
        }
        Ok(())
    }

    pub fn dt_years(&self) -> f64 {
        1.0 / self.annualization
    }
}
