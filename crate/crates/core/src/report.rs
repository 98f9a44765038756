//! CSV tables written by the command-line tool, and readers for them.
//!
//! Floats are written in shortest round-trip form, so a table read back
//! with [`read_table`] reproduces the written values exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbm::WindowedEstimates;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
}

impl ReportError {
    fn csv(path: &str, source: csv::Error) -> Self {
        if source.is_io_error() {
            match source.into_kind() {
                csv::ErrorKind::Io(e) => ReportError::Io {
                    path: path.to_string(),
                    source: e,
                },
                _ => unreachable!(),
            }
        } else {
            ReportError::Csv {
                path: path.to_string(),
                source,
            }
        }
    }
}

/// `estimates.csv`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub date: NaiveDate,
    pub mu_price: f64,
    pub sigma_price: f64,
    pub mu_vol: f64,
    pub sigma_vol: f64,
    pub rho: f64,
    pub rho_pvalue: f64,
}

pub fn estimate_rows(est: &WindowedEstimates) -> Vec<EstimateRow> {
    (0..est.len())
        .map(|k| EstimateRow {
            date: est.dates[k],
            mu_price: est.price_fit[k].mu,
            sigma_price: est.price_fit[k].sigma,
            mu_vol: est.volume_fit[k].mu,
            sigma_vol: est.volume_fit[k].sigma,
            rho: est.rho[k],
            rho_pvalue: est.rho_pvalue[k],
        })
        .collect()
}

/// `tests.csv`: KS normality per window. Empty cells where the window is
/// too short or constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub date: NaiveDate,
    pub ks_stat_logvol: Option<f64>,
    pub ks_p_logvol: Option<f64>,
    pub ks_stat_logprice: Option<f64>,
    pub ks_p_logprice: Option<f64>,
}

/// `segments.csv`: intercept-only regression of one metric on one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub segment: usize,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub metric: String,
    pub intercept: f64,
    pub std_error: f64,
    pub n: usize,
}

/// `convergence.csv`: one row per population size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n_traders: usize,
    pub sample_mean_xi: f64,
    pub theory_mean_xi: f64,
    pub abs_mean_error: f64,
    pub sample_var_xi: f64,
    pub theory_var_xi: f64,
    pub residual_mean: f64,
    pub residual_sq_mean: f64,
    pub printed_mean_xi: f64,
    pub printed_var_xi: f64,
    pub n_seeds: usize,
    pub rms_residual_mean: f64,
    pub rms_mean_error: f64,
}

/// `generator.csv`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRow {
    pub step: usize,
    pub time: f64,
    pub value: f64,
}

/// `paths.csv`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub trader: usize,
    pub step: usize,
    pub time: f64,
    pub wealth: f64,
    pub strategy: f64,
    pub riskfree_holding: f64,
    pub fraction: f64,
}

pub fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read, T: DeserializeOwned>(reader: R) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

/// Writes `rows` with a header row. An empty table still gets its header
/// when `header` is given.
pub fn write_table<T: Serialize>(
    path: &Path,
    rows: &[T],
    header: &[&str],
) -> Result<(), ReportError> {
    let name = path.display().to_string();
    let file = File::create(path).map_err(|source| ReportError::Io {
        path: name.clone(),
        source,
    })?;
    if rows.is_empty() {
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)
            .map_err(|e| ReportError::csv(&name, e))?;
        return w
            .flush()
            .map_err(|source| ReportError::Io { path: name, source });
    }
    write_rows(file, rows).map_err(|e| ReportError::csv(&name, e))
}

pub fn read_table<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ReportError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|source| ReportError::Io {
        path: name.clone(),
        source,
    })?;
    read_rows(file).map_err(|e| ReportError::csv(&name, e))
}

pub mod headers {
    pub const ESTIMATES: [&str; 7] = [
        "date",
        "mu_price",
        "sigma_price",
        "mu_vol",
        "sigma_vol",
        "rho",
        "rho_pvalue",
    ];
    pub const TESTS: [&str; 5] = [
        "date",
        "ks_stat_logvol",
        "ks_p_logvol",
        "ks_stat_logprice",
        "ks_p_logprice",
    ];
    pub const METRICS: [&str; 13] = [
        "date",
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
    pub const SEGMENTS: [&str; 7] = [
        "segment",
        "start",
        "end",
        "metric",
        "intercept",
        "std_error",
        "n",
    ];
    pub const FORECAST: [&str; 4] = ["date", "observed", "forecast", "mode"];
}
