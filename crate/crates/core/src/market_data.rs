//! Ingestion and alignment of daily price, volume and risk-free series.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: unparseable date `{value}`")]
    UnparseableDate { row: usize, value: String },
    #[error("row {row}: unparseable number `{value}` in column `{column}`")]
    UnparseableValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: value in column `{column}` must be > 0, got {value}")]
    NonPositiveValue {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("row {row}: non-finite value in column `{column}`")]
    NonFiniteValue { row: usize, column: String },
    #[error("row {row}: duplicate date {date}")]
    DuplicateDate { row: usize, date: NaiveDate },
    #[error("fewer than 2 usable price/volume dates")]
    EmptyIntersection,
    #[error("risk-free series is empty")]
    EmptyRiskFree,
    #[error("need at least 2 values, got {0}")]
    TooShort(usize),
    #[error("value at index {index} must be > 0, got {value}")]
    NonPositive { index: usize, value: f64 },
}

/// One daily observation of close price and traded volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub date: NaiveDate,
    pub close: f64,
    pub volume: f64,
}

/// Annualized risk-free yield, as a decimal fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskFreeRecord {
    pub date: NaiveDate,
    #[serde(rename = "yield")]
    pub annual_yield: f64,
}

/// Column mapping for the price/volume file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    pub date: String,
    pub close: String,
    pub volume: String,
    pub date_format: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            close: "close".into(),
            volume: "volume".into(),
            date_format: DEFAULT_DATE_FORMAT.into(),
        }
    }
}

/// Column mapping for the risk-free file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskFreeSchema {
    pub date: String,
    pub yield_column: String,
    pub date_format: String,
    /// Yields are quoted in percent and divided by 100 on ingest.
    pub percent: bool,
}

impl Default for RiskFreeSchema {
    fn default() -> Self {
        Self {
            date: "date".into(),
            yield_column: "yield".into(),
            date_format: DEFAULT_DATE_FORMAT.into(),
            percent: false,
        }
    }
}

/// Date-indexed table of prices, volumes and forward-filled risk-free rates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignedSeries {
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
    pub volumes: Vec<f64>,
    pub risk_free: Vec<f64>,
}

impl AlignedSeries {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn observations(&self) -> Vec<ObservationRecord> {
        self.dates
            .iter()
            .zip(self.prices.iter().zip(&self.volumes))
            .map(|(&date, (&close, &volume))| ObservationRecord {
                date,
                close,
                volume,
            })
            .collect()
    }

    pub fn risk_free_records(&self) -> Vec<RiskFreeRecord> {
        self.dates
            .iter()
            .zip(&self.risk_free)
            .map(|(&date, &annual_yield)| RiskFreeRecord { date, annual_yield })
            .collect()
    }
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| DataError::MissingColumn(name.to_string()))
}

fn parse_date(raw: &str, format: &str, row: usize) -> Result<NaiveDate, DataError> {
    NaiveDate::parse_from_str(raw.trim(), format).map_err(|_| DataError::UnparseableDate {
        row,
        value: raw.to_string(),
    })
}

/// Parses an optional numeric cell; an empty cell is a missing value.
fn parse_cell(raw: &str, column: &str, row: usize) -> Result<Option<f64>, DataError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    let value: f64 = raw.parse().map_err(|_| DataError::UnparseableValue {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })?;
    if !value.is_finite() {
        return Err(DataError::NonFiniteValue {
            row,
            column: column.to_string(),
        });
    }
    Ok(Some(value))
}

fn positive(value: f64, column: &str, row: usize) -> Result<f64, DataError> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(DataError::NonPositiveValue {
            row,
            column: column.to_string(),
            value,
        })
    }
}

/// Sorts `(row, date, item)` triples by date and rejects duplicate dates.
fn sort_unique<T>(mut rows: Vec<(usize, NaiveDate, T)>) -> Result<Vec<T>, DataError> {
    rows.sort_by_key(|(row, date, _)| (*date, *row));
    for pair in rows.windows(2) {
        if pair[0].1 == pair[1].1 {
            return Err(DataError::DuplicateDate {
                row: pair[1].0,
                date: pair[1].1,
            });
        }
    }
    Ok(rows.into_iter().map(|(_, _, item)| item).collect())
}

/// Reads price/volume observations. Rows with an empty close or volume cell
/// are dropped; the remaining rows are returned sorted by date.
///
/// Row numbers in errors are file line numbers (the header is line 1).
pub fn read_observations<R: Read>(
    reader: R,
    schema: &ColumnSchema,
) -> Result<Vec<ObservationRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let (di, ci, vi) = (
        column_index(&headers, &schema.date)?,
        column_index(&headers, &schema.close)?,
        column_index(&headers, &schema.volume)?,
    );
    let mut rows = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let row = k + 2;
        let date = parse_date(&record[di], &schema.date_format, row)?;
        let close = parse_cell(&record[ci], &schema.close, row)?;
        let volume = parse_cell(&record[vi], &schema.volume, row)?;
        let (Some(close), Some(volume)) = (close, volume) else {
            // rows with an empty close or volume cell are holidays in most exports
            continue;
        };
        let close = positive(close, &schema.close, row)?;
        let volume = positive(volume, &schema.volume, row)?;
        rows.push((
            row,
            date,
            ObservationRecord {
                date,
                close,
                volume,
            },
        ));
    }
    sort_unique(rows)
}

/// Reads a `date,close,volume` file from disk.
pub fn ingest_csv(path: &Path, schema: &ColumnSchema) -> Result<Vec<ObservationRecord>, DataError> {
    read_observations(open(path)?, schema)
}

/// Reads risk-free yields; empty yield cells are dropped (forward-filled later).
pub fn read_risk_free<R: Read>(
    reader: R,
    schema: &RiskFreeSchema,
) -> Result<Vec<RiskFreeRecord>, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let di = column_index(&headers, &schema.date)?;
    let yi = column_index(&headers, &schema.yield_column)?;
    let scale = if schema.percent { 0.01 } else { 1.0 };
    let mut rows = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let row = k + 2;
        let date = parse_date(&record[di], &schema.date_format, row)?;
        if let Some(y) = parse_cell(&record[yi], &schema.yield_column, row)? {
            rows.push((
                row,
                date,
                RiskFreeRecord {
                    date,
                    annual_yield: y * scale,
                },
            ));
        }
    }
    sort_unique(rows)
}

pub fn ingest_risk_free_csv(
    path: &Path,
    schema: &RiskFreeSchema,
) -> Result<Vec<RiskFreeRecord>, DataError> {
    read_risk_free(open(path)?, schema)
}

/// Writes observations in the default `date,close,volume` layout.
pub fn write_observations<W: Write>(
    writer: W,
    records: &[ObservationRecord],
) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// Writes risk-free records in the default `date,yield` layout.
pub fn write_risk_free<W: Write>(writer: W, records: &[RiskFreeRecord]) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

/// Aligns risk-free yields onto the observation dates.
///
/// Each date takes the most recent yield observed on or before it; dates
/// preceding the first yield take the first yield.
pub fn align(
    price_vol: &[ObservationRecord],
    rf: &[RiskFreeRecord],
) -> Result<AlignedSeries, DataError> {
    let obs = sort_unique(
        price_vol
            .iter()
            .enumerate()
            .map(|(i, r)| (i + 1, r.date, *r))
            .collect(),
    )?;
    if obs.len() < 2 {
        return Err(DataError::EmptyIntersection);
    }
    let mut rf = rf.to_vec();
    rf.sort_by_key(|r| r.date);
    if rf.is_empty() {
        return Err(DataError::EmptyRiskFree);
    }

    let mut risk_free = Vec::with_capacity(obs.len());
    let mut cursor = 0usize;
    for o in &obs {
        while cursor + 1 < rf.len() && rf[cursor + 1].date <= o.date {
            cursor += 1;
        }
        risk_free.push(rf[cursor].annual_yield);
    }
    Ok(AlignedSeries {
        dates: obs.iter().map(|o| o.date).collect(),
        prices: obs.iter().map(|o| o.close).collect(),
        volumes: obs.iter().map(|o| o.volume).collect(),
        risk_free,
    })
}

/// Joins separately supplied price and volume series on their common dates.
pub fn join_price_volume(
    prices: &[(NaiveDate, f64)],
    volumes: &[(NaiveDate, f64)],
) -> Vec<ObservationRecord> {
    let by_date: HashMap<NaiveDate, f64> = volumes.iter().copied().collect();
    let mut out: Vec<ObservationRecord> = prices
        .iter()
        .filter_map(|&(date, close)| {
            by_date.get(&date).map(|&volume| ObservationRecord {
                date,
                close,
                volume,
            })
        })
        .collect();
    out.sort_by_key(|r| r.date);
    out.dedup_by_key(|r| r.date);
    out
}

/// `ln v[k+1] − ln v[k]` for consecutive positive values.
pub fn log_increments(values: &[f64]) -> Result<Vec<f64>, DataError> {
    if values.len() < 2 {
        return Err(DataError::TooShort(values.len()));
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(DataError::NonPositive { index, value });
    }
    Ok(values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
}
