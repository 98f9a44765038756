//! Regenerates the files in `fixtures/`.
//!
//! ```text
//! cargo run --example make_fixtures -- crates/core/fixtures
//! ```

use std::fs::{self, File};
use std::path::PathBuf;

use chrono::{Datelike, NaiveDate};
use volrisk::market_data::{write_observations, write_risk_free, RiskFreeRecord};
use volrisk::synthetic::{generate, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    fs::create_dir_all(&dir)?;

    // four years of daily data from the model with mu = 0.10, sigma = 0.20,
    // psi = 0.04, rho = 0, eta = 3 and r = 0.02, so mu_gamma = 0.5
    let spec = SyntheticSpec::default();
    let series = generate(&spec);
    write_observations(
        File::create(dir.join("synthetic_prices.csv"))?,
        &series.observations(),
    )?;

    // monthly yields, forward-filled onto trading days by the reader
    let mut rates = Vec::new();
    let mut d = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    let last = *series.dates.last().unwrap();
    while d <= last {
        rates.push(RiskFreeRecord {
            date: d,
            annual_yield: spec.r,
        });
        d = if d.month() == 12 {
            NaiveDate::from_ymd_opt(d.year() + 1, 1, 1).unwrap()
        } else {
            NaiveDate::from_ymd_opt(d.year(), d.month() + 1, 1).unwrap()
        };
    }
    write_risk_free(File::create(dir.join("rates.csv"))?, &rates)?;
    Ok(())
}
