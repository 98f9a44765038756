//! Price and volume series generated from the model itself.
//!
//! `dS/S = μ dt + σ dZ` and `dn/n = η(ψ dt + σ dQ)` with `corr(dZ, dQ) = ρ`,
//! stepped exactly in logs on weekdays, with a constant risk-free rate.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::market_data::AlignedSeries;
use crate::rng::{domain, substream};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub mu: f64,
    pub sigma: f64,
    pub psi: f64,
    pub rho: f64,
    pub eta: f64,
    pub r: f64,
    pub n_days: usize,
    pub start: NaiveDate,
    pub initial_price: f64,
    pub initial_volume: f64,
    pub dt_years: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            mu: 0.10,
            sigma: 0.20,
            psi: 0.04,
            rho: 0.0,
            eta: 3.0,
            r: 0.02,
            n_days: 1009,
            start: NaiveDate::from_ymd_opt(2015, 1, 2).unwrap(),
            initial_price: 100.0,
            initial_volume: 1.0e6,
            dt_years: 1.0 / 252.0,
            seed: 7,
        }
    }
}

/// The `n` weekdays starting at `start` (moved forward if it is a weekend).
pub fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

pub fn generate(spec: &SyntheticSpec) -> AlignedSeries {
    let dt = spec.dt_years;
    let sqrt_dt = dt.sqrt();
    let sigma_v = spec.eta * spec.sigma;
    let price_drift = (spec.mu - 0.5 * spec.sigma * spec.sigma) * dt;
    let volume_drift = (spec.eta * spec.psi - 0.5 * sigma_v * sigma_v) * dt;
    let rho_c = (1.0 - spec.rho * spec.rho).max(0.0).sqrt();

    let mut rng = substream(spec.seed, domain::SYNTHETIC, 0);
    let mut prices = Vec::with_capacity(spec.n_days);
    let mut volumes = Vec::with_capacity(spec.n_days);
    let (mut ls, mut lv) = (spec.initial_price.ln(), spec.initial_volume.ln());
    if spec.n_days > 0 {
        prices.push(spec.initial_price);
        volumes.push(spec.initial_volume);
    }
    for _ in 1..spec.n_days {
        let z: f64 = rng.sample(StandardNormal);
        let q: f64 = rng.sample(StandardNormal);
        ls += price_drift + spec.sigma * sqrt_dt * z;
        lv += volume_drift + sigma_v * sqrt_dt * (spec.rho * z + rho_c * q);
        prices.push(ls.exp());
        volumes.push(lv.exp());
    }
    AlignedSeries {
        dates: weekdays(spec.start, spec.n_days),
        prices,
        volumes,
        risk_free: vec![spec.r; spec.n_days],
    }
}
