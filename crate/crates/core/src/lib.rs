//! Volume-implied risk metrics and heterogeneous Merton trader aggregation.
//!
//! The crate estimates GBM parameters of price and volume on rolling
//! windows, derives the trading rate, the market/volume/trading prices of
//! risk and the average risk aversion of the market, and checks by Monte
//! Carlo that optimal strategies of many heterogeneous Merton traders
//! aggregate to a single generator process.

// `!(x > 0.0)` is used on purpose so that NaN fails positivity checks
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod exec;
pub mod forecast;
pub mod gbm;
pub mod kv;
pub mod market_data;
pub mod pipeline;
pub mod report;
pub mod risk_metrics;
pub mod rng;
pub mod synthetic;
pub mod trader_sim;
