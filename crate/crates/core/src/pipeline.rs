//! End-to-end runs behind the `analyze`, `forecast` and `simulate`
//! commands. Every table is computed in memory before anything is written,
//! and a failed write removes the files already produced.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, KsMode, RunConfig};
use crate::exec::Execution;
use crate::forecast::{
    forecast_diagnostics, one_day_ahead, ForecastDiagnostics, ForecastError, ForecastPoint,
};
use crate::gbm::{rolling_fit_with, EstimationError, WindowedEstimates};
use crate::kv::{KvError, KvMap};
use crate::market_data::{align, ingest_csv, ingest_risk_free_csv, AlignedSeries, DataError};
use crate::report::{
    estimate_rows, headers, write_table, ConvergenceRow, GeneratorRow, PathRow, ReportError,
    SegmentRow, TestRow,
};
use crate::risk_metrics::{compute_metrics, MetricsError, RiskMetricsPoint, METRIC_NAMES};
use crate::stat_tests::{intercept_regression, ks_normal, StatError};
use crate::trader_sim::{
    convergence_study_with, generator_path, residual_rate_study, simulate_trader_paths_with,
    Belief, GeneratorParams, PathSimulation, SimError, TraderPopulationSpec, SPEC_KEYS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// True for failures to read or write files, as opposed to invalid
    /// inputs.
    pub fn is_io(&self) -> bool {
        match self {
            PipelineError::Data(DataError::Io { .. }) | PipelineError::Read { .. } => true,
            PipelineError::Data(DataError::Csv(e)) => e.is_io_error(),
            PipelineError::Report(ReportError::Io { .. }) => true,
            _ => false,
        }
    }
}

impl From<KvError> for PipelineError {
    fn from(e: KvError) -> Self {
        PipelineError::Simulation(SimError::Config(e))
    }
}

pub fn read_kv_file(path: &Path) -> Result<KvMap, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Read {
        path: path.display().to_string(),
        source,
    })?;
    Ok(KvMap::parse(&text).map_err(ConfigError::from)?)
}

pub fn load_series(cfg: &RunConfig) -> Result<AlignedSeries, PipelineError> {
    let obs = ingest_csv(&cfg.price_volume_path, &cfg.columns)?;
    let rf = ingest_risk_free_csv(&cfg.risk_free_path, &cfg.rates)?;
    Ok(align(&obs, &rf)?)
}

/// Everything `analyze` writes.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub estimates: WindowedEstimates,
    pub tests: Vec<TestRow>,
    pub metrics: Vec<RiskMetricsPoint>,
    pub segments: Vec<SegmentRow>,
    pub forecasts: Vec<ForecastPoint>,
}

fn ks_cells(values: &[f64], mode: KsMode) -> (Option<f64>, Option<f64>) {
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let sample = match mode {
        KsMode::Levels => logs,
        KsMode::Increments => logs.windows(2).map(|w| w[1] - w[0]).collect(),
    };
    match ks_normal(&sample) {
        Ok(r) => (Some(r.statistic), Some(r.p_value)),
        Err(_) => (None, None),
    }
}

/// KS normality of log volume and log price on every window.
pub fn window_tests(
    series: &AlignedSeries,
    window: usize,
    mode: KsMode,
    exec: Execution,
) -> Vec<TestRow> {
    let n_anchors = series.len().saturating_sub(window);
    exec.map(0..n_anchors, |a| {
        let t = a + window;
        let range = t + 1 - window..t + 1;
        let (ks_stat_logvol, ks_p_logvol) = ks_cells(&series.volumes[range.clone()], mode);
        let (ks_stat_logprice, ks_p_logprice) = ks_cells(&series.prices[range], mode);
        TestRow {
            date: series.dates[t],
            ks_stat_logvol,
            ks_p_logvol,
            ks_stat_logprice,
            ks_p_logprice,
        }
    })
}

/// Intercept-only regression of every metric on each segment. Breakpoints
/// `b_1 < … < b_k` split the dates into `[.., b_1), [b_1, b_2), …, [b_k, ..)`;
/// segments with fewer than two points are skipped.
pub fn segment_summary(
    metrics: &[RiskMetricsPoint],
    breakpoints: &[NaiveDate],
) -> Result<Vec<SegmentRow>, PipelineError> {
    let mut rows = Vec::new();
    let mut start = 0;
    for seg in 0..=breakpoints.len() {
        let end = match breakpoints.get(seg) {
            Some(&b) => start + metrics[start..].partition_point(|m| m.date < b),
            None => metrics.len(),
        };
        let points = &metrics[start..end];
        if points.len() >= 2 {
            let columns: Vec<[f64; 12]> = points.iter().map(RiskMetricsPoint::values).collect();
            for (j, name) in METRIC_NAMES.iter().enumerate() {
                let values: Vec<f64> = columns.iter().map(|c| c[j]).collect();
                let fit = intercept_regression(&values)?;
                rows.push(SegmentRow {
                    segment: seg,
                    start: points[0].date,
                    end: points[points.len() - 1].date,
                    metric: name.to_string(),
                    intercept: fit.intercept,
                    std_error: fit.std_error,
                    n: fit.n,
                });
            }
        }
        start = end;
    }
    Ok(rows)
}

pub fn analyze_series(
    series: &AlignedSeries,
    cfg: &RunConfig,
    exec: Execution,
) -> Result<Analysis, PipelineError> {
    let dt = cfg.dt_years();
    let estimates = rolling_fit_with(series, cfg.window, dt, exec)?;
    let metrics = compute_metrics(series, &estimates, cfg.rho_mode)?;
    let segments = segment_summary(&metrics, &cfg.segments)?;
    let tests = window_tests(series, cfg.window, cfg.ks_mode, exec);
    let forecasts = one_day_ahead(series, &estimates, cfg.forecast_mode, dt)?;
    Ok(Analysis {
        estimates,
        tests,
        metrics,
        segments,
        forecasts,
    })
}

/// Writes a set of tables; on failure deletes the ones already written.
struct OutputSet {
    written: Vec<PathBuf>,
}

impl OutputSet {
    fn new(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(OutputSet {
            written: Vec::new(),
        })
    }

    fn write<T: Serialize>(
        &mut self,
        path: PathBuf,
        rows: &[T],
        header: &[&str],
    ) -> Result<(), PipelineError> {
        // registered first so a half-written file is removed as well
        self.written.push(path.clone());
        write_table(&path, rows, header).map_err(|e| {
            self.discard();
            PipelineError::from(e)
        })
    }

    fn discard(&mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(p);
        }
    }
}

pub fn write_analysis(analysis: &Analysis, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = OutputSet::new(dir)?;
    out.write(
        dir.join("estimates.csv"),
        &estimate_rows(&analysis.estimates),
        &headers::ESTIMATES,
    )?;
    out.write(dir.join("tests.csv"), &analysis.tests, &headers::TESTS)?;
    out.write(
        dir.join("metrics.csv"),
        &analysis.metrics,
        &headers::METRICS,
    )?;
    out.write(
        dir.join("segments.csv"),
        &analysis.segments,
        &headers::SEGMENTS,
    )?;
    out.write(
        dir.join("forecast.csv"),
        &analysis.forecasts,
        &headers::FORECAST,
    )?;
    Ok(out.written)
}

/// Loads, analyzes and writes the five `analyze` tables.
pub fn run_analyze(cfg: &RunConfig, exec: Execution) -> Result<Vec<PathBuf>, PipelineError> {
    let series = load_series(cfg)?;
    let analysis = analyze_series(&series, cfg, exec)?;
    write_analysis(&analysis, &cfg.output_dir)
}

/// Writes `forecast.csv` and returns the diagnostics of the forecasts.
pub fn run_forecast(
    cfg: &RunConfig,
    exec: Execution,
) -> Result<ForecastDiagnostics, PipelineError> {
    let series = load_series(cfg)?;
    let dt = cfg.dt_years();
    let estimates = rolling_fit_with(&series, cfg.window, dt, exec)?;
    let points = one_day_ahead(&series, &estimates, cfg.forecast_mode, dt)?;
    let diagnostics = forecast_diagnostics(&points)?;
    let mut out = OutputSet::new(&cfg.output_dir)?;
    out.write(
        cfg.output_dir.join("forecast.csv"),
        &points,
        &headers::FORECAST,
    )?;
    Ok(diagnostics)
}

/// A `simulate` spec file: the population spec plus study settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationPlan {
    pub spec: TraderPopulationSpec,
    /// Population sizes for `convergence.csv`; defaults to `n_traders`.
    pub n_grid: Vec<usize>,
    /// Child seeds for the RMS columns of `convergence.csv`.
    pub n_seeds: usize,
    /// Closed-loop wealth paths written to `paths.csv` (0 = none).
    pub path_traders: usize,
    pub belief: Belief,
    pub initial_wealth: f64,
}

const PLAN_KEYS: [&str; 6] = [
    "n_grid",
    "n_seeds",
    "path_traders",
    "belief_mu",
    "belief_sigma",
    "initial_wealth",
];

impl SimulationPlan {
    pub fn from_kv(kv: &KvMap) -> Result<Self, PipelineError> {
        let known: Vec<&str> = SPEC_KEYS.iter().chain(PLAN_KEYS.iter()).copied().collect();
        kv.reject_unknown(&known)?;
        let spec = TraderPopulationSpec::from_kv(kv)?;
        let n_grid = kv
            .get_list("n_grid")?
            .unwrap_or_else(|| vec![spec.n_traders]);
        Ok(SimulationPlan {
            n_grid,
            n_seeds: kv.get_or("n_seeds", 20)?,
            path_traders: kv.get_or("path_traders", 0)?,
            belief: Belief {
                mu: kv.get_or("belief_mu", 0.10)?,
                sigma: kv.get_or("belief_sigma", 0.20)?,
            },
            initial_wealth: kv.get_or("initial_wealth", 1.0)?,
            spec,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub aggregation: crate::trader_sim::AggregationReport,
    pub convergence: Vec<ConvergenceRow>,
    pub generator: Vec<GeneratorRow>,
    pub paths: Option<PathSimulation>,
}

pub fn simulate(plan: &SimulationPlan, exec: Execution) -> Result<SimulationOutput, PipelineError> {
    let spec = &plan.spec;
    let aggregation = crate::trader_sim::simulate_xi_with(spec, exec)?;
    let reports = convergence_study_with(spec, &plan.n_grid, exec)?;
    let rates = residual_rate_study(spec, &plan.n_grid, plan.n_seeds, exec)?;
    let convergence = reports
        .iter()
        .zip(&rates)
        .map(|(r, q)| ConvergenceRow {
            n_traders: r.n_traders,
            sample_mean_xi: r.sample_mean_xi,
            theory_mean_xi: r.theory_mean_xi,
            abs_mean_error: (r.sample_mean_xi - r.theory_mean_xi).abs(),
            sample_var_xi: r.sample_var_xi,
            theory_var_xi: r.theory_var_xi,
            residual_mean: r.residual_mean,
            residual_sq_mean: r.residual_sq_mean,
            printed_mean_xi: r.printed_mean_xi,
            printed_var_xi: r.printed_var_xi,
            n_seeds: q.n_seeds,
            rms_residual_mean: q.rms_residual_mean,
            rms_mean_error: q.rms_mean_error,
        })
        .collect();
    let generator = generator_path(
        GeneratorParams::from_spec(spec),
        spec.dt_years,
        spec.n_steps,
        spec.seed,
    )
    .into_iter()
    .enumerate()
    .map(|(step, value)| GeneratorRow {
        step,
        time: step as f64 * spec.dt_years,
        value,
    })
    .collect();
    let paths = if plan.path_traders > 0 {
        let path_spec = spec.with_traders(plan.path_traders);
        let beliefs = vec![plan.belief; plan.path_traders];
        Some(simulate_trader_paths_with(
            &path_spec,
            &beliefs,
            plan.initial_wealth,
            exec,
        )?)
    } else {
        None
    };
    Ok(SimulationOutput {
        aggregation,
        convergence,
        generator,
        paths,
    })
}

pub fn write_simulation(
    output: &SimulationOutput,
    dir: &Path,
) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = OutputSet::new(dir)?;
    out.write(
        dir.join("aggregation.csv"),
        std::slice::from_ref(&output.aggregation),
        &[],
    )?;
    out.write(dir.join("convergence.csv"), &output.convergence, &[])?;
    out.write(dir.join("generator.csv"), &output.generator, &[])?;
    if let Some(sim) = &output.paths {
        let rows: Vec<PathRow> = sim
            .paths
            .iter()
            .enumerate()
            .flat_map(|(trader, p)| {
                (0..p.wealth.len()).map(move |step| PathRow {
                    trader,
                    step,
                    time: p.times[step],
                    wealth: p.wealth[step],
                    strategy: p.strategy[step],
                    riskfree_holding: p.riskfree_holding[step],
                    fraction: p.fraction[step],
                })
            })
            .collect();
        out.write(dir.join("paths.csv"), &rows, &[])?;
    }
    Ok(out.written)
}

pub fn run_simulate(
    plan: &SimulationPlan,
    dir: &Path,
    exec: Execution,
) -> Result<SimulationOutput, PipelineError> {
    let output = simulate(plan, exec)?;
    write_simulation(&output, dir)?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, SyntheticSpec};

    fn cfg(window: usize) -> RunConfig {
        let flags = crate::config::ConfigOverrides {
            price_volume_path: Some("unused".into()),
            risk_free_path: Some("unused".into()),
            window: Some(window),
            ..Default::default()
        };
        RunConfig::resolve(None, &flags).unwrap()
    }

    #[test]
    fn analysis_row_counts() {
        let series = generate(&SyntheticSpec {
            n_days: 400,
            ..Default::default()
        });
        let a = analyze_series(&series, &cfg(60), Execution::default()).unwrap();
        assert_eq!(a.metrics.len(), 340);
        assert_eq!(a.tests.len(), 340);
        assert_eq!(a.forecasts.len(), 339);
        assert_eq!(a.segments.len(), METRIC_NAMES.len());
        assert!(a.tests.iter().all(|t| t.ks_p_logprice.is_some()));
    }

    #[test]
    fn segments_partition_dates() {
        let series = generate(&SyntheticSpec {
            n_days: 400,
            ..Default::default()
        });
        let a = analyze_series(&series, &cfg(60), Execution::default()).unwrap();
        let cut = a.metrics[100].date;
        let rows = segment_summary(&a.metrics, &[cut]).unwrap();
        let eta: Vec<&SegmentRow> = rows.iter().filter(|r| r.metric == "eta").collect();
        assert_eq!(eta.len(), 2);
        assert_eq!((eta[0].n, eta[1].n), (100, 240));
        assert_eq!(eta[1].start, cut);
        let before = a.metrics[0].date;
        let rows = segment_summary(&a.metrics, &[before]).unwrap();
        assert_eq!(rows.len(), METRIC_NAMES.len());
        let mean = a.metrics.iter().map(|m| m.mu_gamma).sum::<f64>() / 340.0;
        let whole = rows.iter().find(|r| r.metric == "mu_gamma").unwrap();
        assert!((whole.intercept - mean).abs() < 1e-12);
    }

    #[test]
    fn window_too_large_names_the_constraint() {
        let series = generate(&SyntheticSpec {
            n_days: 100,
            ..Default::default()
        });
        let err = analyze_series(&series, &cfg(200), Execution::default()).unwrap_err();
        assert!(err.to_string().contains("window 200"), "{err}");
        assert!(!err.is_io());
    }

    #[test]
    fn zero_dispersion_simulation_has_zero_residuals() {
        let kv = KvMap::parse(
            "n_traders = 1000\nmu_alpha = 0.5\nsigma_alpha = 0\nmu_gamma = 0.3\nsigma_gamma = 0\nr = 0.02\n\
             dt_years = 0.003968253968253968\nn_steps = 10\nseed = 3\nn_grid = 10, 100, 1000\nn_seeds = 3\n",
        )
        .unwrap();
        let plan = SimulationPlan::from_kv(&kv).unwrap();
        let out = simulate(&plan, Execution::default()).unwrap();
        assert_eq!(out.convergence.len(), 3);
        assert!(out
            .convergence
            .iter()
            .all(|r| r.residual_mean == 0.0 && r.rms_residual_mean == 0.0));
        assert_eq!(out.generator.len(), 11);
        let bad = KvMap::parse("n_traders = 10\nbogus = 1").unwrap();
        assert!(SimulationPlan::from_kv(&bad).is_err());
    }

    #[test]
    fn failed_write_removes_partial_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let series = generate(&SyntheticSpec {
            n_days: 200,
            ..Default::default()
        });
        let a = analyze_series(&series, &cfg(60), Execution::default()).unwrap();
        // a directory where a file should go makes the third write fail
        fs::create_dir(dir.path().join("metrics.csv")).unwrap();
        let err = write_analysis(&a, dir.path()).unwrap_err();
        assert!(err.is_io());
        assert!(!dir.path().join("estimates.csv").exists());
        assert!(!dir.path().join("tests.csv").exists());
    }
}
