use serde::{Deserialize, Serialize};

use super::{SimError, TraderPopulationSpec};
use crate::exec::{CompensatedSum, Execution};
use crate::rng::{child_seed, domain, substream};
use rand::Rng;
use rand_distr::StandardNormal;

/// Sample versus large-population moments of `ξ` for one population size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationReport {
    pub n_traders: usize,
    pub sample_mean_xi: f64,
    pub sample_var_xi: f64,
    pub theory_mean_xi: f64,
    pub theory_var_xi: f64,
    pub residual_mean: f64,
    pub residual_sq_mean: f64,
    /// Theory moments with `(μ_α + σ_α)²`, for comparison.
    pub printed_mean_xi: f64,
    pub printed_var_xi: f64,
}

/// Per-trader draw and its log-strategy increment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiSample {
    pub epsilon: f64,
    pub phi: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub d_w: f64,
    pub xi: f64,
    pub residual: f64,
}

fn standardized_draws(spec: &TraderPopulationSpec, trader: usize) -> (f64, f64) {
    let mut rng = substream(spec.seed, domain::POPULATION, trader as u64);
    let epsilon = spec.alpha_dist.sample(&mut rng);
    let phi = spec.gamma_dist.sample(&mut rng);
    (epsilon, phi)
}

/// `(α_i, γ_i)` for every trader; deterministic in the seed.
pub fn sample_population(spec: &TraderPopulationSpec) -> Result<Vec<(f64, f64)>, SimError> {
    spec.validate()?;
    Ok(Execution::default().map(0..spec.n_traders, |i| {
        let (e, p) = standardized_draws(spec, i);
        (
            spec.mu_alpha + spec.sigma_alpha * e,
            spec.mu_gamma + spec.sigma_gamma * p,
        )
    }))
}

fn xi_sample(spec: &TraderPopulationSpec, trader: usize) -> XiSample {
    let (epsilon, phi) = standardized_draws(spec, trader);
    let mut rng = substream(spec.seed, domain::SHOCKS, trader as u64);
    let z: f64 = rng.sample(StandardNormal);
    let dt = spec.dt_years;
    let d_w = dt.sqrt() * z;
    let (ma, sa, mg, sg) = (
        spec.mu_alpha,
        spec.sigma_alpha,
        spec.mu_gamma,
        spec.sigma_gamma,
    );
    let alpha = ma + sa * epsilon;
    let gamma = mg + sg * phi;
    let xi = (spec.r + alpha * alpha * (0.5 - gamma)) * dt + alpha * d_w;
    // residual as written in the aggregation argument; it omits the term
    // −σ_γ σ_α² φ (ε² − 1) Δt of the exact expansion
    let residual = 2.0 * ma * sa * epsilon * (0.5 - mg) * dt
        - sg * phi * (ma * ma + sa * sa + 2.0 * ma * sa * epsilon) * dt
        + sa * sa * (epsilon * epsilon - 1.0) * (0.5 - mg) * dt;
    XiSample {
        epsilon,
        phi,
        alpha,
        gamma,
        d_w,
        xi,
        residual,
    }
}

/// Per-trader samples in trader order.
pub fn xi_samples(spec: &TraderPopulationSpec, exec: Execution) -> Result<Vec<XiSample>, SimError> {
    spec.validate()?;
    Ok(exec.map(0..spec.n_traders, |i| xi_sample(spec, i)))
}

fn report_from(spec: &TraderPopulationSpec, samples: &[XiSample]) -> AggregationReport {
    let n = samples.len() as f64;
    let mean = samples
        .iter()
        .map(|s| s.xi)
        .collect::<CompensatedSum>()
        .value()
        / n;
    let var = samples
        .iter()
        .map(|s| (s.xi - mean).powi(2))
        .collect::<CompensatedSum>()
        .value()
        / n;
    let residual_mean = samples
        .iter()
        .map(|s| s.residual)
        .collect::<CompensatedSum>()
        .value()
        / n;
    let residual_sq_mean = samples
        .iter()
        .map(|s| s.residual * s.residual)
        .collect::<CompensatedSum>()
        .value()
        / n;
    let (theory_mean_xi, theory_var_xi) = spec.theory_moments();
    let (printed_mean_xi, printed_var_xi) = spec.printed_form_moments();
    AggregationReport {
        n_traders: samples.len(),
        sample_mean_xi: mean,
        sample_var_xi: var,
        theory_mean_xi,
        theory_var_xi,
        residual_mean,
        residual_sq_mean,
        printed_mean_xi,
        printed_var_xi,
    }
}

pub fn simulate_xi(spec: &TraderPopulationSpec) -> Result<AggregationReport, SimError> {
    simulate_xi_with(spec, Execution::default())
}

/// Draws one cross-section of `ξ_i` and compares its moments with the
/// generator-process moments. The sample variance is the second sample
/// moment minus the squared sample mean.
pub fn simulate_xi_with(
    spec: &TraderPopulationSpec,
    exec: Execution,
) -> Result<AggregationReport, SimError> {
    let samples = xi_samples(spec, exec)?;
    Ok(report_from(spec, &samples))
}

fn check_grid(n_grid: &[usize]) -> Result<(), SimError> {
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SimError::NotAscending);
    }
    Ok(())
}

pub fn convergence_study(
    spec: &TraderPopulationSpec,
    n_grid: &[usize],
) -> Result<Vec<AggregationReport>, SimError> {
    convergence_study_with(spec, n_grid, Execution::default())
}

/// One report per population size. The populations are nested: the first
/// `N` traders of a larger population are the population of size `N`.
pub fn convergence_study_with(
    spec: &TraderPopulationSpec,
    n_grid: &[usize],
    exec: Execution,
) -> Result<Vec<AggregationReport>, SimError> {
    check_grid(n_grid)?;
    let largest = *n_grid.last().unwrap();
    let samples = xi_samples(&spec.with_traders(largest), exec)?;
    Ok(n_grid
        .iter()
        .map(|&n| report_from(&spec.with_traders(n), &samples[..n]))
        .collect())
}

/// Root-mean-square statistics across repeated seeds for one population
/// size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub n_traders: usize,
    pub n_seeds: usize,
    pub rms_residual_mean: f64,
    pub rms_mean_error: f64,
    pub mean_residual_sq: f64,
}

/// Repeats the convergence study over `n_seeds` child seeds of
/// `spec.seed` and reports RMS errors per population size.
pub fn residual_rate_study(
    spec: &TraderPopulationSpec,
    n_grid: &[usize],
    n_seeds: usize,
    exec: Execution,
) -> Result<Vec<RateRow>, SimError> {
    check_grid(n_grid)?;
    if n_seeds == 0 {
        return Err(SimError::InvalidSpec("n_seeds must be at least 1".into()));
    }
    let per_seed: Vec<Vec<AggregationReport>> = (0..n_seeds)
        .map(|k| {
            convergence_study_with(
                &spec.with_seed(child_seed(spec.seed, k as u64)),
                n_grid,
                exec,
            )
        })
        .collect::<Result<_, _>>()?;
    Ok(n_grid
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let reports = per_seed.iter().map(|r| r[j]);
            let ms = |f: &dyn Fn(&AggregationReport) -> f64| {
                reports
                    .clone()
                    .map(|r| f(&r))
                    .collect::<CompensatedSum>()
                    .value()
                    / n_seeds as f64
            };
            RateRow {
                n_traders: n,
                n_seeds,
                rms_residual_mean: ms(&|r| r.residual_mean.powi(2)).sqrt(),
                rms_mean_error: ms(&|r| (r.sample_mean_xi - r.theory_mean_xi).powi(2)).sqrt(),
                mean_residual_sq: ms(&|r| r.residual_sq_mean),
            }
        })
        .collect())
}

/// `(dt, residual_sq_mean)` at a fixed population size for each `dt`.
pub fn residual_sq_by_dt(
    spec: &TraderPopulationSpec,
    dt_grid: &[f64],
    exec: Execution,
) -> Result<Vec<(f64, f64)>, SimError> {
    dt_grid
        .iter()
        .map(|&dt| {
            let s = TraderPopulationSpec {
                dt_years: dt,
                ..spec.clone()
            };
            simulate_xi_with(&s, exec).map(|r| (dt, r.residual_sq_mean))
        })
        .collect()
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
