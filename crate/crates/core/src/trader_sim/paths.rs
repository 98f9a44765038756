use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{SimError, TraderPopulationSpec};
use crate::exec::Execution;
use crate::rng::{domain, substream};

/// A trader's subjective drift and volatility of the risky asset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Belief {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraderParams {
    pub mu: f64,
    pub sigma: f64,
    /// Risk aversion at the first step.
    pub gamma: f64,
    /// `(μ − r) / (σ (1 − γ))` at the first step.
    pub alpha: f64,
}

/// One closed-loop wealth path. `wealth`, `strategy`, `riskfree_holding`,
/// `fraction` and `times` share a length; `shocks[k]` is the Brownian
/// increment used from step `k` to `k + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraderPath {
    pub times: Vec<f64>,
    pub wealth: Vec<f64>,
    pub strategy: Vec<f64>,
    pub riskfree_holding: Vec<f64>,
    pub fraction: Vec<f64>,
    pub shocks: Vec<f64>,
    pub params: TraderParams,
    /// False when wealth would have become non-positive; the path is
    /// truncated at the last positive value.
    pub feasible: bool,
}

impl TraderPath {
    /// Risky and risk-free P&L over step `k`.
    pub fn pnl(&self, k: usize, r: f64, dt: f64) -> (f64, f64) {
        let risky = self.strategy[k] * (self.params.mu * dt + self.params.sigma * self.shocks[k]);
        let riskless = self.riskfree_holding[k] * r * dt;
        (risky, riskless)
    }

    /// `ln π[k+1] − ln π[k]`; `None` where the strategy is not positive.
    pub fn log_strategy_increments(&self) -> Option<Vec<f64>> {
        if self.strategy.iter().any(|&p| p <= 0.0) {
            return None;
        }
        Some(
            self.strategy
                .windows(2)
                .map(|w| (w[1] / w[0]).ln())
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSimulation {
    pub paths: Vec<TraderPath>,
    /// Number of risk-aversion draws equal to 1 that were redrawn.
    pub resampled: usize,
}

fn draw_gamma(
    spec: &TraderPopulationSpec,
    first_phi: Option<f64>,
    rng: &mut ChaCha8Rng,
    trader: usize,
    resampled: &mut usize,
) -> Result<f64, SimError> {
    let mut phi = first_phi.unwrap_or_else(|| spec.gamma_dist.sample(rng));
    loop {
        let gamma = spec.mu_gamma + spec.sigma_gamma * phi;
        if gamma != 1.0 {
            return Ok(gamma);
        }
        if spec.sigma_gamma == 0.0 {
            return Err(SimError::RiskAversionUnity { trader });
        }
        *resampled += 1;
        phi = spec.gamma_dist.sample(rng);
    }
}

fn merton_fraction(belief: Belief, r: f64, gamma: f64) -> f64 {
    (belief.mu - r) / (belief.sigma * belief.sigma * (1.0 - gamma))
}

fn simulate_one(
    spec: &TraderPopulationSpec,
    belief: Belief,
    x0: f64,
    trader: usize,
) -> Result<(TraderPath, usize), SimError> {
    if !(belief.sigma > 0.0) {
        return Err(SimError::NonPositiveSigma {
            trader,
            sigma: belief.sigma,
        });
    }
    let mut pop = substream(spec.seed, domain::POPULATION, trader as u64);
    let _epsilon = spec.alpha_dist.sample(&mut pop);
    let phi = spec.gamma_dist.sample(&mut pop);
    let mut rng = substream(spec.seed, domain::PATHS, trader as u64);
    let mut resampled = 0;

    let (r, dt, n) = (spec.r, spec.dt_years, spec.n_steps);
    let sqrt_dt = dt.sqrt();
    let mut gamma = draw_gamma(spec, Some(phi), &mut rng, trader, &mut resampled)?;
    let params = TraderParams {
        mu: belief.mu,
        sigma: belief.sigma,
        gamma,
        alpha: (belief.mu - r) / (belief.sigma * (1.0 - gamma)),
    };

    let mut path = TraderPath {
        times: Vec::with_capacity(n + 1),
        wealth: Vec::with_capacity(n + 1),
        strategy: Vec::with_capacity(n + 1),
        riskfree_holding: Vec::with_capacity(n + 1),
        fraction: Vec::with_capacity(n + 1),
        shocks: Vec::with_capacity(n),
        params,
        feasible: true,
    };
    let mut x = x0;
    for k in 0..=n {
        if k > 0 && spec.per_step_redraw {
            gamma = draw_gamma(spec, None, &mut rng, trader, &mut resampled)?;
        }
        let f = merton_fraction(belief, r, gamma);
        let pi = f * x;
        path.times.push(k as f64 * dt);
        path.wealth.push(x);
        path.strategy.push(pi);
        path.riskfree_holding.push(x - pi);
        path.fraction.push(f);
        if k == n {
            break;
        }
        let z: f64 = rng.sample(StandardNormal);
        let dw = sqrt_dt * z;
        let next = x + (r * x + pi * (belief.mu - r)) * dt + pi * belief.sigma * dw;
        if !(next > 0.0) {
            path.feasible = false;
            break;
        }
        path.shocks.push(dw);
        x = next;
    }
    Ok((path, resampled))
}

pub fn simulate_trader_paths(
    spec: &TraderPopulationSpec,
    beliefs: &[Belief],
    initial_wealth: f64,
) -> Result<PathSimulation, SimError> {
    simulate_trader_paths_with(spec, beliefs, initial_wealth, Execution::default())
}

/// Euler–Maruyama integration of each trader's self-financing wealth with
/// the Merton strategy `π = (μ − r) / (σ² (1 − γ)) · x` re-applied at every
/// step. Risk aversions are frozen per trader unless
/// `spec.per_step_redraw` is set.
pub fn simulate_trader_paths_with(
    spec: &TraderPopulationSpec,
    beliefs: &[Belief],
    initial_wealth: f64,
    exec: Execution,
) -> Result<PathSimulation, SimError> {
    spec.validate()?;
    if beliefs.len() != spec.n_traders {
        return Err(SimError::BeliefCount {
            expected: spec.n_traders,
            got: beliefs.len(),
        });
    }
    if !(initial_wealth > 0.0 && initial_wealth.is_finite()) {
        return Err(SimError::InvalidSpec(format!(
            "initial wealth must be positive, got {initial_wealth}"
        )));
    }
    let results = exec.try_map(0..spec.n_traders, |i| {
        simulate_one(spec, beliefs[i], initial_wealth, i)
    })?;
    let resampled = results.iter().map(|(_, c)| c).sum();
    let paths = results.into_iter().map(|(p, _)| p).collect();
    Ok(PathSimulation { paths, resampled })
}

/// Parameters of the aggregate generator process.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub mu_alpha: f64,
    pub sigma_alpha: f64,
    pub mu_gamma: f64,
    pub r: f64,
}

impl GeneratorParams {
    pub fn from_spec(spec: &TraderPopulationSpec) -> Self {
        GeneratorParams {
            mu_alpha: spec.mu_alpha,
            sigma_alpha: spec.sigma_alpha,
            mu_gamma: spec.mu_gamma,
            r: spec.r,
        }
    }

    pub fn variance_rate(&self) -> f64 {
        self.mu_alpha * self.mu_alpha + self.sigma_alpha * self.sigma_alpha
    }

    /// Drift of `ln π̃` per year: `r + (μ_α² + σ_α²)(1/2 − μ_γ)`.
    pub fn log_drift(&self) -> f64 {
        self.r + self.variance_rate() * (0.5 - self.mu_gamma)
    }
}

/// `n_steps` exact log increments of the generator process.
pub fn generator_log_increments(
    params: GeneratorParams,
    dt: f64,
    n_steps: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = substream(seed, domain::GENERATOR, 0);
    let drift = params.log_drift() * dt;
    let vol = (params.variance_rate() * dt).sqrt();
    (0..n_steps)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            drift + vol * z
        })
        .collect()
}

/// Generator path started at 1, `n_steps + 1` values.
pub fn generator_path(params: GeneratorParams, dt: f64, n_steps: usize, seed: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut log_level = 0.0;
    out.push(1.0);
    for inc in generator_log_increments(params, dt, n_steps, seed) {
        log_level += inc;
        out.push(log_level.exp());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::mean;

    fn spec(n: usize) -> TraderPopulationSpec {
        TraderPopulationSpec {
            n_traders: n,
            sigma_gamma: 0.0,
            mu_gamma: 0.0,
            n_steps: 252,
            ..Default::default()
        }
    }

    #[test]
    fn merton_fraction_and_self_financing_hold_each_step() {
        let s = TraderPopulationSpec {
            sigma_gamma: 0.2,
            ..spec(200)
        };
        let beliefs: Vec<Belief> = (0..200)
            .map(|i| Belief {
                mu: 0.05 + 0.0005 * i as f64,
                sigma: 0.15 + 0.001 * i as f64,
            })
            .collect();
        let sim = simulate_trader_paths(&s, &beliefs, 1.0).unwrap();
        for (p, b) in sim.paths.iter().zip(&beliefs) {
            let f = (b.mu - s.r) / (b.sigma * b.sigma * (1.0 - p.params.gamma));
            for k in 0..p.wealth.len() {
                assert!((p.strategy[k] / p.wealth[k] - f).abs() <= 1e-12 * f.abs());
                assert_eq!(p.riskfree_holding[k], p.wealth[k] - p.strategy[k]);
            }
            for k in 0..p.shocks.len() {
                let (a, c) = p.pnl(k, s.r, s.dt_years);
                let dx = p.wealth[k + 1] - p.wealth[k];
                assert!((dx - (a + c)).abs() <= 1e-12 * p.wealth[k].abs().max(dx.abs()));
            }
        }
    }

    #[test]
    fn all_cash_when_mu_equals_r() {
        let s = spec(3);
        let beliefs = vec![
            Belief {
                mu: s.r,
                sigma: 0.2
            };
            3
        ];
        let sim = simulate_trader_paths(&s, &beliefs, 2.0).unwrap();
        for p in &sim.paths {
            assert!(p.strategy.iter().all(|&pi| pi == 0.0));
            let mut x = 2.0;
            for &w in &p.wealth {
                assert!((w - x).abs() < 1e-12);
                x *= 1.0 + s.r * s.dt_years;
            }
        }
    }

    #[test]
    fn large_risk_aversion_means_riskfree_accrual() {
        let s = TraderPopulationSpec {
            mu_gamma: -1e9,
            ..spec(2)
        };
        let sim = simulate_trader_paths(
            &s,
            &[Belief {
                mu: 0.1,
                sigma: 0.2,
            }; 2],
            1.0,
        )
        .unwrap();
        let p = &sim.paths[0];
        assert!(p.fraction[0].abs() < 1e-8);
        let expected = (1.0 + s.r * s.dt_years).powi(252);
        assert!((p.wealth[252] / expected - 1.0).abs() < 1e-6);
    }

    #[test]
    fn log_strategy_drift_matches_alpha_form() {
        let s = spec(10_000);
        let sim = simulate_trader_paths(
            &s,
            &vec![
                Belief {
                    mu: 0.10,
                    sigma: 0.2
                };
                10_000
            ],
            1.0,
        )
        .unwrap();
        assert!((sim.paths[0].params.alpha - 0.4).abs() < 1e-12);
        let incs: Vec<f64> = sim
            .paths
            .iter()
            .flat_map(|p| p.log_strategy_increments().unwrap())
            .collect();
        let m = mean(&incs);
        let sd = crate::exec::sample_variance(&incs).sqrt();
        let se = sd / (incs.len() as f64).sqrt();
        assert!(
            (m - 0.10 * s.dt_years).abs() < 3.0 * se,
            "{m} vs {}",
            0.10 * s.dt_years
        );
    }

    #[test]
    fn unity_risk_aversion() {
        let s = TraderPopulationSpec {
            mu_gamma: 1.0,
            ..spec(1)
        };
        let err = simulate_trader_paths(
            &s,
            &[Belief {
                mu: 0.1,
                sigma: 0.2,
            }],
            1.0,
        )
        .unwrap_err();
        assert_eq!(err, SimError::RiskAversionUnity { trader: 0 });
        let err = simulate_trader_paths(
            &spec(1),
            &[Belief {
                mu: 0.1,
                sigma: 0.0,
            }],
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::NonPositiveSigma { trader: 0, .. }));
        assert!(matches!(
            simulate_trader_paths(
                &spec(2),
                &[Belief {
                    mu: 0.1,
                    sigma: 0.2
                }],
                1.0
            ),
            Err(SimError::BeliefCount {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn infeasible_path_is_truncated() {
        // extreme leverage makes negative wealth likely within a few steps
        let s = TraderPopulationSpec {
            mu_gamma: 0.999,
            n_steps: 500,
            ..spec(20)
        };
        let sim = simulate_trader_paths(
            &s,
            &[Belief {
                mu: 0.5,
                sigma: 0.1,
            }; 20],
            1.0,
        )
        .unwrap();
        let bad: Vec<_> = sim.paths.iter().filter(|p| !p.feasible).collect();
        assert!(!bad.is_empty());
        for p in bad {
            assert!(p.wealth.iter().all(|&w| w > 0.0));
            assert_eq!(p.shocks.len() + 1, p.wealth.len());
        }
    }

    #[test]
    fn per_step_redraw_changes_fraction() {
        let s = TraderPopulationSpec {
            sigma_gamma: 0.1,
            per_step_redraw: true,
            n_steps: 10,
            ..spec(1)
        };
        let sim = simulate_trader_paths(
            &s,
            &[Belief {
                mu: 0.1,
                sigma: 0.2,
            }],
            1.0,
        )
        .unwrap();
        let f = &sim.paths[0].fraction;
        assert!(f.windows(2).all(|w| w[0] != w[1]));
        let frozen = TraderPopulationSpec {
            per_step_redraw: false,
            ..s
        };
        let sim = simulate_trader_paths(
            &frozen,
            &[Belief {
                mu: 0.1,
                sigma: 0.2,
            }],
            1.0,
        )
        .unwrap();
        assert!(sim.paths[0].fraction.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn paths_independent_of_execution() {
        let s = TraderPopulationSpec {
            sigma_gamma: 0.1,
            ..spec(64)
        };
        let b = vec![
            Belief {
                mu: 0.08,
                sigma: 0.25
            };
            64
        ];
        assert_eq!(
            simulate_trader_paths_with(&s, &b, 1.0, Execution::Sequential).unwrap(),
            simulate_trader_paths_with(&s, &b, 1.0, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn generator_special_cases() {
        let flat = GeneratorParams {
            mu_alpha: 0.0,
            sigma_alpha: 0.0,
            mu_gamma: 0.3,
            r: 0.02,
        };
        let dt = 1.0 / 252.0;
        for (k, v) in generator_path(flat, dt, 252, 4).iter().enumerate() {
            assert!((v - (0.02 * k as f64 * dt).exp()).abs() < 1e-12);
        }
        let unit = GeneratorParams {
            mu_alpha: 0.3,
            sigma_alpha: 0.4,
            mu_gamma: 1.0,
            r: 0.02,
        };
        assert!((unit.log_drift() - (0.02 - 0.25 / 2.0)).abs() < 1e-15);
        assert!(generator_path(unit, dt, 1000, 1).iter().all(|&v| v > 0.0));
    }

    #[test]
    fn generator_ensemble_mean() {
        let p = GeneratorParams {
            mu_alpha: 0.5,
            sigma_alpha: 0.1,
            mu_gamma: 0.2,
            r: 0.02,
        };
        let dt = 1.0 / 252.0;
        let incs: Vec<f64> = (0..100_000u64)
            .map(|seed| generator_log_increments(p, dt, 1, seed)[0])
            .collect();
        let se = (p.variance_rate() * dt / incs.len() as f64).sqrt();
        assert!((mean(&incs) - p.log_drift() * dt).abs() < 3.0 * se);
    }
}
