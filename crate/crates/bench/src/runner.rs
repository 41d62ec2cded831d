use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use apesmc::filters::{run_filter_steps, ApeConfig, FilterKind, FilterRunner, InitConfig, NoiseSelection};
use apesmc::imm::{build_model_bank, imm_step, BankSpec, GaussianBelief, ImmModelBank, ImmState, SigmaParams};
use apesmc::scenario::{simulate, GroundTruth, ScenarioConfig};
use apesmc::{Error as CoreError, RngStream};
use rayon::prelude::*;

use crate::metrics::{aggregate, MetricSeries, RunRecord, StepRecord};
use crate::BenchError;

/// Position error that counts towards a collapse, m.
pub const COLLAPSE_DISTANCE: f64 = 5_000.0;
/// Consecutive steps beyond [`COLLAPSE_DISTANCE`] that flag a collapse.
pub const COLLAPSE_STREAK: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterChoice {
    Ape,
    Lw,
    Pl,
    /// Auxiliary particle filter given the true parameters.
    Apf,
    Imm20,
    Imm60,
    Imm45,
    /// IMM over the bank in [`RunSpec::custom_bank`].
    Custom,
}

impl FilterChoice {
    pub fn name(self) -> &'static str {
        match self {
            FilterChoice::Ape => "ape",
            FilterChoice::Lw => "lw",
            FilterChoice::Pl => "pl",
            FilterChoice::Apf => "apf",
            FilterChoice::Imm20 => "imm20",
            FilterChoice::Imm60 => "imm60",
            FilterChoice::Imm45 => "imm45",
            FilterChoice::Custom => "custom",
        }
    }

    pub fn is_imm(self) -> bool {
        matches!(self, FilterChoice::Imm20 | FilterChoice::Imm60 | FilterChoice::Imm45 | FilterChoice::Custom)
    }
}

impl fmt::Display for FilterChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterChoice {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "ape" => FilterChoice::Ape,
            "lw" => FilterChoice::Lw,
            "pl" => FilterChoice::Pl,
            "apf" => FilterChoice::Apf,
            "imm20" => FilterChoice::Imm20,
            "imm60" => FilterChoice::Imm60,
            "imm45" => FilterChoice::Imm45,
            "custom" => FilterChoice::Custom,
            other => return Err(BenchError::Config(format!("unknown filter '{other}'"))),
        })
    }
}

/// Everything one Monte Carlo experiment needs.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub filter: FilterChoice,
    pub n_particles: usize,
    pub n_runs: usize,
    /// Run `r` uses seed `base_seed + r`.
    pub base_seed: u64,
    pub beta: f64,
    pub h2: f64,
    /// Noise variances the particle filters learn. `None` picks the
    /// filter's default: nothing for ape and lw, everything for pl.
    pub learned: Option<NoiseSelection>,
    pub scenario: ScenarioConfig<f64>,
    pub custom_bank: Option<ImmModelBank<f64>>,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
}

impl RunSpec {
    pub fn new(filter: FilterChoice, scenario: ScenarioConfig<f64>) -> Self {
        Self {
            filter,
            n_particles: 5000,
            n_runs: 100,
            base_seed: 0,
            beta: 0.05,
            h2: 0.01,
            learned: None,
            scenario,
            custom_bank: None,
            threads: threads_from_env(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n_runs == 0 {
            return Err(BenchError::Config("runs must be at least 1".into()));
        }
        if self.n_particles == 0 {
            return Err(BenchError::Config("particles must be at least 1".into()));
        }
        if self.filter == FilterChoice::Custom && self.custom_bank.is_none() {
            return Err(BenchError::Config("filter 'custom' needs a bank file".into()));
        }
        self.scenario.validate().map_err(config_error)?;
        if matches!(self.filter, FilterChoice::Ape | FilterChoice::Lw) {
            self.ape_config()?;
        }
        Ok(())
    }

    pub fn learned(&self) -> NoiseSelection {
        self.learned.unwrap_or(match self.filter {
            FilterChoice::Pl => NoiseSelection::ALL,
            _ => NoiseSelection::NONE,
        })
    }

    fn omega_prior(&self) -> (f64, f64) {
        let lim = 20f64.to_radians();
        (-lim, lim)
    }

    pub fn ape_config(&self) -> Result<ApeConfig<f64>, BenchError> {
        ApeConfig::new(self.beta, self.h2, self.n_particles, self.omega_prior(), self.scenario.s0)
            .map(|c| c.with_learned(self.learned()))
            .map_err(config_error)
    }

    fn init_config(&self) -> InitConfig<f64> {
        InitConfig {
            n_particles: self.n_particles,
            state_mean: self.scenario.initial_state,
            state_cov: self.scenario.init_state_prior_cov,
            omega_prior: self.omega_prior(),
            prior_stats: self.scenario.s0,
            learned: self.learned(),
            known: self.scenario.true_noise(),
        }
    }

    fn bank(&self) -> Result<Option<ImmModelBank<f64>>, BenchError> {
        let grid = |count| BankSpec::TurnGrid {
            count,
            sigma_r2: self.scenario.sigma_r2_true,
            sigma_b2: self.scenario.sigma_b2_true,
        };
        let spec = match self.filter {
            FilterChoice::Imm20 => grid(20),
            FilterChoice::Imm60 => grid(60),
            FilterChoice::Imm45 => BankSpec::FullGrid,
            FilterChoice::Custom => return Ok(self.custom_bank.clone()),
            _ => return Ok(None),
        };
        build_model_bank(&spec).map(Some).map_err(config_error)
    }
}

/// `APE_THREADS`, or 0 (automatic) when unset or unparsable.
pub fn threads_from_env() -> usize {
    std::env::var("APE_THREADS").ok().and_then(|v| v.trim().parse().ok()).unwrap_or(0)
}

fn config_error(e: CoreError) -> BenchError {
    match e.root() {
        CoreError::InvalidConfig(m) => BenchError::Config(m.clone()),
        _ => BenchError::Core(e),
    }
}

/// Tracks consecutive large position errors.
#[derive(Debug, Default)]
struct CollapseMonitor {
    streak: usize,
    onset: Option<usize>,
}

impl CollapseMonitor {
    fn observe(&mut self, t: usize, err: f64) {
        if self.onset.is_some() {
            return;
        }
        if err > COLLAPSE_DISTANCE || !err.is_finite() {
            self.streak += 1;
            if self.streak >= COLLAPSE_STREAK {
                self.onset = Some(t + 1 - COLLAPSE_STREAK);
            }
        } else {
            self.streak = 0;
        }
    }
}

fn finish(
    run: usize,
    spec: &RunSpec,
    mut steps: Vec<StepRecord>,
    monitor: CollapseMonitor,
    failure: Option<(usize, CoreError)>,
) -> RunRecord {
    let (collapse_step, error) = match (monitor.onset, failure) {
        (Some(t), f) => (Some(t), f.map(|(_, e)| e.to_string())),
        (None, Some((t, e))) => (Some(t), Some(e.to_string())),
        (None, None) => (None, None),
    };
    if let Some(onset) = collapse_step {
        for s in steps.iter_mut().filter(|s| s.t >= onset) {
            s.collapsed = true;
        }
    }
    RunRecord { run, filter: spec.filter.name().to_string(), steps, collapse_step, error }
}

fn record(t: usize, truth: &GroundTruth<f64>, est: [f64; 6]) -> StepRecord {
    let x = truth.states[t - 1];
    StepRecord {
        t,
        x_true: x.x,
        y_true: x.y,
        x_est: est[0],
        y_est: est[1],
        omega_true: truth.omegas[t - 1],
        omega_est: est[2],
        eta2_est: est[3],
        sigma_r2_est: est[4],
        sigma_b2_est: est[5],
        collapsed: false,
    }
}

/// Simulates run `run` and filters it.
pub fn run_single(spec: &RunSpec, run: usize) -> Result<RunRecord, BenchError> {
    let seed = spec.base_seed.wrapping_add(run as u64);
    let truth = simulate(&spec.scenario, &mut RngStream::new(seed, 0)).map_err(config_error)?;
    let mut rng = RngStream::new(seed, 1);
    let model = spec.scenario.model();
    let mut monitor = CollapseMonitor::default();
    let mut steps = Vec::with_capacity(truth.observations.len());

    if let Some(bank) = spec.bank()? {
        let prior = GaussianBelief::new(spec.scenario.initial_state, spec.scenario.init_state_prior_cov);
        let mut state = ImmState::uniform(prior, bank.len());
        let sigma = SigmaParams::default();
        for (i, y) in truth.observations.iter().enumerate() {
            let t = i + 1;
            match imm_step(&state, &bank, y, &model, &sigma) {
                Ok(out) => {
                    let p = |f: fn(&apesmc::ParamVector<f64>) -> f64| -> f64 {
                        out.state.probs.iter().zip(&bank.modes).map(|(w, m)| w * f(m)).sum()
                    };
                    let est =
                        [out.fused.mean.x, out.fused.mean.y, p(|m| m.omega), p(|m| m.eta2), p(|m| m.sigma_r2), p(|m| m.sigma_b2)];
                    let rec = record(t, &truth, est);
                    monitor.observe(t, rec.squared_position_error().sqrt());
                    steps.push(rec);
                    state = out.state;
                }
                Err(e) => return Ok(finish(run, spec, steps, monitor, Some((t, e)))),
            }
        }
        return Ok(finish(run, spec, steps, monitor, None));
    }

    let kind = match spec.filter {
        FilterChoice::Ape => FilterKind::Ape(spec.ape_config()?),
        FilterChoice::Lw => FilterKind::Lw(spec.ape_config()?),
        FilterChoice::Pl => FilterKind::Pl { learned: spec.learned() },
        FilterChoice::Apf => FilterKind::Apf { params: truth.true_params(&spec.scenario) },
        _ => unreachable!("IMM handled above"),
    };
    let mut runner = FilterRunner::new(kind, model, &spec.init_config(), &mut rng).map_err(config_error)?;
    let failure = run_filter_steps(&mut runner, &truth.observations, &mut rng, |t, est| {
        let rec = record(
            t,
            &truth,
            [est.state.x, est.state.y, est.params.omega, est.params.eta2, est.params.sigma_r2, est.params.sigma_b2],
        );
        monitor.observe(t, rec.squared_position_error().sqrt());
        steps.push(rec);
    });
    let failure = failure.err().map(|e| match e {
        CoreError::AtStep { step, source } => (step, *source),
        other => (steps.len() + 1, other),
    });
    Ok(finish(run, spec, steps, monitor, failure))
}

/// Result of [`run_monte_carlo`].
#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub runs: Vec<RunRecord>,
    pub metrics: MetricSeries,
    pub elapsed: Duration,
}

impl MonteCarloResult {
    /// True when every run collapsed.
    pub fn all_collapsed(&self) -> bool {
        self.runs.iter().all(RunRecord::collapsed)
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, BenchError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))
}

/// Runs `spec.n_runs` independent simulations and filter passes.
///
/// Runs execute in parallel, but records come back in run order and each
/// run owns its random streams, so the output does not depend on the
/// thread count.
pub fn run_monte_carlo(spec: &RunSpec) -> Result<MonteCarloResult, BenchError> {
    spec.validate()?;
    let start = Instant::now();
    let runs = pool(spec.threads)?
        .install(|| (0..spec.n_runs).into_par_iter().map(|r| run_single(spec, r)).collect::<Result<Vec<_>, _>>())?;
    let metrics = aggregate(&runs, spec.scenario.horizon)?;
    Ok(MonteCarloResult { runs, metrics, elapsed: start.elapsed() })
}

/// Turn-rate and position RMSE series of the APE filter for each `beta`.
pub fn beta_sweep(spec: &RunSpec, betas: &[f64]) -> Result<Vec<(f64, MetricSeries)>, BenchError> {
    if betas.is_empty() {
        return Err(BenchError::Config("beta list is empty".into()));
    }
    betas
        .iter()
        .map(|&beta| {
            let s = RunSpec { filter: FilterChoice::Ape, beta, ..spec.clone() };
            run_monte_carlo(&s).map(|r| (beta, r.metrics))
        })
        .collect()
}
