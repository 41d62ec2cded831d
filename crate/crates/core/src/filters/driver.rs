use crate::error::{Error, Result};
use crate::filters::{ape_step, apf_step, lw_step, pl_step, sample_selected, ApeConfig, FilterStepResult, NoiseSelection};
use crate::linalg::{cholesky_jittered, mat_vec, Matrix};
use crate::particle::{ParamVector, Particle, ParticleCloud, StateVector, SuffStats};
use crate::scalar::Scalar;
use crate::stochastics::{sample_uniform, RngStream};
use crate::tracking::{Observation, TrackingModel};

/// Which filter [`run_filter`] drives.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterKind<T> {
    /// Auxiliary particle filter given the true parameters of every step
    /// (`params[t - 1]` at step `t`).
    Apf { params: Vec<ParamVector<T>> },
    /// Liu–West on a static turn rate.
    Lw(ApeConfig<T>),
    /// Particle learning of the selected variances; turn rates stay at
    /// their initial draws.
    Pl { learned: NoiseSelection },
    /// Adaptive parameter estimation.
    Ape(ApeConfig<T>),
}

impl<T> FilterKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            FilterKind::Apf { .. } => "apf",
            FilterKind::Lw(_) => "lw",
            FilterKind::Pl { .. } => "pl",
            FilterKind::Ape(_) => "ape",
        }
    }
}

/// Prior used to build the initial cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct InitConfig<T> {
    pub n_particles: usize,
    pub state_mean: StateVector<T>,
    pub state_cov: Matrix<T, 4, 4>,
    /// Uniform support of the initial turn rate, rad/s.
    pub omega_prior: (T, T),
    pub prior_stats: SuffStats<T>,
    /// Variances drawn from `prior_stats`; the rest are taken from `known`.
    pub learned: NoiseSelection,
    pub known: ParamVector<T>,
}

/// Per-step output of [`run_filter`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEstimate<T> {
    pub state: StateVector<T>,
    pub params: ParamVector<T>,
    pub changepoint_mass: Option<T>,
    pub ess: T,
}

impl<T: Scalar> From<&FilterStepResult<T>> for StepEstimate<T> {
    fn from(r: &FilterStepResult<T>) -> Self {
        Self {
            state: r.state_estimate,
            params: r.param_estimate,
            changepoint_mass: r.changepoint_mass,
            ess: r.cloud.ess(),
        }
    }
}

/// Draws the initial equally weighted cloud.
pub fn initial_cloud<T: Scalar>(init: &InitConfig<T>, rng: &mut RngStream) -> Result<ParticleCloud<T>> {
    if init.n_particles == 0 {
        return Err(Error::InvalidConfig("n_particles must be at least 1".into()));
    }
    init.prior_stats.validate()?;
    let chol = cholesky_jittered(&init.state_cov, T::lit(1e-9))?;
    let (lo, hi) = init.omega_prior;
    let mut particles = Vec::with_capacity(init.n_particles);
    for _ in 0..init.n_particles {
        let z = [T::std_normal(rng), T::std_normal(rng), T::std_normal(rng), T::std_normal(rng)];
        let state = init.state_mean + StateVector::from_array(mat_vec(&chol, &z));
        let base = ParamVector { omega: sample_uniform(lo, hi, rng)?, ..init.known };
        let params = sample_selected(&base, &init.prior_stats, init.learned, rng)?;
        particles.push(Particle { state, params, stats: init.prior_stats });
    }
    ParticleCloud::uniform(particles)
}

/// Stepwise driver holding the current cloud.
#[derive(Debug, Clone)]
pub struct FilterRunner<T> {
    kind: FilterKind<T>,
    model: TrackingModel<T>,
    cloud: ParticleCloud<T>,
    steps: usize,
}

impl<T: Scalar> FilterRunner<T> {
    pub fn new(kind: FilterKind<T>, model: TrackingModel<T>, init: &InitConfig<T>, rng: &mut RngStream) -> Result<Self> {
        match &kind {
            FilterKind::Lw(cfg) | FilterKind::Ape(cfg) => cfg.validate()?,
            FilterKind::Apf { params } => params.iter().try_for_each(|p| p.validate())?,
            FilterKind::Pl { .. } => {}
        }
        let cloud = initial_cloud(init, rng)?;
        Ok(Self { kind, model, cloud, steps: 0 })
    }

    pub fn cloud(&self) -> &ParticleCloud<T> {
        &self.cloud
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Advances one step. Errors carry the 1-based step index.
    pub fn step(&mut self, y: &Observation<T>, rng: &mut RngStream) -> Result<FilterStepResult<T>> {
        let t = self.steps + 1;
        let out = match &self.kind {
            FilterKind::Apf { params } => match params.get(t - 1) {
                Some(p) => apf_step(&self.cloud, y, p, &self.model, rng),
                None => Err(Error::Contract(format!("no known parameters for step {t} ({} supplied)", params.len()))),
            },
            FilterKind::Lw(cfg) => lw_step(&self.cloud, y, cfg, &self.model, rng),
            FilterKind::Pl { learned } => pl_step(&self.cloud, y, *learned, &self.model, rng),
            FilterKind::Ape(cfg) => ape_step(&self.cloud, y, cfg, &self.model, rng),
        }
        .map_err(|e| Error::AtStep { step: t, source: Box::new(e) })?;
        self.cloud = out.cloud.clone();
        self.steps = t;
        Ok(out)
    }
}

/// Runs a filter over a whole observation sequence.
///
/// Clouds are dropped after each step; use [`FilterRunner`] to inspect
/// them.
pub fn run_filter<T: Scalar>(
    kind: FilterKind<T>,
    model: TrackingModel<T>,
    observations: &[Observation<T>],
    init: &InitConfig<T>,
    rng: &mut RngStream,
) -> Result<Vec<StepEstimate<T>>> {
    if observations.is_empty() {
        return Err(Error::Contract("observation sequence is empty".into()));
    }
    let mut runner = FilterRunner::new(kind, model, init, rng)?;
    let mut out = Vec::with_capacity(observations.len());
    run_filter_steps(&mut runner, observations, rng, |_, e| out.push(e))?;
    Ok(out)
}

/// Feeds `observations` to `runner`, handing each step's estimate to
/// `sink` together with its 1-based step index. Stops at the first error;
/// estimates of earlier steps have already been delivered.
pub fn run_filter_steps<T: Scalar>(
    runner: &mut FilterRunner<T>,
    observations: &[Observation<T>],
    rng: &mut RngStream,
    mut sink: impl FnMut(usize, StepEstimate<T>),
) -> Result<()> {
    for y in observations {
        let r = runner.step(y, rng)?;
        sink(runner.steps_taken(), StepEstimate::from(&r));
    }
    Ok(())
}
