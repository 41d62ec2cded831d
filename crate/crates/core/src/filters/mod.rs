//! Particle filters: auxiliary particle filter with known parameters,
//! Liu–West kernel shrinkage, particle learning, and the adaptive
//! parameter estimation (APE) filter that combines them under a
//! changepoint prior.
//!
//! Every step is resample-propagate. Pre-weights use the predictive
//! likelihood at the noiseless one-step prediction and the final weights
//! divide it back out.

mod apf;
mod ape;
mod driver;
mod learning;
mod liu_west;

pub use apf::apf_step;
pub use ape::ape_step;
pub use driver::{initial_cloud, run_filter, run_filter_steps, FilterKind, FilterRunner, InitConfig, StepEstimate};
pub use learning::pl_step;
pub use liu_west::{liu_west_kernel, lw_step, LiuWestKernel};

use crate::error::{Error, Result};
use crate::particle::{weighted_param_mean, weighted_state_mean, ParamVector, ParticleCloud, StateVector, SuffStats};
use crate::scalar::Scalar;
use crate::stochastics::RngStream;
use crate::tracking::sample_params_from_suffstats;

/// Which of the noise variances are unknown and learned through their
/// sufficient statistics. Variances not selected keep the value carried by
/// each particle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NoiseSelection {
    pub eta2: bool,
    pub sigma_r2: bool,
    pub sigma_b2: bool,
}

impl NoiseSelection {
    pub const NONE: Self = Self { eta2: false, sigma_r2: false, sigma_b2: false };
    pub const ALL: Self = Self { eta2: true, sigma_r2: true, sigma_b2: true };
    pub const ETA2: Self = Self { eta2: true, sigma_r2: false, sigma_b2: false };

    pub fn any(&self) -> bool {
        self.eta2 || self.sigma_r2 || self.sigma_b2
    }
}

/// Configuration of the kernel and changepoint machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApeConfig<T> {
    /// Prior changepoint probability per step.
    pub beta: T,
    /// Kernel smoothing parameter `h^2`.
    pub h2: T,
    pub n_particles: usize,
    /// Support of the uniform turn-rate prior in rad/s.
    pub omega_prior: (T, T),
    /// Noise variances learned through sufficient statistics.
    pub learned: NoiseSelection,
    /// Learned variances treated as piecewise constant: on a changepoint
    /// their statistics reset to `prior_stats` and the new value is drawn
    /// from that prior.
    pub reset_on_change: NoiseSelection,
    /// Initial sufficient statistics `s_0`.
    pub prior_stats: SuffStats<T>,
}

impl<T: Scalar> ApeConfig<T> {
    pub fn new(beta: T, h2: T, n_particles: usize, omega_prior: (T, T), prior_stats: SuffStats<T>) -> Result<Self> {
        let cfg = Self {
            beta,
            h2,
            n_particles,
            omega_prior,
            learned: NoiseSelection::NONE,
            reset_on_change: NoiseSelection::NONE,
            prior_stats,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_learned(mut self, learned: NoiseSelection) -> Self {
        self.learned = learned;
        self
    }

    pub fn with_reset_on_change(mut self, reset: NoiseSelection) -> Self {
        self.reset_on_change = reset;
        self
    }

    /// Shrinkage factor `a = sqrt(1 - h^2)`.
    pub fn a_shrink(&self) -> T {
        (T::one() - self.h2).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero() && self.beta < T::one()) {
            return Err(Error::InvalidConfig(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        if !(self.h2 > T::zero() && self.h2 < T::one()) {
            return Err(Error::InvalidConfig(format!("h2 must lie in (0, 1), got {}", self.h2)));
        }
        if self.n_particles == 0 {
            return Err(Error::InvalidConfig("n_particles must be at least 1".into()));
        }
        let (lo, hi) = self.omega_prior;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("empty turn-rate prior [{lo}, {hi})")));
        }
        self.prior_stats.validate().map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// Output of one filter step.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterStepResult<T> {
    pub cloud: ParticleCloud<T>,
    /// Weighted mean of the cloud's states.
    pub state_estimate: StateVector<T>,
    /// Weighted mean of the cloud's parameters.
    pub param_estimate: ParamVector<T>,
    /// Fraction of resampled particles that came from the changepoint
    /// branch. APE only.
    pub changepoint_mass: Option<T>,
}

impl<T: Scalar> FilterStepResult<T> {
    pub(crate) fn from_cloud(cloud: ParticleCloud<T>, changepoint_mass: Option<T>) -> Self {
        Self {
            state_estimate: weighted_state_mean(&cloud),
            param_estimate: weighted_param_mean(&cloud),
            cloud,
            changepoint_mass,
        }
    }
}

/// Replaces the selected variances of `base` with a draw from `p(.|stats)`.
pub(crate) fn sample_selected<T: Scalar>(
    base: &ParamVector<T>,
    stats: &SuffStats<T>,
    which: NoiseSelection,
    rng: &mut RngStream,
) -> Result<ParamVector<T>> {
    if !which.any() {
        return Ok(*base);
    }
    let (eta2, sigma_r2, sigma_b2) = sample_params_from_suffstats(stats, rng)?;
    Ok(ParamVector {
        omega: base.omega,
        eta2: if which.eta2 { eta2 } else { base.eta2 },
        sigma_r2: if which.sigma_r2 { sigma_r2 } else { base.sigma_r2 },
        sigma_b2: if which.sigma_b2 { sigma_b2 } else { base.sigma_b2 },
    })
}

/// Resets the selected components of `stats` to `prior`.
pub(crate) fn reset_selected<T: Scalar>(stats: &SuffStats<T>, prior: &SuffStats<T>, which: NoiseSelection) -> SuffStats<T> {
    let mut s = *stats;
    if which.eta2 {
        s.a = prior.a;
        s.b = prior.b;
    }
    if which.sigma_r2 {
        s.c = prior.c;
        s.d = prior.d;
    }
    if which.sigma_b2 {
        s.e = prior.e;
        s.f = prior.f;
    }
    s
}
