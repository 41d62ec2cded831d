use crate::error::{Error, Result};
use crate::filters::{ApeConfig, FilterStepResult};
use crate::particle::{normalize_log_weights, ParamVector, Particle, ParticleCloud};
use crate::scalar::Scalar;
use crate::stochastics::{resample_offset, sample_gaussian, systematic_resample, RngStream};
use crate::tracking::{log_likelihood, propagate, propagate_mean, Observation, TrackingModel};

/// Below this kernel variance the bandwidth is floored.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Shrunken Gaussian kernel mixture `sum_i w_i N(m_i, h^2 V)` over a
/// scalar parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LiuWestKernel<T> {
    /// Kernel locations `m_i = a theta_i + (1 - a) mean`.
    pub locations: Vec<T>,
    /// Weighted mean of the parameter values.
    pub mean: T,
    /// Weighted variance `V` of the parameter values.
    pub variance: T,
    /// Variance of each kernel component: `h^2 V`, zero when all values
    /// are identical and at least `h^2 * 1e-12` otherwise.
    pub bandwidth: T,
}

/// Builds the kernel mixture for `values` under normalized `weights`.
///
/// The mixture keeps the mean of the weighted sample and, because
/// `a^2 + h^2 = 1`, its variance too.
pub fn liu_west_kernel<T: Scalar>(weights: &[T], values: &[T], h2: T) -> Result<LiuWestKernel<T>> {
    if weights.len() != values.len() || weights.is_empty() {
        return Err(Error::Contract("weights and values must be nonempty and aligned".into()));
    }
    if !(h2 > T::zero() && h2 < T::one()) {
        return Err(Error::InvalidConfig(format!("h2 must lie in (0, 1), got {h2}")));
    }
    let a = (T::one() - h2).sqrt();
    let mean: T = weights.iter().zip(values).map(|(w, v)| *w * *v).sum();
    let variance: T = weights
        .iter()
        .zip(values)
        .map(|(w, v)| *w * (*v - mean) * (*v - mean))
        .sum();
    // Identical values are frozen exactly, whatever rounding does to V.
    if values.iter().all(|v| *v == values[0]) {
        return Ok(LiuWestKernel { locations: values.to_vec(), mean: values[0], variance: T::zero(), bandwidth: T::zero() });
    }
    let locations = values.iter().map(|v| a * *v + (T::one() - a) * mean).collect();
    let bandwidth = if variance > T::zero() {
        h2 * variance.max(T::lit(VARIANCE_FLOOR))
    } else {
        T::zero()
    };
    Ok(LiuWestKernel { locations, mean, variance, bandwidth })
}

/// Turn-rate kernel for a cloud.
pub(crate) fn omega_kernel<T: Scalar>(cloud: &ParticleCloud<T>, h2: T) -> Result<LiuWestKernel<T>> {
    let omegas: Vec<T> = cloud.particles().iter().map(|p| p.params.omega).collect();
    liu_west_kernel(cloud.weights(), &omegas, h2)
}

/// Liu–West step for a static turn rate.
///
/// Particles are resampled on `w * p(y | F(m) x, m)` at the kernel
/// locations `m`, receive a fresh turn rate from `N(m, h^2 V)`, are
/// propagated, and are weighted by the ratio of the new likelihood to the
/// first-stage one. Noise variances stay as carried by each particle.
pub fn lw_step<T: Scalar>(
    cloud: &ParticleCloud<T>,
    y: &Observation<T>,
    cfg: &ApeConfig<T>,
    model: &TrackingModel<T>,
    rng: &mut RngStream,
) -> Result<FilterStepResult<T>> {
    cfg.validate()?;
    let n = cloud.len();
    let kernel = omega_kernel(cloud, cfg.h2)?;

    let mut first_stage = Vec::with_capacity(n);
    let mut pre_log = Vec::with_capacity(n);
    for ((p, w), &m) in cloud.iter().zip(&kernel.locations) {
        let theta = ParamVector { omega: m, ..p.params };
        let mu = propagate_mean(&p.state, m, &model.ct);
        let l = log_likelihood(y, &mu, &theta, &model.sensor)?;
        first_stage.push(l);
        pre_log.push(w.ln() + l);
    }
    let pre = normalize_log_weights(&pre_log)?;
    let ancestors = systematic_resample(&pre, n, resample_offset(rng))?;

    let mut particles = Vec::with_capacity(n);
    let mut logw = Vec::with_capacity(n);
    for k in ancestors {
        let parent = &cloud.particles()[k];
        let omega = sample_gaussian(kernel.locations[k], kernel.bandwidth, rng)?;
        let params = ParamVector { omega, ..parent.params };
        let state = propagate(&parent.state, &params, &model.ct, rng);
        logw.push(log_likelihood(y, &state, &params, &model.sensor)? - first_stage[k]);
        particles.push(Particle { state, params, stats: parent.stats });
    }
    let cloud = ParticleCloud::from_log_weights(particles, &logw)?;
    Ok(FilterStepResult::from_cloud(cloud, None))
}
