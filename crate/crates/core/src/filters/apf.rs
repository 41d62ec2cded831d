use crate::error::Result;
use crate::filters::FilterStepResult;
use crate::particle::{normalize_log_weights, ParamVector, Particle, ParticleCloud};
use crate::scalar::Scalar;
use crate::stochastics::{resample_offset, systematic_resample, RngStream};
use crate::tracking::StateSpaceModel;

/// Auxiliary particle filter step with known parameters.
///
/// Particles are resampled on `w * p(y | F x)`, propagated through the
/// transition density and reweighted by `p(y | x') / p(y | F x)`. The
/// output cloud keeps those correction weights.
pub fn apf_step<T: Scalar, M: StateSpaceModel<T>>(
    cloud: &ParticleCloud<T>,
    y: &M::Obs,
    params: &ParamVector<T>,
    model: &M,
    rng: &mut RngStream,
) -> Result<FilterStepResult<T>> {
    params.validate()?;
    let n = cloud.len();
    let mut pre_log = Vec::with_capacity(n);
    let mut first_stage = Vec::with_capacity(n);
    for (p, w) in cloud.iter() {
        let mu = model.predict_mean(&p.state, params);
        let l = model.log_likelihood(y, &mu, params)?;
        first_stage.push(l);
        pre_log.push(w.ln() + l);
    }
    let pre = normalize_log_weights(&pre_log)?;
    let ancestors = systematic_resample(&pre, n, resample_offset(rng))?;

    let mut particles = Vec::with_capacity(n);
    let mut logw = Vec::with_capacity(n);
    for k in ancestors {
        let parent = &cloud.particles()[k];
        let state = model.sample_transition(&parent.state, params, rng);
        logw.push(model.log_likelihood(y, &state, params)? - first_stage[k]);
        particles.push(Particle { state, params: *params, stats: parent.stats });
    }
    let cloud = ParticleCloud::from_log_weights(particles, &logw)?;
    Ok(FilterStepResult::from_cloud(cloud, None))
}
