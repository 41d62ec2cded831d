use crate::error::Result;
use crate::filters::{sample_selected, FilterStepResult, NoiseSelection};
use crate::particle::{normalize_log_weights, Particle, ParticleCloud};
use crate::scalar::Scalar;
use crate::stochastics::{resample_offset, systematic_resample, RngStream};
use crate::tracking::{
    log_likelihood, propagate, propagate_mean, update_suffstats_obs, update_suffstats_system, Observation,
    TrackingModel,
};

/// Particle learning step.
///
/// Resample on the predictive pre-weights, propagate, fold the new state
/// and observation into each particle's sufficient statistics, then draw
/// the `learned` variances from `p(theta | s_t)`. The turn rate is left
/// untouched. Output weights carry the auxiliary correction
/// `p(y | x') / p(y | F x)`, so with nothing learned this is exactly
/// [`apf_step`](crate::filters::apf_step).
pub fn pl_step<T: Scalar>(
    cloud: &ParticleCloud<T>,
    y: &Observation<T>,
    learned: NoiseSelection,
    model: &TrackingModel<T>,
    rng: &mut RngStream,
) -> Result<FilterStepResult<T>> {
    let n = cloud.len();
    let mut first_stage = Vec::with_capacity(n);
    let mut pre_log = Vec::with_capacity(n);
    for (p, w) in cloud.iter() {
        p.params.validate()?;
        let mu = propagate_mean(&p.state, p.params.omega, &model.ct);
        let l = log_likelihood(y, &mu, &p.params, &model.sensor)?;
        first_stage.push(l);
        pre_log.push(w.ln() + l);
    }
    let pre = normalize_log_weights(&pre_log)?;
    let ancestors = systematic_resample(&pre, n, resample_offset(rng))?;

    let mut particles = Vec::with_capacity(n);
    let mut logw = Vec::with_capacity(n);
    for k in ancestors {
        let parent = &cloud.particles()[k];
        let state = propagate(&parent.state, &parent.params, &model.ct, rng);
        logw.push(log_likelihood(y, &state, &parent.params, &model.sensor)? - first_stage[k]);
        let stats = update_suffstats_system(&parent.stats, &parent.state, &state, parent.params.omega, &model.ct);
        let stats = update_suffstats_obs(&stats, &state, y, &model.sensor)?;
        let params = sample_selected(&parent.params, &stats, learned, rng)?;
        particles.push(Particle { state, params, stats });
    }
    let cloud = ParticleCloud::from_log_weights(particles, &logw)?;
    Ok(FilterStepResult::from_cloud(cloud, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::apf_step;
    use crate::filters::test_support::*;
    use crate::particle::StateVector;

    #[test]
    fn statistics_advance_additively() {
        let c = cloud(200, 0.0, 5);
        let y = observation_of(&StateVector::new(30_300.0, 300.0, 30_000.0, 0.0));
        let out = pl_step(&c, &y, NoiseSelection::ALL, &model(), &mut RngStream::new(3, 3)).unwrap();
        for p in out.cloud.particles() {
            assert_eq!((p.stats.a, p.stats.c, p.stats.e), (13.0, 5.0, 5.0));
            assert!(p.stats.b > 15.0 && p.stats.d > 5000.0 && p.stats.f > 0.0025);
            p.stats.validate().unwrap();
            p.params.validate().unwrap();
        }
    }

    #[test]
    fn nothing_learned_equals_apf() {
        let c = cloud(300, 0.0, 6);
        let y = observation_of(&StateVector::new(30_310.0, 300.0, 29_990.0, 0.0));
        let pl = pl_step(&c, &y, NoiseSelection::NONE, &model(), &mut RngStream::new(4, 4)).unwrap();
        let apf = apf_step(&c, &y, &truth_params(), &model(), &mut RngStream::new(4, 4)).unwrap();
        assert_eq!(pl.cloud.weights(), apf.cloud.weights());
        for (a, b) in pl.cloud.particles().iter().zip(apf.cloud.particles()) {
            assert_eq!(a.state, b.state);
            assert_eq!(a.params, b.params);
        }
    }

    #[test]
    fn unlearned_variances_are_kept() {
        let c = cloud(100, 0.0, 7);
        let y = observation_of(&StateVector::new(30_300.0, 300.0, 30_000.0, 0.0));
        let out = pl_step(&c, &y, NoiseSelection::ETA2, &model(), &mut RngStream::new(5, 5)).unwrap();
        let truth = truth_params();
        for p in out.cloud.particles() {
            assert_eq!((p.params.sigma_r2, p.params.sigma_b2), (truth.sigma_r2, truth.sigma_b2));
        }
    }
}
