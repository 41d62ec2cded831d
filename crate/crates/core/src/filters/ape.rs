use crate::error::Result;
use crate::filters::liu_west::omega_kernel;
use crate::filters::{reset_selected, sample_selected, ApeConfig, FilterStepResult};
use crate::particle::{
    normalize_log_weights, weighted_param_mean, weighted_state_mean, ParamVector, Particle, ParticleCloud, StateVector,
};
use crate::scalar::Scalar;
use crate::stochastics::{resample_offset, sample_gaussian, sample_uniform, systematic_resample, RngStream};
use crate::tracking::{
    log_likelihood, propagate, propagate_mean, update_suffstats_obs, update_suffstats_system, Observation,
    TrackingModel,
};

/// One step of the adaptive parameter estimation filter.
///
/// Each particle is scored twice: once assuming no changepoint, with the
/// turn rate at its Liu–West kernel location and the learned variances
/// drawn from the particle's sufficient statistics, and once assuming a
/// changepoint, with a fresh turn rate from the uniform prior. `N`
/// ancestors are drawn from the `2N` union weighted by `1 - beta` and
/// `beta`. No-change survivors draw their turn rate from the kernel;
/// changepoint survivors keep the proposal (and reset the statistics of
/// any variance in `reset_on_change`). After propagation and the
/// auxiliary correction the cloud is resampled to equal weights and the
/// statistics absorb the new state and observation.
pub fn ape_step<T: Scalar>(
    cloud: &ParticleCloud<T>,
    y: &Observation<T>,
    cfg: &ApeConfig<T>,
    model: &TrackingModel<T>,
    rng: &mut RngStream,
) -> Result<FilterStepResult<T>> {
    cfg.validate()?;
    let n = cloud.len();
    let kernel = omega_kernel(cloud, cfg.h2)?;
    let (lo, hi) = cfg.omega_prior;
    let log_stay = (T::one() - cfg.beta).ln();
    let log_change = cfg.beta.ln();

    let mut stay_params = Vec::with_capacity(n);
    let mut change_params = Vec::with_capacity(n);
    let mut stay_lik = Vec::with_capacity(n);
    let mut change_lik = Vec::with_capacity(n);
    let mut union_log = vec![T::zero(); 2 * n];
    for (i, ((p, w), &m)) in cloud.iter().zip(&kernel.locations).enumerate() {
        let fixed = sample_selected(&p.params, &p.stats, cfg.learned, rng)?;
        let stay = ParamVector { omega: m, ..fixed };
        let l1 = log_likelihood(y, &propagate_mean(&p.state, m, &model.ct), &stay, &model.sensor)?;

        let mut change = ParamVector { omega: sample_uniform(lo, hi, rng)?, ..fixed };
        if cfg.reset_on_change.any() {
            let fresh = sample_selected(&change, &cfg.prior_stats, cfg.reset_on_change, rng)?;
            change = fresh;
        }
        let l2 = log_likelihood(y, &propagate_mean(&p.state, change.omega, &model.ct), &change, &model.sensor)?;

        union_log[i] = log_stay + w.ln() + l1;
        union_log[n + i] = log_change + w.ln() + l2;
        stay_params.push(stay);
        change_params.push(change);
        stay_lik.push(l1);
        change_lik.push(l2);
    }
    let union = normalize_log_weights(&union_log)?;
    let ancestors = systematic_resample(&union, n, resample_offset(rng))?;

    let mut moved: Vec<(Particle<T>, StateVector<T>)> = Vec::with_capacity(n);
    let mut logw = Vec::with_capacity(n);
    let mut changed = 0usize;
    for k in ancestors {
        let (parent_idx, params, stats, first_stage) = if k < n {
            let omega = sample_gaussian(kernel.locations[k], kernel.bandwidth, rng)?;
            let params = ParamVector { omega, ..stay_params[k] };
            (k, params, cloud.particles()[k].stats, stay_lik[k])
        } else {
            let j = k - n;
            changed += 1;
            let stats = reset_selected(&cloud.particles()[j].stats, &cfg.prior_stats, cfg.reset_on_change);
            (j, change_params[j], stats, change_lik[j])
        };
        let parent = &cloud.particles()[parent_idx];
        let state = propagate(&parent.state, &params, &model.ct, rng);
        logw.push(log_likelihood(y, &state, &params, &model.sensor)? - first_stage);
        moved.push((Particle { state, params, stats }, parent.state));
    }

    let final_w = normalize_log_weights(&logw)?;
    // Estimates come from the weighted cloud: resampling only adds noise.
    let weighted = ParticleCloud::new(moved.iter().map(|(p, _)| *p).collect(), final_w.clone())?;
    let picks = systematic_resample(&final_w, n, resample_offset(rng))?;
    let mut particles = Vec::with_capacity(n);
    for k in picks {
        let (p, prev) = &moved[k];
        let stats = update_suffstats_system(&p.stats, prev, &p.state, p.params.omega, &model.ct);
        let stats = update_suffstats_obs(&stats, &p.state, y, &model.sensor)?;
        particles.push(Particle { stats, ..*p });
    }
    let cloud = ParticleCloud::uniform(particles)?;
    let mass = T::from_count(changed) / T::from_count(n);
    Ok(FilterStepResult {
        state_estimate: weighted_state_mean(&weighted),
        param_estimate: weighted_param_mean(&weighted),
        cloud,
        changepoint_mass: Some(mass),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::test_support::*;
    use crate::filters::NoiseSelection;

    fn cfg(beta: f64) -> ApeConfig<f64> {
        ApeConfig::new(beta, 0.01, 500, (-0.349, 0.349), s0()).unwrap()
    }

    fn y0() -> Observation<f64> {
        observation_of(&StateVector::new(30_300.0, 300.0, 30_000.0, 0.0))
    }

    #[test]
    fn output_is_uniform_and_valid() {
        let c = cloud(500, 0.02, 10);
        let cfg = cfg(0.05).with_learned(NoiseSelection::ALL);
        let out = ape_step(&c, &y0(), &cfg, &model(), &mut RngStream::new(6, 6)).unwrap();
        assert!(out.cloud.weights().iter().all(|w| *w == 1.0 / 500.0));
        for p in out.cloud.particles() {
            p.stats.validate().unwrap();
            p.params.validate().unwrap();
            assert_eq!((p.stats.a, p.stats.c, p.stats.e), (13.0, 5.0, 5.0));
        }
        let mass = out.changepoint_mass.unwrap();
        assert!((0.0..=1.0).contains(&mass));
    }

    #[test]
    fn vanishing_beta_never_takes_changepoint_branch() {
        let c = cloud(1000, 0.02, 11);
        let mut rng = RngStream::new(7, 7);
        let mut cl = c;
        for _ in 0..5 {
            let out = ape_step(&cl, &y0(), &cfg(1e-12), &model(), &mut rng).unwrap();
            assert_eq!(out.changepoint_mass, Some(0.0));
            cl = out.cloud;
        }
    }

    #[test]
    fn beta_near_one_redraws_every_turn_rate() {
        let c = cloud(1000, 0.0, 12);
        let out = ape_step(&c, &y0(), &cfg(1.0 - 1e-12), &model(), &mut RngStream::new(8, 8)).unwrap();
        assert_eq!(out.changepoint_mass, Some(1.0));
        // Every survivor carries a turn rate from the uniform prior, not the
        // (all-zero) kernel locations.
        assert!(out.cloud.particles().iter().all(|p| p.params.omega != 0.0));
        assert!(out.cloud.particles().iter().all(|p| p.params.omega.abs() < 0.349));
    }

    #[test]
    fn changepoint_resets_selected_statistics() {
        let c = cloud(200, 0.0, 13);
        let parts: Vec<_> = c
            .particles()
            .iter()
            .map(|p| Particle { stats: crate::particle::SuffStats::new(101.0, 300.0, 40.0, 9e4, 40.0, 0.01), ..*p })
            .collect();
        let c = ParticleCloud::uniform(parts).unwrap();
        let cfg = cfg(1.0 - 1e-12)
            .with_learned(NoiseSelection::ETA2)
            .with_reset_on_change(NoiseSelection::ETA2);
        let out = ape_step(&c, &y0(), &cfg, &model(), &mut RngStream::new(9, 9)).unwrap();
        for p in out.cloud.particles() {
            // reset to s0 = (9, 15) then one update
            assert_eq!(p.stats.a, 13.0);
            assert_eq!((p.stats.c, p.stats.e), (41.0, 41.0));
        }
    }

    #[test]
    fn same_stream_same_result() {
        let c = cloud(300, 0.02, 14);
        let a = ape_step(&c, &y0(), &cfg(0.05), &model(), &mut RngStream::new(1, 1)).unwrap();
        let b = ape_step(&c, &y0(), &cfg(0.05), &model(), &mut RngStream::new(1, 1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_beta() {
        let c = cloud(10, 0.02, 15);
        let mut bad = cfg(0.05);
        bad.beta = 0.0;
        assert!(matches!(
            ape_step(&c, &y0(), &bad, &model(), &mut RngStream::new(1, 1)),
            Err(crate::error::Error::InvalidConfig(_))
        ));
    }
}
