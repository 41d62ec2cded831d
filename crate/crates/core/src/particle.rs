//! Particle and weight data model shared by every filter.
//!
//! Filters carry weights in log space internally and only leave it through
//! [`normalize_log_weights`], which subtracts the maximum before
//! exponentiating. Range-bearing likelihoods underflow in linear space long
//! before they lose information in log space.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Planar target state `(x, vx, y, vy)`: positions in m, velocities in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector<T> {
    pub x: T,
    pub vx: T,
    pub y: T,
    pub vy: T,
}

impl<T: Scalar> StateVector<T> {
    pub fn new(x: T, vx: T, y: T, vy: T) -> Self {
        Self { x, vx, y, vy }
    }

    pub fn zero() -> Self {
        Self::from_array([T::zero(); 4])
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self { x: a[0], vx: a[1], y: a[2], vy: a[3] }
    }

    pub fn to_array(self) -> [T; 4] {
        [self.x, self.vx, self.y, self.vy]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn speed(&self) -> T {
        self.vx.hypot(self.vy)
    }

    /// Euclidean distance between the position components.
    pub fn position_error(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl<T: Scalar> Add for StateVector<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.vx + o.vx, self.y + o.y, self.vy + o.vy)
    }
}

impl<T: Scalar> Sub for StateVector<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.vx - o.vx, self.y - o.y, self.vy - o.vy)
    }
}

impl<T: Scalar> Mul<T> for StateVector<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.vx * s, self.y * s, self.vy * s)
    }
}

/// Model parameters of one particle.
///
/// `omega` is the turn rate in rad/s and is tracked by the kernel
/// (Liu–West) update. The three variances are tracked through conjugate
/// sufficient statistics: `eta2` for the process noise, `sigma_r2` (m²)
/// and `sigma_b2` (rad²) for range and bearing measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector<T> {
    pub omega: T,
    pub eta2: T,
    pub sigma_r2: T,
    pub sigma_b2: T,
}

impl<T: Scalar> ParamVector<T> {
    pub fn new(omega: T, eta2: T, sigma_r2: T, sigma_b2: T) -> Self {
        Self { omega, eta2, sigma_r2, sigma_b2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.omega.is_finite() {
            return Err(Error::Contract(format!("turn rate not finite: {}", self.omega)));
        }
        for (name, v) in [("eta2", self.eta2), ("sigma_r2", self.sigma_r2), ("sigma_b2", self.sigma_b2)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::Contract(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// Inverse-gamma statistics `(a, b)` for `eta2`, `(c, d)` for `sigma_r2`
/// and `(e, f)` for `sigma_b2`. The posterior of each variance is
/// `IG(shape / 2, scale / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuffStats<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
    pub f: T,
}

impl<T: Scalar> SuffStats<T> {
    pub fn new(a: T, b: T, c: T, d: T, e: T, f: T) -> Self {
        Self { a, b, c, d, e, f }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.d, self.e, self.f];
        if all.iter().all(|v| *v > T::zero() && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Contract(format!("sufficient statistics must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle<T> {
    pub state: StateVector<T>,
    pub params: ParamVector<T>,
    pub stats: SuffStats<T>,
}

/// Weighted particle approximation. Weights are normalized and aligned
/// with `particles`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud<T> {
    particles: Vec<Particle<T>>,
    weights: Vec<T>,
}

/// Tolerance used when checking that a weight vector is normalized.
pub(crate) fn sum_tolerance<T: Scalar>(n: usize) -> T {
    T::epsilon() * T::from_count(n.max(1) * 4)
}

fn check_normalized<T: Scalar>(w: &[T]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Contract("empty weight vector".into()));
    }
    if w.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
        return Err(Error::Contract("weights must be finite and nonnegative".into()));
    }
    let s: T = w.iter().copied().sum();
    if (s - T::one()).abs() > sum_tolerance(w.len()) {
        return Err(Error::Contract(format!("weights sum to {s}, expected 1")));
    }
    Ok(())
}

impl<T: Scalar> ParticleCloud<T> {
    pub fn new(particles: Vec<Particle<T>>, weights: Vec<T>) -> Result<Self> {
        if particles.len() != weights.len() {
            return Err(Error::Contract(format!(
                "{} particles but {} weights",
                particles.len(),
                weights.len()
            )));
        }
        check_normalized(&weights)?;
        Ok(Self { particles, weights })
    }

    /// Equally weighted cloud.
    pub fn uniform(particles: Vec<Particle<T>>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::Contract("cloud needs at least one particle".into()));
        }
        let w = T::one() / T::from_count(particles.len());
        let weights = vec![w; particles.len()];
        Ok(Self { particles, weights })
    }

    /// Builds a cloud from unnormalized log weights.
    pub fn from_log_weights(particles: Vec<Particle<T>>, logw: &[T]) -> Result<Self> {
        let weights = normalize_log_weights(logw)?;
        Self::new(particles, weights)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle<T>] {
        &self.particles
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Particle<T>, T)> {
        self.particles.iter().zip(self.weights.iter().copied())
    }

    pub fn into_parts(self) -> (Vec<Particle<T>>, Vec<T>) {
        (self.particles, self.weights)
    }

    pub fn ess(&self) -> T {
        ess_unchecked(&self.weights)
    }
}

/// Maps unnormalized log weights to probabilities by max-subtraction.
///
/// Fails with [`Error::DegenerateWeights`] when every entry is `-inf` (or
/// NaN), which is how filter collapse surfaces.
pub fn normalize_log_weights<T: Scalar>(logw: &[T]) -> Result<Vec<T>> {
    if logw.is_empty() {
        return Err(Error::Contract("empty log-weight vector".into()));
    }
    if logw.iter().any(|v| *v == T::infinity()) {
        return Err(Error::Contract("log weight of +inf".into()));
    }
    let max = logw
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return Err(Error::DegenerateWeights);
    }
    let mut w: Vec<T> = logw
        .iter()
        .map(|&l| if l.is_nan() { T::zero() } else { (l - max).exp() })
        .collect();
    let total: T = w.iter().copied().sum();
    for v in &mut w {
        *v = *v / total;
    }
    Ok(w)
}

fn ess_unchecked<T: Scalar>(w: &[T]) -> T {
    let s: T = w.iter().map(|v| *v * *v).sum();
    T::one() / s
}

/// Effective sample size `1 / sum(w^2)` of a normalized weight vector.
pub fn effective_sample_size<T: Scalar>(w: &[T]) -> Result<T> {
    check_normalized(w)?;
    Ok(ess_unchecked(w))
}

/// Posterior mean of the state under the weighted empirical measure.
pub fn weighted_state_mean<T: Scalar>(cloud: &ParticleCloud<T>) -> StateVector<T> {
    cloud
        .iter()
        .fold(StateVector::zero(), |acc, (p, w)| acc + p.state * w)
}

/// Posterior mean of the parameters under the weighted empirical measure.
pub fn weighted_param_mean<T: Scalar>(cloud: &ParticleCloud<T>) -> ParamVector<T> {
    let z = T::zero();
    cloud.iter().fold(ParamVector::new(z, z, z, z), |acc, (p, w)| {
        ParamVector::new(
            acc.omega + p.params.omega * w,
            acc.eta2 + p.params.eta2 * w,
            acc.sigma_r2 + p.params.sigma_r2 * w,
            acc.sigma_b2 + p.params.sigma_b2 * w,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn particle(s: [f64; 4]) -> Particle<f64> {
        Particle {
            state: StateVector::from_array(s),
            params: ParamVector::new(0.0, 1.0, 1.0, 1.0),
            stats: SuffStats::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_log_weights(&[0.0; 4]).unwrap(), vec![0.25; 4]);
        assert_eq!(
            normalize_log_weights(&[0.0, f64::NEG_INFINITY]).unwrap(),
            vec![1.0, 0.0]
        );
        for c in [-800.0, -3.0, 0.0, 12.5, 900.0] {
            let w = normalize_log_weights(&[c, c + 3f64.ln()]).unwrap();
            assert!((w[0] - 0.25).abs() < 1e-12 && (w[1] - 0.75).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_collapse() {
        let ninf = f64::NEG_INFINITY;
        assert_eq!(normalize_log_weights(&[ninf, ninf]), Err(Error::DegenerateWeights));
        assert!(matches!(normalize_log_weights::<f64>(&[]), Err(Error::Contract(_))));
    }

    #[test]
    fn normalize_survives_underflow() {
        let w = normalize_log_weights(&[-1e5_f64, -1e5 - 1.0]).unwrap();
        assert!((w[0] - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn ess_examples() {
        assert!((effective_sample_size(&[0.01f64; 100]).unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(effective_sample_size(&[0.0, 1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(effective_sample_size(&[0.5, 0.5, 0.0, 0.0]).unwrap(), 2.0);
        assert!(effective_sample_size(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn state_mean_examples() {
        let parts = vec![particle([0.0; 4]), particle([2.0; 4]), particle([7.0; 4])];
        let one_hot = ParticleCloud::new(parts.clone(), vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(weighted_state_mean(&one_hot), StateVector::from_array([7.0; 4]));

        let pair = ParticleCloud::uniform(parts[..2].to_vec()).unwrap();
        assert_eq!(weighted_state_mean(&pair), StateVector::from_array([1.0; 4]));

        let skew = ParticleCloud::new(
            vec![particle([0.0; 4]), particle([4.0, 0.0, 0.0, 0.0])],
            vec![0.25, 0.75],
        )
        .unwrap();
        assert_eq!(weighted_state_mean(&skew).x, 3.0);
    }

    #[test]
    fn cloud_rejects_mismatch() {
        assert!(ParticleCloud::new(vec![particle([0.0; 4])], vec![0.5, 0.5]).is_err());
        assert!(ParticleCloud::<f64>::uniform(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn normalization_is_shift_invariant(
            logw in prop::collection::vec(-50.0f64..50.0, 1..64),
            c in -1e3f64..1e3,
        ) {
            let a = normalize_log_weights(&logw).unwrap();
            let shifted: Vec<f64> = logw.iter().map(|l| l + c).collect();
            let b = normalize_log_weights(&shifted).unwrap();
            let s: f64 = a.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn ess_bounded_by_count(logw in prop::collection::vec(-20.0f64..20.0, 1..64)) {
            let w = normalize_log_weights(&logw).unwrap();
            let ess = effective_sample_size(&w).unwrap();
            let n = w.len() as f64;
            prop_assert!(ess >= 1.0 - 1e-9 && ess <= n + 1e-9);
        }
    }
}
