//! Coordinated-turn motion, range-bearing observations and the conjugate
//! sufficient-statistic updates for the three noise variances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_vec, Matrix};
use crate::particle::{ParamVector, StateVector, SuffStats};
use crate::scalar::{wrap_angle, Scalar};
use crate::stochastics::{sample_inverse_gamma, RngStream};

/// Fixed observer position in m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorPose<T> {
    pub sx: T,
    pub sy: T,
}

impl<T: Scalar> SensorPose<T> {
    pub fn new(sx: T, sy: T) -> Self {
        Self { sx, sy }
    }
}

/// Range (m) and bearing (rad, wrapped to `(-pi, pi]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation<T> {
    pub range: T,
    pub bearing: T,
}

impl<T: Scalar> Observation<T> {
    /// Builds an observation, wrapping the bearing.
    pub fn new(range: T, bearing: T) -> Self {
        Self { range, bearing: wrap_angle(bearing) }
    }
}

/// Discretization of the coordinated-turn model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtConfig<T> {
    /// Sampling period in s.
    pub dt: T,
    /// Below this |omega| (rad/s) the series form of the turn terms is used.
    pub omega_epsilon: T,
}

impl<T: Scalar> CtConfig<T> {
    pub fn new(dt: T) -> Result<Self> {
        let cfg = Self { dt, omega_epsilon: T::lit(1e-6) };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero() && self.omega_epsilon > T::zero()) {
            return Err(Error::InvalidConfig(format!(
                "dt and omega_epsilon must be positive: {:?}",
                (self.dt, self.omega_epsilon)
            )));
        }
        Ok(())
    }

    /// `diag(Gamma Gamma^T)` for the state ordering `(x, vx, y, vy)`.
    pub fn noise_gain_diag(&self) -> [T; 4] {
        let dt2 = self.dt * self.dt;
        let q = dt2 / T::lit(4.0);
        [q, dt2, q, dt2]
    }

    /// Process noise covariance `eta2 * Gamma Gamma^T`.
    pub fn process_covariance(&self, eta2: T) -> Matrix<T, 4, 4> {
        let half = self.dt / T::lit(2.0);
        let g = [[half, T::zero()], [self.dt, T::zero()], [T::zero(), half], [T::zero(), self.dt]];
        let mut q = [[T::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                q[i][j] = eta2 * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
        q
    }
}

impl Default for CtConfig<f64> {
    fn default() -> Self {
        Self { dt: 1.0, omega_epsilon: 1e-6 }
    }
}

/// Motion and sensor geometry shared by all filters for one scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingModel<T> {
    pub ct: CtConfig<T>,
    pub sensor: SensorPose<T>,
}

/// Transition and observation densities a particle filter needs.
pub trait StateSpaceModel<T: Scalar> {
    type Obs;

    /// `E[x_t | x_{t-1}, theta]`.
    fn predict_mean(&self, x: &StateVector<T>, p: &ParamVector<T>) -> StateVector<T>;

    fn sample_transition(&self, x: &StateVector<T>, p: &ParamVector<T>, rng: &mut RngStream) -> StateVector<T>;

    fn log_likelihood(&self, y: &Self::Obs, x: &StateVector<T>, p: &ParamVector<T>) -> Result<T>;
}

impl<T: Scalar> StateSpaceModel<T> for TrackingModel<T> {
    type Obs = Observation<T>;

    fn predict_mean(&self, x: &StateVector<T>, p: &ParamVector<T>) -> StateVector<T> {
        propagate_mean(x, p.omega, &self.ct)
    }

    fn sample_transition(&self, x: &StateVector<T>, p: &ParamVector<T>, rng: &mut RngStream) -> StateVector<T> {
        propagate(x, p, &self.ct, rng)
    }

    fn log_likelihood(&self, y: &Observation<T>, x: &StateVector<T>, p: &ParamVector<T>) -> Result<T> {
        log_likelihood(y, x, p, &self.sensor)
    }
}

/// Returns `(sin(w dt) / w, (1 - cos(w dt)) / w)`, switching to the
/// second-order series below the threshold.
fn turn_terms<T: Scalar>(omega: T, cfg: &CtConfig<T>) -> (T, T) {
    let dt = cfg.dt;
    if omega.abs() < cfg.omega_epsilon {
        let dt2 = dt * dt;
        let s = dt - omega * omega * dt2 * dt / T::lit(6.0);
        let c = omega * dt2 / T::lit(2.0) - omega * omega * omega * dt2 * dt2 / T::lit(24.0);
        (s, c)
    } else {
        let wt = omega * dt;
        (wt.sin() / omega, (T::one() - wt.cos()) / omega)
    }
}

/// Coordinated-turn transition matrix for the state `(x, vx, y, vy)`.
///
/// The velocity sub-vector is rotated counter-clockwise by `omega * dt`;
/// `omega = 0` yields the constant-velocity matrix.
pub fn ct_matrix<T: Scalar>(omega: T, cfg: &CtConfig<T>) -> Matrix<T, 4, 4> {
    let (s, c) = turn_terms(omega, cfg);
    let wt = omega * cfg.dt;
    let (sn, cs) = (wt.sin(), wt.cos());
    let (o, z) = (T::one(), T::zero());
    [[o, s, z, -c], [z, cs, z, -sn], [z, c, o, s], [z, sn, z, cs]]
}

/// Noiseless one-step prediction `F(omega) x`.
pub fn propagate_mean<T: Scalar>(x: &StateVector<T>, omega: T, cfg: &CtConfig<T>) -> StateVector<T> {
    StateVector::from_array(mat_vec(&ct_matrix(omega, cfg), &x.to_array()))
}

/// One transition draw `F(omega) x + Gamma nu` with `nu ~ N(0, eta2 I_2)`.
pub fn propagate<T: Scalar>(
    x: &StateVector<T>,
    p: &ParamVector<T>,
    cfg: &CtConfig<T>,
    rng: &mut RngStream,
) -> StateVector<T> {
    let mean = propagate_mean(x, p.omega, cfg);
    let sd = p.eta2.max(T::zero()).sqrt();
    let n1 = sd * T::std_normal(rng);
    let n2 = sd * T::std_normal(rng);
    let half = cfg.dt / T::lit(2.0);
    mean + StateVector::new(half * n1, cfg.dt * n1, half * n2, cfg.dt * n2)
}

/// Predicted range and four-quadrant bearing of `x` seen from `s`.
pub fn observe_mean<T: Scalar>(x: &StateVector<T>, s: &SensorPose<T>) -> Result<Observation<T>> {
    let dx = x.x - s.sx;
    let dy = x.y - s.sy;
    if dx == T::zero() && dy == T::zero() {
        return Err(Error::SingularGeometry);
    }
    Ok(Observation::new(dx.hypot(dy), dy.atan2(dx)))
}

/// `y - h(x)` with the bearing component wrapped to `(-pi, pi]`.
pub fn innovation<T: Scalar>(y: &Observation<T>, predicted: &Observation<T>) -> (T, T) {
    (y.range - predicted.range, wrap_angle(y.bearing - predicted.bearing))
}

/// Log density of `y` given the state, with independent Gaussian range and
/// bearing errors.
pub fn log_likelihood<T: Scalar>(
    y: &Observation<T>,
    x: &StateVector<T>,
    p: &ParamVector<T>,
    s: &SensorPose<T>,
) -> Result<T> {
    let predicted = observe_mean(x, s)?;
    let (er, eb) = innovation(y, &predicted);
    let two_pi = T::lit(2.0) * T::PI();
    let half = T::lit(0.5);
    Ok(-half * (two_pi * p.sigma_r2).ln()
        - half * (two_pi * p.sigma_b2).ln()
        - half * er * er / p.sigma_r2
        - half * eb * eb / p.sigma_b2)
}

/// Folds one state transition into the process-noise statistics:
/// `a += 4`, `b += r^T diag(Gamma Gamma^T)^-1 r` with `r = x_new - F x_prev`.
pub fn update_suffstats_system<T: Scalar>(
    st: &SuffStats<T>,
    x_prev: &StateVector<T>,
    x_new: &StateVector<T>,
    omega: T,
    cfg: &CtConfig<T>,
) -> SuffStats<T> {
    let r = (*x_new - propagate_mean(x_prev, omega, cfg)).to_array();
    let g = cfg.noise_gain_diag();
    let quad: T = (0..4).map(|i| r[i] * r[i] / g[i]).sum();
    SuffStats { a: st.a + T::lit(4.0), b: st.b + quad, ..*st }
}

/// Folds one observation into the range and bearing statistics.
pub fn update_suffstats_obs<T: Scalar>(
    st: &SuffStats<T>,
    x: &StateVector<T>,
    y: &Observation<T>,
    s: &SensorPose<T>,
) -> Result<SuffStats<T>> {
    let (er, eb) = innovation(y, &observe_mean(x, s)?);
    Ok(SuffStats {
        c: st.c + T::one(),
        d: st.d + er * er,
        e: st.e + T::one(),
        f: st.f + eb * eb,
        ..*st
    })
}

/// Draws `(eta2, sigma_r2, sigma_b2)` from their independent inverse-gamma
/// posteriors `IG(a/2, b/2)`, `IG(c/2, d/2)`, `IG(e/2, f/2)`.
pub fn sample_params_from_suffstats<T: Scalar>(st: &SuffStats<T>, rng: &mut RngStream) -> Result<(T, T, T)> {
    let half = T::lit(0.5);
    let eta2 = sample_inverse_gamma(st.a * half, st.b * half, rng)?;
    let sigma_r2 = sample_inverse_gamma(st.c * half, st.d * half, rng)?;
    let sigma_b2 = sample_inverse_gamma(st.e * half, st.f * half, rng)?;
    Ok((eta2, sigma_r2, sigma_b2))
}

/// Posterior means `(b / (a - 2), d / (c - 2), f / (e - 2))`; infinite
/// when the shape does not exceed one.
pub fn suffstats_posterior_means<T: Scalar>(st: &SuffStats<T>) -> (T, T, T) {
    let m = |shape: T, scale: T| {
        if shape > T::lit(2.0) {
            scale / (shape - T::lit(2.0))
        } else {
            T::infinity()
        }
    };
    (m(st.a, st.b), m(st.c, st.d), m(st.e, st.f))
}
