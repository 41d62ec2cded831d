//! Ground-truth trajectories and observations for maneuvering-target
//! scenarios, plus their JSON file format.
//!
//! Turn rates follow a piecewise-constant schedule. A schedule entry
//! `(start, omega)` means `omega` drives the transition into step `start`
//! and every later step until the next entry.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{diag, Matrix};
use crate::particle::{ParamVector, StateVector, SuffStats};
use crate::scalar::Scalar;
use crate::stochastics::{sample_gaussian, RngStream};
use crate::tracking::{observe_mean, propagate, CtConfig, Observation, SensorPose, TrackingModel};

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig<T> {
    pub horizon: usize,
    /// Sampling period, s.
    pub dt: T,
    /// Target state before the first transition.
    pub initial_state: StateVector<T>,
    pub sensor: SensorPose<T>,
    /// `(start step, turn rate rad/s)`, first start at step 1.
    pub omega_schedule: Vec<(usize, T)>,
    pub eta2_true: T,
    pub sigma_r2_true: T,
    pub sigma_b2_true: T,
    /// Initial sufficient statistics for the noise variances.
    pub s0: SuffStats<T>,
    /// Covariance of the Gaussian prior on the initial state.
    pub init_state_prior_cov: Matrix<T, 4, 4>,
    /// Simulate the truth without process noise.
    pub noiseless_truth: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T> {
    pub initial_state: StateVector<T>,
    /// `states[t - 1]` is the state at step `t`.
    pub states: Vec<StateVector<T>>,
    pub observations: Vec<Observation<T>>,
    /// Turn rate that drove the transition into each step.
    pub omegas: Vec<T>,
    /// Steps at which the turn rate changes.
    pub changepoints: Vec<usize>,
}

impl<T: Scalar> GroundTruth<T> {
    /// True parameters of every step, for the known-parameter baseline.
    pub fn true_params(&self, cfg: &ScenarioConfig<T>) -> Vec<ParamVector<T>> {
        self.omegas
            .iter()
            .map(|&w| ParamVector::new(w, cfg.eta2_true, cfg.sigma_r2_true, cfg.sigma_b2_true))
            .collect()
    }
}

/// The maneuvering scenario: 400 steps of 1 s, ten turn-rate segments,
/// sensor at (55 km, 55 km).
pub fn reference_scenario<T: Scalar>() -> ScenarioConfig<T> {
    let starts = [1usize, 60, 120, 150, 214, 240, 272, 300, 338, 360];
    let rates_deg = [0.0, 3.0, 0.0, 5.6, 0.0, 8.6, 0.0, -7.25, 0.0, 7.25];
    let l = T::lit;
    ScenarioConfig {
        horizon: 400,
        dt: T::one(),
        initial_state: StateVector::new(l(30_000.0), l(300.0), l(30_000.0), T::zero()),
        sensor: SensorPose::new(l(55_000.0), l(55_000.0)),
        omega_schedule: starts.iter().zip(rates_deg).map(|(&s, d)| (s, l(d).to_radians())).collect(),
        eta2_true: l(2.0),
        sigma_r2_true: l(50.0 * 50.0),
        sigma_b2_true: l(1.0).to_radians().powi(2),
        s0: SuffStats::new(l(9.0), l(15.0), l(4.0), l(5000.0), l(4.0), l(0.0025)),
        init_state_prior_cov: diag([l(100.0 * 100.0), l(10.0 * 10.0), l(100.0 * 100.0), l(10.0 * 10.0)]),
        noiseless_truth: false,
    }
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.dt > T::zero()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        match self.omega_schedule.first() {
            Some((1, _)) => {}
            _ => return bad("turn-rate schedule must start at step 1".into()),
        }
        if self.omega_schedule.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("schedule start steps must be strictly increasing".into());
        }
        if self.omega_schedule.iter().any(|(_, w)| !w.is_finite()) {
            return bad("schedule turn rates must be finite".into());
        }
        let last = self.omega_schedule.last().map(|s| s.0).unwrap_or(1);
        if last > self.horizon {
            return bad(format!("schedule entry at step {last} beyond horizon {}", self.horizon));
        }
        for (name, v) in [("eta2_true", self.eta2_true), ("sigma_r2_true", self.sigma_r2_true), ("sigma_b2_true", self.sigma_b2_true)]
        {
            if !(v > T::zero()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.initial_state.is_finite() {
            return bad("initial state must be finite".into());
        }
        self.s0.validate().map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Turn rate in force at step `t` (1-based).
    pub fn omega_at(&self, t: usize) -> T {
        self.omega_schedule
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .map(|(_, w)| *w)
            .unwrap_or_else(T::zero)
    }

    pub fn changepoints(&self) -> Vec<usize> {
        self.omega_schedule.iter().skip(1).map(|(s, _)| *s).collect()
    }

    pub fn model(&self) -> TrackingModel<T> {
        TrackingModel { ct: CtConfig { dt: self.dt, omega_epsilon: T::lit(1e-6) }, sensor: self.sensor }
    }

    pub fn true_noise(&self) -> ParamVector<T> {
        ParamVector::new(T::zero(), self.eta2_true, self.sigma_r2_true, self.sigma_b2_true)
    }
}

/// Simulates the truth and its observations.
pub fn simulate<T: Scalar>(cfg: &ScenarioConfig<T>, rng: &mut RngStream) -> Result<GroundTruth<T>> {
    cfg.validate()?;
    let model = cfg.model();
    let eta2 = if cfg.noiseless_truth { T::zero() } else { cfg.eta2_true };
    let mut x = cfg.initial_state;
    let mut states = Vec::with_capacity(cfg.horizon);
    let mut observations = Vec::with_capacity(cfg.horizon);
    let mut omegas = Vec::with_capacity(cfg.horizon);
    for t in 1..=cfg.horizon {
        let omega = cfg.omega_at(t);
        x = propagate(&x, &ParamVector::new(omega, eta2, cfg.sigma_r2_true, cfg.sigma_b2_true), &model.ct, rng);
        let clean = observe_mean(&x, &model.sensor)?;
        let range = sample_gaussian(clean.range, cfg.sigma_r2_true, rng)?;
        let bearing = sample_gaussian(clean.bearing, cfg.sigma_b2_true, rng)?;
        states.push(x);
        observations.push(Observation::new(range, bearing));
        omegas.push(omega);
    }
    Ok(GroundTruth { initial_state: cfg.initial_state, states, observations, omegas, changepoints: cfg.changepoints() })
}

/// Rounds to 12 significant digits so unit conversions print cleanly.
fn tidy(v: f64) -> f64 {
    format!("{v:.11e}").parse().unwrap_or(v)
}

/// On-disk scenario. Angles and angular rates are stored in degrees under
/// `_deg` keys; `sigma_b2_true_deg` is a variance in deg².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub horizon: usize,
    pub dt: f64,
    pub initial_state: StateVector<f64>,
    pub sensor: SensorPose<f64>,
    pub omega_schedule_deg: Vec<ScheduleEntry>,
    pub eta2_true: f64,
    pub sigma_r2_true: f64,
    pub sigma_b2_true_deg: f64,
    pub s0: SuffStats<f64>,
    pub init_state_prior_cov: [[f64; 4]; 4],
    #[serde(default)]
    pub noiseless_truth: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub start: usize,
    pub omega_deg: f64,
}

fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().expect("scalar converts to f64")
}

impl<T: Scalar> From<&ScenarioConfig<T>> for ScenarioFile {
    fn from(c: &ScenarioConfig<T>) -> Self {
        let s = |v: StateVector<T>| StateVector::from_array(v.to_array().map(to_f64));
        Self {
            horizon: c.horizon,
            dt: to_f64(c.dt),
            initial_state: s(c.initial_state),
            sensor: SensorPose::new(to_f64(c.sensor.sx), to_f64(c.sensor.sy)),
            omega_schedule_deg: c
                .omega_schedule
                .iter()
                .map(|(start, w)| ScheduleEntry { start: *start, omega_deg: tidy(to_f64(*w).to_degrees()) })
                .collect(),
            eta2_true: to_f64(c.eta2_true),
            sigma_r2_true: to_f64(c.sigma_r2_true),
            sigma_b2_true_deg: tidy(to_f64(c.sigma_b2_true) * (180.0 / std::f64::consts::PI).powi(2)),
            s0: SuffStats::new(to_f64(c.s0.a), to_f64(c.s0.b), to_f64(c.s0.c), to_f64(c.s0.d), to_f64(c.s0.e), to_f64(c.s0.f)),
            init_state_prior_cov: c.init_state_prior_cov.map(|row| row.map(to_f64)),
            noiseless_truth: c.noiseless_truth,
        }
    }
}

impl ScenarioFile {
    pub fn to_config<T: Scalar>(&self) -> Result<ScenarioConfig<T>> {
        let l = T::lit;
        let cfg = ScenarioConfig {
            horizon: self.horizon,
            dt: l(self.dt),
            initial_state: StateVector::from_array(self.initial_state.to_array().map(l)),
            sensor: SensorPose::new(l(self.sensor.sx), l(self.sensor.sy)),
            omega_schedule: self.omega_schedule_deg.iter().map(|e| (e.start, l(e.omega_deg.to_radians()))).collect(),
            eta2_true: l(self.eta2_true),
            sigma_r2_true: l(self.sigma_r2_true),
            sigma_b2_true: l(self.sigma_b2_true_deg * (std::f64::consts::PI / 180.0).powi(2)),
            s0: SuffStats::new(l(self.s0.a), l(self.s0.b), l(self.s0.c), l(self.s0.d), l(self.s0.e), l(self.s0.f)),
            init_state_prior_cov: self.init_state_prior_cov.map(|row| row.map(l)),
            noiseless_truth: self.noiseless_truth,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl<T: Scalar> ScenarioConfig<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ScenarioFile =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(format!("scenario JSON: {e}")))?;
        file.to_config()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|e| Error::InvalidConfig(format!("writing {}: {e}", path.display())))
    }
}
